//! Memory fragments, theme clusters and the fragment weight.
//!
//! A fragment's weight combines three signals over its theme cluster:
//!
//! ```text
//! W = alpha * ln(f + 1) + beta * softmax_cluster(e) + gamma * resonance
//! ```
//!
//! `softmax_cluster` runs over the emotion values of the live fragments in
//! the same cluster (temperature 1), and `resonance` is the mean Jaccard
//! overlap between this fragment's mention tokens and every other live
//! member's. The stored weight is that salience scaled by the fragment's
//! `retention`, which only the lifecycle lowers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::lifecycle::SelfSummary;
use crate::tension::{Claim, ConflictPair};
use crate::text::mention_tokens;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(FragmentId);
string_id!(ContributionId);
string_id!(ThemeKey);

impl FragmentId {
    pub fn from_seq(seq: u64) -> Self {
        Self(format!("f-{seq:06}"))
    }
}

impl ThemeKey {
    pub fn from_seq(seq: u64) -> Self {
        Self(format!("t-{seq:04}"))
    }
}

/// Simulated day counter; one tick is one day.
pub type Day = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Decaying,
    Archived,
}

impl Status {
    pub fn is_live(self) -> bool {
        self != Status::Archived
    }
}

impl std::str::FromStr for Status {
    type Err = DcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Status::Active),
            "decaying" => Ok(Status::Decaying),
            "archived" => Ok(Status::Archived),
            other => Err(DcmError::InvalidArgument(format!("unknown status {other:?}"))),
        }
    }
}

/// One participant utterance merged into a fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub id: ContributionId,
    pub session: String,
    pub day: Day,
    pub text: String,
    pub emotion: f64,
    pub place_tags: BTreeSet<String>,
    pub claims: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryFragment {
    pub id: FragmentId,
    pub theme: ThemeKey,
    /// Text of the earliest surviving contribution.
    pub text: String,
    pub contributions: BTreeMap<ContributionId, Contribution>,
    pub frequency: u32,
    pub emotion: f64,
    pub mention_tokens: BTreeSet<String>,
    pub place_tags: BTreeSet<String>,
    pub claims: Vec<Claim>,
    pub weight: f64,
    pub retention: f64,
    pub status: Status,
    pub low_weight_days: u32,
    pub created_at: Day,
    pub last_touched: Day,
}

impl MemoryFragment {
    pub fn new(id: FragmentId, theme: ThemeKey, contribution: Contribution) -> Self {
        let mut fragment = Self {
            id,
            theme,
            text: String::new(),
            contributions: BTreeMap::new(),
            frequency: 0,
            emotion: 0.0,
            mention_tokens: BTreeSet::new(),
            place_tags: BTreeSet::new(),
            claims: Vec::new(),
            weight: 0.0,
            retention: 1.0,
            status: Status::Active,
            low_weight_days: 0,
            created_at: contribution.day,
            last_touched: contribution.day,
        };
        fragment.contributions.insert(contribution.id.clone(), contribution);
        fragment.refresh_aggregates();
        fragment
    }

    pub fn contribution_ids(&self) -> impl Iterator<Item = &ContributionId> {
        self.contributions.keys()
    }

    pub fn is_live(&self) -> bool {
        self.status.is_live()
    }

    /// Recomputes every field derived from the contribution set. Emotion
    /// aggregates by max; tags, tokens and claims by union.
    pub fn refresh_aggregates(&mut self) {
        self.frequency = self.contributions.len() as u32;
        let earliest = self
            .contributions
            .values()
            .min_by(|a, b| a.day.cmp(&b.day).then_with(|| a.id.cmp(&b.id)));
        if let Some(c) = earliest {
            self.text = c.text.clone();
            self.created_at = c.day;
        }
        self.last_touched = self.contributions.values().map(|c| c.day).max().unwrap_or(0);
        self.emotion = self
            .contributions
            .values()
            .map(|c| c.emotion)
            .fold(0.0, f64::max);
        self.mention_tokens = self
            .contributions
            .values()
            .flat_map(|c| mention_tokens(&c.text))
            .collect();
        self.place_tags = self
            .contributions
            .values()
            .flat_map(|c| c.place_tags.iter().cloned())
            .collect();
        let claims: BTreeSet<Claim> = self
            .contributions
            .values()
            .flat_map(|c| c.claims.iter().cloned())
            .collect();
        self.claims = claims.into_iter().collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub w_forget: f64,
    pub w_synth: f64,
    pub merge_threshold: f64,
    pub theme_threshold: f64,
    pub decay_half_life_cycles: f64,
    pub archive_after_days: u32,
    /// Half-life, in days, of the retention of memories nobody mentions.
    /// `None` disables idle fading; memories then only decay once their
    /// salience itself is under `w_forget`.
    pub idle_half_life_days: Option<f64>,
    pub synth_max_sources: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.5,
            gamma: 0.2,
            w_forget: 0.1,
            w_synth: 0.5,
            merge_threshold: 0.9,
            theme_threshold: 0.6,
            decay_half_life_cycles: 1.0,
            archive_after_days: 7,
            idle_half_life_days: Some(3.0),
            synth_max_sources: 16,
        }
    }
}

impl WeightParams {
    /// Parameters with forgetting switched off: nothing decays or archives.
    pub fn without_forgetting(mut self) -> Self {
        self.w_forget = 0.0;
        self.idle_half_life_days = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DcmError::Config(msg.to_string()));
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(DcmError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.w_forget >= 0.0 && self.w_forget < self.w_synth) {
            return bad("w_forget must be >= 0 and below w_synth");
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold <= 1.0) {
            return bad("merge_threshold must lie in (0, 1]");
        }
        if !(self.theme_threshold > 0.0 && self.theme_threshold <= 1.0) {
            return bad("theme_threshold must lie in (0, 1]");
        }
        if !(self.decay_half_life_cycles > 0.0 && self.decay_half_life_cycles.is_finite()) {
            return bad("decay_half_life_cycles must be positive");
        }
        if let Some(h) = self.idle_half_life_days {
            if !(h > 0.0 && h.is_finite()) {
                return bad("idle_half_life_days must be positive");
            }
        }
        if self.archive_after_days == 0 {
            return bad("archive_after_days must be >= 1");
        }
        Ok(())
    }

    /// Per-cycle multiplier for decaying memories.
    pub fn decay_factor(&self) -> f64 {
        (-1.0 / self.decay_half_life_cycles).exp2()
    }

    pub fn idle_factor(&self) -> Option<f64> {
        self.idle_half_life_days.map(|h| (-1.0 / h).exp2())
    }
}

/// `|a ∩ b| / |a ∪ b|`, zero when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Ranking used for retrieval: weight descending, then older first, then id.
pub fn rank_order(a: &MemoryFragment, b: &MemoryFragment) -> std::cmp::Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(a.created_at.cmp(&b.created_at))
        .then_with(|| a.id.cmp(&b.id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryGraph {
    pub fragments: BTreeMap<FragmentId, MemoryFragment>,
    /// Theme clusters over live fragments; archived ones keep their theme
    /// key but leave the cluster.
    pub clusters: BTreeMap<ThemeKey, BTreeSet<FragmentId>>,
    pub conflicts: Vec<ConflictPair>,
    pub summaries: Vec<SelfSummary>,
    pub params: WeightParams,
    pub clock: Day,
    pub next_fragment: u64,
    pub next_theme: u64,
    /// Contributions issued per session; feeds contribution ids.
    pub session_counters: BTreeMap<String, u64>,
}

impl Default for MemoryGraph {
    fn default() -> Self {
        Self::new(WeightParams::default())
    }
}

impl MemoryGraph {
    pub fn new(params: WeightParams) -> Self {
        Self {
            fragments: BTreeMap::new(),
            clusters: BTreeMap::new(),
            conflicts: Vec::new(),
            summaries: Vec::new(),
            params,
            clock: 0,
            next_fragment: 1,
            next_theme: 1,
            session_counters: BTreeMap::new(),
        }
    }

    pub fn fragment(&self, id: &FragmentId) -> Option<&MemoryFragment> {
        self.fragments.get(id)
    }

    pub fn live(&self) -> impl Iterator<Item = &MemoryFragment> {
        self.fragments.values().filter(|f| f.is_live())
    }

    pub fn count_by_status(&self, status: Status) -> usize {
        self.fragments.values().filter(|f| f.status == status).count()
    }

    pub fn is_conflicted(&self, id: &FragmentId) -> bool {
        self.conflicts
            .iter()
            .any(|c| &c.fragment_a == id || &c.fragment_b == id)
    }

    pub fn find_contribution(&self, id: &ContributionId) -> Option<&MemoryFragment> {
        self.fragments
            .values()
            .find(|f| f.contributions.contains_key(id))
    }

    /// Inserts a prebuilt fragment, registering it in its theme cluster when
    /// live. Replaces any fragment with the same id.
    pub fn insert_fragment(&mut self, fragment: MemoryFragment) {
        if let Some(old) = self.fragments.get(&fragment.id) {
            let (theme, id) = (old.theme.clone(), old.id.clone());
            self.leave_cluster(&theme, &id);
        }
        if fragment.is_live() {
            self.clusters
                .entry(fragment.theme.clone())
                .or_default()
                .insert(fragment.id.clone());
        }
        self.fragments.insert(fragment.id.clone(), fragment);
    }

    pub(crate) fn leave_cluster(&mut self, theme: &ThemeKey, id: &FragmentId) {
        if let Some(set) = self.clusters.get_mut(theme) {
            set.remove(id);
            if set.is_empty() {
                self.clusters.remove(theme);
            }
        }
    }

    /// Live members of a cluster, ordered by id.
    pub fn cluster_members(&self, theme: &ThemeKey) -> Vec<&MemoryFragment> {
        self.clusters
            .get(theme)
            .into_iter()
            .flatten()
            .filter_map(|id| self.fragments.get(id))
            .filter(|f| f.is_live())
            .collect()
    }

    /// Salience (unscaled weight) of every live fragment in a cluster.
    pub fn cluster_salience(&self, theme: &ThemeKey) -> Vec<(FragmentId, f64)> {
        let members = self.cluster_members(theme);
        let p = &self.params;
        let emotions: Vec<f64> = members.iter().map(|m| m.emotion).collect();
        let shares = softmax(&emotions);
        let peers = members.len().saturating_sub(1).max(1) as f64;
        members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let overlap: f64 = members
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, other)| jaccard(&m.mention_tokens, &other.mention_tokens))
                    .sum();
                let frequency = p.alpha * (f64::from(m.frequency) + 1.0).ln();
                let w = frequency + p.beta * shares[i] + p.gamma * (overlap / peers);
                (m.id.clone(), w)
            })
            .collect()
    }

    /// Stored-weight candidates (salience times retention) for a cluster.
    pub fn cluster_weights(&self, theme: &ThemeKey) -> Vec<(FragmentId, f64)> {
        self.cluster_salience(theme)
            .into_iter()
            .map(|(id, s)| {
                let retention = self.fragments[&id].retention;
                (id, s * retention)
            })
            .collect()
    }

    pub fn all_weights(&self) -> Vec<(FragmentId, f64)> {
        self.clusters
            .keys()
            .flat_map(|t| self.cluster_weights(t))
            .collect()
    }

    pub fn salience(&self, id: &FragmentId) -> Result<f64> {
        let fragment = self.live_fragment(id)?;
        self.cluster_salience(&fragment.theme)
            .into_iter()
            .find(|(fid, _)| fid == id)
            .map(|(_, w)| w)
            .ok_or_else(|| DcmError::NotFound(format!("{id} missing from its cluster")))
    }

    /// Weight of a live fragment under the current cluster state.
    pub fn compute_weight(&self, id: &FragmentId) -> Result<f64> {
        let retention = self.live_fragment(id)?.retention;
        Ok(self.salience(id)? * retention)
    }

    fn live_fragment(&self, id: &FragmentId) -> Result<&MemoryFragment> {
        let fragment = self
            .fragments
            .get(id)
            .ok_or_else(|| DcmError::NotFound(id.to_string()))?;
        if !fragment.is_live() {
            return Err(DcmError::StaleFragment(id.to_string()));
        }
        Ok(fragment)
    }

    /// Live fragments by weight, see [`rank_order`].
    pub fn top_weighted(&self, k: usize) -> Vec<&MemoryFragment> {
        let mut all: Vec<&MemoryFragment> = self.live().collect();
        all.sort_by(|a, b| rank_order(a, b));
        all.truncate(k);
        all
    }
}
