//! Context bundles: which memories, conflicts and directives reach the
//! generation prompt, and the exact prompt text.
//!
//! Rendered prompt (three lines, no trailing newline):
//!
//! ```text
//! Context: [High-weight memories: M1(W=0.8), M2(W=0.7), M3(W=0.7), M4(W=0.6)]
//! Conflicts: [Contradictory pairs: (M3<->M4)]
//! Task: Generate response acknowledging tensions if present.
//! ```
//!
//! Labels are positional within the bundle: selected memories take `M1..Mk`
//! in weight order, then conflict members that were not selected take the
//! following labels. Every label is listed on the first line. With no
//! conflicts the second line is `Conflicts: []`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueClient, DialogueRequest};
use crate::embed::Embedder;
use crate::error::{DcmError, Result};
use crate::memory::{rank_order, FragmentId, MemoryFragment, MemoryGraph};
use crate::store::{sha256_hex, VectorIndex};
use crate::tension::{tension_directive, ConflictPair, Lexicon};
use crate::text::{contains_sequence, tokenize};

pub const TASK_LINE: &str = "Task: Generate response acknowledging tensions if present.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Gazetteer {
    pub places: Vec<Place>,
}

const SAMPLE_GAZETTEER: &str = include_str!("../config/gazetteer_jinan.toml");

impl Gazetteer {
    /// The bundled illustrative Jinan gazetteer.
    pub fn sample() -> Self {
        Self::from_toml(SAMPLE_GAZETTEER).expect("sample gazetteer parses")
    }

    pub fn from_toml(source: &str) -> Result<Self> {
        let g: Gazetteer =
            toml::from_str(source).map_err(|e| DcmError::Config(format!("gazetteer: {e}")))?;
        let mut seen = BTreeSet::new();
        for p in &g.places {
            let key = tokenize(&p.name);
            if key.is_empty() {
                return Err(DcmError::Config("gazetteer place with empty name".into()));
            }
            if !seen.insert(key) {
                return Err(DcmError::Config(format!("duplicate place {:?}", p.name)));
            }
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn spellings(place: &Place) -> impl Iterator<Item = Vec<String>> + '_ {
        std::iter::once(&place.name)
            .chain(&place.aliases)
            .map(|s| tokenize(s))
    }

    /// Canonical name for a location string, if known.
    pub fn resolve(&self, location: &str) -> Option<&str> {
        let wanted = tokenize(location);
        self.places
            .iter()
            .find(|p| Self::spellings(p).any(|s| s == wanted))
            .map(|p| p.name.as_str())
    }

    /// Canonical names of places mentioned anywhere in `text`.
    pub fn find_in(&self, text: &str) -> BTreeSet<String> {
        let tokens = tokenize(text);
        self.places
            .iter()
            .filter(|p| Self::spellings(p).any(|s| contains_sequence(&tokens, &s)))
            .map(|p| p.name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSettings {
    /// Query words that signal interest in places.
    pub place_intent_keywords: Vec<String>,
    /// The query-similarity pool holds `relevance_pool_factor * k` fragments.
    pub relevance_pool_factor: usize,
    /// Pool entries scoring below this fraction of the best score are dropped.
    pub relevance_floor_ratio: f64,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            place_intent_keywords: ["place", "places", "where", "city", "location", "locations", "visit", "visited"]
                .map(String::from)
                .to_vec(),
            relevance_pool_factor: 2,
            relevance_floor_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMemory {
    pub fragment_id: FragmentId,
    pub weight: f64,
    pub text: String,
    pub place_tags: BTreeSet<String>,
}

impl BundleMemory {
    fn of(f: &MemoryFragment) -> Self {
        Self {
            fragment_id: f.id.clone(),
            weight: f.weight,
            text: f.text.clone(),
            place_tags: f.place_tags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub id: String,
    pub query: String,
    /// Selected memories, weight descending.
    pub memories: Vec<BundleMemory>,
    /// Members of included conflicts that were not selected.
    pub conflict_members: Vec<BundleMemory>,
    pub conflicts: Vec<ConflictPair>,
    pub directive: Option<String>,
    pub geo_anchors: Vec<FragmentId>,
    pub rendered_prompt: String,
}

impl ContextBundle {
    fn labelled(&self) -> impl Iterator<Item = &BundleMemory> {
        self.memories.iter().chain(&self.conflict_members)
    }

    /// 1-based positional label of a fragment within this bundle.
    pub fn label_of(&self, id: &FragmentId) -> Option<usize> {
        self.labelled().position(|m| &m.fragment_id == id).map(|i| i + 1)
    }

    pub fn contains(&self, id: &FragmentId) -> bool {
        self.memories.iter().any(|m| &m.fragment_id == id)
    }

    /// Full prompt for the dialogue client: the rendered block, a legend
    /// line per label and the tension directive lines.
    pub fn request_prompt(&self) -> String {
        let mut prompt = self.rendered_prompt.clone();
        for (i, m) in self.labelled().enumerate() {
            prompt.push_str(&format!("\nM{}: {}", i + 1, m.text));
        }
        if let Some(d) = &self.directive {
            prompt.push('\n');
            prompt.push_str(d);
        }
        prompt
    }
}

/// Renders the three-line context block for labelled memories and pairs.
pub fn render_prompt(memories: &[BundleMemory], conflicts: &[(usize, usize)]) -> String {
    let listed = memories
        .iter()
        .enumerate()
        .map(|(i, m)| format!("M{}(W={:.1})", i + 1, m.weight))
        .collect::<Vec<_>>()
        .join(", ");
    let conflict_line = if conflicts.is_empty() {
        "Conflicts: []".to_string()
    } else {
        let pairs = conflicts
            .iter()
            .map(|(a, b)| format!("(M{a}<->M{b})"))
            .collect::<Vec<_>>()
            .join(", ");
        format!("Conflicts: [Contradictory pairs: {pairs}]")
    };
    format!("Context: [High-weight memories: {listed}]\n{conflict_line}\n{TASK_LINE}")
}

/// Read-only view used to assemble a bundle.
pub struct ContextSources<'a> {
    pub graph: &'a MemoryGraph,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
    pub lexicon: &'a Lexicon,
    pub gazetteer: &'a Gazetteer,
    pub settings: &'a FusionSettings,
}

impl<'a> ContextSources<'a> {
    fn place_intent(&self, query: &str) -> (bool, BTreeSet<String>) {
        let named = self.gazetteer.find_in(query);
        let tokens = tokenize(query);
        let keyword = tokens
            .iter()
            .any(|t| self.settings.place_intent_keywords.contains(t));
        (keyword || !named.is_empty(), named)
    }

    /// Selection: the query-similarity pool re-ranked by weight fills
    /// `k - k/2` slots, the globally heaviest memories fill the rest, and
    /// place-intent queries are guaranteed one place-tagged memory.
    pub fn build_context(&self, query: &str, k: usize) -> Result<ContextBundle> {
        if k < 1 {
            return Err(DcmError::InvalidArgument("k must be at least 1".into()));
        }
        let graph = self.graph;
        let pool_size = k * self.settings.relevance_pool_factor.max(1);
        let scored = self.index.similar(self.embedder, query, pool_size);
        let best = scored.first().map_or(0.0, |(_, s)| *s);
        let floor = best * self.settings.relevance_floor_ratio;
        let mut pool: Vec<&MemoryFragment> = scored
            .into_iter()
            .filter(|(_, score)| *score > 0.0 && *score >= floor)
            .filter_map(|(id, _)| graph.fragment(&id))
            .collect();
        pool.sort_by(|a, b| rank_order(a, b));

        let relevant_slots = k - k / 2;
        let mut selected: Vec<&MemoryFragment> = pool.into_iter().take(relevant_slots).collect();
        for f in graph.top_weighted(k) {
            if selected.len() == k {
                break;
            }
            if !selected.iter().any(|s| s.id == f.id) {
                selected.push(f);
            }
        }
        selected.sort_by(|a, b| rank_order(a, b));

        let (intent, named) = self.place_intent(query);
        if intent {
            self.anchor(&mut selected, &named, k);
        }

        let chosen: BTreeSet<&FragmentId> = selected.iter().map(|f| &f.id).collect();
        let query_topics = self.lexicon.topics_in(query);
        let conflicts: Vec<ConflictPair> = graph
            .conflicts
            .iter()
            .filter(|c| {
                chosen.contains(&c.fragment_a)
                    || chosen.contains(&c.fragment_b)
                    || query_topics.contains(&c.topic)
            })
            .cloned()
            .collect();

        let memories: Vec<BundleMemory> = selected.iter().map(|f| BundleMemory::of(f)).collect();
        let mut conflict_members: Vec<BundleMemory> = Vec::new();
        for c in &conflicts {
            for id in [&c.fragment_a, &c.fragment_b] {
                let known = chosen.contains(id)
                    || conflict_members.iter().any(|m| &m.fragment_id == id);
                if !known {
                    if let Some(f) = graph.fragment(id) {
                        conflict_members.push(BundleMemory::of(f));
                    }
                }
            }
        }

        let mut bundle = ContextBundle {
            id: String::new(),
            query: query.to_string(),
            geo_anchors: selected
                .iter()
                .filter(|f| !f.place_tags.is_empty())
                .map(|f| f.id.clone())
                .collect(),
            directive: tension_directive(&conflicts),
            memories,
            conflict_members,
            conflicts,
            rendered_prompt: String::new(),
        };
        let pairs: Vec<(usize, usize)> = bundle
            .conflicts
            .iter()
            .filter_map(|c| Some((bundle.label_of(&c.fragment_a)?, bundle.label_of(&c.fragment_b)?)))
            .collect();
        let labelled: Vec<BundleMemory> = bundle.labelled().cloned().collect();
        bundle.rendered_prompt = render_prompt(&labelled, &pairs);
        let digest = sha256_hex(format!("{query}\n{}", bundle.request_prompt()).as_bytes());
        bundle.id = format!("b-{}", &digest[..16]);
        Ok(bundle)
    }

    fn anchor(&self, selected: &mut Vec<&'a MemoryFragment>, named: &BTreeSet<String>, k: usize) {
        let graph = self.graph;
        let named_exists = graph
            .live()
            .any(|f| f.place_tags.iter().any(|t| named.contains(t)));
        let good = |f: &MemoryFragment| {
            if named_exists {
                f.place_tags.iter().any(|t| named.contains(t))
            } else {
                !f.place_tags.is_empty()
            }
        };
        if selected.iter().any(|f| good(f)) {
            return;
        }
        let Some(candidate) = graph.top_weighted(usize::MAX).into_iter().find(|f| good(f)) else {
            return;
        };
        if selected.len() < k {
            selected.push(candidate);
        } else {
            let victim = selected
                .iter()
                .rposition(|f| f.place_tags.is_empty())
                .unwrap_or(selected.len() - 1);
            selected[victim] = candidate;
        }
        selected.sort_by(|a, b| rank_order(a, b));
    }
}

/// Sends the bundle to the dialogue client. Never touches the graph.
pub fn respond(
    bundle: &ContextBundle,
    query: &str,
    client: &dyn DialogueClient,
    seed: u64,
) -> Result<String> {
    let request = DialogueRequest {
        prompt: bundle.request_prompt(),
        query: query.to_string(),
        seed,
    };
    client
        .complete(&request)
        .map(|r| r.text)
        .map_err(|e| DcmError::Dialogue {
            bundle_id: bundle.id.clone(),
            message: e.0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_prompt() {
        assert_eq!(
            render_prompt(&[], &[]),
            format!("Context: [High-weight memories: ]\nConflicts: []\n{TASK_LINE}")
        );
    }

    #[test]
    fn weights_print_one_decimal() {
        let m = |w: f64| BundleMemory {
            fragment_id: FragmentId::from_seq(1),
            weight: w,
            text: String::new(),
            place_tags: BTreeSet::new(),
        };
        let p = render_prompt(&[m(0.8296), m(0.7079)], &[(1, 2)]);
        assert!(p.starts_with("Context: [High-weight memories: M1(W=0.8), M2(W=0.7)]\n"));
        assert!(p.contains("Conflicts: [Contradictory pairs: (M1<->M2)]"));
    }

    #[test]
    fn gazetteer_resolves_aliases() {
        let g = Gazetteer::sample();
        assert_eq!(g.resolve("daming lake"), Some("Daming Lake"));
        assert_eq!(g.resolve("Baotu Quan"), Some("Baotu Spring"));
        assert_eq!(g.resolve("Atlantis"), None);
        let found = g.find_in("I see myself by Daming Lake at sunset");
        assert_eq!(found.into_iter().collect::<Vec<_>>(), vec!["Daming Lake"]);
    }

    #[test]
    fn gazetteer_rejects_duplicates() {
        let src = "[[places]]\nname = \"A B\"\n[[places]]\nname = \"a  b\"\n";
        assert!(Gazetteer::from_toml(src).is_err());
    }
}
