//! Stance claims and narrative tension.
//!
//! Contradictory fragments are paired, never resolved: nothing here removes
//! or down-weights a fragment. Conflicts surface as directives in the
//! generation prompt instead.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::memory::{Day, FragmentId, MemoryGraph};
use crate::text::{normalize, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Positive,
    Negative,
}

impl Stance {
    fn flipped(self) -> Self {
        match self {
            Stance::Positive => Stance::Negative,
            Stance::Negative => Stance::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub topic: String,
    pub stance: Stance,
}

impl Claim {
    pub fn new(topic: impl Into<String>, stance: Stance) -> Self {
        Self {
            topic: topic.into().to_lowercase(),
            stance,
        }
    }
}

/// Two fragments holding opposite stances on one topic. `fragment_a` is
/// always the smaller id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConflictPair {
    pub fragment_a: FragmentId,
    pub fragment_b: FragmentId,
    pub topic: String,
    pub detected_at: Day,
}

impl ConflictPair {
    pub fn involves(&self, id: &FragmentId) -> bool {
        &self.fragment_a == id || &self.fragment_b == id
    }

    fn key(&self) -> (&str, &FragmentId, &FragmentId) {
        (&self.topic, &self.fragment_a, &self.fragment_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub name: String,
    #[serde(default)]
    pub terms: Vec<String>,
    #[serde(default)]
    pub negative_terms: Vec<String>,
    #[serde(default)]
    pub requires: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub negation_cues: Vec<String>,
    pub topics: Vec<TopicEntry>,
}

const SHIPPED_LEXICON: &str = include_str!("../config/lexicon.toml");

/// Tokens before a hit that are searched for a negation cue.
const NEGATION_WINDOW: usize = 3;

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_toml(SHIPPED_LEXICON).expect("shipped lexicon parses")
    }
}

impl Lexicon {
    pub fn from_toml(source: &str) -> Result<Self> {
        let mut lexicon: Lexicon =
            toml::from_str(source).map_err(|e| DcmError::Config(format!("lexicon: {e}")))?;
        let lower = |v: &mut Vec<String>| v.iter_mut().for_each(|s| *s = s.to_lowercase());
        lower(&mut lexicon.negation_cues);
        for t in &mut lexicon.topics {
            t.name = t.name.trim().to_lowercase();
            if t.name.is_empty() {
                return Err(DcmError::Config("lexicon topic with empty name".into()));
            }
            lower(&mut t.terms);
            lower(&mut t.negative_terms);
            lower(&mut t.requires);
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Topics whose terms appear in `text`, ignoring stance and mood.
    pub fn topics_in(&self, text: &str) -> BTreeSet<String> {
        let tokens = tokenize(text);
        self.topics
            .iter()
            .filter(|t| {
                tokens
                    .iter()
                    .any(|tok| t.terms.contains(tok) || t.negative_terms.contains(tok))
            })
            .map(|t| t.name.clone())
            .collect()
    }

    /// Every term the lexicon reacts to, cues included.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut all: BTreeSet<String> = self.negation_cues.iter().cloned().collect();
        for t in &self.topics {
            all.extend(t.terms.iter().cloned());
            all.extend(t.negative_terms.iter().cloned());
        }
        all
    }
}

/// Plug point for stance extraction; the rule extractor ships by default.
pub trait ClaimExtractor: Send + Sync {
    fn extract(&self, utterance: &str) -> Vec<Claim>;
}

#[derive(Debug, Clone, Default)]
pub struct RuleExtractor {
    pub lexicon: Lexicon,
}

impl RuleExtractor {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }
}

impl ClaimExtractor for RuleExtractor {
    fn extract(&self, utterance: &str) -> Vec<Claim> {
        if normalize(utterance).ends_with('?') {
            return Vec::new();
        }
        let tokens = tokenize(utterance);
        let mut claims = Vec::new();
        for topic in &self.lexicon.topics {
            if !topic.requires.is_empty() && !tokens.iter().any(|t| topic.requires.contains(t)) {
                continue;
            }
            let hit = tokens.iter().enumerate().find_map(|(i, tok)| {
                if topic.terms.contains(tok) {
                    Some((i, Stance::Positive))
                } else if topic.negative_terms.contains(tok) {
                    Some((i, Stance::Negative))
                } else {
                    None
                }
            });
            let Some((pos, base)) = hit else { continue };
            let negated = tokens[pos.saturating_sub(NEGATION_WINDOW)..pos]
                .iter()
                .any(|t| self.lexicon.negation_cues.contains(t));
            let stance = if negated { base.flipped() } else { base };
            claims.push(Claim::new(topic.name.clone(), stance));
        }
        claims.sort();
        claims.dedup();
        claims
    }
}

/// Every pair of live fragments that share a topic with opposite stances,
/// ordered by topic then ids. Pairs already recorded keep their detection
/// day; new ones are stamped with the graph clock.
pub fn detect_conflicts(graph: &MemoryGraph) -> Vec<ConflictPair> {
    let mut by_topic: BTreeMap<&str, (BTreeSet<&FragmentId>, BTreeSet<&FragmentId>)> =
        BTreeMap::new();
    for f in graph.live() {
        for claim in &f.claims {
            let entry = by_topic.entry(claim.topic.as_str()).or_default();
            match claim.stance {
                Stance::Positive => entry.0.insert(&f.id),
                Stance::Negative => entry.1.insert(&f.id),
            };
        }
    }
    let mut pairs = BTreeSet::new();
    for (topic, (pos, neg)) in &by_topic {
        for p in pos {
            for n in neg {
                if p == n {
                    continue;
                }
                let (a, b) = if p < n { (*p, *n) } else { (*n, *p) };
                pairs.insert((topic.to_string(), a.clone(), b.clone()));
            }
        }
    }
    pairs
        .into_iter()
        .map(|(topic, a, b)| {
            let detected_at = graph
                .conflicts
                .iter()
                .find(|c| c.key() == (topic.as_str(), &a, &b))
                .map_or(graph.clock, |c| c.detected_at);
            ConflictPair {
                fragment_a: a,
                fragment_b: b,
                topic,
                detected_at,
            }
        })
        .collect()
}

/// Detected pairs not yet recorded on the graph.
pub fn new_conflicts(graph: &MemoryGraph) -> Vec<ConflictPair> {
    detect_conflicts(graph)
        .into_iter()
        .filter(|p| !graph.conflicts.iter().any(|c| c.key() == p.key()))
        .collect()
}

/// One `Express uncertainty about [<topic>]` line per distinct topic.
pub fn tension_directive(conflicts: &[ConflictPair]) -> Option<String> {
    let topics: BTreeSet<&str> = conflicts.iter().map(|c| c.topic.as_str()).collect();
    if topics.is_empty() {
        return None;
    }
    Some(
        topics
            .into_iter()
            .map(|t| format!("Express uncertainty about [{t}]"))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extract(text: &str) -> Vec<Claim> {
        RuleExtractor::default().extract(text)
    }

    #[test]
    fn sibling_and_alone_claims() {
        assert_eq!(
            extract("I have siblings"),
            vec![Claim::new("family", Stance::Positive)]
        );
        assert_eq!(
            extract("I'm alone"),
            vec![Claim::new("family", Stance::Negative)]
        );
    }

    #[test]
    fn negation_cue_flips_stance() {
        assert_eq!(
            extract("I don't have any siblings"),
            vec![Claim::new("family", Stance::Negative)]
        );
        assert_eq!(
            extract("I never had a brother"),
            vec![Claim::new("family", Stance::Negative)]
        );
    }

    #[test]
    fn no_topic_no_claims() {
        assert!(extract("the weather is nice").is_empty());
    }

    #[test]
    fn questions_assert_nothing() {
        assert!(extract("Do you like this city?").is_empty());
        assert!(extract("Do you have siblings?").is_empty());
    }

    #[test]
    fn required_context_gates_topic() {
        assert!(extract("I love noodles").is_empty());
        assert_eq!(
            extract("I love this city"),
            vec![Claim::new("city-affection", Stance::Positive)]
        );
    }

    #[test]
    fn directive_dedupes_topics() {
        let pair = |a: u64, b: u64, t: &str| ConflictPair {
            fragment_a: FragmentId::from_seq(a),
            fragment_b: FragmentId::from_seq(b),
            topic: t.into(),
            detected_at: 0,
        };
        assert_eq!(tension_directive(&[]), None);
        assert_eq!(
            tension_directive(&[pair(1, 2, "family"), pair(1, 3, "family")]).as_deref(),
            Some("Express uncertainty about [family]")
        );
        assert_eq!(
            tension_directive(&[pair(1, 2, "family"), pair(4, 5, "age")]).as_deref(),
            Some("Express uncertainty about [age]\nExpress uncertainty about [family]")
        );
    }

    #[test]
    fn lexicon_rejects_empty_topic() {
        let src = "negation_cues = []\n[[topics]]\nname = \" \"\n";
        assert!(Lexicon::from_toml(src).is_err());
    }
}
