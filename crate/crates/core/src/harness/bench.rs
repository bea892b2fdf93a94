//! Retrieval benchmark: recall@k of three policies over one shared graph.
//!
//! Probes are evaluated at the point in the corpus where they occur. A
//! probe hits when the live fragment holding a contribution with the
//! expected text is among the policy's k results; if that contribution was
//! deleted or its fragment archived, every policy misses.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::dialogue::StubClient;
use crate::engine::Engine;
use crate::error::{DcmError, Result};
use crate::harness::corpus::CorpusRecord;
use crate::harness::replay::{Driver, Step};
use crate::memory::{FragmentId, MemoryFragment};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Context bundle selection (weight-ranked relevance pool plus heaviest
    /// memories plus geo anchoring).
    Dcm,
    /// Plain top-k cosine similarity.
    NaiveCosine,
    /// The k most recently mentioned memories.
    Recency,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Dcm, Policy::NaiveCosine, Policy::Recency];

    pub fn retrieve(self, engine: &Engine, query: &str, k: usize) -> Result<Vec<FragmentId>> {
        Ok(match self {
            Policy::Dcm => engine
                .build_context(query, k)?
                .memories
                .into_iter()
                .map(|m| m.fragment_id)
                .collect(),
            Policy::NaiveCosine => engine.similar(query, k).into_iter().map(|(id, _)| id).collect(),
            Policy::Recency => {
                let mut live: Vec<&MemoryFragment> = engine.graph().live().collect();
                live.sort_by(|a, b| {
                    b.last_touched
                        .cmp(&a.last_touched)
                        .then(b.created_at.cmp(&a.created_at))
                        .then_with(|| b.id.cmp(&a.id))
                });
                live.into_iter().take(k).map(|f| f.id.clone()).collect()
            }
        })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Dcm => "dcm",
            Policy::NaiveCosine => "naive-cosine",
            Policy::Recency => "recency",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub policy: Policy,
    pub hits: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub line: usize,
    pub query: String,
    pub target: Option<FragmentId>,
    pub hits: Vec<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: usize,
    pub probes: usize,
    pub scores: Vec<PolicyScore>,
    pub outcomes: Vec<ProbeOutcome>,
}

impl BenchReport {
    pub fn recall(&self, policy: Policy) -> f64 {
        self.scores
            .iter()
            .find(|s| s.policy == policy)
            .map_or(0.0, |s| s.recall)
    }

    pub fn table(&self) -> String {
        let mut out = format!("policy         recall@{}  hits/{}\n", self.k, self.probes);
        for s in &self.scores {
            out.push_str(&format!(
                "{:<14} {:>8.3}  {}\n",
                s.policy.to_string(),
                s.recall,
                s.hits
            ));
        }
        out
    }
}

fn target_of(engine: &Engine, expected: &str) -> Option<FragmentId> {
    let expected = normalize(expected);
    engine
        .graph()
        .live()
        .find(|f| f.contributions.values().any(|c| c.text == expected))
        .map(|f| f.id.clone())
}

pub fn bench(
    records: &[CorpusRecord],
    config: &EngineConfig,
    policies: &[Policy],
    k: usize,
) -> Result<BenchReport> {
    if k == 0 {
        return Err(DcmError::InvalidArgument("k must be at least 1".into()));
    }
    if !records.iter().any(|r| r.probe.is_some()) {
        return Err(DcmError::InvalidArgument("corpus has no probes".into()));
    }
    let mut config = config.clone();
    config.log_path = None;
    let client = StubClient;
    let mut driver = Driver::new(&config, &client)?;
    let mut outcomes = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let Step::Probe(r) = driver.step(i + 1, record)? else {
            continue;
        };
        let expected = &r.probe.as_ref().expect("probe step").expected_fragment_text;
        let target = target_of(&driver.engine, expected);
        let mut hits = Vec::new();
        for &policy in policies {
            let found = policy.retrieve(&driver.engine, &r.text, k)?;
            if target.as_ref().is_some_and(|t| found.contains(t)) {
                hits.push(policy);
            }
        }
        outcomes.push(ProbeOutcome {
            line: i + 1,
            query: r.text.clone(),
            target,
            hits,
        });
    }
    let probes = outcomes.len();
    let scores = policies
        .iter()
        .map(|&policy| {
            let hits = outcomes.iter().filter(|o| o.hits.contains(&policy)).count();
            PolicyScore {
                policy,
                hits,
                recall: hits as f64 / probes as f64,
            }
        })
        .collect();
    Ok(BenchReport {
        k,
        probes,
        scores,
        outcomes,
    })
}
