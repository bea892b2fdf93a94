//! Simulated-day lifecycle: decay, archival and daily self-summaries.
//!
//! Each day runs four steps in order:
//!
//! 1. recompute every live weight (salience times retention);
//! 2. fragments under `w_forget` decay: retention and weight halve per
//!    `decay_half_life_cycles` and `low_weight_days` grows. Fragments at or
//!    above it become active again with `low_weight_days = 0`; if nobody
//!    mentioned them during the previous day and they hold no conflict, their
//!    retention fades by the idle half-life;
//! 3. fragments with `low_weight_days >= archive_after_days` are archived;
//! 4. live fragments at or above `w_synth` are summarized.
//!
//! The functions here only plan events; [`crate::engine::Engine::tick`]
//! applies them and drives the dialogue client.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::events::{GraphEvent, WeightEntry};
use crate::memory::{rank_order, Day, FragmentId, MemoryFragment, MemoryGraph, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSummary {
    pub day: Day,
    pub source_fragment_ids: BTreeSet<FragmentId>,
    pub text: String,
    pub stale: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: Day,
    pub decayed: usize,
    pub recovered: usize,
    pub faded: usize,
    pub archived: Vec<FragmentId>,
    pub summarized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LifecycleReport {
    pub from_day: Day,
    pub to_day: Day,
    pub decayed: usize,
    pub archived: usize,
    pub summarized: usize,
    pub days: Vec<DayReport>,
    pub errors: Vec<String>,
}

impl LifecycleReport {
    pub fn push(&mut self, day: DayReport) {
        self.decayed += day.decayed;
        self.archived += day.archived.len();
        self.summarized += usize::from(day.summarized);
        if let Some(e) = &day.error {
            self.errors.push(format!("day {}: {e}", day.day));
        }
        self.to_day = day.day;
        self.days.push(day);
    }
}

pub fn weight_update(graph: &MemoryGraph, day: Day) -> GraphEvent {
    let weights = graph
        .all_weights()
        .into_iter()
        .map(|(fragment_id, weight)| WeightEntry { fragment_id, weight })
        .collect();
    GraphEvent::WeightUpdate { day, weights }
}

/// Step 2: decay, recovery and idle fading, planned against freshly
/// recomputed weights.
pub fn plan_transitions(graph: &MemoryGraph, day: Day) -> Vec<GraphEvent> {
    let p = &graph.params;
    let decay = p.decay_factor();
    let idle = p.idle_factor();
    let mut events = Vec::new();
    for f in graph.live() {
        if f.weight < p.w_forget {
            events.push(GraphEvent::Decay {
                day,
                fragment_id: f.id.clone(),
                weight: f.weight * decay,
                retention: f.retention * decay,
                low_weight_days: f.low_weight_days + 1,
            });
            continue;
        }
        if f.status == Status::Decaying || f.low_weight_days > 0 {
            events.push(GraphEvent::Recover {
                day,
                fragment_id: f.id.clone(),
            });
        }
        if let Some(factor) = idle {
            let idle_for_a_day = f.last_touched + 1 < day;
            if idle_for_a_day && !graph.is_conflicted(&f.id) {
                events.push(GraphEvent::Fade {
                    day,
                    fragment_id: f.id.clone(),
                    weight: f.weight * factor,
                    retention: f.retention * factor,
                });
            }
        }
    }
    events
}

/// Step 3.
pub fn plan_archival(graph: &MemoryGraph, day: Day) -> Vec<GraphEvent> {
    graph
        .live()
        .filter(|f| f.low_weight_days >= graph.params.archive_after_days)
        .map(|f| GraphEvent::Archive {
            day,
            fragment_id: f.id.clone(),
        })
        .collect()
}

/// Live fragments eligible for the daily summary, heaviest first and capped
/// at `synth_max_sources`.
pub fn synthesis_sources(graph: &MemoryGraph) -> Vec<&MemoryFragment> {
    let mut sources: Vec<&MemoryFragment> = graph
        .live()
        .filter(|f| f.weight >= graph.params.w_synth)
        .collect();
    sources.sort_by(|a, b| rank_order(a, b));
    sources.truncate(graph.params.synth_max_sources);
    sources
}

pub const SUMMARY_TASK: &str =
    "Task: Summarize these memories as a first-person self-awareness reflection.";

/// Prompt sent to the dialogue client for the daily summary.
pub fn summary_prompt(sources: &[&MemoryFragment]) -> String {
    let listed = sources
        .iter()
        .enumerate()
        .map(|(i, f)| format!("M{}(W={:.1})", i + 1, f.weight))
        .collect::<Vec<_>>()
        .join(", ");
    let mut prompt = format!("Context: [High-weight memories: {listed}]\n{SUMMARY_TASK}");
    for (i, f) in sources.iter().enumerate() {
        prompt.push_str(&format!("\nM{}: {}", i + 1, f.text));
    }
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{Contribution, ContributionId, ThemeKey, WeightParams};

    fn graph_with(weights: &[f64]) -> MemoryGraph {
        let mut g = MemoryGraph::new(WeightParams::default());
        for (i, w) in weights.iter().enumerate() {
            let c = Contribution {
                id: ContributionId(format!("c{i}")),
                session: "s".into(),
                day: 0,
                text: format!("memory {i}"),
                emotion: 0.5,
                place_tags: Default::default(),
                claims: vec![],
            };
            let mut f = MemoryFragment::new(
                FragmentId::from_seq(i as u64 + 1),
                ThemeKey::from_seq(i as u64 + 1),
                c,
            );
            f.weight = *w;
            g.insert_fragment(f);
        }
        g
    }

    #[test]
    fn everything_above_threshold_means_no_decay() {
        let g = graph_with(&[0.7, 0.4, 0.11]);
        let events = plan_transitions(&g, 1);
        assert!(events.iter().all(|e| !matches!(e, GraphEvent::Decay { .. })));
        assert!(plan_archival(&g, 1).is_empty());
    }

    #[test]
    fn low_weight_decays_by_half() {
        let g = graph_with(&[0.08]);
        match &plan_transitions(&g, 1)[0] {
            GraphEvent::Decay {
                weight,
                low_weight_days,
                ..
            } => {
                assert!((weight - 0.04).abs() < 1e-15);
                assert_eq!(*low_weight_days, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sources_respect_threshold() {
        let g = graph_with(&[0.9, 0.2, 0.6]);
        let ids: Vec<_> = synthesis_sources(&g).iter().map(|f| f.id.0.clone()).collect();
        assert_eq!(ids, vec!["f-000001", "f-000003"]);
    }

    #[test]
    fn summary_prompt_lists_texts() {
        let g = graph_with(&[0.9]);
        let p = summary_prompt(&synthesis_sources(&g));
        assert_eq!(
            p,
            format!("Context: [High-weight memories: M1(W=0.9)]\n{SUMMARY_TASK}\nM1: memory 0")
        );
    }
}
