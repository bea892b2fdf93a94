//! Embodied expression parameters derived from graph state.
//!
//! | graph state        | parameters                               |
//! |--------------------|------------------------------------------|
//! | memory weight      | `murmur_intensity`, `murmur_pace`        |
//! | narrative tension  | `gaze_drift`, `micro_expression_rate`    |
//! | forgetting         | `voice_fade`, `gesture_slowdown`         |

use serde::{Deserialize, Serialize};

use crate::memory::{MemoryGraph, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AvatarParams {
    /// Weight at which murmuring saturates.
    pub w_ref: f64,
    /// Conflict count at which gaze drift saturates.
    pub c_ref: f64,
}

impl Default for AvatarParams {
    fn default() -> Self {
        Self { w_ref: 1.0, c_ref: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressionState {
    pub murmur_intensity: f64,
    /// Rate multiplier in `[0.5, 2.0]`.
    pub murmur_pace: f64,
    pub gaze_drift: f64,
    pub micro_expression_rate: f64,
    pub voice_fade: f64,
    pub gesture_slowdown: f64,
}

pub fn derive_expression(graph: &MemoryGraph, params: &AvatarParams) -> ExpressionState {
    let max_weight = graph.live().map(|f| f.weight).fold(0.0, f64::max);
    let murmur_intensity = (max_weight / params.w_ref).clamp(0.0, 1.0);
    let tension = (graph.conflicts.len() as f64 / params.c_ref).clamp(0.0, 1.0);
    let decaying = graph.count_by_status(Status::Decaying);
    let live = graph.live().count();
    let fade = decaying as f64 / live.max(1) as f64;
    ExpressionState {
        murmur_intensity,
        murmur_pace: 0.5 + 1.5 * murmur_intensity,
        gaze_drift: tension,
        micro_expression_rate: tension,
        voice_fade: fade,
        gesture_slowdown: fade,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_is_still() {
        let s = derive_expression(&MemoryGraph::default(), &AvatarParams::default());
        assert_eq!(
            s,
            ExpressionState {
                murmur_intensity: 0.0,
                murmur_pace: 0.5,
                gaze_drift: 0.0,
                micro_expression_rate: 0.0,
                voice_fade: 0.0,
                gesture_slowdown: 0.0,
            }
        );
    }
}
