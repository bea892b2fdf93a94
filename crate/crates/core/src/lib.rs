//! Dynamic collective memory engine.
//!
//! Many participants' utterances become a weighted memory graph: repeated
//! mentions merge into fragments, each fragment is weighted by frequency,
//! emotion and resonance within its theme cluster, contradictory fragments
//! are paired and kept, and memories nobody mentions fade, decay and are
//! archived. The graph feeds a context bundle for a dialogue client, daily
//! self-summaries, and a set of embodied expression parameters.
//!
//! Start with [`Engine`]; [`service`] exposes it over HTTP and [`harness`]
//! replays and benchmarks dialogue corpora.

pub mod avatar;
pub mod config;
pub mod dialogue;
pub mod embed;
pub mod emotion;
pub mod engine;
pub mod error;
pub mod events;
pub mod fusion;
pub mod harness;
pub mod lifecycle;
pub mod memory;
pub mod service;
pub mod store;
pub mod tension;
pub mod text;

pub use avatar::{derive_expression, AvatarParams, ExpressionState};
pub use config::EngineConfig;
pub use dialogue::{DialogueClient, DialogueReply, DialogueRequest, FailingClient, StubClient};
pub use engine::{Engine, IngestOutcome};
pub use error::{DcmError, Result};
pub use events::{EventLog, GraphEvent};
pub use fusion::{ContextBundle, Gazetteer};
pub use lifecycle::{LifecycleReport, SelfSummary};
pub use memory::{
    jaccard, ContributionId, Day, FragmentId, MemoryFragment, MemoryGraph, Status, ThemeKey,
    WeightParams,
};
pub use store::{DeletionReceipt, Snapshot};
pub use tension::{detect_conflicts, tension_directive, Claim, ConflictPair, Stance};
