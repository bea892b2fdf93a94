//! The engine: one memory graph, its event log and the read-side indexes.
//!
//! All mutations plan [`GraphEvent`]s against the current graph, append them
//! to the log and then apply them, so the log always replays to the live
//! graph. The engine is the single writer; share it behind a lock.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::avatar::{derive_expression, AvatarParams, ExpressionState};
use crate::config::EngineConfig;
use crate::dialogue::{DialogueClient, DialogueRequest};
use crate::embed::{cosine, Embedder, HashEmbedder};
use crate::emotion::EmotionScorer;
use crate::error::{DcmError, Result};
use crate::events::{ContributionRecord, EventLog, GraphEvent};
use crate::fusion::{respond, ContextBundle, ContextSources, FusionSettings, Gazetteer};
use crate::lifecycle::{
    plan_archival, plan_transitions, summary_prompt, synthesis_sources, weight_update, DayReport,
    LifecycleReport, SelfSummary,
};
use crate::memory::{ContributionId, Day, FragmentId, MemoryGraph, Status, ThemeKey, WeightParams};
use crate::store::{sha256_hex, DeletionReceipt, Snapshot, VectorIndex};
use crate::tension::{new_conflicts, ClaimExtractor, ConflictPair, Lexicon, RuleExtractor};
use crate::text::{normalize, tokenize};

const BUNDLE_CACHE: usize = 128;
const MAX_SESSION_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub fragment_id: FragmentId,
    pub contribution_id: ContributionId,
    pub merged: bool,
    pub new_conflicts: Vec<ConflictPair>,
}

pub struct Engine {
    graph: MemoryGraph,
    log: EventLog,
    index: VectorIndex,
    embedder: Box<dyn Embedder>,
    extractor: Box<dyn ClaimExtractor>,
    lexicon: Lexicon,
    gazetteer: Gazetteer,
    scorer: EmotionScorer,
    fusion: FusionSettings,
    avatar: AvatarParams,
    seed: u64,
    context_k: usize,
    bundles: Mutex<VecDeque<ContextBundle>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("fragments", &self.graph.fragments.len())
            .field("clock", &self.graph.clock)
            .field("events", &self.log.len())
            .finish()
    }
}

impl Default for Engine {
    fn default() -> Self {
        Self::new(&EngineConfig::default()).expect("default config is valid")
    }
}

impl Engine {
    /// Builds an engine from config. With a `log_path` whose file already
    /// holds events, the graph is rebuilt from them.
    pub fn new(config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        let log = match &config.log_path {
            Some(p) => EventLog::open(p)?,
            None => EventLog::in_memory(),
        };
        let lexicon = config.lexicon()?;
        let embedder = HashEmbedder::new(config.embedder.dimension, config.embedder.seed);
        let graph = MemoryGraph::replay(config.params.clone(), log.events());
        let index = VectorIndex::build(&graph, &embedder);
        Ok(Self {
            graph,
            log,
            index,
            embedder: Box::new(embedder),
            extractor: Box::new(RuleExtractor::new(lexicon.clone())),
            lexicon,
            gazetteer: config.gazetteer()?,
            scorer: EmotionScorer::default(),
            fusion: config.fusion.clone(),
            avatar: config.avatar,
            seed: config.seed,
            context_k: config.context_k,
            bundles: Mutex::new(VecDeque::new()),
        })
    }

    pub fn with_params(params: WeightParams) -> Result<Self> {
        Self::new(&EngineConfig {
            params,
            ..EngineConfig::default()
        })
    }

    /// Swaps in another stance extractor. Only affects future ingestion.
    pub fn set_extractor(&mut self, extractor: Box<dyn ClaimExtractor>) {
        self.extractor = extractor;
    }

    pub fn graph(&self) -> &MemoryGraph {
        &self.graph
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn context_k(&self) -> usize {
        self.context_k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> Day {
        self.graph.clock
    }

    fn commit(&mut self, events: Vec<GraphEvent>) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        self.log.append(&events)?;
        for e in &events {
            self.graph.apply(e);
        }
        Ok(())
    }

    fn refresh_cluster(&mut self, theme: &ThemeKey) -> Result<()> {
        let weights = self
            .graph
            .cluster_weights(theme)
            .into_iter()
            .map(|(fragment_id, weight)| crate::events::WeightEntry { fragment_id, weight })
            .collect::<Vec<_>>();
        if weights.is_empty() {
            return Ok(());
        }
        let day = self.graph.clock;
        self.commit(vec![GraphEvent::WeightUpdate { day, weights }])
    }

    fn record_conflicts(&mut self) -> Result<Vec<ConflictPair>> {
        let fresh = new_conflicts(&self.graph);
        self.commit(
            fresh
                .iter()
                .map(|pair| GraphEvent::Conflict { pair: pair.clone() })
                .collect(),
        )?;
        Ok(fresh)
    }

    fn contribution_id(&self, session: &str) -> ContributionId {
        let n = self.graph.session_counters.get(session).copied().unwrap_or(0);
        let digest = sha256_hex(format!("{session}\u{0}{n}").as_bytes());
        ContributionId(format!("c{}", &digest[..16]))
    }

    fn merge_target(&self, vector: &[f64]) -> Option<FragmentId> {
        let threshold = self.graph.params.merge_threshold;
        self.index
            .similar_to(vector, 1)
            .into_iter()
            .find(|(_, score)| *score >= threshold)
            .map(|(id, _)| id)
    }

    /// Nearest cluster centroid at or above the theme threshold.
    fn assign_theme(&self, vector: &[f64]) -> Option<ThemeKey> {
        let dim = vector.len();
        let mut best: Option<(ThemeKey, f64)> = None;
        for (theme, members) in &self.graph.clusters {
            let mut centroid = vec![0.0; dim];
            for id in members {
                if let Some(v) = self.index.vector(id) {
                    centroid.iter_mut().zip(v).for_each(|(c, x)| *c += x);
                }
            }
            let score = cosine(vector, &centroid);
            if best.as_ref().is_none_or(|(_, s)| score > *s) {
                best = Some((theme.clone(), score));
            }
        }
        best.filter(|(_, s)| *s >= self.graph.params.theme_threshold)
            .map(|(t, _)| t)
    }

    /// Ingests one utterance. Near-duplicates (cosine at or above
    /// `merge_threshold`) merge into the existing fragment.
    pub fn ingest_fragment(
        &mut self,
        utterance: &str,
        session: &str,
        emotion: Option<f64>,
        place_tags: &[String],
        day: Day,
    ) -> Result<IngestOutcome> {
        let text = normalize(utterance);
        if text.is_empty() || tokenize(&text).is_empty() {
            return Err(DcmError::RejectedInput("utterance is empty".into()));
        }
        let session = session.trim();
        if session.is_empty()
            || session.len() > MAX_SESSION_LEN
            || session.chars().any(char::is_control)
        {
            return Err(DcmError::UnknownSession(session.to_string()));
        }
        let emotion = match emotion {
            Some(e) if !(0.0..=1.0).contains(&e) => {
                return Err(DcmError::RejectedInput(format!("emotion {e} outside [0, 1]")))
            }
            Some(e) => e,
            None => self.scorer.score(&text),
        };
        if day < self.graph.clock {
            return Err(DcmError::InvalidArgument(format!(
                "day {day} is before the clock ({})",
                self.graph.clock
            )));
        }

        let mut tags: BTreeSet<String> = self.gazetteer.find_in(&text);
        for t in place_tags {
            let t = t.trim();
            if !t.is_empty() {
                tags.insert(self.gazetteer.resolve(t).unwrap_or(t).to_string());
            }
        }
        let contribution_id = self.contribution_id(session);
        let record = ContributionRecord {
            id: contribution_id.clone(),
            session: session.to_string(),
            day,
            claims: self.extractor.extract(&text),
            text: Some(text.clone()),
            emotion,
            place_tags: tags,
        };

        let vector = self.embedder.embed(&text);
        let (event, fragment_id, merged) = match self.merge_target(&vector) {
            Some(target) => (
                GraphEvent::Merge {
                    day,
                    fragment_id: target.clone(),
                    contribution: record,
                },
                target,
                true,
            ),
            None => {
                let (theme, new_theme) = match self.assign_theme(&vector) {
                    Some(t) => (t, false),
                    None => (ThemeKey::from_seq(self.graph.next_theme), true),
                };
                let fragment_id = FragmentId::from_seq(self.graph.next_fragment);
                (
                    GraphEvent::Ingest {
                        day,
                        fragment_id: fragment_id.clone(),
                        theme,
                        new_theme,
                        contribution: record,
                    },
                    fragment_id,
                    false,
                )
            }
        };
        self.commit(vec![event])?;
        self.index.sync(&self.graph, self.embedder.as_ref());
        let theme = self.graph.fragments[&fragment_id].theme.clone();
        self.refresh_cluster(&theme)?;
        let new_conflicts = self.record_conflicts()?;
        Ok(IngestOutcome {
            fragment_id,
            contribution_id,
            merged,
            new_conflicts,
        })
    }

    /// Ingests a photo caption anchored at a gazetteer place. Unknown places
    /// are rejected unless `allow_unresolved`.
    pub fn ingest_photo_caption(
        &mut self,
        caption: &str,
        location: &str,
        session: &str,
        allow_unresolved: bool,
    ) -> Result<IngestOutcome> {
        let place = match self.gazetteer.resolve(location) {
            Some(p) => p.to_string(),
            None if allow_unresolved && !location.trim().is_empty() => location.trim().to_string(),
            None => return Err(DcmError::UnknownPlace(location.to_string())),
        };
        let day = self.graph.clock;
        self.ingest_fragment(caption, session, None, &[place], day)
    }

    /// Advances the clock `days` times, running decay, archival and the
    /// daily summary for each day.
    pub fn tick(&mut self, days: u32, client: &dyn DialogueClient) -> Result<LifecycleReport> {
        if days < 1 {
            return Err(DcmError::InvalidArgument("tick needs days >= 1".into()));
        }
        let mut report = LifecycleReport {
            from_day: self.graph.clock,
            to_day: self.graph.clock,
            ..LifecycleReport::default()
        };
        for _ in 0..days {
            let day = self.graph.clock + 1;
            self.commit(vec![GraphEvent::Tick { day }])?;
            self.commit(vec![weight_update(&self.graph, day)])?;

            let transitions = plan_transitions(&self.graph, day);
            let mut entry = DayReport {
                day,
                ..DayReport::default()
            };
            for e in &transitions {
                match e {
                    GraphEvent::Decay { .. } => entry.decayed += 1,
                    GraphEvent::Recover { .. } => entry.recovered += 1,
                    GraphEvent::Fade { .. } => entry.faded += 1,
                    _ => {}
                }
            }
            self.commit(transitions)?;

            let archival = plan_archival(&self.graph, day);
            for e in &archival {
                if let GraphEvent::Archive { fragment_id, .. } = e {
                    entry.archived.push(fragment_id.clone());
                }
            }
            if !archival.is_empty() {
                self.commit(archival)?;
                self.commit(vec![weight_update(&self.graph, day)])?;
                self.index.sync(&self.graph, self.embedder.as_ref());
            }

            let sources = synthesis_sources(&self.graph);
            if !sources.is_empty() {
                let request = DialogueRequest {
                    prompt: summary_prompt(&sources),
                    query: String::new(),
                    seed: self.seed,
                };
                let ids: BTreeSet<FragmentId> = sources.iter().map(|f| f.id.clone()).collect();
                match client.complete(&request) {
                    Ok(reply) => {
                        let summary = SelfSummary {
                            day,
                            source_fragment_ids: ids,
                            text: reply.text,
                            stale: false,
                        };
                        self.commit(vec![GraphEvent::Summary { summary }])?;
                        entry.summarized = true;
                    }
                    Err(e) => entry.error = Some(format!("summary skipped: {e}")),
                }
            }
            report.push(entry);
        }
        Ok(report)
    }

    /// Removes one contribution. A fragment left without contributions is
    /// deleted with its conflicts; summaries built from it go stale and lose
    /// their text. The log keeps only an id tombstone.
    pub fn delete_contribution(&mut self, id: &ContributionId) -> Result<DeletionReceipt> {
        let fragment = self
            .graph
            .find_contribution(id)
            .ok_or_else(|| DcmError::NotFound(format!("contribution {id}")))?;
        let fragment_id = fragment.id.clone();
        let theme = fragment.theme.clone();
        let fragment_removed = fragment.contributions.len() == 1;
        let conflicts_before = self.graph.conflicts.len();
        let stale_before = self.graph.summaries.iter().filter(|s| s.stale).count();

        self.commit(vec![GraphEvent::Delete {
            day: self.graph.clock,
            contribution_id: id.clone(),
            fragment_id: fragment_id.clone(),
            fragment_removed,
        }])?;
        self.log.redact(id, &fragment_id)?;
        self.index.sync(&self.graph, self.embedder.as_ref());
        self.refresh_cluster(&theme)?;
        self.forget_bundles(&fragment_id);

        Ok(DeletionReceipt {
            contribution_id: id.clone(),
            remaining_frequency: self.graph.fragment(&fragment_id).map_or(0, |f| f.frequency),
            fragment_id,
            fragment_removed,
            conflicts_removed: conflicts_before - self.graph.conflicts.len(),
            summaries_marked_stale: self.graph.summaries.iter().filter(|s| s.stale).count()
                - stale_before,
        })
    }

    /// Brings an archived fragment back into retrieval.
    pub fn restore(&mut self, id: &FragmentId) -> Result<()> {
        let fragment = self
            .graph
            .fragment(id)
            .ok_or_else(|| DcmError::NotFound(id.to_string()))?;
        if fragment.status != Status::Archived {
            return Err(DcmError::InvalidArgument(format!("{id} is not archived")));
        }
        let theme = fragment.theme.clone();
        self.commit(vec![GraphEvent::Restore {
            day: self.graph.clock,
            fragment_id: id.clone(),
        }])?;
        self.index.sync(&self.graph, self.embedder.as_ref());
        self.refresh_cluster(&theme)?;
        self.record_conflicts()?;
        Ok(())
    }

    pub fn sources(&self) -> ContextSources<'_> {
        ContextSources {
            graph: &self.graph,
            index: &self.index,
            embedder: self.embedder.as_ref(),
            lexicon: &self.lexicon,
            gazetteer: &self.gazetteer,
            settings: &self.fusion,
        }
    }

    pub fn build_context(&self, query: &str, k: usize) -> Result<ContextBundle> {
        let bundle = self.sources().build_context(query, k)?;
        let mut cache = self.bundles.lock().unwrap_or_else(|e| e.into_inner());
        if !cache.iter().any(|b| b.id == bundle.id) {
            if cache.len() == BUNDLE_CACHE {
                cache.pop_front();
            }
            cache.push_back(bundle.clone());
        }
        Ok(bundle)
    }

    /// A recently built bundle, for retrying a failed response.
    pub fn bundle(&self, id: &str) -> Option<ContextBundle> {
        let cache = self.bundles.lock().unwrap_or_else(|e| e.into_inner());
        cache.iter().find(|b| b.id == id).cloned()
    }

    fn forget_bundles(&self, fragment: &FragmentId) {
        let mut cache = self.bundles.lock().unwrap_or_else(|e| e.into_inner());
        cache.retain(|b| b.label_of(fragment).is_none());
    }

    pub fn respond(
        &self,
        bundle: &ContextBundle,
        query: &str,
        client: &dyn DialogueClient,
    ) -> Result<String> {
        respond(bundle, query, client, self.seed)
    }

    pub fn similar(&self, query: &str, k: usize) -> Vec<(FragmentId, f64)> {
        self.index.similar(self.embedder.as_ref(), query, k)
    }

    pub fn expression(&self) -> ExpressionState {
        derive_expression(&self.graph, &self.avatar)
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        Snapshot::of(&self.graph)
    }

    /// Graph rebuilt from the log alone.
    pub fn replayed_graph(&self) -> MemoryGraph {
        MemoryGraph::replay(self.graph.params.clone(), self.log.events())
    }
}
