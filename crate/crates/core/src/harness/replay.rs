//! Deterministic corpus replay.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::dialogue::{DialogueClient, StubClient};
use crate::engine::Engine;
use crate::error::{DcmError, Result};
use crate::events::GraphEvent;
use crate::harness::corpus::CorpusRecord;
use crate::lifecycle::LifecycleReport;
use crate::memory::{ContributionId, Day, Status};
use crate::store::{canonical_json, sha256_hex};
use crate::tension::ConflictPair;
use crate::text::normalize;

/// Replays records into an engine, ticking the clock up to each record's
/// day first.
pub struct Driver<'c> {
    pub engine: Engine,
    client: &'c dyn DialogueClient,
    pub lifecycle: Vec<LifecycleReport>,
    pub ingested: usize,
    pub merged: usize,
    pub deleted: usize,
    pub probes: usize,
}

pub enum Step<'r> {
    Ingested,
    Deleted,
    Probe(&'r CorpusRecord),
}

impl<'c> Driver<'c> {
    pub fn new(config: &EngineConfig, client: &'c dyn DialogueClient) -> Result<Self> {
        Ok(Self {
            engine: Engine::new(config)?,
            client,
            lifecycle: Vec::new(),
            ingested: 0,
            merged: 0,
            deleted: 0,
            probes: 0,
        })
    }

    pub fn advance_to(&mut self, day: Day) -> Result<()> {
        let clock = self.engine.clock();
        if day > clock {
            let report = self.engine.tick(day - clock, self.client)?;
            self.lifecycle.push(report);
        }
        Ok(())
    }

    pub fn step<'r>(&mut self, line: usize, record: &'r CorpusRecord) -> Result<Step<'r>> {
        let at_line = |e: DcmError| DcmError::Corpus {
            line,
            message: e.to_string(),
        };
        self.advance_to(record.day).map_err(at_line)?;
        if record.probe.is_some() {
            self.probes += 1;
            return Ok(Step::Probe(record));
        }
        if record.delete {
            let id = self.find_contribution(record).ok_or_else(|| DcmError::Corpus {
                line,
                message: format!("no contribution of {} to delete", record.session_id),
            })?;
            self.engine.delete_contribution(&id).map_err(at_line)?;
            self.deleted += 1;
            return Ok(Step::Deleted);
        }
        let outcome = match &record.location {
            Some(place) => {
                let caption_day = self.engine.clock();
                debug_assert_eq!(caption_day, record.day);
                self.engine
                    .ingest_photo_caption(&record.text, place, &record.session_id, false)
            }
            None => self.engine.ingest_fragment(
                &record.text,
                &record.session_id,
                record.emotion,
                &[],
                record.day,
            ),
        }
        .map_err(at_line)?;
        self.ingested += 1;
        self.merged += usize::from(outcome.merged);
        Ok(Step::Ingested)
    }

    fn find_contribution(&self, record: &CorpusRecord) -> Option<ContributionId> {
        let text = normalize(&record.text);
        self.engine
            .graph()
            .fragments
            .values()
            .flat_map(|f| f.contributions.values())
            .find(|c| c.session == record.session_id && c.text == text)
            .map(|c| c.id.clone())
    }

    /// One final lifecycle pass for the last corpus day.
    pub fn finish(&mut self, last_day: Option<Day>) -> Result<()> {
        if let Some(day) = last_day {
            self.advance_to(day + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentCounts {
    pub active: usize,
    pub decaying: usize,
    pub archived: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub day: Day,
    pub stale: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub records: usize,
    pub ingested: usize,
    pub merged: usize,
    pub deleted: usize,
    pub probes: usize,
    pub final_day: Day,
    pub graph_hash: String,
    pub fragments: FragmentCounts,
    pub lifecycle: Vec<LifecycleReport>,
    pub conflict_history: Vec<ConflictPair>,
    pub summaries: Vec<SummaryLine>,
    pub log_events: usize,
}

impl ReplayReport {
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&canonical_json(&serde_json::to_value(self)?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub report_hash: String,
    pub report: ReplayReport,
}

/// Replays a corpus with the stub dialogue client. `seed` feeds both the
/// embedder and the client. The event log is kept in memory.
pub fn replay(records: &[CorpusRecord], config: &EngineConfig, seed: u64) -> Result<ReportFile> {
    let mut config = config.clone();
    config.seed = seed;
    config.embedder.seed = seed;
    config.log_path = None;
    let client = StubClient;
    let mut driver = Driver::new(&config, &client)?;
    for (i, record) in records.iter().enumerate() {
        driver.step(i + 1, record)?;
    }
    driver.finish(records.last().map(|r| r.day))?;
    let report = report_of(&driver, records.len())?;
    Ok(ReportFile {
        report_hash: report.hash()?,
        report,
    })
}

pub fn report_of(driver: &Driver<'_>, records: usize) -> Result<ReplayReport> {
    let engine = &driver.engine;
    let graph = engine.graph();
    let conflict_history = engine
        .log()
        .events()
        .iter()
        .filter_map(|e| match e {
            GraphEvent::Conflict { pair } => Some(pair.clone()),
            _ => None,
        })
        .collect();
    Ok(ReplayReport {
        records,
        ingested: driver.ingested,
        merged: driver.merged,
        deleted: driver.deleted,
        probes: driver.probes,
        final_day: graph.clock,
        graph_hash: engine.snapshot()?.hash,
        fragments: FragmentCounts {
            active: graph.count_by_status(Status::Active),
            decaying: graph.count_by_status(Status::Decaying),
            archived: graph.count_by_status(Status::Archived),
        },
        lifecycle: driver.lifecycle.clone(),
        conflict_history,
        summaries: graph
            .summaries
            .iter()
            .map(|s| SummaryLine {
                day: s.day,
                stale: s.stale,
                text: s.text.clone(),
            })
            .collect(),
        log_events: engine.log().len(),
    })
}
