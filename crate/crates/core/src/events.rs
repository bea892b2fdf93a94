//! Append-only event log.
//!
//! Every graph mutation is expressed as a [`GraphEvent`] and applied through
//! [`MemoryGraph::apply`], so replaying the log from an empty graph yields the
//! live graph exactly. Deleting a contribution appends an id-only tombstone
//! and redacts the text of the contribution's original ingest event; the log
//! file is rewritten in place when that happens.
//!
//! File format: JSON lines, one event per line, tagged by `kind`:
//!
//! ```text
//! {"kind":"ingest","day":0,"fragment_id":"f-000001","theme":"t-0001","new_theme":true,"contribution":{...}}
//! {"kind":"weight_update","day":0,"weights":[{"fragment_id":"f-000001","weight":0.707944154}]}
//! {"kind":"delete","day":3,"contribution_id":"c...","fragment_id":"f-000001","fragment_removed":true}
//! ```

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::lifecycle::SelfSummary;
use crate::memory::{
    Contribution, ContributionId, Day, FragmentId, MemoryFragment, MemoryGraph, Status, ThemeKey,
};
use crate::tension::{Claim, ConflictPair};

/// Contribution as recorded in the log. `text` is `None` once redacted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRecord {
    pub id: ContributionId,
    pub session: String,
    pub day: Day,
    pub text: Option<String>,
    pub emotion: f64,
    #[serde(default)]
    pub place_tags: BTreeSet<String>,
    #[serde(default)]
    pub claims: Vec<Claim>,
}

impl ContributionRecord {
    pub fn from_contribution(c: &Contribution) -> Self {
        Self {
            id: c.id.clone(),
            session: c.session.clone(),
            day: c.day,
            text: Some(c.text.clone()),
            emotion: c.emotion,
            place_tags: c.place_tags.clone(),
            claims: c.claims.clone(),
        }
    }

    fn to_contribution(&self) -> Contribution {
        Contribution {
            id: self.id.clone(),
            session: self.session.clone(),
            day: self.day,
            text: self.text.clone().unwrap_or_default(),
            emotion: self.emotion,
            place_tags: self.place_tags.clone(),
            claims: self.claims.clone(),
        }
    }

    fn redact(&mut self) {
        self.text = None;
        self.place_tags.clear();
        self.claims.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub fragment_id: FragmentId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphEvent {
    Ingest {
        day: Day,
        fragment_id: FragmentId,
        theme: ThemeKey,
        new_theme: bool,
        contribution: ContributionRecord,
    },
    Merge {
        day: Day,
        fragment_id: FragmentId,
        contribution: ContributionRecord,
    },
    WeightUpdate {
        day: Day,
        weights: Vec<WeightEntry>,
    },
    Conflict {
        pair: ConflictPair,
    },
    Tick {
        day: Day,
    },
    Decay {
        day: Day,
        fragment_id: FragmentId,
        weight: f64,
        retention: f64,
        low_weight_days: u32,
    },
    Recover {
        day: Day,
        fragment_id: FragmentId,
    },
    Fade {
        day: Day,
        fragment_id: FragmentId,
        weight: f64,
        retention: f64,
    },
    Archive {
        day: Day,
        fragment_id: FragmentId,
    },
    Restore {
        day: Day,
        fragment_id: FragmentId,
    },
    Delete {
        day: Day,
        contribution_id: ContributionId,
        fragment_id: FragmentId,
        fragment_removed: bool,
    },
    Summary {
        summary: SelfSummary,
    },
}

impl GraphEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            GraphEvent::Ingest { .. } => "ingest",
            GraphEvent::Merge { .. } => "merge",
            GraphEvent::WeightUpdate { .. } => "weight_update",
            GraphEvent::Conflict { .. } => "conflict",
            GraphEvent::Tick { .. } => "tick",
            GraphEvent::Decay { .. } => "decay",
            GraphEvent::Recover { .. } => "recover",
            GraphEvent::Fade { .. } => "fade",
            GraphEvent::Archive { .. } => "archive",
            GraphEvent::Restore { .. } => "restore",
            GraphEvent::Delete { .. } => "delete",
            GraphEvent::Summary { .. } => "summary",
        }
    }
}

impl MemoryGraph {
    /// Applies one event. Events reference fragments that exist; applying a
    /// log out of order is a programming error and panics.
    pub fn apply(&mut self, event: &GraphEvent) {
        match event {
            GraphEvent::Ingest {
                fragment_id,
                theme,
                new_theme,
                contribution,
                ..
            } => {
                self.bump_session(&contribution.session);
                if *new_theme {
                    self.next_theme += 1;
                }
                self.next_fragment += 1;
                let fragment = MemoryFragment::new(
                    fragment_id.clone(),
                    theme.clone(),
                    contribution.to_contribution(),
                );
                self.insert_fragment(fragment);
            }
            GraphEvent::Merge {
                fragment_id,
                contribution,
                ..
            } => {
                self.bump_session(&contribution.session);
                let f = self.fragment_mut(fragment_id);
                f.contributions
                    .insert(contribution.id.clone(), contribution.to_contribution());
                f.retention = 1.0;
                f.refresh_aggregates();
            }
            GraphEvent::WeightUpdate { weights, .. } => {
                for w in weights {
                    self.fragment_mut(&w.fragment_id).weight = w.weight;
                }
            }
            GraphEvent::Conflict { pair } => {
                if !self.conflicts.contains(pair) {
                    self.conflicts.push(pair.clone());
                }
            }
            GraphEvent::Tick { day } => self.clock = *day,
            GraphEvent::Decay {
                fragment_id,
                weight,
                retention,
                low_weight_days,
                ..
            } => {
                let f = self.fragment_mut(fragment_id);
                f.status = Status::Decaying;
                f.weight = *weight;
                f.retention = *retention;
                f.low_weight_days = *low_weight_days;
            }
            GraphEvent::Recover { fragment_id, .. } => {
                let f = self.fragment_mut(fragment_id);
                f.status = Status::Active;
                f.low_weight_days = 0;
            }
            GraphEvent::Fade {
                fragment_id,
                weight,
                retention,
                ..
            } => {
                let f = self.fragment_mut(fragment_id);
                f.weight = *weight;
                f.retention = *retention;
            }
            GraphEvent::Archive { fragment_id, .. } => {
                let theme = {
                    let f = self.fragment_mut(fragment_id);
                    f.status = Status::Archived;
                    f.theme.clone()
                };
                self.leave_cluster(&theme, fragment_id);
                self.conflicts.retain(|c| !c.involves(fragment_id));
            }
            GraphEvent::Restore { fragment_id, .. } => {
                let theme = {
                    let f = self.fragment_mut(fragment_id);
                    f.status = Status::Active;
                    f.low_weight_days = 0;
                    f.retention = 1.0;
                    f.theme.clone()
                };
                self.clusters
                    .entry(theme)
                    .or_default()
                    .insert(fragment_id.clone());
            }
            GraphEvent::Delete {
                contribution_id,
                fragment_id,
                ..
            } => self.apply_delete(contribution_id, fragment_id),
            GraphEvent::Summary { summary } => self.summaries.push(summary.clone()),
        }
    }

    fn apply_delete(&mut self, contribution_id: &ContributionId, fragment_id: &FragmentId) {
        let f = self.fragment_mut(fragment_id);
        f.contributions.remove(contribution_id);
        if f.contributions.is_empty() {
            let theme = f.theme.clone();
            self.fragments.remove(fragment_id);
            self.leave_cluster(&theme, fragment_id);
        } else {
            f.refresh_aggregates();
        }
        // drop pairs whose stances no longer hold
        let fragments = &self.fragments;
        self.conflicts.retain(|c| {
            let holds = |id: &FragmentId| {
                fragments.get(id).map_or(Vec::new(), |f| {
                    f.claims
                        .iter()
                        .filter(|cl| cl.topic == c.topic)
                        .map(|cl| cl.stance)
                        .collect()
                })
            };
            let (a, b) = (holds(&c.fragment_a), holds(&c.fragment_b));
            a.iter().any(|sa| b.iter().any(|sb| sa != sb))
        });
        for s in &mut self.summaries {
            if s.source_fragment_ids.contains(fragment_id) {
                s.stale = true;
                s.text.clear();
            }
        }
    }

    fn bump_session(&mut self, session: &str) {
        *self.session_counters.entry(session.to_string()).or_insert(0) += 1;
    }

    fn fragment_mut(&mut self, id: &FragmentId) -> &mut MemoryFragment {
        self.fragments
            .get_mut(id)
            .unwrap_or_else(|| panic!("event references unknown fragment {id}"))
    }

    /// Rebuilds a graph from an event sequence.
    pub fn replay<'a>(
        params: crate::memory::WeightParams,
        events: impl IntoIterator<Item = &'a GraphEvent>,
    ) -> Self {
        let mut graph = MemoryGraph::new(params);
        for e in events {
            graph.apply(e);
        }
        graph
    }
}

/// In-memory log with an optional JSON-lines file behind it.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<GraphEvent>,
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file, loading any events already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let events = if path.exists() {
            read_jsonl(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            events,
            path: Some(path),
            writer: Some(BufWriter::new(file)),
        })
    }

    pub fn events(&self) -> &[GraphEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends events; with a file behind the log they are flushed and
    /// synced before this returns.
    pub fn append(&mut self, batch: &[GraphEvent]) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            for e in batch {
                serde_json::to_writer(&mut *w, e)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        self.events.extend_from_slice(batch);
        Ok(())
    }

    /// Strips the text of a contribution's ingest or merge event and of any
    /// summary built from its fragment.
    pub fn redact(&mut self, contribution: &ContributionId, fragment: &FragmentId) -> Result<()> {
        let mut touched = false;
        for e in &mut self.events {
            match e {
                GraphEvent::Ingest { contribution: c, .. } | GraphEvent::Merge { contribution: c, .. }
                    if &c.id == contribution && c.text.is_some() =>
                {
                    c.redact();
                    touched = true;
                }
                GraphEvent::Summary { summary }
                    if summary.source_fragment_ids.contains(fragment) && !summary.text.is_empty() =>
                {
                    summary.text.clear();
                    touched = true;
                }
                _ => {}
            }
        }
        if touched {
            self.rewrite()?;
        }
        Ok(())
    }

    fn rewrite(&mut self) -> Result<()> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        self.writer = None;
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            for e in &self.events {
                serde_json::to_writer(&mut w, e)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        std::fs::rename(&tmp, &path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        self.writer = Some(BufWriter::new(file));
        Ok(())
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GraphEvent>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| DcmError::Corpus {
            line: i + 1,
            message: format!("bad event: {e}"),
        })?;
        events.push(event);
    }
    Ok(events)
}
