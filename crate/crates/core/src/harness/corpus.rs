//! Corpus files: JSON lines, one record per line.
//!
//! ```text
//! {"day":0,"session_id":"s1","text":"I love the lake"}
//! {"day":0,"session_id":"s2","text":"I see myself by Daming Lake at sunset","location":"Daming Lake"}
//! {"day":1,"session_id":"s1","text":"I love the lake","emotion":0.9}
//! {"day":3,"session_id":"s9","text":"what do you remember about the lake?","probe":{"expected_fragment_text":"I love the lake"}}
//! {"day":4,"session_id":"s1","text":"I love the lake","delete":true}
//! ```
//!
//! Records with `probe` are queries and are not ingested. Records with
//! `delete: true` remove that session's contribution with the same text.
//! Days never decrease.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::memory::Day;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub expected_fragment_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub day: Day,
    pub session_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub delete: bool,
}

impl CorpusRecord {
    pub fn utterance(day: Day, session: &str, text: &str) -> Self {
        Self {
            day,
            session_id: session.to_string(),
            text: text.to_string(),
            location: None,
            emotion: None,
            probe: None,
            delete: false,
        }
    }
}

pub fn parse_corpus(source: &str) -> Result<Vec<CorpusRecord>> {
    parse_lines(source.lines().map(|l| Ok(l.to_string())))
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    parse_lines(reader.lines().map(|l| l.map_err(DcmError::from)))
}

fn parse_lines(lines: impl Iterator<Item = Result<String>>) -> Result<Vec<CorpusRecord>> {
    let mut records: Vec<CorpusRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DcmError::Corpus {
            line: line_no,
            message,
        };
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if record.text.trim().is_empty() {
            return Err(bad("empty text".into()));
        }
        if let Some(prev) = records.last() {
            if record.day < prev.day {
                return Err(bad(format!("day {} after day {}", record.day, prev.day)));
            }
        }
        if record.probe.is_some() && record.delete {
            return Err(bad("a record cannot be both a probe and a delete".into()));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&corpus_bytes(records)?)?;
    out.flush()?;
    Ok(())
}

pub fn corpus_bytes(records: &[CorpusRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}
