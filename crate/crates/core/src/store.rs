//! Similarity retrieval and canonical snapshots.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::embed::{dot, Embedder};
use crate::error::{DcmError, Result};
use crate::memory::{ContributionId, FragmentId, MemoryGraph};

/// Exact cosine index over live fragments, keyed by fragment id. Vectors are
/// recomputed whenever a fragment's canonical text changes.
#[derive(Debug, Default, Clone)]
pub struct VectorIndex {
    entries: BTreeMap<FragmentId, (String, Vec<f64>)>,
}

impl VectorIndex {
    pub fn build(graph: &MemoryGraph, embedder: &dyn Embedder) -> Self {
        let mut index = Self::default();
        index.sync(graph, embedder);
        index
    }

    /// Brings the index in line with the graph's live fragments.
    pub fn sync(&mut self, graph: &MemoryGraph, embedder: &dyn Embedder) {
        self.entries
            .retain(|id, _| graph.fragment(id).is_some_and(|f| f.is_live()));
        for f in graph.live() {
            let stale = self.entries.get(&f.id).is_none_or(|(text, _)| text != &f.text);
            if stale {
                self.entries
                    .insert(f.id.clone(), (f.text.clone(), embedder.embed(&f.text)));
            }
        }
    }

    pub fn vector(&self, id: &FragmentId) -> Option<&[f64]> {
        self.entries.get(id).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-k live fragments by cosine against a unit query vector. Ties go
    /// to the smaller id.
    pub fn similar_to(&self, query: &[f64], k: usize) -> Vec<(FragmentId, f64)> {
        let mut scored: Vec<(FragmentId, f64)> = self
            .entries
            .iter()
            .map(|(id, (_, v))| (id.clone(), dot(query, v)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    pub fn similar(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
    ) -> Vec<(FragmentId, f64)> {
        if k == 0 || self.entries.is_empty() {
            return Vec::new();
        }
        self.similar_to(&embedder.embed(query), k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionReceipt {
    pub contribution_id: ContributionId,
    pub fragment_id: FragmentId,
    pub fragment_removed: bool,
    pub remaining_frequency: u32,
    pub conflicts_removed: usize,
    pub summaries_marked_stale: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub bytes: Vec<u8>,
    /// Lowercase hex SHA-256 of `bytes`.
    pub hash: String,
}

impl Snapshot {
    pub fn of(graph: &MemoryGraph) -> Result<Self> {
        let bytes = canonical_json(&serde_json::to_value(graph)?);
        Ok(Self {
            hash: sha256_hex(&bytes),
            bytes,
        })
    }

    pub fn load(bytes: &[u8]) -> Result<MemoryGraph> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.bytes)?;
        f.sync_all()?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Canonical JSON: object keys sorted, no whitespace, integers verbatim and
/// every float printed with exactly nine decimals.
pub fn canonical_json(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.extend_from_slice(value.to_string().as_bytes());
        }
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(0.0);
                let s = format!("{x:.9}");
                let s = if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                    "0.000000000".to_string()
                } else {
                    s
                };
                out.extend_from_slice(s.as_bytes());
            } else {
                out.extend_from_slice(n.to_string().as_bytes());
            }
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push(b'{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                out.extend_from_slice(Value::String(k.clone()).to_string().as_bytes());
                out.push(b':');
                write_canonical(&map[k], out);
            }
            out.push(b'}');
        }
    }
}

/// Parses `bytes` and checks they are already canonical.
pub fn verify_canonical(bytes: &[u8]) -> Result<()> {
    let value: Value = serde_json::from_slice(bytes)?;
    if canonical_json(&value) != bytes {
        return Err(DcmError::InvalidArgument("snapshot is not canonical".into()));
    }
    Ok(())
}
