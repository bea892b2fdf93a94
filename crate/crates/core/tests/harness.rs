use std::path::PathBuf;

use dcm_core::config::EngineConfig;
use dcm_core::harness::corpus::{corpus_bytes, parse_corpus};
use dcm_core::harness::{bench, gen_corpus, read_corpus, replay, write_corpus, CorpusRecord, GenSpec, Policy, Probe};
use dcm_core::DcmError;

const EMPTY_GRAPH_HASH: &str = "0b5636673a876f104022ccf61fa3071b0b273813d59d454e476fb47e48c07eb7";

fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn fixture_spec() -> GenSpec {
    GenSpec {
        turns: 50,
        days: 5,
        sessions: 6,
        seed: 11,
        planted_facts: 2,
        mentions_per_fact: 3,
        sessions_per_fact: 2,
        echoes_per_fact: 1,
        probe_gap: 10,
        contradiction_rate: 0.05,
        planted_conflicts: 1,
        place_rate: 0.1,
        deletions: 2,
    }
}

fn small_spec() -> GenSpec {
    GenSpec {
        turns: 600,
        days: 8,
        sessions: 30,
        probe_gap: 120,
        planted_facts: 4,
        deletions: 4,
        ..GenSpec::default()
    }
}

#[test]
fn empty_corpus_reports_empty_graph() {
    let file = replay(&[], &EngineConfig::default(), 0).unwrap();
    assert_eq!(file.report.graph_hash, EMPTY_GRAPH_HASH);
    assert_eq!(file.report.records, 0);
    assert!(file.report.lifecycle.is_empty());
}

/// The fixture is the generator's output for `fixture_spec`; the report hash
/// was produced once by `replay` and frozen. `UPDATE_GOLDEN=1` rewrites both.
#[test]
fn fifty_turn_fixture_matches_golden_hash() {
    let corpus = manifest("tests/fixtures/replay_50.jsonl");
    let golden = manifest("tests/golden/replay_50.hash");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        write_corpus(&corpus, &gen_corpus(&fixture_spec())).unwrap();
    }
    let records = read_corpus(&corpus).unwrap();
    assert_eq!(records.len(), 50);
    let file = replay(&records, &EngineConfig::default(), 0).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, format!("{}\n", file.report_hash)).unwrap();
    }
    assert_eq!(file.report_hash, std::fs::read_to_string(&golden).unwrap().trim());
    assert_eq!(file.report.hash().unwrap(), file.report_hash);
}

#[test]
fn replay_is_deterministic_and_seed_sensitive() {
    let records = gen_corpus(&small_spec());
    let a = replay(&records, &EngineConfig::default(), 3).unwrap();
    let b = replay(&records, &EngineConfig::default(), 3).unwrap();
    assert_eq!(a, b);
    let c = replay(&records, &EngineConfig::default(), 4).unwrap();
    assert_ne!(a.report.graph_hash, c.report.graph_hash);
}

#[test]
fn malformed_record_aborts_with_line() {
    let src = "{\"day\":0,\"session_id\":\"a\",\"text\":\"hi\"}\n{\"day\":0,\"session_id\":\"a\"}\n";
    assert!(matches!(parse_corpus(src), Err(DcmError::Corpus { line: 2, .. })));

    let mut records = vec![CorpusRecord::utterance(0, "a", "kites over the river")];
    let mut bad = CorpusRecord::utterance(0, "a", "me by the gate");
    bad.location = Some("Atlantis".into());
    records.push(bad);
    assert!(matches!(
        replay(&records, &EngineConfig::default(), 0),
        Err(DcmError::Corpus { line: 2, .. })
    ));
}

#[test]
fn same_spec_same_bytes() {
    let a = corpus_bytes(&gen_corpus(&small_spec())).unwrap();
    assert_eq!(a, corpus_bytes(&gen_corpus(&small_spec())).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_corpus(&path, &gen_corpus(&small_spec())).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), a);
}

#[test]
fn no_contradictions_no_conflicts() {
    let spec = GenSpec {
        contradiction_rate: 0.0,
        planted_conflicts: 0,
        ..small_spec()
    };
    let file = replay(&gen_corpus(&spec), &EngineConfig::default(), 0).unwrap();
    assert!(file.report.conflict_history.is_empty());
}

#[test]
fn planted_pairs_yield_conflicts() {
    let spec = GenSpec {
        contradiction_rate: 0.0,
        planted_conflicts: 2,
        ..small_spec()
    };
    let file = replay(&gen_corpus(&spec), &EngineConfig::default(), 0).unwrap();
    assert!(file.report.conflict_history.len() >= 2);
    let topics: std::collections::BTreeSet<_> =
        file.report.conflict_history.iter().map(|c| c.topic.clone()).collect();
    assert_eq!(topics.len(), 2);
}

#[test]
fn planted_fact_beats_recency() {
    let spec = small_spec();
    let report = bench(&gen_corpus(&spec), &EngineConfig::default(), &Policy::ALL, 5).unwrap();
    assert_eq!(report.probes, spec.planted_facts);
    for o in &report.outcomes {
        assert!(o.target.is_some());
        assert!(o.hits.contains(&Policy::Dcm), "{o:?}");
        assert!(!o.hits.contains(&Policy::Recency), "{o:?}");
    }
    assert!(report.recall(Policy::Dcm) >= report.recall(Policy::NaiveCosine));
    assert!(report.table().contains("naive-cosine"));
}

#[test]
fn single_record_probe_hits_everywhere() {
    let text = "the copper lantern was mended with red thread";
    let mut probe = CorpusRecord::utterance(0, "s2", text);
    probe.probe = Some(Probe { expected_fragment_text: text.into() });
    let records = vec![CorpusRecord::utterance(0, "s1", text), probe];
    let report = bench(&records, &EngineConfig::default(), &Policy::ALL, 5).unwrap();
    for p in Policy::ALL {
        assert_eq!(report.recall(p), 1.0, "{p}");
    }
}

#[test]
fn deleted_answer_misses_everywhere() {
    let text = "the copper lantern was mended with red thread";
    let mut del = CorpusRecord::utterance(1, "s1", text);
    del.delete = true;
    let mut probe = CorpusRecord::utterance(1, "s2", "what do you remember about the copper lantern?");
    probe.probe = Some(Probe { expected_fragment_text: text.into() });
    let records = vec![
        CorpusRecord::utterance(0, "s1", text),
        CorpusRecord::utterance(0, "s3", "kites over the river at dawn"),
        del,
        probe,
    ];
    let report = bench(&records, &EngineConfig::default(), &Policy::ALL, 5).unwrap();
    assert!(report.outcomes[0].target.is_none());
    for p in Policy::ALL {
        assert_eq!(report.recall(p), 0.0, "{p}");
    }
}

#[test]
fn bench_needs_probes() {
    let records = vec![CorpusRecord::utterance(0, "s1", "hello")];
    assert!(matches!(
        bench(&records, &EngineConfig::default(), &Policy::ALL, 5),
        Err(DcmError::InvalidArgument(_))
    ));
}
