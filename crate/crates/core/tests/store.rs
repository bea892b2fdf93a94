mod common;

use common::*;
use dcm_core::config::EngineConfig;
use dcm_core::embed::{Embedder, HashEmbedder};
use dcm_core::{DcmError, Engine, EventLog, MemoryGraph, Snapshot, StubClient, WeightParams};

/// SHA-256 of the canonical snapshot of an empty graph with default params.
const EMPTY_GRAPH_HASH: &str = "0b5636673a876f104022ccf61fa3071b0b273813d59d454e476fb47e48c07eb7";

#[test]
fn empty_graph_hash_is_stable() {
    let snap = Snapshot::of(&MemoryGraph::new(WeightParams::default())).unwrap();
    assert_eq!(snap.hash, EMPTY_GRAPH_HASH);
    assert_eq!(engine().snapshot().unwrap().hash, EMPTY_GRAPH_HASH);
}

#[test]
fn similar_examples() {
    let mut eng = engine();
    assert!(eng.similar("anything", 3).is_empty());
    let lake = ingest(&mut eng, "s1", "I love Daming Lake");
    ingest(&mut eng, "s2", "the tram bell rang twice");
    ingest(&mut eng, "s3", "kites over the river at dawn");
    let hits = eng.similar("I love Daming Lake", 2);
    assert_eq!(hits[0].0, lake);
    assert!((hits[0].1 - 1.0).abs() < 1e-9);
    assert_eq!(hits.len(), 2);

    let all = eng.similar("the river", 50);
    assert_eq!(all.len(), 3);
    let mut sorted = all.clone();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    assert_eq!(all, sorted);
}

#[test]
fn embedder_is_deterministic_and_unit_length() {
    let a = HashEmbedder::new(256, 42);
    let b = HashEmbedder::new(256, 42);
    let v = a.embed("The springs of Jinan flow through my memory");
    assert_eq!(v, b.embed("The springs of Jinan flow through my memory"));
    assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
    assert_ne!(v, HashEmbedder::new(256, 43).embed("The springs of Jinan flow through my memory"));
}

#[test]
fn interleavings_of_merged_utterances_agree() {
    let utterances = [
        ("s1", "I love Daming Lake", 0.2),
        ("s2", "I love Daming Lake!", 0.9),
        ("s3", "i love daming lake", 0.5),
    ];
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut hashes = Vec::new();
    for order in orders {
        let mut eng = engine();
        for i in order {
            let (s, t, e) = utterances[i];
            ingest_e(&mut eng, s, t, e);
        }
        assert_eq!(eng.graph().fragments.len(), 1);
        hashes.push(eng.snapshot().unwrap().hash);
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn deleting_the_sole_contribution_removes_the_fragment() {
    let mut eng = engine();
    let day = eng.clock();
    let sib = eng.ingest_fragment("I have siblings", "s1", None, &[], day).unwrap();
    ingest(&mut eng, "s2", "I'm alone");
    eng.tick(1, &StubClient).unwrap();
    assert_eq!(eng.graph().conflicts.len(), 1);
    assert_eq!(eng.graph().summaries.len(), 1);

    let receipt = eng.delete_contribution(&sib.contribution_id).unwrap();
    assert!(receipt.fragment_removed);
    assert_eq!(receipt.remaining_frequency, 0);
    assert_eq!(receipt.conflicts_removed, 1);
    assert_eq!(receipt.summaries_marked_stale, 1);
    let g = eng.graph();
    assert!(g.fragment(&sib.fragment_id).is_none());
    assert!(g.clusters.values().all(|m| !m.contains(&sib.fragment_id)));
    assert!(g.conflicts.is_empty());
    assert!(matches!(
        eng.delete_contribution(&sib.contribution_id),
        Err(DcmError::NotFound(_))
    ));
    assert_replay_equivalent(&eng);
}

#[test]
fn deleting_one_of_two_keeps_the_fragment() {
    let mut eng = engine();
    let day = eng.clock();
    let a = eng.ingest_fragment("I love Daming Lake", "s1", Some(0.9), &[], day).unwrap();
    let b = eng.ingest_fragment("I love Daming Lake", "s2", Some(0.1), &[], day).unwrap();
    assert_eq!(a.fragment_id, b.fragment_id);
    let receipt = eng.delete_contribution(&a.contribution_id).unwrap();
    assert!(!receipt.fragment_removed);
    assert_eq!(receipt.remaining_frequency, 1);
    let f = eng.graph().fragment(&a.fragment_id).unwrap();
    assert_eq!(f.frequency, 1);
    assert!((f.emotion - 0.1).abs() < 1e-12);
    assert!((f.weight - (0.3 * 2f64.ln() + 0.5)).abs() < 1e-9);
    assert_replay_equivalent(&eng);
}

#[test]
fn unknown_contribution_is_not_found() {
    let mut eng = engine();
    assert!(matches!(
        eng.delete_contribution(&"c0000000000000000".into()),
        Err(DcmError::NotFound(_))
    ));
}

#[test]
fn log_file_replays_and_holds_no_deleted_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let config = EngineConfig {
        log_path: Some(path.clone()),
        ..EngineConfig::default()
    };
    let secret = "my grandmother hid plum candy in the piano";
    let hash = {
        let mut eng = Engine::new(&config).unwrap();
        let day = eng.clock();
        let out = eng.ingest_fragment(secret, "s1", None, &[], day).unwrap();
        ingest(&mut eng, "s2", "I love Daming Lake");
        eng.tick(2, &StubClient).unwrap();
        ingest(&mut eng, "s3", "I'm alone");
        ingest(&mut eng, "s4", "I have siblings");
        eng.delete_contribution(&out.contribution_id).unwrap();
        assert_replay_equivalent(&eng);
        eng.snapshot().unwrap().hash
    };
    let bytes = std::fs::read_to_string(&path).unwrap();
    assert!(!bytes.contains("plum candy"));
    assert!(bytes.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));

    let reopened = Engine::new(&config).unwrap();
    assert_eq!(reopened.snapshot().unwrap().hash, hash);
    let log = EventLog::open(&path).unwrap();
    assert_eq!(log.len(), reopened.log().len());
}

#[test]
fn snapshot_file_round_trip() {
    let mut eng = engine();
    ingest(&mut eng, "s1", "I love Daming Lake");
    ingest(&mut eng, "s2", "I'm alone");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("graph.json");
    let snap = eng.snapshot().unwrap();
    snap.write_to(&path).unwrap();
    let loaded = Snapshot::load(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(Snapshot::of(&loaded).unwrap(), snap);
    // Floats are stored with nine decimals.
    for (id, f) in &eng.graph().fragments {
        assert!((loaded.fragments[id].weight - f.weight).abs() < 1e-9);
    }
    assert_eq!(loaded.fragments.keys().collect::<Vec<_>>(), eng.graph().fragments.keys().collect::<Vec<_>>());
}
