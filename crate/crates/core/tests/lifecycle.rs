mod common;

use common::*;
use dcm_core::{DcmError, Engine, FailingClient, FragmentId, Status, StubClient, WeightParams};

fn low_params() -> WeightParams {
    WeightParams {
        alpha: 0.05,
        beta: 0.05,
        ..WeightParams::default()
    }
}

/// Day on which a lone fragment of constant salience `s` is archived when
/// every low day halves its retention, or None within `horizon` days.
fn oracle_archive_day(s: f64, forget: f64, after: u32, horizon: u32) -> Option<u32> {
    let (mut retention, mut low) = (1.0f64, 0u32);
    for day in 1..=horizon {
        if s * retention < forget {
            retention *= 0.5;
            low += 1;
        } else {
            low = 0;
        }
        if low >= after {
            return Some(day);
        }
    }
    None
}

#[test]
fn low_fragment_archives_on_seventh_tick() {
    let mut eng = Engine::with_params(low_params()).unwrap();
    let id = ingest_e(&mut eng, "s1", "a heron stood in the reeds", 0.1);
    let w0 = eng.graph().fragment(&id).unwrap().weight;
    assert!((w0 - (0.05 * 2f64.ln() + 0.05)).abs() < 1e-12);
    assert_eq!(oracle_archive_day(w0, 0.1, 7, 30), Some(7));

    let mut last = w0;
    for day in 1..=7 {
        let report = eng.tick(1, &StubClient).unwrap();
        let f = eng.graph().fragment(&id).unwrap();
        if day < 7 {
            assert_eq!(f.status, Status::Decaying, "day {day}");
            assert_eq!(f.low_weight_days, day);
            assert!(f.weight < last, "decay must be strict");
            last = f.weight;
            assert_eq!(report.archived, 0);
        } else {
            assert_eq!(f.status, Status::Archived);
            assert_eq!(report.archived, 1);
            assert_eq!(report.days[0].archived, vec![id.clone()]);
        }
    }
    assert!(eng.graph().top_weighted(10).is_empty());
    assert!(eng.graph().clusters.values().all(|m| !m.contains(&id)));
    assert!(matches!(eng.graph().compute_weight(&id), Err(DcmError::StaleFragment(_))));
    assert_replay_equivalent(&eng);
}

#[test]
fn new_mention_rescues_a_decaying_fragment() {
    let mut eng = Engine::with_params(low_params()).unwrap();
    let text = "a heron stood in the reeds";
    let id = ingest_e(&mut eng, "s1", text, 0.1);
    let other = ingest_e(&mut eng, "s2", "the tram bell rang twice", 0.1);
    eng.tick(2, &StubClient).unwrap();
    assert_eq!(eng.graph().fragment(&id).unwrap().low_weight_days, 2);

    let day = eng.clock();
    eng.ingest_fragment(text, "s3", Some(0.1), &[], day).unwrap();
    eng.tick(1, &StubClient).unwrap();
    let f = eng.graph().fragment(&id).unwrap();
    assert!(f.weight >= 0.1, "{}", f.weight);
    assert_eq!(f.low_weight_days, 0);
    assert_eq!(f.status, Status::Active);

    eng.tick(4, &StubClient).unwrap();
    let g = eng.graph();
    assert_eq!(g.fragment(&other).unwrap().status, Status::Archived);
    assert_ne!(g.fragment(&id).unwrap().status, Status::Archived);
    assert_replay_equivalent(&eng);
}

#[test]
fn heavy_fragments_never_decay() {
    let mut eng = engine();
    ingest(&mut eng, "s1", "I love Daming Lake");
    ingest(&mut eng, "s2", "the tram bell rang twice");
    let report = eng.tick(3, &StubClient).unwrap();
    assert_eq!(report.decayed, 0);
    assert_eq!(report.archived, 0);
}

#[test]
fn zero_days_is_an_argument_error() {
    let mut eng = engine();
    assert!(matches!(eng.tick(0, &StubClient), Err(DcmError::InvalidArgument(_))));
}

#[test]
fn summary_uses_exactly_the_qualifying_fragments() {
    let mut eng = engine();
    assert_eq!(eng.tick(1, &StubClient).unwrap().summarized, 0);
    let old = ingest(&mut eng, "s1", "the tram bell rang twice");
    eng.tick(5, &StubClient).unwrap();
    assert!(eng.graph().fragment(&old).unwrap().weight < 0.5);

    let y = ingest(&mut eng, "s2", "I love Daming Lake");
    let z = ingest(&mut eng, "s3", "kites over the river at dawn");
    let before = eng.graph().summaries.len();
    let report = eng.tick(1, &StubClient).unwrap();
    assert_eq!(report.summarized, 1);
    let summary = eng.graph().summaries.last().unwrap();
    assert_eq!(eng.graph().summaries.len(), before + 1);
    let expected: std::collections::BTreeSet<FragmentId> = [y, z].into_iter().collect();
    assert_eq!(summary.source_fragment_ids, expected);
    assert!(summary.text.starts_with("I remember: "));
    assert!(!summary.stale);
}

#[test]
fn at_most_one_summary_per_day() {
    let mut eng = engine();
    ingest(&mut eng, "s1", "I love Daming Lake");
    eng.tick(9, &StubClient).unwrap();
    assert!(eng.graph().summaries.len() <= 9);
    assert!(eng.graph().summaries.windows(2).all(|w| w[0].day < w[1].day));
}

#[test]
fn deleting_a_source_marks_the_summary_stale() {
    let mut eng = engine();
    let day = eng.clock();
    let out = eng.ingest_fragment("I love Daming Lake", "s1", None, &[], day).unwrap();
    eng.tick(1, &StubClient).unwrap();
    assert_eq!(eng.graph().summaries.len(), 1);
    eng.delete_contribution(&out.contribution_id).unwrap();
    let s = &eng.graph().summaries[0];
    assert!(s.stale);
    assert!(!s.text.contains("Daming"));
    assert_replay_equivalent(&eng);
}

#[test]
fn failing_client_skips_the_summary_only() {
    let build = || {
        let mut eng = engine();
        ingest(&mut eng, "s1", "I love Daming Lake");
        ingest(&mut eng, "s2", "I'm alone");
        eng
    };
    let mut ok = build();
    let mut failing = build();
    ok.tick(2, &StubClient).unwrap();
    let report = failing
        .tick(2, &FailingClient { message: "offline".into() })
        .unwrap();
    assert_eq!(report.summarized, 0);
    assert_eq!(report.errors.len(), 2);
    assert!(failing.graph().summaries.is_empty());
    let mut g = ok.graph().clone();
    g.summaries.clear();
    assert_eq!(&g, failing.graph());
}

#[test]
fn same_inputs_same_reports() {
    let run = || {
        let mut eng = engine();
        let mut reports = Vec::new();
        for (i, t) in ["I love the lake", "I'm alone", "the tram bell rang twice", "I have siblings"]
            .iter()
            .enumerate()
        {
            ingest_e(&mut eng, &format!("s{i}"), t, 0.25 * i as f64);
            reports.push(eng.tick(2, &StubClient).unwrap());
        }
        reports
    };
    assert_eq!(run(), run());
}

#[test]
fn archived_fragment_can_be_restored() {
    let mut eng = Engine::with_params(low_params()).unwrap();
    let id = ingest(&mut eng, "s1", "a heron stood in the reeds");
    eng.tick(7, &StubClient).unwrap();
    assert_eq!(eng.graph().fragment(&id).unwrap().status, Status::Archived);
    eng.restore(&id).unwrap();
    let f = eng.graph().fragment(&id).unwrap();
    assert_eq!(f.status, Status::Active);
    assert!(eng.graph().top_weighted(1).iter().any(|f| f.id == id));
    assert!(matches!(eng.restore(&id), Err(DcmError::InvalidArgument(_))));
    assert_replay_equivalent(&eng);
}

#[test]
fn idle_memories_fade_unless_conflicted() {
    let mut eng = engine();
    let idle = ingest(&mut eng, "s1", "the tram bell rang twice");
    let a = ingest(&mut eng, "s2", "I have siblings");
    let b = ingest(&mut eng, "s3", "I'm alone");
    eng.tick(30, &StubClient).unwrap();
    let g = eng.graph();
    assert_eq!(g.fragment(&idle).unwrap().status, Status::Archived);
    for id in [a, b] {
        let f = g.fragment(&id).unwrap();
        assert_eq!(f.status, Status::Active);
        assert!((f.weight - (0.3 * 2f64.ln() + 0.5)).abs() < 1e-9);
    }
    assert_eq!(g.conflicts.len(), 1);
}
