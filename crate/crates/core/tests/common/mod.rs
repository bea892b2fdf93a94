//! Helpers shared by the integration tests: random graph builders and an
//! independent weight oracle.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use dcm_core::memory::Contribution;
use dcm_core::{
    ContributionId, Engine, FragmentId, MemoryFragment, MemoryGraph, Status, ThemeKey, WeightParams,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOCAB: &[&str] = &[
    "lake", "spring", "willow", "lantern", "river", "tea", "bridge", "rain", "kite", "market",
    "dumpling", "bell", "temple", "garden", "moon", "boat", "song", "stone", "street", "window",
];

pub fn contribution(id: &str, day: u32, text: &str, emotion: f64) -> Contribution {
    Contribution {
        id: ContributionId::from(id),
        session: "s".into(),
        day,
        text: text.into(),
        emotion,
        place_tags: BTreeSet::new(),
        claims: Vec::new(),
    }
}

/// A graph of up to `max_fragments` fragments spread over a few themes,
/// with random mention sets, frequencies, emotions and a few archived or
/// decaying members. Built directly, not through ingestion.
pub fn random_graph(seed: u64, max_fragments: usize) -> MemoryGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = MemoryGraph::new(WeightParams::default());
    let n = rng.random_range(1..=max_fragments);
    let themes = rng.random_range(1..=4u64);
    let mut cid = 0;
    for seq in 1..=n as u64 {
        let theme = ThemeKey::from_seq(rng.random_range(1..=themes));
        let mentions = rng.random_range(1..=4);
        let mut fragment: Option<MemoryFragment> = None;
        for _ in 0..mentions {
            cid += 1;
            let words = rng.random_range(1..=5);
            let text: Vec<&str> = (0..words).map(|_| *VOCAB.choose(&mut rng).unwrap()).collect();
            let c = contribution(
                &format!("c{cid:05}"),
                rng.random_range(0..5),
                &text.join(" "),
                rng.random_range(0.0..=1.0),
            );
            match fragment.as_mut() {
                None => fragment = Some(MemoryFragment::new(FragmentId::from_seq(seq), theme.clone(), c)),
                Some(f) => {
                    f.contributions.insert(c.id.clone(), c);
                    f.refresh_aggregates();
                }
            }
        }
        let mut fragment = fragment.unwrap();
        fragment.status = match rng.random_range(0..10) {
            0 => Status::Archived,
            1 => Status::Decaying,
            _ => Status::Active,
        };
        fragment.retention = if rng.random_bool(0.3) { rng.random_range(0.05..1.0) } else { 1.0 };
        graph.insert_fragment(fragment);
    }
    graph
}

fn oracle_jaccard(a: &HashSet<&str>, b: &HashSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Salience of `id` recomputed from the fragment table alone: alpha ln(f+1)
/// plus beta times its softmax share of emotion among the non-archived
/// fragments with the same theme, plus gamma times its mean Jaccard overlap
/// with those peers.
pub fn oracle_salience(graph: &MemoryGraph, id: &FragmentId) -> f64 {
    let me = &graph.fragments[id];
    let peers: Vec<&MemoryFragment> = graph
        .fragments
        .values()
        .filter(|f| f.theme == me.theme && f.status != Status::Archived)
        .collect();
    let denom: f64 = peers.iter().map(|f| f.emotion.exp()).sum();
    let share = me.emotion.exp() / denom;
    let mine: HashSet<&str> = me.mention_tokens.iter().map(String::as_str).collect();
    let mut overlap = 0.0;
    for p in peers.iter().filter(|p| p.id != me.id) {
        let theirs: HashSet<&str> = p.mention_tokens.iter().map(String::as_str).collect();
        overlap += oracle_jaccard(&mine, &theirs);
    }
    let others = peers.len() as f64 - 1.0;
    let resonance = if others >= 1.0 { overlap / others } else { 0.0 };
    let p = &graph.params;
    p.alpha * ((me.frequency as f64) + 1.0).ln() + p.beta * share + p.gamma * resonance
}

/// Largest |engine - oracle| over every live fragment; archived fragments
/// must be rejected by `compute_weight`.
pub fn max_weight_error(graph: &MemoryGraph) -> f64 {
    let mut worst: f64 = 0.0;
    for f in graph.fragments.values() {
        match graph.compute_weight(&f.id) {
            Ok(w) => {
                let expected = oracle_salience(graph, &f.id) * f.retention;
                worst = worst.max((w - expected).abs());
            }
            Err(_) => assert_eq!(f.status, Status::Archived, "{} rejected", f.id),
        }
    }
    worst
}

pub fn engine() -> Engine {
    Engine::with_params(WeightParams::default()).unwrap()
}

pub fn ingest(engine: &mut Engine, session: &str, text: &str) -> FragmentId {
    let day = engine.clock();
    engine.ingest_fragment(text, session, None, &[], day).unwrap().fragment_id
}

pub fn ingest_e(engine: &mut Engine, session: &str, text: &str, emotion: f64) -> FragmentId {
    let day = engine.clock();
    engine.ingest_fragment(text, session, Some(emotion), &[], day).unwrap().fragment_id
}

/// Asserts that the graph rebuilt from the event log hashes like the live one.
pub fn assert_replay_equivalent(engine: &Engine) {
    let live = engine.snapshot().unwrap();
    let replayed = dcm_core::Snapshot::of(&engine.replayed_graph()).unwrap();
    assert_eq!(live.hash, replayed.hash, "log replay diverged from live graph");
}

pub const PLACE_QUERIES: &[&str] = &[
    "What places do you remember?",
    "where did you go?",
    "Do you like this city?",
    "tell me about Baotu Spring",
    "which location did you visit",
    "Daming Lake",
];

/// An engine fed with random utterances and photo captions over a few
/// days, guaranteed to hold at least one live place-tagged fragment.
pub fn random_place_engine(seed: u64) -> Engine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let places: Vec<String> = dcm_core::Gazetteer::sample().places.into_iter().map(|p| p.name).collect();
    let mut eng = engine();
    let n = rng.random_range(1..40);
    for i in 0..n {
        let session = format!("s{}", rng.random_range(0..8));
        if rng.random_bool(0.15) {
            let place = places.choose(&mut rng).unwrap();
            let caption = format!("I see myself by {place} at {}", VOCAB.choose(&mut rng).unwrap());
            eng.ingest_photo_caption(&caption, place, &session, false).unwrap();
        } else {
            let words = rng.random_range(2..6);
            let text: Vec<&str> = (0..words).map(|_| *VOCAB.choose(&mut rng).unwrap()).collect();
            let day = eng.clock();
            eng.ingest_fragment(&text.join(" "), &session, Some(rng.random_range(0.0..=1.0)), &[], day)
                .unwrap();
        }
        if i % 7 == 6 {
            eng.tick(rng.random_range(1..4), &dcm_core::StubClient).unwrap();
        }
    }
    if !eng.graph().live().any(|f| !f.place_tags.is_empty()) {
        let place = places.choose(&mut rng).unwrap();
        eng.ingest_photo_caption(&format!("I see myself by {place}"), place, "s0", false)
            .unwrap();
    }
    eng
}

/// Place-intent bundles over `graphs` random graphs that lack a place-tagged
/// memory.
pub fn geo_violations(graphs: u64, seed: u64) -> usize {
    let mut violations = 0;
    for g in 0..graphs {
        let eng = random_place_engine(seed.wrapping_add(g));
        for (i, q) in PLACE_QUERIES.iter().enumerate() {
            let k = 1 + (g as usize + i) % 5;
            let b = eng.build_context(q, k).unwrap();
            if !b.memories.iter().any(|m| !m.place_tags.is_empty()) {
                violations += 1;
            }
        }
    }
    violations
}
