//! Deterministic synthetic corpora.
//!
//! A corpus has `turns` records spread evenly over `days` days and
//! `sessions` speakers. Records are drawn from:
//!
//! * noise: subject, verb, object and modifier pools. No noise word is a
//!   lexicon term, negation cue or gazetteer name, so noise never carries
//!   claims or place tags.
//! * planted facts: `planted_facts` distinct sentences about an object,
//!   each repeated verbatim `mentions_per_fact` times by
//!   `sessions_per_fact` sessions, plus `echoes_per_fact` paraphrases that
//!   share its key words. A probe asking about the object follows
//!   `probe_gap` turns after the last mention when it fits in the corpus.
//! * planted conflicts: `planted_conflicts` topics each said once with a
//!   positive and once with a negative stance.
//! * stance noise: each free turn becomes a random stance utterance with
//!   probability `contradiction_rate`.
//! * captions: each free turn becomes a photo caption at a gazetteer place
//!   with probability `place_rate`.
//! * deletions: `deletions` noise turns late in the corpus are replaced by
//!   delete records for distinct earlier noise utterances.
//!
//! With `contradiction_rate = 0` and `planted_conflicts = 0` a corpus
//! carries no claims at all.

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fusion::Gazetteer;
use crate::harness::corpus::{CorpusRecord, Probe};
use crate::memory::Day;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub turns: usize,
    pub days: u32,
    pub sessions: usize,
    pub seed: u64,
    pub planted_facts: usize,
    pub mentions_per_fact: usize,
    pub sessions_per_fact: usize,
    pub echoes_per_fact: usize,
    pub probe_gap: usize,
    pub contradiction_rate: f64,
    pub planted_conflicts: usize,
    pub place_rate: f64,
    pub deletions: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            turns: 2500,
            days: 30,
            sessions: 120,
            seed: 7,
            planted_facts: 8,
            mentions_per_fact: 5,
            sessions_per_fact: 3,
            echoes_per_fact: 2,
            probe_gap: 200,
            contradiction_rate: 0.02,
            planted_conflicts: 2,
            place_rate: 0.08,
            deletions: 10,
        }
    }
}

const SUBJECTS: &[&str] = &[
    "the baker", "a cyclist", "my neighbor", "the night clerk", "a tailor",
    "the ferryman", "a student", "the porter", "a painter", "the watchmaker",
    "a fisherman", "the librarian", "a courier", "the gardener",
];
const VERBS: &[&str] = &[
    "carried", "painted", "repaired", "sold", "found", "mended", "counted",
    "wrapped", "polished", "borrowed", "dropped", "stacked", "sketched",
];
const OBJECTS: &[&str] = &[
    "a blue kettle", "three umbrellas", "a cracked mirror", "some walnut shells",
    "a straw basket", "the brass bell", "a pile of letters", "two green bottles",
    "a wool scarf", "the chess board", "a bag of chestnuts", "an empty birdcage",
    "a stack of maps", "the porcelain bowl",
];
const MODIFIERS: &[&str] = &[
    "before the rain", "after lunch", "on a windy morning", "near the bus stop",
    "during the festival", "in the late afternoon", "beside the noodle stall",
    "under the plane trees", "by the tram depot", "at the corner shop",
    "before the shops closed", "on the second floor",
];

const FACT_ADJECTIVES: &[&str] = &[
    "copper", "silver", "wooden", "jade", "crimson", "lacquered", "bamboo", "amber",
    "ivory", "indigo",
];
const FACT_THINGS: &[&str] = &[
    "lantern", "kite", "teapot", "bicycle", "fan", "clock", "boat", "drum",
    "compass", "abacus",
];
const FACT_TAILS: &[&str] = &[
    "hung above the bookshop door for decades",
    "was a gift from my first teacher",
    "sat on the windowsill of the tea house",
    "was lost once and found again in autumn",
    "had a small crack along one edge",
    "was mended with red thread",
    "came from a workshop across the river",
    "was carried through every summer parade",
    "stood beside the ticket window",
    "was painted with two cranes",
];
const ECHO_TEMPLATES: &[&str] = &[
    "I still think about the {adj} {thing}",
    "that {adj} {thing} again",
    "the {adj} {thing} comes back to me",
];

/// Positive then negative stance sentence per lexicon topic.
const STANCES: &[(&str, &str)] = &[
    ("I had two older siblings", "I was always alone as a child"),
    ("I was born by these waters", "I was only ever a visitor here"),
    ("I adore the city streets at dusk", "I despise this crowded city"),
    ("I feel lonely most evenings", "I always had friends around me"),
    ("I am still young at heart", "I am elderly and slow now"),
];
const CAPTION_TIMES: &[&str] = &["sunset", "dawn", "noon", "dusk", "midnight"];

#[derive(Clone)]
enum Slot {
    Fact(usize),
    Echo(usize, usize),
    Probe(usize),
    Stance(usize, bool),
}

pub fn gen_corpus(spec: &GenSpec) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let turns = spec.turns;
    let sessions = spec.sessions.max(1);
    let session_name = |i: usize| format!("s{i:03}");
    let mut slots: Vec<Option<(Slot, String)>> = vec![None; turns];

    let facts = spec
        .planted_facts
        .min(FACT_ADJECTIVES.len())
        .min(FACT_THINGS.len());
    let per_fact = spec.mentions_per_fact + spec.echoes_per_fact + 1;
    let window = (per_fact * 12).max(1);
    for fact in 0..facts {
        let fact_sessions: Vec<usize> = index::sample(
            &mut rng,
            sessions,
            spec.sessions_per_fact.clamp(1, sessions),
        )
        .into_vec();
        let latest_start = turns.saturating_sub(window + spec.probe_gap + 1);
        let start = rng.random_range(0..=latest_start);
        let mut last = None;
        for m in 0..spec.mentions_per_fact + spec.echoes_per_fact {
            let session = session_name(fact_sessions[m % fact_sessions.len()]);
            let slot = if m < spec.mentions_per_fact {
                Slot::Fact(fact)
            } else {
                Slot::Echo(fact, m - spec.mentions_per_fact)
            };
            let at = rng.random_range(start..(start + window).min(turns).max(start + 1));
            if let Some(at) = claim(&mut slots, at, (slot, session)) {
                last = Some(last.map_or(at, |l: usize| l.max(at)));
            }
        }
        if let Some(last) = last {
            let at = last + spec.probe_gap;
            if at < turns {
                let asker = session_name(rng.random_range(0..sessions));
                claim(&mut slots, at, (Slot::Probe(fact), asker));
            }
        }
    }

    let topics = index::sample(&mut rng, STANCES.len(), spec.planted_conflicts.min(STANCES.len()));
    for topic in topics {
        for positive in [true, false] {
            let at = rng.random_range(0..turns.max(1));
            let session = session_name(rng.random_range(0..sessions));
            claim(&mut slots, at, (Slot::Stance(topic, positive), session));
        }
    }

    let places: Vec<String> = Gazetteer::sample().places.into_iter().map(|p| p.name).collect();
    let mut records = Vec::with_capacity(turns);
    let mut noise_turns = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        let day = (i as u64 * u64::from(spec.days.max(1)) / turns as u64) as Day;
        let record = match slot {
            Some((Slot::Fact(f), session)) => {
                let mut r = CorpusRecord::utterance(day, &session, &fact_text(f));
                r.emotion = Some(0.7);
                r
            }
            Some((Slot::Echo(f, e), session)) => {
                let template = ECHO_TEMPLATES[e % ECHO_TEMPLATES.len()];
                let text = template
                    .replace("{adj}", FACT_ADJECTIVES[f])
                    .replace("{thing}", FACT_THINGS[f]);
                CorpusRecord::utterance(day, &session, &text)
            }
            Some((Slot::Probe(f), session)) => {
                let text = format!(
                    "what do you remember about the {} {}?",
                    FACT_ADJECTIVES[f], FACT_THINGS[f]
                );
                let mut r = CorpusRecord::utterance(day, &session, &text);
                r.probe = Some(Probe {
                    expected_fragment_text: fact_text(f),
                });
                r
            }
            Some((Slot::Stance(t, positive), session)) => {
                CorpusRecord::utterance(day, &session, stance_text(t, positive))
            }
            None => {
                let session = session_name(rng.random_range(0..sessions));
                if rng.random_bool(spec.contradiction_rate.clamp(0.0, 1.0)) {
                    let t = rng.random_range(0..STANCES.len());
                    CorpusRecord::utterance(day, &session, stance_text(t, rng.random_bool(0.5)))
                } else if !places.is_empty() && rng.random_bool(spec.place_rate.clamp(0.0, 1.0)) {
                    let place = places.choose(&mut rng).expect("non-empty");
                    let time = CAPTION_TIMES.choose(&mut rng).expect("non-empty");
                    let mut r = CorpusRecord::utterance(
                        day,
                        &session,
                        &format!("I see myself by {place} at {time}"),
                    );
                    r.location = Some(place.clone());
                    r
                } else {
                    noise_turns.push(i);
                    CorpusRecord::utterance(day, &session, &noise_text(&mut rng))
                }
            }
        };
        records.push(record);
    }

    // Deletions replace noise turns from the second half and point at
    // distinct noise turns before them.
    let half = turns / 2;
    let late: Vec<usize> = noise_turns.iter().copied().filter(|&i| i >= half).collect();
    let early: Vec<usize> = noise_turns.iter().copied().filter(|&i| i < half).collect();
    let n = spec.deletions.min(late.len()).min(early.len());
    let mut hosts: Vec<usize> = index::sample(&mut rng, late.len(), n)
        .into_iter()
        .map(|j| late[j])
        .collect();
    hosts.sort_unstable();
    let mut targets: Vec<usize> = Vec::new();
    for host in hosts {
        let candidates: Vec<usize> = early
            .iter()
            .copied()
            .filter(|&t| {
                !targets.iter().any(|&u| {
                    records[u].session_id == records[t].session_id && records[u].text == records[t].text
                })
            })
            .collect();
        let Some(&target) = candidates.choose(&mut rng) else {
            break;
        };
        targets.push(target);
        let day = records[host].day;
        let mut r = CorpusRecord::utterance(day, &records[target].session_id, &records[target].text);
        r.delete = true;
        records[host] = r;
    }
    records
}

/// Places `value` at `at` or the next free turn after it, wrapping once.
fn claim<T>(slots: &mut [Option<T>], at: usize, value: T) -> Option<usize> {
    let n = slots.len();
    (0..n).map(|d| (at + d) % n).find(|&i| slots[i].is_none()).inspect(|&i| {
        slots[i] = Some(value);
    })
}

fn fact_text(f: usize) -> String {
    format!(
        "the {} {} {}",
        FACT_ADJECTIVES[f],
        FACT_THINGS[f],
        FACT_TAILS[f % FACT_TAILS.len()]
    )
}

fn stance_text(topic: usize, positive: bool) -> &'static str {
    let (p, n) = STANCES[topic];
    if positive {
        p
    } else {
        n
    }
}

fn noise_text(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {} {} {}",
        SUBJECTS.choose(rng).expect("non-empty"),
        VERBS.choose(rng).expect("non-empty"),
        OBJECTS.choose(rng).expect("non-empty"),
        MODIFIERS.choose(rng).expect("non-empty"),
    )
}
