//! Seeded synthetic data: benchmarks with planted gold paths and random
//! graphs for property checks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{BenchmarkConversation, BenchmarkTurn};
use crate::graph::{build_graph, AnswerGraph};
use crate::matching::GoldAnswer;
use crate::sr::StructuredRepresentation;
use crate::store::{EntityRef, Evidence, EvidenceStore, Mention, Source};

/// Relation word and answer type.
pub const RELATIONS: &[(&str, &str)] = &[
    ("author", "human"),
    ("director", "human"),
    ("composer", "human"),
    ("founder", "human"),
    ("capital", "city"),
    ("birthplace", "city"),
    ("publisher", "organization"),
    ("language", "language"),
    ("genre", "genre"),
    ("award", "award"),
];

/// Second relation word of every planted fact.
pub const ROLES: &[&str] = &[
    "first", "former", "original", "current", "honorary", "acting", "official", "early",
];

const NOISE_WORDS: &[&str] = &[
    "neighbor",
    "rival",
    "sponsor",
    "mentioned",
    "visited",
    "reviewed",
    "quoted",
    "toured",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tas", "vel", "do", "ri", "zan", "pe", "qua", "sol", "ni", "mar",
    "tu", "bex", "ol", "fa", "gri", "hu", "jen", "lys", "ro", "ve",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub conversations: usize,
    pub turns_per_conversation: usize,
    /// Extra evidences linking the topic to non-answer entities.
    pub distractors_per_topic: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            conversations: 20,
            turns_per_conversation: 4,
            distractors_per_topic: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub store: EvidenceStore,
    pub benchmark: Vec<BenchmarkConversation>,
}

struct Names {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Names {
    fn fresh(&mut self, words: usize) -> String {
        loop {
            let name: Vec<String> = (0..words)
                .map(|_| {
                    let n = self.rng.gen_range(2..=3);
                    let w: String = (0..n)
                        .map(|_| *SYLLABLES.choose(&mut self.rng).unwrap())
                        .collect();
                    let mut c = w.chars();
                    let first = c.next().unwrap().to_ascii_uppercase();
                    std::iter::once(first).chain(c).collect()
                })
                .collect();
            let name = name.join(" ");
            if self.used.insert(name.to_lowercase()) {
                return name;
            }
        }
    }
}

fn span_of(text: &str, needle: &str) -> (usize, usize) {
    let byte = text.find(needle).expect("label occurs in text");
    let start = text[..byte].chars().count();
    (start, start + needle.chars().count())
}

/// Verbalizes `topic rel object` in the style of the given source.
fn planted_evidence(
    id: String,
    source: Source,
    topic: &EntityRef,
    rel: &str,
    object: &EntityRef,
) -> Evidence {
    let text = match source {
        Source::Kb => format!("{} {rel} {}", topic.label, object.label),
        Source::Text => format!("The {rel} of {} was {}.", topic.label, object.label),
        Source::Table | Source::Infobox => format!("{}, {rel} is {}", topic.label, object.label),
    };
    let obj = Mention {
        entity: object.clone(),
        span: span_of(&text, &object.label),
    };
    let mentions = match source {
        Source::Kb => vec![
            Mention {
                entity: topic.clone(),
                span: span_of(&text, &topic.label),
            },
            obj,
        ],
        _ => vec![obj],
    };
    Evidence {
        id,
        source,
        text,
        mentions,
        anchor_entities: vec![topic.clone()],
    }
}

/// Conversations about disjoint topics with an entangled answer structure.
///
/// Each topic has one relation word pair `(r1, r2)`, one role word pair
/// `(q1, q2)` and two planted answers: `X` with facts `T r1 q1 X` and
/// `T r2 q2 X`, `Y` with `T r1 q2 Y` and `T r2 q1 Y`. A question asks for
/// `(r, q)`; the answer is `X` when the indices agree and `Y` otherwise.
/// Both answers carry every word, so the gold is only identifiable by
/// relating SR words to single evidences, never from bag-of-words node
/// features alone. Distractor facts add noise words; the first four attach
/// to the answers, the rest to fresh non-answer entities.
pub fn generate_benchmark(cfg: &SyntheticConfig) -> SyntheticBenchmark {
    assert!(
        (1..=4).contains(&cfg.turns_per_conversation),
        "at most four (relation, role) pairs per topic"
    );
    let mut names = Names {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        used: BTreeSet::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut evidences = Vec::new();
    let mut benchmark = Vec::new();

    for c in 0..cfg.conversations {
        let topic = EntityRef::new(format!("T{c}"), names.fresh(1), "topic");
        let rels: Vec<(&str, &str)> = RELATIONS.choose_multiple(&mut rng, 2).copied().collect();
        let roles: Vec<&str> = ROLES.choose_multiple(&mut rng, 2).copied().collect();
        let answer_type = rels[0].1;
        let answers = [
            EntityRef::new(format!("X{c}"), names.fresh(2), answer_type),
            EntityRef::new(format!("Y{c}"), names.fresh(2), answer_type),
        ];
        let mut k = 0;
        for (i, (rel, _)) in rels.iter().enumerate() {
            for (j, role) in roles.iter().enumerate() {
                let answer = &answers[(i != j) as usize];
                let source = Source::ALL[(c + k) % 4];
                evidences.push(planted_evidence(
                    format!("s{c:02}_p{k}"),
                    source,
                    &topic,
                    &format!("{rel} {role}"),
                    answer,
                ));
                k += 1;
            }
        }
        for d in 0..cfg.distractors_per_topic {
            // the first distractors attach to the answers themselves
            let obj = if d < 4 {
                answers[d % 2].clone()
            } else {
                EntityRef::new(format!("D{c}_{d}"), names.fresh(2), answer_type)
            };
            let noise = NOISE_WORDS.choose(&mut rng).unwrap();
            let word = if rng.gen_bool(0.5) {
                rels[rng.gen_range(0..2)].0
            } else {
                roles[rng.gen_range(0..2)]
            };
            let source = Source::ALL[rng.gen_range(0..4)];
            evidences.push(planted_evidence(
                format!("s{c:02}_d{d}"),
                source,
                &topic,
                &format!("{noise} {word}"),
                &obj,
            ));
        }

        let mut pairs: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        pairs.shuffle(&mut rng);
        let turns = pairs[..cfg.turns_per_conversation]
            .iter()
            .enumerate()
            .map(|(t, &(i, j))| {
                let (rel, role) = (rels[i].0, roles[j]);
                let question = if t == 0 {
                    format!("Who is the {role} {rel} of {}?", topic.label)
                } else {
                    format!("And the {role} {rel}?")
                };
                let gold = &answers[(i != j) as usize];
                BenchmarkTurn {
                    question,
                    gold_answers: vec![GoldAnswer::new(gold.id.clone(), gold.label.clone())],
                    sr: Some(format!("|{}|{rel} {role}|{answer_type}", topic.label)),
                    existential: false,
                }
            })
            .collect();
        benchmark.push(BenchmarkConversation {
            conv_id: format!("syn{c:02}"),
            turns,
        });
    }
    let store = EvidenceStore::from_evidences(evidences).expect("generated ids are unique");
    SyntheticBenchmark { store, benchmark }
}

/// Star-shaped graph: `n` evidences all linked to one hub entity, each also
/// linked to its own leaf; evidence `n/2`'s leaf is the gold answer.
pub fn hub_instance(
    n: usize,
    seed: u64,
) -> (AnswerGraph, StructuredRepresentation, Vec<GoldAnswer>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hub = EntityRef::new("HUB", "Hub", "topic");
    let evs: Vec<Evidence> = (0..n)
        .map(|i| {
            let rel = RELATIONS[rng.gen_range(0..RELATIONS.len())].0;
            let leaf = EntityRef::new(format!("L{i:04}"), format!("leaf{i}"), "thing");
            planted_evidence(format!("h{i:04}"), Source::Kb, &hub, rel, &leaf)
        })
        .collect();
    let sr = StructuredRepresentation::new("", "Hub", "author", "human").unwrap();
    let gold = vec![GoldAnswer::new(
        format!("L{:04}", n / 2),
        format!("leaf{}", n / 2),
    )];
    (build_graph(&evs), sr, gold)
}

/// Random bipartite graph with `n_evidences` evidences over a pool of
/// `n_entities` entities; every evidence links one to three of them.
pub fn random_graph(n_evidences: usize, n_entities: usize, seed: u64) -> AnswerGraph {
    assert!(n_entities >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = [
        "red", "blue", "film", "book", "wrote", "played", "city", "river", "award", "year",
    ];
    let evs: Vec<Evidence> = (0..n_evidences)
        .map(|i| {
            let k = rng.gen_range(1..=3.min(n_entities));
            let picks = rand::seq::index::sample(&mut rng, n_entities, k);
            let text: Vec<&str> = (0..rng.gen_range(2..8))
                .map(|_| *words.choose(&mut rng).unwrap())
                .collect();
            Evidence {
                id: format!("r{i:03}"),
                source: Source::ALL[i % 4],
                text: text.join(" "),
                mentions: picks
                    .into_iter()
                    .map(|j| Mention {
                        entity: EntityRef::new(
                            format!("E{j:03}"),
                            format!("{} {j}", words[j % words.len()]),
                            "thing",
                        ),
                        span: (0, 0),
                    })
                    .collect(),
                anchor_entities: vec![],
            }
        })
        .collect();
    build_graph(&evs)
}
