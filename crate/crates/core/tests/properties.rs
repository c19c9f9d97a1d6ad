//! Structural properties of the GNN and the pipeline.

use std::sync::Arc;

use hetqa_core::eval::{evidence_set_has_answer, gold_sr_generator};
use hetqa_core::gnn::checkpoint::checkpoint_bytes;
use hetqa_core::gnn::*;
use hetqa_core::graph::build_graph;
use hetqa_core::pipeline::*;
use hetqa_core::sr::{parse_sr, Conversation};
use hetqa_core::store::{EntityRef, Evidence, Mention, Source};
use hetqa_core::synth::*;

fn evidence(id: &str, text: &str, ents: &[(&str, &str)]) -> Evidence {
    Evidence {
        id: id.into(),
        source: Source::Text,
        text: text.into(),
        mentions: ents
            .iter()
            .map(|(i, l)| Mention {
                entity: EntityRef::new(*i, *l, "human"),
                span: (0, 0),
            })
            .collect(),
        anchor_entities: vec![],
    }
}

fn corpus() -> Vec<(&'static str, Vec<(&'static str, &'static str)>)> {
    vec![
        (
            "dan brown wrote angels and demons",
            vec![("a", "dan brown"), ("b", "angels and demons")],
        ),
        (
            "tom hanks played robert langdon",
            vec![("c", "tom hanks"), ("d", "robert langdon")],
        ),
        (
            "robert langdon created by dan brown",
            vec![("d", "robert langdon"), ("a", "dan brown")],
        ),
        (
            "angels and demons filmed in rome",
            vec![("b", "angels and demons"), ("e", "rome")],
        ),
        (
            "ron howard directed angels and demons",
            vec![("f", "ron howard"), ("b", "angels and demons")],
        ),
    ]
}

fn vocab() -> Vocabulary {
    let texts: Vec<String> = corpus()
        .iter()
        .map(|(t, _)| t.to_string())
        .chain(["human who wrote".into()])
        .collect();
    Vocabulary::build(texts.iter().map(|s| s.as_str()))
}

#[test]
fn scores_are_permutation_equivariant() {
    let sr = parse_sr("|angels and demons|who wrote|human").unwrap();
    // same content under two id assignments with opposite node orders
    let make = |rev: bool| {
        let evs: Vec<Evidence> = corpus()
            .iter()
            .enumerate()
            .map(|(i, (t, ents))| {
                let k = if rev { 9 - i } else { i };
                let ents: Vec<(String, &str)> = ents
                    .iter()
                    .map(|(id, l)| {
                        (
                            if rev {
                                ((b'a' + b'f' - id.as_bytes()[0]) as char).to_string()
                            } else {
                                id.to_string()
                            },
                            *l,
                        )
                    })
                    .collect();
                let refs: Vec<(&str, &str)> = ents.iter().map(|(a, b)| (a.as_str(), *b)).collect();
                evidence(&format!("e{k}"), t, &refs)
            })
            .collect();
        build_graph(&evs)
    };
    let (g1, g2) = (make(false), make(true));
    assert_ne!(
        g1.evidences()[0].evidence.text,
        g2.evidences()[0].evidence.text
    );
    for base in [GnnConfig::answering(), GnnConfig::pruning()] {
        let m = GnnModel::new(
            GnnConfig {
                dim: 12,
                seed: 3,
                ..base
            },
            vocab(),
        )
        .unwrap();
        let (f1, f2) = (m.forward(&g1, &sr).unwrap(), m.forward(&g2, &sr).unwrap());
        for (i, n) in g1.evidences().iter().enumerate() {
            let j = g2
                .evidences()
                .iter()
                .position(|x| x.evidence.text == n.evidence.text)
                .unwrap();
            assert!((f1.scores.evidence[i] - f2.scores.evidence[j]).abs() < 1e-12);
        }
        for (i, n) in g1.entities().iter().enumerate() {
            let j = g2
                .entities()
                .iter()
                .position(|x| x.entity.label == n.entity.label)
                .unwrap();
            assert!((f1.scores.entity[i] - f2.scores.entity[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn forward_handles_any_graph_size() {
    let sr = parse_sr("|red|wrote|thing").unwrap();
    for n in [1, 5, 50] {
        let g = random_graph(n, n + 3, n as u64);
        let texts: Vec<String> = g
            .evidences()
            .iter()
            .map(|e| e.evidence.text.clone())
            .collect();
        let m = GnnModel::new(
            GnnConfig {
                dim: 8,
                seed: 1,
                ..GnnConfig::answering()
            },
            Vocabulary::build(texts.iter().map(|s| s.as_str())),
        )
        .unwrap();
        let f = m.forward(&g, &sr).unwrap();
        assert_eq!(f.scores.evidence.len(), n);
        assert_eq!(f.scores.entity.len(), g.num_entities());
        for s in [&f.scores.entity, &f.scores.evidence] {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(s.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}

#[test]
fn ranking_follows_logits() {
    let g = random_graph(30, 12, 9);
    let texts: Vec<String> = g
        .evidences()
        .iter()
        .map(|e| e.evidence.text.clone())
        .collect();
    let m = GnnModel::new(
        GnnConfig {
            dim: 16,
            seed: 2,
            ..GnnConfig::pruning()
        },
        Vocabulary::build(texts.iter().map(|s| s.as_str())),
    )
    .unwrap();
    let f = m
        .forward(&g, &parse_sr("|blue|played|thing").unwrap())
        .unwrap();
    assert_eq!(argmax(&f.scores.entity), argmax(&f.scores.entity_logits));
    assert_eq!(
        rank_indices(&f.scores.evidence),
        rank_indices(&f.scores.evidence_logits)
    );
    let shifted: Vec<f64> = f.scores.entity_logits.iter().map(|l| l + 40.0).collect();
    assert_eq!(argmax(&softmax(&shifted)), argmax(&f.scores.entity));
}

fn pipeline(schedule: &str) -> (Pipeline, SyntheticBenchmark) {
    let syn = generate_benchmark(&SyntheticConfig {
        conversations: 6,
        ..Default::default()
    });
    let gen = gold_sr_generator(&syn.benchmark, None).unwrap();
    let v = Vocabulary::for_corpus(&syn.store, std::iter::empty());
    let p = Pipeline {
        store: Arc::new(syn.store.clone()),
        generator: Arc::new(gen),
        pruning: Arc::new(
            GnnModel::new(
                GnnConfig {
                    dim: 8,
                    seed: 1,
                    ..GnnConfig::pruning()
                },
                v.clone(),
            )
            .unwrap(),
        ),
        answering: Arc::new(
            GnnModel::new(
                GnnConfig {
                    dim: 8,
                    seed: 2,
                    ..GnnConfig::answering()
                },
                v,
            )
            .unwrap(),
        ),
        config: PipelineConfig {
            schedule: schedule.parse().unwrap(),
            ..Default::default()
        },
    };
    (p, syn)
}

#[test]
fn pipeline_is_deterministic() {
    let (p, syn) = pipeline("6,3");
    let q = &syn.benchmark[0].turns[0].question;
    let conv = Conversation::with_id(syn.benchmark[0].conv_id.clone());
    let a = serde_json::to_string(&p.run_turn(&conv, q).unwrap()).unwrap();
    let b = serde_json::to_string(&p.run_turn(&conv, q).unwrap()).unwrap();
    assert_eq!(a, b);
    let m = GnnModel::new(
        GnnConfig {
            seed: 8,
            ..GnnConfig::answering()
        },
        Vocabulary::default(),
    )
    .unwrap();
    let n = GnnModel::new(
        GnnConfig {
            seed: 8,
            ..GnnConfig::answering()
        },
        Vocabulary::default(),
    )
    .unwrap();
    assert_eq!(checkpoint_bytes(&m).unwrap(), checkpoint_bytes(&n).unwrap());
}

#[test]
fn presence_never_increases_along_the_schedule() {
    let (p, syn) = pipeline("8,4,2,1");
    for conv in &syn.benchmark {
        let mut history = Conversation::with_id(conv.conv_id.clone());
        for bt in &conv.turns {
            let r = p.run_turn(&history, &bt.question).unwrap();
            assert_eq!(r.graph_sizes, vec![8, 4, 2, 1]);
            let presence: Vec<bool> = r
                .stage_graphs
                .iter()
                .map(|g| {
                    let evs: Vec<Evidence> =
                        g.evidences().iter().map(|e| e.evidence.clone()).collect();
                    evidence_set_has_answer(&evs, &bt.gold_answers)
                })
                .collect();
            assert!(presence[0]);
            assert!(presence.windows(2).all(|w| w[0] >= w[1]), "{presence:?}");
            history = append_turn(&history, &bt.question, &r);
        }
    }
}
