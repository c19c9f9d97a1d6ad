//! Demo pipeline trained once per test binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use hetqa_core::eval::{gold_sr_generator, load_benchmark, training_instances};
use hetqa_core::gnn::{train, GnnConfig, GnnModel, OptimizerConfig, SelectionCriterion};
use hetqa_core::pipeline::{Pipeline, PipelineConfig, RETRIEVAL_CAP};
use hetqa_core::sr::BaselineSrGenerator;
use hetqa_core::store::{ingest_snapshot, EvidenceStore, SnapshotPaths};
use hetqa_server::cli::training_vocabulary;

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/demo")
}

pub fn demo_store() -> EvidenceStore {
    ingest_snapshot(&SnapshotPaths::in_dir(&demo_dir())).unwrap()
}

pub fn demo_pipeline() -> Pipeline {
    static PIPELINE: OnceLock<Pipeline> = OnceLock::new();
    PIPELINE
        .get_or_init(|| {
            let store = demo_store();
            let bench = load_benchmark(&demo_dir().join("benchmark.jsonl")).unwrap();
            let gen = gold_sr_generator(&bench, None).unwrap();
            let mut inst = training_instances(&bench, &store, &gen, RETRIEVAL_CAP).unwrap();
            inst.retain(|i| i.graph.contains_answer(&i.golds));
            let vocab = training_vocabulary(&store, &[&bench]);
            let opt = OptimizerConfig {
                learning_rate: 0.003,
                weight_decay: 0.0,
                epochs: 60,
                seed: 1,
                ..Default::default()
            };
            let fit = |cfg: GnnConfig, c| {
                train(
                    &GnnModel::new(cfg, vocab.clone()).unwrap(),
                    &inst,
                    &[],
                    &opt,
                    c,
                )
                .unwrap()
                .model
            };
            let answering = fit(
                GnnConfig {
                    seed: 1,
                    ..GnnConfig::answering()
                },
                SelectionCriterion::AnswerP1,
            );
            let pruning = fit(
                GnnConfig {
                    seed: 2,
                    ..GnnConfig::pruning()
                },
                SelectionCriterion::AnswerPresenceTop5,
            );
            Pipeline {
                store: Arc::new(store),
                generator: Arc::new(BaselineSrGenerator),
                pruning: Arc::new(pruning),
                answering: Arc::new(answering),
                config: PipelineConfig {
                    schedule: "10,5".parse().unwrap(),
                    ..Default::default()
                },
            }
        })
        .clone()
}
