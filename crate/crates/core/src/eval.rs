//! Benchmark evaluation: ranking metrics, answer presence and error
//! categories under gold or predicted conversation history.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::TrainingInstance;
use crate::graph::evidence_entities;
use crate::matching::{matches_any, GoldAnswer};
use crate::pipeline::{append_turn, retrieval_graph, AnswerResult, Pipeline};
use crate::sr::{
    deserialize_id, generate_sr_candidates, hallucination_filter, parse_sr, Conversation,
    GoldSrGenerator, SrGenerator,
};
use crate::store::{EntityRef, Evidence, EvidenceStore, Source};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTurn {
    pub question: String,
    #[serde(default)]
    pub gold_answers: Vec<GoldAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<String>,
    #[serde(default)]
    pub existential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConversation {
    #[serde(deserialize_with = "deserialize_id")]
    pub conv_id: String,
    pub turns: Vec<BenchmarkTurn>,
}

impl BenchmarkConversation {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.turns.is_empty() {
            return Err(format!("conversation {} has no turns", self.conv_id));
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.gold_answers.is_empty() && !t.existential {
                return Err(format!(
                    "conversation {} turn {} has no gold answer",
                    self.conv_id,
                    i + 1
                ));
            }
            if let Some(sr) = &t.sr {
                parse_sr(sr)
                    .map_err(|e| format!("conversation {} turn {}: {e}", self.conv_id, i + 1))?;
            }
        }
        Ok(())
    }
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkConversation>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let conv: BenchmarkConversation =
            serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        conv.validate().map_err(err)?;
        out.push(conv);
    }
    Ok(out)
}

pub fn save_benchmark(path: &Path, benchmark: &[BenchmarkConversation]) -> Result<()> {
    let mut s = String::new();
    for c in benchmark {
        s.push_str(&serde_json::to_string(c)?);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Generator answering with the benchmark's gold SRs, deferring to
/// `fallback` for turns without one.
pub fn gold_sr_generator(
    benchmark: &[BenchmarkConversation],
    fallback: Option<Box<dyn SrGenerator>>,
) -> Result<GoldSrGenerator> {
    let mut gen = GoldSrGenerator::new();
    for c in benchmark {
        for (i, t) in c.turns.iter().enumerate() {
            if let Some(sr) = &t.sr {
                gen.insert(c.conv_id.clone(), i + 1, parse_sr(sr)?);
            }
        }
    }
    Ok(match fallback {
        Some(f) => gen.with_fallback(f),
        None => gen,
    })
}

/// Full retrieval graphs for every non-existential turn, built with gold
/// history and SRs taken from `generator` (gold SRs when it is a
/// [`GoldSrGenerator`]). Turns whose graph lacks the answer are kept; the
/// trainer counts and skips them.
pub fn training_instances(
    benchmark: &[BenchmarkConversation],
    store: &EvidenceStore,
    generator: &dyn SrGenerator,
    cap: usize,
) -> Result<Vec<TrainingInstance>> {
    let mut out = Vec::new();
    for conv in benchmark {
        let mut history = Conversation::with_id(conv.conv_id.clone());
        for bt in &conv.turns {
            if !bt.existential {
                let candidates = generate_sr_candidates(generator, &history, &bt.question, 5)?;
                let sr = hallucination_filter(&candidates, &history, &bt.question)?.sr;
                let graph = retrieval_graph(store, &sr, &Source::ALL, cap);
                out.push(TrainingInstance {
                    graph,
                    sr,
                    golds: bt.gold_answers.clone(),
                });
            }
            let (label, id) = match bt.gold_answers.first() {
                Some(g) => (g.label.clone(), g.id.clone()),
                None => ("Yes".to_string(), None),
            };
            history.push(bt.question.clone(), label, id);
        }
    }
    Ok(out)
}

fn first_match(ranked: &[EntityRef], golds: &[GoldAnswer]) -> Option<usize> {
    ranked.iter().position(|e| matches_any(e, golds))
}

/// 1 iff the top-ranked entity matches a gold answer.
pub fn precision_at_1(ranked: &[EntityRef], golds: &[GoldAnswer]) -> f64 {
    hit_at_k(ranked, golds, 1)
}

/// Reciprocal rank of the first gold match, 0 when absent.
pub fn mrr(ranked: &[EntityRef], golds: &[GoldAnswer]) -> f64 {
    first_match(ranked, golds).map_or(0.0, |r| 1.0 / (r + 1) as f64)
}

pub fn hit_at_k(ranked: &[EntityRef], golds: &[GoldAnswer], k: usize) -> f64 {
    match first_match(ranked, golds) {
        Some(r) if r < k => 1.0,
        _ => 0.0,
    }
}

/// Whether any evidence in `set` links an entity matching a gold answer.
pub fn evidence_set_has_answer(set: &[Evidence], golds: &[GoldAnswer]) -> bool {
    set.iter()
        .any(|ev| evidence_entities(ev).iter().any(|e| matches_any(e, golds)))
}

/// Fraction of questions whose evidence set contains a gold answer.
pub fn answer_presence(sets: &[Vec<Evidence>], golds: &[Vec<GoldAnswer>]) -> f64 {
    assert_eq!(sets.len(), golds.len(), "one gold list per evidence set");
    if sets.is_empty() {
        return 0.0;
    }
    let hits = sets
        .iter()
        .zip(golds)
        .filter(|(s, g)| evidence_set_has_answer(s, g))
        .count();
    hits as f64 / sets.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryMode {
    Gold,
    Predicted,
}

impl std::str::FromStr for HistoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gold" => Ok(Self::Gold),
            "predicted" => Ok(Self::Predicted),
            other => Err(Error::Config(format!("unknown history mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "snake_case")]
pub enum ErrorCategory {
    NotInInitialGraph,
    /// 1-based pruning iteration that removed the last gold answer.
    DroppedInPruning {
        iteration: usize,
    },
    NotIdentified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub conv_id: String,
    pub turn: usize,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<String>,
    pub p_at_1: f64,
    pub mrr: f64,
    pub hit_at_5: f64,
    /// Gold presence in the initial graph, then after each pruning iteration.
    pub presence: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorCategory>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub not_in_initial_graph: usize,
    /// Index `i` counts drops in pruning iteration `i + 1`.
    pub dropped_in_pruning: Vec<usize>,
    pub not_identified: usize,
}

impl ErrorBreakdown {
    pub fn total(&self) -> usize {
        self.not_in_initial_graph
            + self.dropped_in_pruning.iter().sum::<usize>()
            + self.not_identified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub questions: usize,
    pub p_at_1: f64,
    pub mrr: f64,
    pub hit_at_5: f64,
    /// Answer presence in the initial graph.
    pub answer_presence: f64,
    /// Answer presence after each pruning iteration.
    pub presence_after_pruning: Vec<f64>,
    pub errors: ErrorBreakdown,
    pub records: Vec<QuestionRecord>,
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

impl MetricsReport {
    /// Averages over questions.
    pub fn from_records(records: Vec<QuestionRecord>) -> Self {
        let n = records.len();
        let stages = records.iter().map(|r| r.presence.len()).max().unwrap_or(0);
        let presence_at = |s: usize| {
            mean(
                records
                    .iter()
                    .map(|r| r.presence.get(s).copied().unwrap_or(false) as u8 as f64),
                n,
            )
        };
        let mut errors = ErrorBreakdown {
            dropped_in_pruning: vec![0; stages.saturating_sub(1)],
            ..Default::default()
        };
        for r in &records {
            match r.error {
                Some(ErrorCategory::NotInInitialGraph) => errors.not_in_initial_graph += 1,
                Some(ErrorCategory::DroppedInPruning { iteration }) => {
                    if errors.dropped_in_pruning.len() < iteration {
                        errors.dropped_in_pruning.resize(iteration, 0);
                    }
                    errors.dropped_in_pruning[iteration - 1] += 1;
                }
                Some(ErrorCategory::NotIdentified) => errors.not_identified += 1,
                None => {}
            }
        }
        Self {
            questions: n,
            p_at_1: mean(records.iter().map(|r| r.p_at_1), n),
            mrr: mean(records.iter().map(|r| r.mrr), n),
            hit_at_5: mean(records.iter().map(|r| r.hit_at_5), n),
            answer_presence: if stages == 0 { 0.0 } else { presence_at(0) },
            presence_after_pruning: (1..stages).map(presence_at).collect(),
            errors,
            records,
        }
    }

    /// Fixed-width console summary.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let line = "+----------------------------+----------+\n";
        s.push_str(line);
        let _ = writeln!(s, "| {:<26} | {:>8} |", "metric", "value");
        s.push_str(line);
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "| {k:<26} | {v:>8} |");
        };
        row("questions", self.questions.to_string());
        row("P@1", format!("{:.4}", self.p_at_1));
        row("MRR", format!("{:.4}", self.mrr));
        row("Hit@5", format!("{:.4}", self.hit_at_5));
        row(
            "answer presence (initial)",
            format!("{:.4}", self.answer_presence),
        );
        for (i, p) in self.presence_after_pruning.iter().enumerate() {
            row(
                &format!("answer presence (iter {})", i + 1),
                format!("{p:.4}"),
            );
        }
        row(
            "err: not in initial graph",
            self.errors.not_in_initial_graph.to_string(),
        );
        for (i, c) in self.errors.dropped_in_pruning.iter().enumerate() {
            row(&format!("err: dropped in iter {}", i + 1), c.to_string());
        }
        row(
            "err: not identified",
            self.errors.not_identified.to_string(),
        );
        s.push_str(line);
        s
    }
}

fn is_yes(golds: &[GoldAnswer]) -> bool {
    golds.is_empty() || golds.iter().any(|g| tokenize(&g.label) == ["yes"])
}

/// Scores one pipeline result against its gold answers.
pub fn score_turn(
    conv_id: &str,
    turn: usize,
    bt: &BenchmarkTurn,
    result: &AnswerResult,
) -> QuestionRecord {
    let mut rec = QuestionRecord {
        conv_id: conv_id.to_string(),
        turn,
        question: bt.question.clone(),
        sr: result.sr.as_ref().map(|s| s.to_string()),
        predicted: Some(result.answer_label().to_string()).filter(|s| !s.is_empty()),
        p_at_1: 0.0,
        mrr: 0.0,
        hit_at_5: 0.0,
        presence: Vec::new(),
        error: None,
    };
    if result.existential {
        // the heuristic always says yes
        let ok = is_yes(&bt.gold_answers);
        let v = ok as u8 as f64;
        rec.p_at_1 = v;
        rec.mrr = v;
        rec.hit_at_5 = v;
        if !ok {
            rec.error = Some(ErrorCategory::NotIdentified);
        }
        return rec;
    }
    let ranked: Vec<EntityRef> = result
        .ranked_answers
        .iter()
        .map(|a| a.entity.clone())
        .collect();
    let golds = &bt.gold_answers;
    rec.p_at_1 = precision_at_1(&ranked, golds);
    rec.mrr = mrr(&ranked, golds);
    rec.hit_at_5 = hit_at_k(&ranked, golds, 5);
    rec.presence = if result.stage_graphs.is_empty() {
        vec![false]
    } else {
        result
            .stage_graphs
            .iter()
            .map(|g| g.contains_answer(golds))
            .collect()
    };
    if rec.p_at_1 < 1.0 {
        rec.error = Some(match rec.presence.iter().position(|&p| !p) {
            Some(0) => ErrorCategory::NotInInitialGraph,
            Some(i) => ErrorCategory::DroppedInPruning { iteration: i },
            None => ErrorCategory::NotIdentified,
        });
    }
    rec
}

/// Runs every conversation through `pipeline` with retrieval restricted to
/// `sources`. Turns within a conversation run in order; the history holds
/// gold or predicted answers per `mode`.
pub fn evaluate(
    benchmark: &[BenchmarkConversation],
    pipeline: &Pipeline,
    mode: HistoryMode,
    sources: &[Source],
) -> Result<MetricsReport> {
    let pipeline = pipeline.with_sources(sources.to_vec());
    let mut records = Vec::new();
    for conv in benchmark {
        let mut history = Conversation::with_id(conv.conv_id.clone());
        for (i, bt) in conv.turns.iter().enumerate() {
            let result = pipeline.run_turn(&history, &bt.question)?;
            records.push(score_turn(&conv.conv_id, i + 1, bt, &result));
            history = match mode {
                HistoryMode::Predicted => append_turn(&history, &bt.question, &result),
                HistoryMode::Gold => {
                    let mut h = history;
                    let (label, id) = match bt.gold_answers.first() {
                        Some(g) => (g.label.clone(), g.id.clone()),
                        None => ("Yes".to_string(), None),
                    };
                    h.push(bt.question.clone(), label, id);
                    h
                }
            };
        }
    }
    Ok(MetricsReport::from_records(records))
}
