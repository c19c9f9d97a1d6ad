//! One conversational turn end to end: SR selection, retrieval, graph
//! construction, iterative pruning and final answering.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{rank_indices, GnnModel};
use crate::graph::{build_graph, shrink_graph, AnswerGraph};
use crate::sr::{
    generate_sr_candidates, hallucination_filter, is_existential_question, Conversation,
    SrGenerator, StructuredRepresentation,
};
use crate::store::{cap_bm25, EntityRef, Evidence, EvidenceStore, Source};

pub const RETRIEVAL_CAP: usize = 500;
pub const DEFAULT_EXPLANATIONS: usize = 5;
pub const DEFAULT_SR_CANDIDATES: usize = 5;
pub const YES: &str = "Yes";
pub const NO_EVIDENCE: &str = "no evidence";

/// Evidence budgets of the pruning iterations; empty means one-shot answering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IterationSchedule(Vec<usize>);

impl IterationSchedule {
    pub fn new(budgets: Vec<usize>) -> Result<Self> {
        if budgets.contains(&0) {
            return Err(Error::Config("schedule budgets must be positive".into()));
        }
        if budgets.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "schedule must be strictly decreasing, got {budgets:?}"
            )));
        }
        Ok(Self(budgets))
    }

    pub fn one_shot() -> Self {
        Self(Vec::new())
    }

    pub fn budgets(&self) -> &[usize] {
        &self.0
    }

    /// Number of GNN passes, pruning and answering together.
    pub fn iterations(&self) -> usize {
        self.0.len() + 1
    }
}

impl Default for IterationSchedule {
    fn default() -> Self {
        Self(vec![100, 20])
    }
}

impl TryFrom<Vec<usize>> for IterationSchedule {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IterationSchedule> for Vec<usize> {
    fn from(s: IterationSchedule) -> Self {
        s.0
    }
}

impl FromStr for IterationSchedule {
    type Err = Error;

    /// Comma-separated budgets, e.g. `100,20`; blank means one-shot.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::one_shot());
        }
        let budgets = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad schedule entry {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(budgets)
    }
}

impl fmt::Display for IterationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub entity: EntityRef,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvidence {
    pub evidence: Evidence,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResult {
    pub question: String,
    pub existential: bool,
    /// `None` for existential questions.
    pub sr: Option<StructuredRepresentation>,
    /// Set when every SR candidate failed the hallucination check.
    #[serde(default)]
    pub sr_all_hallucinated: bool,
    /// Descending score, ties by ascending entity id.
    pub ranked_answers: Vec<RankedAnswer>,
    pub explanations: Vec<ScoredEvidence>,
    /// Evidence count of the graph built from retrieval.
    pub initial_graph_size: usize,
    /// Evidence count after each pruning iteration.
    pub graph_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Initial graph followed by the graph after every pruning iteration.
    #[serde(skip)]
    pub stage_graphs: Vec<AnswerGraph>,
    /// Raw answering-pass scores aligned with the final graph.
    #[serde(skip)]
    pub final_entity_scores: Vec<f64>,
    #[serde(skip)]
    pub final_evidence_scores: Vec<f64>,
}

impl AnswerResult {
    fn empty(question: &str) -> Self {
        Self {
            question: question.to_string(),
            existential: false,
            sr: None,
            sr_all_hallucinated: false,
            ranked_answers: Vec::new(),
            explanations: Vec::new(),
            initial_graph_size: 0,
            graph_sizes: Vec::new(),
            diagnostic: None,
            stage_graphs: Vec::new(),
            final_entity_scores: Vec::new(),
            final_evidence_scores: Vec::new(),
        }
    }

    /// Result shell for answering a prebuilt graph under `sr`.
    pub fn for_sr(question: &str, sr: StructuredRepresentation) -> Self {
        Self {
            sr: Some(sr),
            ..Self::empty(question)
        }
    }

    pub fn top_answer(&self) -> Option<&RankedAnswer> {
        self.ranked_answers.first()
    }

    /// Label written to the history: "Yes" for existential questions, empty
    /// when nothing was found.
    pub fn answer_label(&self) -> &str {
        if self.existential {
            return YES;
        }
        self.top_answer().map_or("", |a| a.entity.label.as_str())
    }

    pub fn answer_entity_id(&self) -> Option<&str> {
        (!self.existential)
            .then(|| self.top_answer().map(|a| a.entity.id.as_str()))
            .flatten()
    }

    pub fn final_graph(&self) -> Option<&AnswerGraph> {
        self.stage_graphs.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub schedule: IterationSchedule,
    pub retrieval_cap: usize,
    pub explanation_size: usize,
    pub sr_candidates: usize,
    /// Sources consulted at retrieval time.
    pub sources: Vec<Source>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schedule: IterationSchedule::default(),
            retrieval_cap: RETRIEVAL_CAP,
            explanation_size: DEFAULT_EXPLANATIONS,
            sr_candidates: DEFAULT_SR_CANDIDATES,
            sources: Source::ALL.to_vec(),
        }
    }
}

/// Read-only bundle of everything a turn needs; cheap to share across
/// threads.
#[derive(Clone)]
pub struct Pipeline {
    pub store: Arc<EvidenceStore>,
    pub generator: Arc<dyn SrGenerator>,
    pub pruning: Arc<GnnModel>,
    pub answering: Arc<GnnModel>,
    pub config: PipelineConfig,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("evidences", &self.store.len())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn with_sources(&self, sources: Vec<Source>) -> Self {
        let mut p = self.clone();
        p.config.sources = sources;
        p
    }

    pub fn run_turn(&self, conversation: &Conversation, question: &str) -> Result<AnswerResult> {
        let mut result = AnswerResult::empty(question);
        if is_existential_question(question) {
            result.existential = true;
            return Ok(result);
        }
        let candidates = generate_sr_candidates(
            self.generator.as_ref(),
            conversation,
            question,
            self.config.sr_candidates,
        )?;
        let chosen = hallucination_filter(&candidates, conversation, question)?;
        result.sr_all_hallucinated = chosen.all_hallucinated;
        let sr = chosen.sr;

        let graph = retrieval_graph(
            &self.store,
            &sr,
            &self.config.sources,
            self.config.retrieval_cap,
        );
        result.sr = Some(sr);
        if graph.is_empty() {
            result.diagnostic = Some(NO_EVIDENCE.into());
            return Ok(result);
        }
        self.answer_graph(graph, &mut result)?;
        Ok(result)
    }

    /// Pruning iterations and the answering pass on an already built graph.
    pub fn answer_graph(&self, graph: AnswerGraph, result: &mut AnswerResult) -> Result<()> {
        let sr = result.sr.clone().ok_or(Error::EmptySr)?;
        result.initial_graph_size = graph.num_evidences();
        result.stage_graphs.push(graph);
        for &k in self.config.schedule.budgets() {
            let current = result.stage_graphs.last().unwrap();
            let fwd = self.pruning.forward(current, &sr)?;
            let next = shrink_graph(current, &fwd.scores.evidence_map(current), k)?;
            result.graph_sizes.push(next.num_evidences());
            result.stage_graphs.push(next);
        }
        let last = result.stage_graphs.last().unwrap();
        let fwd = self.answering.forward(last, &sr)?;
        result.ranked_answers = rank_indices(&fwd.scores.entity)
            .into_iter()
            .map(|i| RankedAnswer {
                entity: last.entities()[i].entity.clone(),
                score: fwd.scores.entity[i],
            })
            .collect();
        result.explanations = rank_indices(&fwd.scores.evidence)
            .into_iter()
            .take(self.config.explanation_size)
            .map(|i| ScoredEvidence {
                evidence: last.evidences()[i].evidence.clone(),
                score: fwd.scores.evidence[i],
            })
            .collect();
        result.final_entity_scores = fwd.scores.entity;
        result.final_evidence_scores = fwd.scores.evidence;
        Ok(())
    }
}

/// Retrieves for `sr` from `sources`, caps the pool by BM25 against the SR
/// text and builds the answering graph.
pub fn retrieval_graph(
    store: &EvidenceStore,
    sr: &StructuredRepresentation,
    sources: &[Source],
    cap: usize,
) -> AnswerGraph {
    let pool = store.retrieve_from(sr, sources);
    build_graph(&cap_bm25(pool, &sr.flat_text(), cap))
}

/// Predicted-history update: appends the question with the system's answer.
pub fn append_turn(
    conversation: &Conversation,
    question: &str,
    result: &AnswerResult,
) -> Conversation {
    let mut next = conversation.clone();
    next.push(
        question,
        result.answer_label(),
        result.answer_entity_id().map(str::to_string),
    );
    next
}
