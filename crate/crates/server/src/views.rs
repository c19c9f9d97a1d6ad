//! Wire format of the HTTP API and of `hetqa answer`.

use serde::{Deserialize, Serialize};

use hetqa_core::pipeline::AnswerResult;
use hetqa_core::sr::StructuredRepresentation;
use hetqa_core::store::{EntityRef, Source};

/// Ranked answers returned per turn.
pub const MAX_RANKED: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerView {
    pub id: Option<String>,
    pub label: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrView {
    pub context: String,
    pub question: String,
    pub relation: String,
    #[serde(rename = "type")]
    pub answer_type: String,
}

impl From<&StructuredRepresentation> for SrView {
    fn from(sr: &StructuredRepresentation) -> Self {
        Self {
            context: sr.context_entity.clone(),
            question: sr.question_entity.clone(),
            relation: sr.relation.clone(),
            answer_type: sr.answer_type.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    pub id: String,
    pub label: String,
}

impl From<&EntityRef> for EntityView {
    fn from(e: &EntityRef) -> Self {
        Self {
            id: e.id.clone(),
            label: e.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceView {
    pub id: String,
    pub text: String,
    pub source: Source,
    pub score: f64,
    pub entities: Vec<EntityView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    /// 1-based.
    pub turn: usize,
    pub question: String,
    /// `None` when retrieval found nothing.
    pub answer: Option<AnswerView>,
    pub ranked_answers: Vec<AnswerView>,
    pub sr: Option<SrView>,
    pub evidences: Vec<EvidenceView>,
    pub existential: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TurnView {
    pub fn from_result(turn: usize, r: &AnswerResult) -> Self {
        let ranked: Vec<AnswerView> = r
            .ranked_answers
            .iter()
            .take(MAX_RANKED)
            .map(|a| AnswerView {
                id: Some(a.entity.id.clone()),
                label: a.entity.label.clone(),
                score: Some(a.score),
            })
            .collect();
        let answer = if r.existential {
            Some(AnswerView {
                id: None,
                label: r.answer_label().to_string(),
                score: None,
            })
        } else {
            ranked.first().cloned()
        };
        Self {
            turn,
            question: r.question.clone(),
            answer,
            ranked_answers: ranked,
            sr: r.sr.as_ref().map(SrView::from),
            evidences: r
                .explanations
                .iter()
                .map(|e| EvidenceView {
                    id: e.evidence.id.clone(),
                    text: e.evidence.text.clone(),
                    source: e.evidence.source,
                    score: e.score,
                    entities: hetqa_core::graph::evidence_entities(&e.evidence)
                        .iter()
                        .map(EntityView::from)
                        .collect(),
                })
                .collect(),
            existential: r.existential,
            diagnostic: r.diagnostic.clone(),
        }
    }

    /// Label and id recorded in the conversation history.
    pub fn history_answer(&self) -> (String, Option<String>) {
        match &self.answer {
            Some(a) => (a.label.clone(), a.id.clone()),
            None => (String::new(), None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    /// Unix seconds.
    pub created_at: u64,
    pub updated_at: u64,
    pub turns: Vec<TurnView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRequest {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_versions: ModelVersions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub pruning: String,
    pub answering: String,
}
