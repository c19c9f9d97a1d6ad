//! Question-aware GNN over the answering graph.
//!
//! Node encodings start from averaged token embeddings (evidences and
//! entities cross-encoded with the SR, or entities initialized from their
//! evidences), are refined by `L` layers of SR-attention message passing and
//! finally scored by two softmax heads: one over entities (answers) and one
//! over evidences (relevance). Gradients are computed by hand and verified
//! against finite differences in [`gradcheck`].

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod train;
pub mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{
    encode_entities_alternating, message_passing_layer, score_entities, score_evidences, softmax,
    Encodings, Forward, GnnModel, GraphEncodings, LossBreakdown, NodeScores,
};
pub use params::{GnnParameters, LinearId};
pub use train::{
    argmax, evaluate_criterion, rank_indices, train, EpochStats, OptimizerConfig,
    SelectionCriterion, TrainOutcome, TrainingInstance,
};
pub use vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    /// Entities encoded from label, type and SR text.
    Cross,
    /// Entities initialized as SR-attention-weighted sums of their evidences.
    Alternating,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Uniform attention over every neighborhood.
    #[serde(default)]
    pub disable_sr_attention: bool,
    /// Node texts encoded without the SR.
    #[serde(default)]
    pub disable_cross_encoder: bool,
    /// Entity encodings without the KB type.
    #[serde(default)]
    pub disable_entity_type: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub dim: usize,
    pub layers: usize,
    pub encoder_mode: EncoderMode,
    /// Weight of the answer (entity) loss.
    pub w_entity: f64,
    /// Weight of the evidence-relevance loss.
    pub w_evidence: f64,
    #[serde(default)]
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self::answering()
    }
}

impl GnnConfig {
    /// Final answering iteration: cross encodings, equal task weights.
    pub fn answering() -> Self {
        Self {
            dim: 32,
            layers: 3,
            encoder_mode: EncoderMode::Cross,
            w_entity: 0.5,
            w_evidence: 0.5,
            ablation: Ablation::default(),
            seed: 0,
        }
    }

    /// Pruning iterations: alternating encodings, evidence-heavy weights.
    pub fn pruning() -> Self {
        Self {
            encoder_mode: EncoderMode::Alternating,
            w_entity: 0.3,
            w_evidence: 0.7,
            ..Self::answering()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if self.layers < 1 {
            return Err(Error::Config("at least one layer is required".into()));
        }
        if !(self.w_entity >= 0.0 && self.w_evidence >= 0.0) {
            return Err(Error::Config("task weights must be non-negative".into()));
        }
        if (self.w_entity + self.w_evidence - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "task weights must sum to 1, got {} + {}",
                self.w_entity, self.w_evidence
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        GnnConfig::answering().validate().unwrap();
        GnnConfig::pruning().validate().unwrap();
        let bad = GnnConfig {
            w_entity: 0.6,
            ..GnnConfig::answering()
        };
        assert!(bad.validate().is_err());
        let bad = GnnConfig {
            dim: 1,
            ..GnnConfig::answering()
        };
        assert!(bad.validate().is_err());
        let bad = GnnConfig {
            layers: 0,
            ..GnnConfig::answering()
        };
        assert!(bad.validate().is_err());
    }
}
