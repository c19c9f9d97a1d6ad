//! AdamW training with epoch-wise dev selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GnnModel, Targets};
use super::params::GnnParameters;
use crate::error::{Error, Result};
use crate::graph::AnswerGraph;
use crate::matching::GoldAnswer;
use crate::sr::StructuredRepresentation;

#[derive(Debug, Clone)]
pub struct TrainingInstance {
    pub graph: AnswerGraph,
    pub sr: StructuredRepresentation,
    pub golds: Vec<GoldAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Decoupled: parameters shrink by `lr * weight_decay` each step.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seed of the per-epoch shuffle.
    pub seed: u64,
    /// Stop once the dev score reaches this value.
    #[serde(default)]
    pub stop_at: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 5,
            batch_size: 1,
            seed: 0,
            stop_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    /// Fraction of instances whose top-scored entity is a gold answer.
    AnswerP1,
    /// Fraction of instances with a gold answer among the entities of the
    /// five best-scored evidences.
    AnswerPresenceTop5,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best epoch on the dev split.
    pub model: GnnModel,
    pub best_epoch: usize,
    pub best_dev_score: f64,
    pub history: Vec<EpochStats>,
    /// Training instances without a gold answer in their graph.
    pub skipped: usize,
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GnnParameters, grads: &GnnParameters, cfg: &OptimizerConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
        let p = params.as_mut_slice();
        for (i, &g) in grads.as_slice().iter().enumerate() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let update = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.eps);
            p[i] = p[i] * decay - cfg.learning_rate * update;
        }
    }
}

/// Index of the best score; ties go to the lowest index (node order is by id).
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Indices sorted by descending score, ties by ascending index.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Criterion value of `model` on `instances`, in `[0, 1]`. Empty graphs
/// count as misses.
pub fn evaluate_criterion(
    model: &GnnModel,
    instances: &[TrainingInstance],
    criterion: SelectionCriterion,
) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for inst in instances {
        if inst.graph.is_empty() {
            continue;
        }
        let gold = inst.graph.gold_entities(&inst.golds);
        if gold.is_empty() {
            continue;
        }
        let fwd = model.forward(&inst.graph, &inst.sr)?;
        let hit = match criterion {
            SelectionCriterion::AnswerP1 => {
                argmax(&fwd.scores.entity).is_some_and(|i| gold.contains(&i))
            }
            SelectionCriterion::AnswerPresenceTop5 => rank_indices(&fwd.scores.evidence)
                .into_iter()
                .take(5)
                .any(|v| {
                    inst.graph.evidences()[v]
                        .entities
                        .iter()
                        .any(|e| gold.contains(e))
                }),
        };
        hits += hit as usize;
    }
    Ok(hits as f64 / instances.len() as f64)
}

/// Trains a copy of `initial`. After every epoch the model is scored on
/// `dev` (the training set when `dev` is empty) and the best epoch wins;
/// ties go to the lower mean training loss.
pub fn train(
    initial: &GnnModel,
    training: &[TrainingInstance],
    dev: &[TrainingInstance],
    opt: &OptimizerConfig,
    criterion: SelectionCriterion,
) -> Result<TrainOutcome> {
    if opt.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    // written to also reject NaN
    if !(opt.learning_rate > 0.0 && opt.weight_decay >= 0.0) {
        return Err(Error::Config(
            "learning rate must be positive and weight decay non-negative".into(),
        ));
    }
    let usable: Vec<usize> = (0..training.len())
        .filter(|&i| {
            !training[i].graph.is_empty()
                && Targets::new(&training[i].graph, &training[i].golds).is_some()
        })
        .collect();
    let skipped = training.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::NoTrainingData { skipped });
    }
    if skipped > 0 {
        log::info!("skipping {skipped} training instances without a gold answer in the graph");
    }
    let dev = if dev.is_empty() { training } else { dev };

    let mut model = initial.clone();
    let mut adam = AdamW::new(model.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order = usable.clone();
    let mut best = (
        model.clone(),
        0usize,
        evaluate_criterion(&model, dev, criterion)?,
    );
    let mut history = Vec::with_capacity(opt.epochs);
    let mut best_loss = f64::INFINITY;

    for epoch in 1..=opt.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opt.batch_size) {
            let mut acc = model.params.zeros_like();
            for &i in batch {
                let inst = &training[i];
                let (loss, grads) = model
                    .loss_and_gradients(&inst.graph, &inst.sr, &inst.golds)?
                    .expect("usable instances have gold");
                if !loss.total.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        instance: i,
                        loss: loss.total,
                    });
                }
                total += loss.total;
                let scale = 1.0 / batch.len() as f64;
                for (a, g) in acc.as_mut_slice().iter_mut().zip(grads.as_slice()) {
                    *a += scale * g;
                }
            }
            adam.step(&mut model.params, &acc, opt);
            if !model.params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    instance: batch[0],
                    loss: f64::NAN,
                });
            }
        }
        let dev_score = evaluate_criterion(&model, dev, criterion)?;
        let mean_loss = total / usable.len() as f64;
        log::debug!("epoch {epoch}: loss {mean_loss:.6}, dev {dev_score:.4}");
        history.push(EpochStats {
            epoch,
            mean_loss,
            dev_score,
        });
        if dev_score > best.2 || best.1 == 0 || (dev_score == best.2 && mean_loss < best_loss) {
            best = (model.clone(), epoch, dev_score);
            best_loss = mean_loss;
        }
        if opt.stop_at.is_some_and(|t| dev_score >= t) {
            break;
        }
    }
    let (model, best_epoch, best_dev_score) = best;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_dev_score,
        history,
        skipped,
    })
}
