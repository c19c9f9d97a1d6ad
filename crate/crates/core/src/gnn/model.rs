//! Forward pass, multi-task loss and hand-derived backward pass.

use std::collections::HashMap;

use super::params::{dot, GnnParameters, Linear, LinearId};
use super::vocab::{Vocabulary, SEP_ID, TYPE_SEP_ID};
use super::{EncoderMode, GnnConfig};
use crate::error::{Error, Result};
use crate::graph::AnswerGraph;
use crate::matching::GoldAnswer;
use crate::sr::StructuredRepresentation;
use crate::store::{EntityRef, Evidence};

/// Lower clamp for probabilities inside the binary cross-entropy.
pub const BCE_EPS: f64 = 1e-12;

/// Per-node vectors of one layer, aligned with the graph's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Encodings {
    pub entities: Vec<Vec<f64>>,
    pub evidences: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncodings {
    pub sr: Vec<f64>,
    /// Index 0 holds the initial encodings, index `l` the output of layer `l`.
    pub layers: Vec<Encodings>,
}

impl GraphEncodings {
    pub fn last(&self) -> &Encodings {
        self.layers.last().expect("layer 0 always present")
    }
}

/// Softmax scores of both node families, aligned with graph order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    pub entity: Vec<f64>,
    pub evidence: Vec<f64>,
    pub entity_logits: Vec<f64>,
    pub evidence_logits: Vec<f64>,
}

impl NodeScores {
    pub fn entity_map(&self, graph: &AnswerGraph) -> HashMap<String, f64> {
        graph
            .entities()
            .iter()
            .zip(&self.entity)
            .map(|(n, &s)| (n.entity.id.clone(), s))
            .collect()
    }

    pub fn evidence_map(&self, graph: &AnswerGraph) -> HashMap<String, f64> {
        graph
            .evidences()
            .iter()
            .zip(&self.evidence)
            .map(|(n, &s)| (n.evidence.id.clone(), s))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub entity: f64,
    pub evidence: f64,
}

/// Attention weights and projections for every target node's neighborhood.
#[derive(Debug, Clone, Default)]
pub struct AttentionTrace {
    pub weights: Vec<Vec<f64>>,
    /// `lin(x)` per neighbor; empty when attention is uniform.
    projections: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub evidence_attention: AttentionTrace,
    pub entity_attention: AttentionTrace,
    evidence_agg: Vec<Vec<f64>>,
    entity_agg: Vec<Vec<f64>>,
    evidence_pre: Vec<Vec<f64>>,
    entity_pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct HeadTrace {
    projections: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ForwardTrace {
    sr_ids: Vec<usize>,
    evidence_ids: Vec<Vec<usize>>,
    /// Token ids per entity in cross mode.
    entity_ids: Option<Vec<Vec<usize>>>,
    alternating: Option<AttentionTrace>,
    layers: Vec<LayerTrace>,
    entity_head: HeadTrace,
    evidence_head: HeadTrace,
}

/// Result of a forward pass, including what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub encodings: GraphEncodings,
    pub scores: NodeScores,
    trace: ForwardTrace,
}

impl Forward {
    pub fn layer_traces(&self) -> &[LayerTrace] {
        &self.trace.layers
    }

    pub fn alternating_attention(&self) -> Option<&AttentionTrace> {
        self.trace.alternating.as_ref()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of the logits given the gradient of the softmax outputs.
fn softmax_backward(p: &[f64], grad_p: &[f64]) -> Vec<f64> {
    let inner = dot(p, grad_p);
    p.iter()
        .zip(grad_p)
        .map(|(pi, gi)| pi * (gi - inner))
        .collect()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn mean_rows(params: &GnnParameters, ids: &[usize]) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::EmptyTokens);
    }
    let mut out = vec![0.0; params.dim()];
    for &id in ids {
        axpy(1.0, params.embedding(id), &mut out);
    }
    let n = ids.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Mean of the embedding rows of `ids`.
pub fn encode_text(ids: &[usize], params: &GnnParameters) -> Result<Vec<f64>> {
    mean_rows(params, ids)
}

/// Weighted sum of `sources[neighbors]` with SR-attention (or uniform)
/// weights over the neighborhood.
fn attend(
    neighbors: &[usize],
    sources: &[Vec<f64>],
    lin: Linear<'_>,
    sr: &[f64],
    uniform: bool,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let d = sr.len();
    let (weights, projections) = if uniform {
        let w = 1.0 / neighbors.len() as f64;
        (vec![w; neighbors.len()], Vec::new())
    } else {
        let projections: Vec<Vec<f64>> = neighbors
            .iter()
            .map(|&j| lin.forward(&sources[j]))
            .collect();
        let logits: Vec<f64> = projections.iter().map(|p| dot(p, sr)).collect();
        (softmax(&logits), projections)
    };
    let mut agg = vec![0.0; d];
    for (&j, &w) in neighbors.iter().zip(&weights) {
        axpy(w, &sources[j], &mut agg);
    }
    (weights, projections, agg)
}

/// Initial entity encodings as SR-attention-weighted sums of the initial
/// encodings of their neighboring evidences.
pub fn encode_entities_alternating(
    graph: &AnswerGraph,
    evidence_encodings: &[Vec<f64>],
    sr: &[f64],
    params: &GnnParameters,
    uniform: bool,
) -> (Vec<Vec<f64>>, AttentionTrace) {
    let lin = params.linear(LinearId::AlternatingAttention);
    let mut trace = AttentionTrace::default();
    let mut out = Vec::with_capacity(graph.num_entities());
    for node in graph.entities() {
        assert!(
            !node.evidences.is_empty(),
            "entity {} has no evidences",
            node.entity.id
        );
        let (w, p, agg) = attend(&node.evidences, evidence_encodings, lin, sr, uniform);
        trace.weights.push(w);
        trace.projections.push(p);
        out.push(agg);
    }
    (out, trace)
}

fn relu_residual(msg: &[f64], prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pre: Vec<f64> = msg.iter().zip(prev).map(|(m, p)| m + p).collect();
    let out = pre.iter().map(|&v| v.max(0.0)).collect();
    (pre, out)
}

/// One message-passing layer (`layer` is 1-based). Both halves read the
/// layer `l-1` encodings.
pub fn message_passing_layer(
    graph: &AnswerGraph,
    prev: &Encodings,
    sr: &[f64],
    params: &GnnParameters,
    layer: usize,
    uniform: bool,
) -> (Encodings, LayerTrace) {
    assert!(
        layer >= 1 && layer <= params.layers(),
        "layer {layer} out of range"
    );
    let l = layer - 1;
    let d = params.dim();
    assert_eq!(sr.len(), d, "SR dimension mismatch");

    let att = params.linear(LinearId::EvidenceAttention(l));
    let msg = params.linear(LinearId::EvidenceMessage(l));
    let mut evidence_attention = AttentionTrace::default();
    let (mut evidence_agg, mut evidence_pre, mut evidences) = (Vec::new(), Vec::new(), Vec::new());
    for (i, node) in graph.evidences().iter().enumerate() {
        let (w, p, agg) = attend(&node.entities, &prev.entities, att, sr, uniform);
        let m = msg.forward(&agg);
        let (pre, out) = relu_residual(&m, &prev.evidences[i]);
        evidence_attention.weights.push(w);
        evidence_attention.projections.push(p);
        evidence_agg.push(agg);
        evidence_pre.push(pre);
        evidences.push(out);
    }

    let att = params.linear(LinearId::EntityAttention(l));
    let msg = params.linear(LinearId::EntityMessage(l));
    let mut entity_attention = AttentionTrace::default();
    let (mut entity_agg, mut entity_pre, mut entities) = (Vec::new(), Vec::new(), Vec::new());
    for (j, node) in graph.entities().iter().enumerate() {
        let (w, p, agg) = attend(&node.evidences, &prev.evidences, att, sr, uniform);
        let m = msg.forward(&agg);
        let (pre, out) = relu_residual(&m, &prev.entities[j]);
        entity_attention.weights.push(w);
        entity_attention.projections.push(p);
        entity_agg.push(agg);
        entity_pre.push(pre);
        entities.push(out);
    }

    (
        Encodings {
            entities,
            evidences,
        },
        LayerTrace {
            evidence_attention,
            entity_attention,
            evidence_agg,
            entity_agg,
            evidence_pre,
            entity_pre,
        },
    )
}

fn score_nodes(
    vectors: &[Vec<f64>],
    sr: &[f64],
    lin: Linear<'_>,
    what: &'static str,
) -> Result<HeadTrace> {
    if vectors.is_empty() {
        return Err(Error::EmptyGraph(what));
    }
    let projections: Vec<Vec<f64>> = vectors.iter().map(|v| lin.forward(v)).collect();
    let logits: Vec<f64> = projections.iter().map(|p| dot(p, sr)).collect();
    let scores = softmax(&logits);
    Ok(HeadTrace {
        projections,
        logits,
        scores,
    })
}

/// Answer scores: softmax over all entities of `lin_e(e^L) · SR`.
pub fn score_entities(
    entities: &[Vec<f64>],
    sr: &[f64],
    params: &GnnParameters,
) -> Result<HeadTrace> {
    score_nodes(entities, sr, params.linear(LinearId::EntityHead), "entity")
}

/// Relevance scores: softmax over all evidences of `lin_ε(ε^L) · SR`.
pub fn score_evidences(
    evidences: &[Vec<f64>],
    sr: &[f64],
    params: &GnnParameters,
) -> Result<HeadTrace> {
    score_nodes(
        evidences,
        sr,
        params.linear(LinearId::EvidenceHead),
        "evidence",
    )
}

/// Trainable GNN: configuration, encoder vocabulary and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: GnnConfig,
    pub vocab: Vocabulary,
    pub params: GnnParameters,
}

impl GnnModel {
    pub fn new(config: GnnConfig, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let params = GnnParameters::init(config.dim, config.layers, vocab.len(), config.seed);
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    pub fn from_parts(config: GnnConfig, vocab: Vocabulary, params: GnnParameters) -> Result<Self> {
        config.validate()?;
        if params.dim() != config.dim
            || params.layers() != config.layers
            || params.vocab_size() != vocab.len()
        {
            return Err(Error::Config(
                "parameter shapes do not match configuration".into(),
            ));
        }
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    pub fn sr_token_ids(&self, sr: &StructuredRepresentation) -> Vec<usize> {
        self.vocab.encode(&sr.flat_text())
    }

    fn with_sr(&self, mut ids: Vec<usize>, sr_ids: &[usize]) -> Vec<usize> {
        if !self.config.ablation.disable_cross_encoder {
            ids.push(SEP_ID);
            ids.extend_from_slice(sr_ids);
        }
        ids
    }

    /// Evidence text, then `[SEP]` and the SR tokens unless the
    /// cross-encoder is disabled.
    pub fn evidence_token_ids(&self, evidence: &Evidence, sr_ids: &[usize]) -> Vec<usize> {
        self.with_sr(self.vocab.encode(&evidence.text), sr_ids)
    }

    /// Label, `[TYPE]` and type tokens (unless disabled), then `[SEP]` and the SR.
    pub fn entity_token_ids(&self, entity: &EntityRef, sr_ids: &[usize]) -> Vec<usize> {
        let mut ids = self.vocab.encode(&entity.label);
        if !self.config.ablation.disable_entity_type {
            ids.push(TYPE_SEP_ID);
            ids.extend(self.vocab.encode(&entity.kb_type));
        }
        self.with_sr(ids, sr_ids)
    }

    pub fn encode_sr(&self, sr: &StructuredRepresentation) -> Result<Vec<f64>> {
        encode_text(&self.sr_token_ids(sr), &self.params)
    }

    pub fn encode_evidence(
        &self,
        evidence: &Evidence,
        sr: &StructuredRepresentation,
    ) -> Result<Vec<f64>> {
        encode_text(
            &self.evidence_token_ids(evidence, &self.sr_token_ids(sr)),
            &self.params,
        )
    }

    pub fn encode_entity_cross(
        &self,
        entity: &EntityRef,
        sr: &StructuredRepresentation,
    ) -> Result<Vec<f64>> {
        encode_text(
            &self.entity_token_ids(entity, &self.sr_token_ids(sr)),
            &self.params,
        )
    }

    pub fn forward(&self, graph: &AnswerGraph, sr: &StructuredRepresentation) -> Result<Forward> {
        if graph.is_empty() {
            return Err(Error::EmptyGraph("evidence"));
        }
        let p = &self.params;
        let uniform = self.config.ablation.disable_sr_attention;
        let sr_ids = self.sr_token_ids(sr);
        let sr_vec = encode_text(&sr_ids, p)?;

        let evidence_ids: Vec<Vec<usize>> = graph
            .evidences()
            .iter()
            .map(|n| self.evidence_token_ids(&n.evidence, &sr_ids))
            .collect();
        let ev0 = evidence_ids
            .iter()
            .map(|ids| encode_text(ids, p))
            .collect::<Result<Vec<_>>>()?;

        let (ent0, entity_ids, alternating) = match self.config.encoder_mode {
            EncoderMode::Cross => {
                let ids: Vec<Vec<usize>> = graph
                    .entities()
                    .iter()
                    .map(|n| self.entity_token_ids(&n.entity, &sr_ids))
                    .collect();
                let enc = ids
                    .iter()
                    .map(|ids| encode_text(ids, p))
                    .collect::<Result<Vec<_>>>()?;
                (enc, Some(ids), None)
            }
            EncoderMode::Alternating => {
                let (enc, trace) = encode_entities_alternating(graph, &ev0, &sr_vec, p, uniform);
                (enc, None, Some(trace))
            }
        };

        let mut layers = vec![Encodings {
            entities: ent0,
            evidences: ev0,
        }];
        let mut traces = Vec::with_capacity(self.config.layers);
        for l in 1..=self.config.layers {
            let (next, trace) =
                message_passing_layer(graph, layers.last().unwrap(), &sr_vec, p, l, uniform);
            layers.push(next);
            traces.push(trace);
        }
        let last = layers.last().unwrap();
        let entity_head = score_entities(&last.entities, &sr_vec, p)?;
        let evidence_head = score_evidences(&last.evidences, &sr_vec, p)?;

        Ok(Forward {
            scores: NodeScores {
                entity: entity_head.scores.clone(),
                evidence: evidence_head.scores.clone(),
                entity_logits: entity_head.logits.clone(),
                evidence_logits: evidence_head.logits.clone(),
            },
            encodings: GraphEncodings { sr: sr_vec, layers },
            trace: ForwardTrace {
                sr_ids,
                evidence_ids,
                entity_ids,
                alternating,
                layers: traces,
                entity_head,
                evidence_head,
            },
        })
    }

    /// Multi-task loss, or `None` when no gold answer is in the graph.
    pub fn loss(
        &self,
        scores: &NodeScores,
        graph: &AnswerGraph,
        golds: &[GoldAnswer],
    ) -> Option<LossBreakdown> {
        let targets = Targets::new(graph, golds)?;
        Some(loss_from(scores, &targets, &self.config))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        graph: &AnswerGraph,
        sr: &StructuredRepresentation,
        golds: &[GoldAnswer],
    ) -> Result<Option<(LossBreakdown, GnnParameters)>> {
        let targets = match Targets::new(graph, golds) {
            Some(t) => t,
            None => return Ok(None),
        };
        let fwd = self.forward(graph, sr)?;
        let loss = loss_from(&fwd.scores, &targets, &self.config);
        let grads = self.backward(graph, &fwd, &targets);
        Ok(Some((loss, grads)))
    }

    fn backward(&self, graph: &AnswerGraph, fwd: &Forward, targets: &Targets) -> GnnParameters {
        let p = &self.params;
        let d = p.dim();
        let uniform = self.config.ablation.disable_sr_attention;
        let mut grads = p.zeros_like();
        let sr = &fwd.encodings.sr;
        let mut d_sr = vec![0.0; d];

        let n_ent = graph.num_entities();
        let n_ev = graph.num_evidences();
        let mut d_ent = vec![vec![0.0; d]; n_ent];
        let mut d_ev = vec![vec![0.0; d]; n_ev];
        let last = fwd.encodings.last();

        // heads
        let heads = [
            (
                &fwd.trace.entity_head,
                &targets.entity,
                self.config.w_entity,
                LinearId::EntityHead,
                &last.entities,
                &mut d_ent,
            ),
            (
                &fwd.trace.evidence_head,
                &targets.evidence,
                self.config.w_evidence,
                LinearId::EvidenceHead,
                &last.evidences,
                &mut d_ev,
            ),
        ];
        for (head, y, weight, id, inputs, d_inputs) in heads {
            if weight == 0.0 {
                continue;
            }
            let n = head.scores.len() as f64;
            let grad_p: Vec<f64> = head
                .scores
                .iter()
                .zip(y)
                .map(|(&p, &y)| weight * bce_grad(p, y) / n)
                .collect();
            let dz = softmax_backward(&head.scores, &grad_p);
            let lin = p.linear(id);
            for (i, &dzi) in dz.iter().enumerate() {
                axpy(dzi, &head.projections[i], &mut d_sr);
                let dout: Vec<f64> = sr.iter().map(|s| dzi * s).collect();
                grads.linear_mut(id).accumulate(&dout, &inputs[i]);
                lin.backprop_input(&dout, &mut d_inputs[i]);
            }
        }

        // message passing, last layer first
        for l in (1..=self.config.layers).rev() {
            let trace = &fwd.trace.layers[l - 1];
            let prev = &fwd.encodings.layers[l - 1];
            let mut d_ent_prev = vec![vec![0.0; d]; n_ent];
            let mut d_ev_prev = vec![vec![0.0; d]; n_ev];

            // evidence half: targets are evidences, sources are entities
            for (i, node) in graph.evidences().iter().enumerate() {
                let d_pre = relu_grad(&d_ev[i], &trace.evidence_pre[i]);
                axpy(1.0, &d_pre, &mut d_ev_prev[i]);
                let d_agg = self.message_backward(
                    LinearId::EvidenceMessage(l - 1),
                    &d_pre,
                    &trace.evidence_agg[i],
                    &mut grads,
                );
                self.attention_backward(
                    LinearId::EvidenceAttention(l - 1),
                    &node.entities,
                    &prev.entities,
                    &trace.evidence_attention.weights[i],
                    trace.evidence_attention.projections.get(i),
                    &d_agg,
                    sr,
                    uniform,
                    &mut d_ent_prev,
                    &mut d_sr,
                    &mut grads,
                );
            }
            // entity half: targets are entities, sources are evidences
            for (j, node) in graph.entities().iter().enumerate() {
                let d_pre = relu_grad(&d_ent[j], &trace.entity_pre[j]);
                axpy(1.0, &d_pre, &mut d_ent_prev[j]);
                let d_agg = self.message_backward(
                    LinearId::EntityMessage(l - 1),
                    &d_pre,
                    &trace.entity_agg[j],
                    &mut grads,
                );
                self.attention_backward(
                    LinearId::EntityAttention(l - 1),
                    &node.evidences,
                    &prev.evidences,
                    &trace.entity_attention.weights[j],
                    trace.entity_attention.projections.get(j),
                    &d_agg,
                    sr,
                    uniform,
                    &mut d_ev_prev,
                    &mut d_sr,
                    &mut grads,
                );
            }
            d_ent = d_ent_prev;
            d_ev = d_ev_prev;
        }

        // initial encodings
        let layer0 = &fwd.encodings.layers[0];
        match (&fwd.trace.alternating, &fwd.trace.entity_ids) {
            (Some(alt), _) => {
                for (j, node) in graph.entities().iter().enumerate() {
                    self.attention_backward(
                        LinearId::AlternatingAttention,
                        &node.evidences,
                        &layer0.evidences,
                        &alt.weights[j],
                        alt.projections.get(j),
                        &d_ent[j],
                        sr,
                        uniform,
                        &mut d_ev,
                        &mut d_sr,
                        &mut grads,
                    );
                }
            }
            (None, Some(entity_ids)) => {
                for (ids, g) in entity_ids.iter().zip(&d_ent) {
                    scatter_mean(ids, g, &mut grads);
                }
            }
            (None, None) => unreachable!("entity encodings always traced"),
        }
        for (ids, g) in fwd.trace.evidence_ids.iter().zip(&d_ev) {
            scatter_mean(ids, g, &mut grads);
        }
        scatter_mean(&fwd.trace.sr_ids, &d_sr, &mut grads);
        grads
    }

    fn message_backward(
        &self,
        id: LinearId,
        d_out: &[f64],
        input: &[f64],
        grads: &mut GnnParameters,
    ) -> Vec<f64> {
        grads.linear_mut(id).accumulate(d_out, input);
        let mut d_in = vec![0.0; d_out.len()];
        self.params.linear(id).backprop_input(d_out, &mut d_in);
        d_in
    }

    /// Backward through `agg = Σ α_k x_k` with `α = softmax_k(lin(x_k) · sr)`.
    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        id: LinearId,
        neighbors: &[usize],
        sources: &[Vec<f64>],
        weights: &[f64],
        projections: Option<&Vec<Vec<f64>>>,
        d_agg: &[f64],
        sr: &[f64],
        uniform: bool,
        d_sources: &mut [Vec<f64>],
        d_sr: &mut [f64],
        grads: &mut GnnParameters,
    ) {
        for (&k, &w) in neighbors.iter().zip(weights) {
            axpy(w, d_agg, &mut d_sources[k]);
        }
        if uniform {
            return;
        }
        let projections = projections.expect("projections traced for SR-attention");
        let d_w: Vec<f64> = neighbors.iter().map(|&k| dot(d_agg, &sources[k])).collect();
        let dz = softmax_backward(weights, &d_w);
        let lin = self.params.linear(id);
        for ((&k, &dzk), proj) in neighbors.iter().zip(&dz).zip(projections) {
            if dzk == 0.0 {
                continue;
            }
            axpy(dzk, proj, d_sr);
            let dout: Vec<f64> = sr.iter().map(|s| dzk * s).collect();
            grads.linear_mut(id).accumulate(&dout, &sources[k]);
            lin.backprop_input(&dout, &mut d_sources[k]);
        }
    }
}

/// ReLU backward. At exactly zero (a dead input plus a zero bias gives
/// this often) the subgradient 1/2 is used, which is what a symmetric
/// finite difference measures.
fn relu_grad(g: &[f64], pre: &[f64]) -> Vec<f64> {
    g.iter()
        .zip(pre)
        .map(|(&g, &x)| match x.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => g,
            Some(std::cmp::Ordering::Equal) => 0.5 * g,
            _ => 0.0,
        })
        .collect()
}

fn scatter_mean(ids: &[usize], g: &[f64], grads: &mut GnnParameters) {
    let n = ids.len() as f64;
    for &id in ids {
        axpy(1.0 / n, g, grads.embedding_mut(id));
    }
}

/// Binary targets: gold entities, and evidences adjacent to a gold entity.
#[derive(Debug, Clone)]
pub(crate) struct Targets {
    pub entity: Vec<f64>,
    pub evidence: Vec<f64>,
}

impl Targets {
    pub fn new(graph: &AnswerGraph, golds: &[GoldAnswer]) -> Option<Self> {
        let gold = graph.gold_entities(golds);
        if gold.is_empty() {
            return None;
        }
        let mut entity = vec![0.0; graph.num_entities()];
        let mut evidence = vec![0.0; graph.num_evidences()];
        for &g in &gold {
            entity[g] = 1.0;
            for &v in &graph.entities()[g].evidences {
                evidence[v] = 1.0;
            }
        }
        Some(Self { entity, evidence })
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
}

fn bce_grad(p: f64, y: f64) -> f64 {
    if p <= BCE_EPS || p >= 1.0 - BCE_EPS {
        return 0.0;
    }
    -(y / p - (1.0 - y) / (1.0 - p))
}

/// Mean binary cross-entropy of softmax scores against 0/1 targets.
pub fn mean_bce(scores: &[f64], targets: &[f64]) -> f64 {
    let n = scores.len() as f64;
    scores
        .iter()
        .zip(targets)
        .map(|(&p, &y)| bce(p, y))
        .sum::<f64>()
        / n
}

fn loss_from(scores: &NodeScores, targets: &Targets, config: &GnnConfig) -> LossBreakdown {
    let entity = mean_bce(&scores.entity, &targets.entity);
    let evidence = mean_bce(&scores.evidence, &targets.evidence);
    LossBreakdown {
        total: config.w_entity * entity + config.w_evidence * evidence,
        entity,
        evidence,
    }
}
