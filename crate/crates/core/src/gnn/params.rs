//! Flat parameter storage with named tensor views.
//!
//! All trainable values live in one contiguous `Vec<f64>`: the embedding
//! table first, then every linear map as a row-major `d x d` weight followed
//! by its bias. Gradients and optimizer moments reuse the same layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifies one linear map `R^d -> R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearId {
    /// Attention over neighboring entities when updating an evidence (layer, 0-based).
    EvidenceAttention(usize),
    /// Message projection into an evidence.
    EvidenceMessage(usize),
    /// Attention over neighboring evidences when updating an entity.
    EntityAttention(usize),
    /// Message projection into an entity.
    EntityMessage(usize),
    /// Attention used to initialize entities from their evidences.
    AlternatingAttention,
    EntityHead,
    EvidenceHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnParameters {
    dim: usize,
    layers: usize,
    vocab_size: usize,
    data: Vec<f64>,
}

/// Borrowed view of one linear map.
#[derive(Debug, Clone, Copy)]
pub struct Linear<'a> {
    pub weight: &'a [f64],
    pub bias: &'a [f64],
    pub dim: usize,
}

impl Linear<'_> {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.weight[o * d..(o + 1) * d];
            *out_o = self.bias[o] + dot(row, x);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply(x, &mut out);
        out
    }

    /// Adds `W^T g` to `dx`.
    pub fn backprop_input(&self, g: &[f64], dx: &mut [f64]) {
        let d = self.dim;
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            let row = &self.weight[o * d..(o + 1) * d];
            for (dxi, &w) in dx.iter_mut().zip(row) {
                *dxi += w * go;
            }
        }
    }
}

/// Mutable gradient view of one linear map.
pub struct LinearGrad<'a> {
    pub weight: &'a mut [f64],
    pub bias: &'a mut [f64],
    pub dim: usize,
}

impl LinearGrad<'_> {
    /// Accumulates `g x^T` into the weight and `g` into the bias.
    pub fn accumulate(&mut self, g: &[f64], x: &[f64]) {
        let d = self.dim;
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            self.bias[o] += go;
            let row = &mut self.weight[o * d..(o + 1) * d];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w += go * xi;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Named tensor inside the flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl GnnParameters {
    pub fn zeros(dim: usize, layers: usize, vocab_size: usize) -> Self {
        let n = Self::total_len(dim, layers, vocab_size);
        Self {
            dim,
            layers,
            vocab_size,
            data: vec![0.0; n],
        }
    }

    /// Weights uniform in `±1/sqrt(d)`, biases zero, embeddings uniform in `±1`.
    pub fn init(dim: usize, layers: usize, vocab_size: usize, seed: u64) -> Self {
        let mut p = Self::zeros(dim, layers, vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = vocab_size * dim;
        for v in &mut p.data[..emb] {
            *v = rng.gen_range(-1.0..1.0);
        }
        let bound = 1.0 / (dim as f64).sqrt();
        for id in p.linear_ids() {
            let off = p.linear_offset(id);
            for v in &mut p.data[off..off + dim * dim] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    fn total_len(dim: usize, layers: usize, vocab_size: usize) -> usize {
        vocab_size * dim + (4 * layers + 3) * (dim * dim + dim)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.layers, self.vocab_size)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn linear_ids(&self) -> Vec<LinearId> {
        let mut ids = Vec::with_capacity(4 * self.layers + 3);
        for l in 0..self.layers {
            ids.push(LinearId::EvidenceAttention(l));
            ids.push(LinearId::EvidenceMessage(l));
            ids.push(LinearId::EntityAttention(l));
            ids.push(LinearId::EntityMessage(l));
        }
        ids.push(LinearId::AlternatingAttention);
        ids.push(LinearId::EntityHead);
        ids.push(LinearId::EvidenceHead);
        ids
    }

    fn linear_slot(&self, id: LinearId) -> usize {
        match id {
            LinearId::EvidenceAttention(l) => 4 * l,
            LinearId::EvidenceMessage(l) => 4 * l + 1,
            LinearId::EntityAttention(l) => 4 * l + 2,
            LinearId::EntityMessage(l) => 4 * l + 3,
            LinearId::AlternatingAttention => 4 * self.layers,
            LinearId::EntityHead => 4 * self.layers + 1,
            LinearId::EvidenceHead => 4 * self.layers + 2,
        }
    }

    fn linear_offset(&self, id: LinearId) -> usize {
        let d = self.dim;
        if let LinearId::EvidenceAttention(l)
        | LinearId::EvidenceMessage(l)
        | LinearId::EntityAttention(l)
        | LinearId::EntityMessage(l) = id
        {
            assert!(l < self.layers, "layer {l} out of range");
        }
        self.vocab_size * d + self.linear_slot(id) * (d * d + d)
    }

    pub fn linear(&self, id: LinearId) -> Linear<'_> {
        let d = self.dim;
        let off = self.linear_offset(id);
        Linear {
            weight: &self.data[off..off + d * d],
            bias: &self.data[off + d * d..off + d * d + d],
            dim: d,
        }
    }

    pub fn linear_mut(&mut self, id: LinearId) -> LinearGrad<'_> {
        let d = self.dim;
        let off = self.linear_offset(id);
        let (w, b) = self.data[off..off + d * d + d].split_at_mut(d * d);
        LinearGrad {
            weight: w,
            bias: b,
            dim: d,
        }
    }

    pub fn embedding(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn embedding_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Every tensor with its name, in storage order.
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let d = self.dim;
        let mut specs = vec![TensorSpec {
            name: "embeddings".into(),
            offset: 0,
            shape: vec![self.vocab_size, d],
        }];
        for id in self.linear_ids() {
            let off = self.linear_offset(id);
            let name = linear_name(id);
            specs.push(TensorSpec {
                name: format!("{name}.weight"),
                offset: off,
                shape: vec![d, d],
            });
            specs.push(TensorSpec {
                name: format!("{name}.bias"),
                offset: off + d * d,
                shape: vec![d],
            });
        }
        specs
    }

    pub fn from_raw(dim: usize, layers: usize, vocab_size: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == Self::total_len(dim, layers, vocab_size)).then_some(Self {
            dim,
            layers,
            vocab_size,
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn linear_name(id: LinearId) -> String {
    match id {
        LinearId::EvidenceAttention(l) => format!("layer{}.evidence_attention", l + 1),
        LinearId::EvidenceMessage(l) => format!("layer{}.evidence_message", l + 1),
        LinearId::EntityAttention(l) => format!("layer{}.entity_attention", l + 1),
        LinearId::EntityMessage(l) => format!("layer{}.entity_message", l + 1),
        LinearId::AlternatingAttention => "alternating_attention".into(),
        LinearId::EntityHead => "entity_head".into(),
        LinearId::EvidenceHead => "evidence_head".into(),
    }
}
