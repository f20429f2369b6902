use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::CODE_BITS;

/// Probabilities are clamped to [EPS, 1 - EPS] inside the loss.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Known tokens; ids run over `0..=vocab` with 0 for unknown states.
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub out: usize,
}

impl Dims {
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        Dims { vocab, embed, hidden, out: CODE_BITS }
    }

    fn concat(&self) -> usize {
        self.hidden + self.embed
    }
}

/// Embedding table, four gates over `[h, x]` and a sigmoid output layer.
/// Matrices are row-major; gate matrices are `hidden x (hidden + embed)`.
/// The same layout holds gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub dims: Dims,
    pub embedding: Vec<f64>,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_o: Vec<f64>,
    pub w_c: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
    pub w_y: Vec<f64>,
    pub b_y: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 11] = ["embedding", "w_f", "w_i", "w_o", "w_c", "b_f", "b_i", "b_o", "b_c", "w_y", "b_y"];

impl LstmParams {
    pub fn zeros(dims: Dims) -> Self {
        let (h, z) = (dims.hidden, dims.concat());
        LstmParams {
            dims,
            embedding: vec![0.0; (dims.vocab + 1) * dims.embed],
            w_f: vec![0.0; h * z],
            w_i: vec![0.0; h * z],
            w_o: vec![0.0; h * z],
            w_c: vec![0.0; h * z],
            b_f: vec![0.0; h],
            b_i: vec![0.0; h],
            b_o: vec![0.0; h],
            b_c: vec![0.0; h],
            w_y: vec![0.0; dims.out * h],
            b_y: vec![0.0; dims.out],
        }
    }

    /// Uniform weights in ±1/sqrt(fan-in), embeddings in ±1, forget bias 1.
    pub fn init<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let gate = 1.0 / (dims.concat() as f64).sqrt();
        let head = 1.0 / (dims.hidden as f64).sqrt();
        for v in &mut p.embedding {
            *v = rng.gen_range(-1.0..1.0);
        }
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_o, &mut p.w_c] {
            for v in w.iter_mut() {
                *v = rng.gen_range(-gate..gate);
            }
        }
        for v in &mut p.w_y {
            *v = rng.gen_range(-head..head);
        }
        p.b_f.fill(1.0);
        p
    }

    pub fn tensors(&self) -> [&[f64]; 11] {
        [&self.embedding, &self.w_f, &self.w_i, &self.w_o, &self.w_c, &self.b_f, &self.b_i, &self.b_o, &self.b_c, &self.w_y, &self.b_y]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 11] {
        let LstmParams { embedding, w_f, w_i, w_o, w_c, b_f, b_i, b_o, b_c, w_y, b_y, .. } = self;
        [embedding, w_f, w_i, w_o, w_c, b_f, b_i, b_o, b_c, w_y, b_y]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForwardError {
    #[error("empty input sequence")]
    Empty,
    #[error("token {token} outside vocabulary of {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let j = 4 * k;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..n {
        s += a[j] * b[j];
    }
    s
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one step.
#[derive(Clone, Debug)]
struct Step {
    token: usize,
    z: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    steps: Vec<Step>,
    h_last: Vec<f64>,
    pub probs: Vec<f64>,
}

fn gate(w: &[f64], b: &[f64], z: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    let cols = z.len();
    b.iter().enumerate().map(|(r, &br)| act(dot(&w[r * cols..(r + 1) * cols], z) + br)).collect()
}

/// Runs the sequence from zero hidden and cell state.
pub fn forward(p: &LstmParams, tokens: &[u32]) -> Result<Cache, ForwardError> {
    if tokens.is_empty() {
        return Err(ForwardError::Empty);
    }
    let Dims { vocab, embed, hidden, out } = p.dims;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(tokens.len());
    for &tok in tokens {
        let token = tok as usize;
        if token > vocab {
            return Err(ForwardError::TokenOutOfRange { token: tok, vocab });
        }
        let mut z = Vec::with_capacity(hidden + embed);
        z.extend_from_slice(&h);
        z.extend_from_slice(&p.embedding[token * embed..(token + 1) * embed]);
        let f = gate(&p.w_f, &p.b_f, &z, sigmoid);
        let i = gate(&p.w_i, &p.b_i, &z, sigmoid);
        let o = gate(&p.w_o, &p.b_o, &z, sigmoid);
        let g = gate(&p.w_c, &p.b_c, &z, f64::tanh);
        for k in 0..hidden {
            c[k] = f[k] * c[k] + i[k] * g[k];
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        for k in 0..hidden {
            h[k] = o[k] * tanh_c[k];
        }
        steps.push(Step { token, z, f, i, o, g, c: c.clone(), tanh_c });
    }
    let probs = (0..out).map(|r| sigmoid(dot(&p.w_y[r * hidden..(r + 1) * hidden], &h) + p.b_y[r])).collect();
    Ok(Cache { steps, h_last: h, probs })
}

pub fn predict(p: &LstmParams, tokens: &[u32]) -> Result<Vec<f64>, ForwardError> {
    forward(p, tokens).map(|c| c.probs)
}

/// Binary cross-entropy summed over output units.
pub fn bce_loss(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

/// Adds the gradient of `bce_loss(forward(tokens), target)` into `grad`.
pub fn backward(p: &LstmParams, cache: &Cache, target: &[f64], grad: &mut LstmParams) {
    let Dims { embed, hidden, out, .. } = p.dims;
    let cols = hidden + embed;
    let dy: Vec<f64> = cache.probs.iter().zip(target).map(|(p, t)| p - t).collect();
    let mut dh = vec![0.0; hidden];
    for r in 0..out {
        axpy(&mut grad.w_y[r * hidden..(r + 1) * hidden], dy[r], &cache.h_last);
        grad.b_y[r] += dy[r];
        axpy(&mut dh, dy[r], &p.w_y[r * hidden..(r + 1) * hidden]);
    }
    let mut dc = vec![0.0; hidden];
    let mut da = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
    let mut dz = vec![0.0; cols];
    for t in (0..cache.steps.len()).rev() {
        let s = &cache.steps[t];
        for k in 0..hidden {
            let c_prev = if t > 0 { cache.steps[t - 1].c[k] } else { 0.0 };
            let d_o = dh[k] * s.tanh_c[k];
            dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            da[0][k] = dc[k] * c_prev * s.f[k] * (1.0 - s.f[k]);
            da[1][k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            da[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
            da[3][k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
            dc[k] *= s.f[k];
        }
        dz.fill(0.0);
        let gates = [(&p.w_f, &mut grad.w_f, &mut grad.b_f), (&p.w_i, &mut grad.w_i, &mut grad.b_i), (&p.w_o, &mut grad.w_o, &mut grad.b_o), (&p.w_c, &mut grad.w_c, &mut grad.b_c)];
        for ((w, gw, gb), da) in gates.into_iter().zip(&da) {
            for r in 0..hidden {
                if da[r] == 0.0 {
                    continue;
                }
                axpy(&mut gw[r * cols..(r + 1) * cols], da[r], &s.z);
                gb[r] += da[r];
                axpy(&mut dz, da[r], &w[r * cols..(r + 1) * cols]);
            }
        }
        dh.copy_from_slice(&dz[..hidden]);
        axpy(&mut grad.embedding[s.token * embed..(s.token + 1) * embed], 1.0, &dz[hidden..]);
    }
}
