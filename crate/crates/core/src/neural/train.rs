use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::lstm::{backward, bce_loss, forward, Dims, ForwardError, LstmParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed: usize,
    pub hidden: usize,
}

impl ModelConfig {
    pub fn desk() -> Self {
        ModelConfig { embed: 64, hidden: 128 }
    }

    pub fn paper_scale() -> Self {
        ModelConfig { embed: 1000, hidden: 512 }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Share of training traces held out when the data has no validation
    /// split of its own.
    pub validation_fraction: f64,
    pub batch_size: usize,
    /// Global gradient-norm cap; 0 disables clipping.
    pub grad_clip_norm: f64,
    pub seed: u64,
    /// Feed the initial state as the first token.
    pub include_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            max_epochs: 10_000,
            patience: 50,
            validation_fraction: 0.1,
            batch_size: 32,
            grad_clip_norm: 5.0,
            seed: 1,
            include_init: true,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return bad("rmsprop decay must lie in [0, 1)");
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("patience, batch size and max epochs must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Squared-gradient averages for RMSprop.
#[derive(Clone, Debug)]
pub struct RmsProp {
    sq: LstmParams,
}

impl RmsProp {
    pub fn new(dims: Dims) -> Self {
        RmsProp { sq: LstmParams::zeros(dims) }
    }

    /// `s = rho s + (1 - rho) g^2; theta -= lr g / (sqrt(s) + eps)`.
    pub fn step(&mut self, params: &mut LstmParams, grad: &LstmParams, lr: f64, rho: f64, eps: f64) {
        for ((p, s), g) in params.tensors_mut().into_iter().zip(self.sq.tensors_mut()).zip(grad.tensors()) {
            for ((p, s), &g) in p.iter_mut().zip(s.iter_mut()).zip(g) {
                *s = rho * *s + (1.0 - rho) * g * g;
                *p -= lr * g / (s.sqrt() + eps);
            }
        }
    }
}

/// A token sequence with its 36 target bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub tokens: Vec<u32>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Validation loss of the untrained model. Without validation data the
    /// training loss stands in for it throughout.
    pub initial_validation_loss: f64,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub elapsed_secs: f64,
    pub checksum: String,
}

impl TrainReport {
    pub fn best_validation_loss(&self) -> f64 {
        if self.best_epoch == 0 {
            self.initial_validation_loss
        } else {
            self.validation_loss[self.best_epoch - 1]
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training examples")]
    NoData,
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error("non-finite gradient in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

/// Mean loss per example.
pub fn mean_loss(p: &LstmParams, data: &[Example]) -> Result<f64, ForwardError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in data {
        total += bce_loss(&forward(p, &ex.tokens)?.probs, &ex.target);
    }
    Ok(total / data.len() as f64)
}

/// Minibatch RMSprop with early stopping on validation loss. Returns the
/// parameters of the best validation epoch.
pub fn train(mut params: LstmParams, train: &[Example], validation: &[Example], cfg: &TrainConfig) -> Result<(LstmParams, TrainReport), TrainError> {
    cfg.check()?;
    if train.is_empty() {
        return Err(TrainError::NoData);
    }
    let start = Instant::now();
    let dims = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = RmsProp::new(dims);
    let mut grad = LstmParams::zeros(dims);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let monitored = if validation.is_empty() { train } else { validation };
    let initial = mean_loss(&params, monitored)?;
    let mut best = (initial, 0usize, params.clone());
    let mut report = TrainReport {
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        initial_validation_loss: initial,
        best_epoch: 0,
        stopped_epoch: 0,
        early_stopped: false,
        elapsed_secs: 0.0,
        checksum: String::new(),
    };
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.fill(0.0);
            for &k in batch {
                let ex = &train[k];
                let cache = forward(&params, &ex.tokens)?;
                epoch_loss += bce_loss(&cache.probs, &ex.target);
                backward(&params, &cache, &ex.target, &mut grad);
            }
            grad.scale(1.0 / batch.len() as f64);
            let norm = grad.sq_norm().sqrt();
            if !norm.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b + 1 });
            }
            if cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm {
                grad.scale(cfg.grad_clip_norm / norm);
            }
            opt.step(&mut params, &grad, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon);
        }
        report.train_loss.push(epoch_loss / train.len() as f64);
        let val = if validation.is_empty() { report.train_loss[epoch - 1] } else { mean_loss(&params, validation)? };
        report.validation_loss.push(val);
        report.stopped_epoch = epoch;
        if val < best.0 {
            best = (val, epoch, params.clone());
        } else if epoch - best.1 >= cfg.patience {
            report.early_stopped = true;
            break;
        }
    }
    report.best_epoch = best.1;
    report.elapsed_secs = start.elapsed().as_secs_f64();
    report.checksum = super::checkpoint::param_checksum(&best.2);
    Ok((best.2, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let dims = Dims::new(2, 2, 3);
        let mut p = LstmParams::init(dims, &mut ChaCha8Rng::seed_from_u64(1));
        let before = p.clone();
        RmsProp::new(dims).step(&mut p, &LstmParams::zeros(dims), 1e-3, 0.9, 1e-8);
        assert_eq!(p, before);
    }

    #[test]
    fn single_scalar_steps() {
        let dims = Dims::new(0, 1, 1);
        let mut p = LstmParams::zeros(dims);
        let mut g = LstmParams::zeros(dims);
        g.b_y[0] = 0.3;
        let mut opt = RmsProp::new(dims);
        opt.step(&mut p, &g, 0.01, 0.0, 1e-8);
        assert!((p.b_y[0] + 0.01 * 0.3 / (0.3 + 1e-8)).abs() < 1e-15);

        // with decay, repeated identical gradients shrink the step
        let mut p = LstmParams::zeros(dims);
        let mut opt = RmsProp::new(dims);
        opt.step(&mut p, &g, 0.01, 0.9, 1e-8);
        let first = p.b_y[0];
        opt.step(&mut p, &g, 0.01, 0.9, 1e-8);
        let second = p.b_y[0] - first;
        let s1: f64 = 0.1 * 0.09;
        let s2: f64 = 0.9 * s1 + 0.1 * 0.09;
        assert!((first + 0.01 * 0.3 / (s1.sqrt() + 1e-8)).abs() < 1e-12);
        assert!((second + 0.01 * 0.3 / (s2.sqrt() + 1e-8)).abs() < 1e-12);
        assert!(second.abs() < first.abs());
    }
}
