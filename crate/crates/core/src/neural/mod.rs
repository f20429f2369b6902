//! LSTM goal classifier: embedding, one LSTM layer, 36 sigmoid outputs.

mod checkpoint;
mod lstm;
mod train;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use web_time::Instant;

pub use checkpoint::{param_checksum, CheckpointError, LstmModel, FORMAT as CHECKPOINT_FORMAT};
pub use lstm::{backward, bce_loss, forward, predict, sigmoid, Cache, Dims, ForwardError, LstmParams, PROB_EPS, TENSOR_NAMES};
pub use train::{mean_loss, train, Example, ModelConfig, RmsProp, TrainConfig, TrainError, TrainReport};

use crate::codec::{self, nearest_valid, NearestMatch, Vocabulary};
use crate::dataset::{Dataset, DatasetError, Record, Split};
use crate::recognition::RecognitionResult;

/// State codes fed to the network for one record.
pub fn model_input(record: &Record, include_init: bool) -> Result<Vec<u64>, DatasetError> {
    let mut seq = record.observed_states()?;
    if !include_init {
        seq.remove(0);
    }
    Ok(seq)
}

/// Target for each output unit; unit `b` reads bit `35 - b` of the code.
pub fn target_bits(code: u64) -> Vec<f64> {
    (0..codec::CODE_BITS).map(|b| (code >> (codec::CODE_BITS - 1 - b) & 1) as f64).collect()
}

fn to_examples(records: &[&Record], vocab: &Vocabulary, include_init: bool) -> Result<Vec<Example>, DatasetError> {
    records
        .iter()
        .map(|r| {
            let tokens = model_input(r, include_init)?.into_iter().map(|c| vocab.id(c)).collect();
            Ok(Example { tokens, target: target_bits(r.goal()?) })
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("training split has {0} distinct goals; at least 2 are needed")]
    TooFewGoals(usize),
}

/// Builds the vocabulary from training states, holds out validation traces
/// and trains a fresh model.
pub fn train_on_dataset(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<(LstmModel, TrainReport), NeuralError> {
    ds.validate()?;
    let mut train_recs: Vec<&Record> = ds.records_in(Split::Train).collect();
    let mut val_recs: Vec<&Record> = ds.records_in(Split::Validation).collect();
    let goals: BTreeSet<&str> = train_recs.iter().map(|r| r.goal_code.as_str()).collect();
    if goals.len() < 2 {
        return Err(NeuralError::TooFewGoals(goals.len()));
    }
    if val_recs.is_empty() {
        let mut ids: Vec<&str> = train_recs.iter().map(|r| r.problem_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        let n_val = ((ids.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, ids.len().saturating_sub(1).max(1));
        let held: BTreeSet<&str> = ids[..n_val].iter().copied().collect();
        let (v, t): (Vec<&Record>, Vec<&Record>) = train_recs.into_iter().partition(|r| held.contains(r.problem_id.as_str()));
        val_recs = v;
        train_recs = t;
    }
    let mut vocab = Vocabulary::new();
    for r in &train_recs {
        for c in r.states()? {
            vocab.insert(c);
        }
    }
    vocab.freeze();
    let train_ex = to_examples(&train_recs, &vocab, cfg.include_init)?;
    let val_ex = to_examples(&val_recs, &vocab, cfg.include_init)?;
    let dims = Dims::new(vocab.len(), model_cfg.embed, model_cfg.hidden);
    let init = LstmParams::init(dims, &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
    let (params, report) = train(init, &train_ex, &val_ex, cfg)?;
    Ok((LstmModel { domain: ds.config.domain, params, vocab, model: model_cfg.clone(), train: cfg.clone() }, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalPrediction {
    pub result: RecognitionResult,
    pub probs: Vec<f64>,
    pub nearest: NearestMatch,
}

/// Runs the network on observed state codes and snaps the output onto the
/// closest candidate. Unknown codes map to token 0.
pub fn predict_goal(model: &LstmModel, observed: &[u64], candidates: &[u64]) -> Result<GoalPrediction, ForwardError> {
    let start = Instant::now();
    let tokens: Vec<u32> = observed.iter().map(|&c| model.vocab.id(c)).collect();
    let probs = predict(&model.params, &tokens)?;
    let nearest = nearest_valid(&probs, candidates);
    let scores = candidates.iter().map(|&c| 1.0 - codec::expected_distance(&probs, c) / codec::CODE_BITS as f64).collect();
    let result = RecognitionResult { scores, returned: vec![nearest.index], flagged: Vec::new(), elapsed_secs: start.elapsed().as_secs_f64() };
    Ok(GoalPrediction { result, probs, nearest })
}
