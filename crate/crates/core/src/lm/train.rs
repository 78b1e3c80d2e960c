use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{LmError, Model};
use super::optim::{clip_grad_norm, grad_norm, AdamW};
use crate::scalar::Scalar;

/// One row of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

/// Deterministic minibatch order: reshuffled epochs drawn from one seeded stream.
pub struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        let mut s = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: n,
            batch_size: batch_size.min(n.max(1)),
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.cursor >= self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Trains `model` in place; `on_step` sees every record as it is produced.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    corpus: &[Vec<u32>],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord, &Model<T>),
) -> Result<Vec<StepRecord>, LmError> {
    cfg.check().map_err(LmError::Config)?;
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut sampler = BatchSampler::new(corpus.len(), cfg.batch_size, cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut opt = AdamW::new(&model.params, cfg);
    let mut curve = Vec::with_capacity(cfg.total_iterations);
    for iteration in 0..cfg.total_iterations {
        let idx = sampler.next_batch();
        let batch: Vec<&[u32]> = idx.iter().map(|&i| corpus[i].as_slice()).collect();
        let rng = (model.config.dropout > 0.0).then_some(&mut dropout_rng);
        let (loss, mut grads) = model.loss_and_grad(&batch, rng)?;
        let norm = match cfg.grad_clip {
            Some(c) => clip_grad_norm(&mut grads, c),
            None => grad_norm(&grads),
        };
        if !loss.is_finite() || !norm.is_finite() {
            return Err(LmError::Diverged { iteration, loss });
        }
        let lr = cfg.learning_rate(iteration);
        opt.step(&mut model.params, &grads, lr);
        if !model.params.all_finite() {
            return Err(LmError::Diverged { iteration, loss });
        }
        let rec = StepRecord {
            iteration,
            loss,
            lr,
            grad_norm: norm,
        };
        on_step(&rec, model);
        curve.push(rec);
    }
    Ok(curve)
}
