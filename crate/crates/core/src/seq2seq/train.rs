//! Teacher-forced training with SGD or Adam and global-norm clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Model, ModelConfig, ModelError, Params};
use super::tensor::{lit, Scalar};
use super::vocab::Vocabulary;
use crate::seqcodec::TokenSequence;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("no training pairs")]
    EmptyData,
    #[error("loss became non-finite at step {step} (grad norm {grad_norm})")]
    NonFiniteLoss { step: usize, grad_norm: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer {other:?} (sgd or adam)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Defaults to 1.0 for SGD and 0.001 for Adam.
    pub learning_rate: Option<f64>,
    /// SGD halves its rate once this fraction of the steps is done.
    pub decay_start: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 3000,
            batch_size: 16,
            optimizer: OptimizerKind::Sgd,
            learning_rate: None,
            decay_start: 0.5,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.optimizer {
            OptimizerKind::Sgd => 1.0,
            OptimizerKind::Adam => 0.001,
        })
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(TrainError::Config(format!("bad learning rate {lr}")));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(TrainError::Config("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// Token id pairs: source ids, gold target ids (no BOS/EOS).
pub type IdPair = (Vec<usize>, Vec<usize>);

pub fn encode_pairs(
    pairs: &[(TokenSequence, TokenSequence)],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Vec<IdPair> {
    pairs
        .iter()
        .map(|(s, t)| (src_vocab.encode(s), tgt_vocab.encode(t)))
        .collect()
}

#[allow(clippy::large_enum_variant)]
enum Optimizer<T> {
    Sgd,
    Adam { m: Params<T>, v: Params<T>, t: i32 },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl<T: Scalar> Optimizer<T> {
    fn new(kind: OptimizerKind, like: &Params<T>) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => {
                let mut m = like.clone();
                m.zero_grad();
                Optimizer::Adam {
                    v: m.clone(),
                    m,
                    t: 0,
                }
            }
        }
    }

    fn update(&mut self, params: &mut Params<T>, grads: &Params<T>, lr: f64) {
        let lr: T = lit(lr);
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * d;
                    }
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let (b1, b2): (T, T) = (lit(ADAM_BETA1), lit(ADAM_BETA2));
                let one = T::one();
                let c1 = one - b1.powi(*t);
                let c2 = one - b2.powi(*t);
                let eps: T = lit(ADAM_EPS);
                let tensors = params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut().into_iter().zip(v.tensors_mut()));
                for ((p, g), (m, v)) in tensors {
                    let iter = p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
                    for ((w, &d), (mi, vi)) in iter {
                        *mi = b1 * *mi + (one - b1) * d;
                        *vi = b2 * *vi + (one - b2) * d * d;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *w -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    /// Mean per-token cross-entropy of each step's batch, before its update.
    pub losses: Vec<f64>,
}

/// Builds vocabularies from `pairs`, initializes a model and trains it.
pub fn train<T: Scalar>(
    pairs: &[(TokenSequence, TokenSequence)],
    mc: &ModelConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let src_vocab = Vocabulary::build(pairs.iter().map(|p| &p.0), 1);
    let tgt_vocab = Vocabulary::build(pairs.iter().map(|p| &p.1), 1);
    let data = encode_pairs(pairs, &src_vocab, &tgt_vocab);
    let mut model = Model::new(*mc, src_vocab, tgt_vocab)?;
    let losses = train_model(&mut model, &data, tc)?;
    Ok(TrainOutcome { model, losses })
}

/// Trains in place for `tc.steps` steps. Batches walk a per-epoch
/// permutation drawn from the model seed; gradients are summed in batch
/// order so results are bit-reproducible.
pub fn train_model<T: Scalar>(
    model: &mut Model<T>,
    data: &[IdPair],
    tc: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    tc.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut grads = model.params.clone();
    let mut optimizer = Optimizer::new(tc.optimizer, &model.params);
    let base_lr = tc.learning_rate();
    let decay_at = (tc.decay_start * tc.steps as f64).ceil() as usize;
    let mut losses = Vec::with_capacity(tc.steps);

    for step in 0..tc.steps {
        let mut batch = Vec::with_capacity(tc.batch_size);
        while batch.len() < tc.batch_size.min(data.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let tokens: usize = batch.iter().map(|&i| data[i].1.len() + 1).sum();
        let weight: T = T::one() / lit(tokens as f64);
        grads.zero_grad();
        let mut total = T::zero();
        for &i in &batch {
            let (src, tgt) = &data[i];
            total += model.accumulate_gradients(src, tgt, weight, &mut grads)?;
        }
        let loss = (total * weight).to_f64().unwrap_or(f64::NAN);
        let norm = grads.global_norm();
        let norm_f = norm.to_f64().unwrap_or(f64::NAN);
        if !loss.is_finite() || !norm_f.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step,
                grad_norm: norm_f,
            });
        }
        losses.push(loss);
        if norm_f > tc.grad_clip {
            let scale: T = lit::<T>(tc.grad_clip) / norm;
            for t in grads.tensors_mut() {
                t.data_mut().iter_mut().for_each(|x| *x *= scale);
            }
        }
        let lr = match tc.optimizer {
            OptimizerKind::Sgd if step >= decay_at => base_lr * 0.5,
            _ => base_lr,
        };
        optimizer.update(&mut model.params, &grads, lr);
        if !model.params.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step,
                grad_norm: norm_f,
            });
        }
    }
    Ok(losses)
}

/// Teacher-forced per-token accuracy, EOS included.
pub fn token_accuracy<T: Scalar>(model: &Model<T>, data: &[IdPair]) -> Result<f64, ModelError> {
    let mut hits = 0;
    let mut total = 0;
    for (src, tgt) in data {
        let (h, n) = model.teacher_forced_hits(src, tgt)?;
        hits += h;
        total += n;
    }
    Ok(if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    })
}

/// Number of pairs whose greedy decode reproduces the target exactly.
pub fn exact_matches<T: Scalar>(model: &Model<T>, data: &[IdPair]) -> Result<usize, ModelError> {
    let mut n = 0;
    for (src, tgt) in data {
        let out = model.greedy_decode(src, model.config.max_tgt_len)?;
        if !out.truncated && &out.ids == tgt {
            n += 1;
        }
    }
    Ok(n)
}

/// `step,loss` CSV.
pub fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}
