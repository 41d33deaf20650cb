//! Minibatch training loop over mixture records.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::LossGraph;
use super::loss::si_snr_db;
use super::optim::{Adam, AdamConfig};
use super::policy::FreezePolicy;
use crate::datagen::MixtureRecord;
use crate::dsp::{Stft, StftConfig};
use crate::error::{Error, Result};
use crate::nn::{ForwardMode, Gradients, Model, ModelConfig};
use crate::pipeline::enhance_with_model;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Optional cap on the total number of optimizer steps in one call.
    pub max_steps: Option<u64>,
    /// Validation records scored per epoch; `None` scores all of them.
    pub val_limit: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            epochs: 4,
            batch_size: 8,
            max_steps: None,
            val_limit: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::validation(format!("learning rate {} is invalid", self.lr)));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return Err(Error::validation(
                "Adam betas must lie in [0, 1) and eps must be positive",
            ));
        }
        Ok(())
    }
}

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub stft: StftConfig,
    pub model: Model<f32>,
    pub optimizer: Adam<f32>,
    /// Optimizer steps taken over the state's lifetime.
    pub step: u64,
    /// Completed epochs over the state's lifetime.
    pub epoch: u64,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(stft: StftConfig, config: ModelConfig, adam: AdamConfig, seed: u64) -> Result<Self> {
        stft.validate()?;
        if stft.bins() != config.bins() {
            return Err(Error::validation(format!(
                "STFT yields {} bins but the model expects {}",
                stft.bins(),
                config.bins()
            )));
        }
        Ok(TrainState {
            stft,
            model: Model::new(config, seed)?,
            optimizer: Adam::new(adam),
            step: 0,
            epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Starts a new training stage from these weights: fresh optimizer
    /// moments, a reseeded shuffle stream and zeroed counters.
    pub fn restart(&mut self, adam: AdamConfig, seed: u64) {
        self.optimizer = Adam::new(adam);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.step = 0;
        self.epoch = 0;
    }

    pub fn mode(&self) -> ForwardMode {
        if self.model.has_adapters() {
            ForwardMode::WithAdapters
        } else {
            ForwardMode::WithoutAdapters
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub step: u64,
    pub train_loss: f64,
    pub val_sisnr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// Tab-separated log with a header row; missing validation scores are
    /// written as `nan`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tstep\ttrain_loss\tval_sisnr\n");
        for r in &self.epochs {
            let val = r.val_sisnr.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(out, "{}\t{}\t{:.6}\t{}", r.epoch, r.step, r.train_loss, val);
        }
        out
    }
}

/// Mean SI-SNR in dB of the enhanced records against their clean targets.
pub fn mean_enhanced_sisnr(model: &Model<f32>, stft: &Stft<f32>, records: &[MixtureRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::validation("no records to score"));
    }
    let mode = if model.has_adapters() {
        ForwardMode::WithAdapters
    } else {
        ForwardMode::WithoutAdapters
    };
    let scores = records
        .par_iter()
        .map(|r| {
            let out = enhance_with_model(model, stft, &r.mixture, mode)?;
            si_snr_db(&out.samples, &r.clean.samples)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Loss and gradients of one batch. Items run in parallel; the reduction
/// happens afterwards in batch order so results do not depend on the
/// thread count.
fn batch_gradients(
    model: &Model<f32>,
    stft: &Stft<f32>,
    batch: &[&MixtureRecord],
    mode: ForwardMode,
) -> Result<(f64, Gradients<f32>)> {
    let items = batch
        .par_iter()
        .map(|r| {
            let mut graph = LossGraph::new(model, stft)?;
            let loss = graph.forward(&r.mixture, &r.clean, mode)?;
            let mut grads = Gradients::for_store(&model.store);
            graph.backward(&mut grads)?;
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = items.into_iter();
    let (mut loss, mut total) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        total.add(&g);
    }
    Ok((loss / batch.len() as f64, total))
}

/// Trains `state.model` under `policy` and returns one history row per
/// completed epoch. Frozen parameters are never written.
pub fn train(
    state: &mut TrainState,
    train_set: &[MixtureRecord],
    val_set: &[MixtureRecord],
    policy: FreezePolicy,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    let stft = Stft::<f32>::new(state.stft)?;
    policy.apply(&mut state.model.store);
    state.optimizer.config = cfg.adam();
    let mode = state.mode();
    let val = &val_set[..cfg.val_limit.map_or(val_set.len(), |n| n.min(val_set.len()))];
    let mut history = History::default();
    let mut steps_taken = 0u64;
    log::info!(
        "training {} of {} parameters ({policy}) on {} records",
        state.model.store.trainable_count(),
        state.model.store.total_count(),
        train_set.len()
    );
    'epochs: for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut state.rng);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| steps_taken >= m) {
                break;
            }
            let batch: Vec<&MixtureRecord> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(&state.model, &stft, &batch, mode)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    step: state.step,
                    msg: format!("non-finite loss or gradient (loss = {loss})"),
                });
            }
            state.model.store.zero_grads();
            state.model.store.accumulate(&grads, 1.0 / batch.len() as f32)?;
            state.optimizer.step(&mut state.model.store)?;
            state.step += 1;
            steps_taken += 1;
            loss_sum += loss;
            batches += 1;
        }
        if batches == 0 {
            break 'epochs;
        }
        state.epoch += 1;
        let val_sisnr = if val.is_empty() {
            None
        } else {
            Some(mean_enhanced_sisnr(&state.model, &stft, val)?)
        };
        let row = EpochRecord {
            epoch: state.epoch,
            step: state.step,
            train_loss: loss_sum / batches as f64,
            val_sisnr,
        };
        log::info!(
            "epoch {} step {} train_loss {:.3} val_sisnr {}",
            row.epoch,
            row.step,
            row.train_loss,
            row.val_sisnr.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
        );
        history.epochs.push(row);
    }
    // Gradient slots are scratch and are not checkpointed.
    state.model.store.zero_grads();
    Ok(history)
}
