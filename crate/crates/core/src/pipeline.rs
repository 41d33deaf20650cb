//! End-to-end enhancement and the two-stage transfer-learning protocol.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{
    build_dataset, synthetic_pool, DatasetConfig, MixtureRecord, NoiseFamily, SourcePool, Split, SyntheticPoolConfig,
};
use crate::dsp::{Stft, StftConfig, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::masking::{apply_mask, ComplexMask};
use crate::metrics::{evaluate, evaluate_noisy, EvalReport};
use crate::nn::{ForwardMode, Model, ModelConfig};
use crate::seed::derive_seed;
use crate::training::checkpoint::{load_checkpoint, save_checkpoint};
use crate::training::trainer::{train, History, TrainConfig, TrainState};
use crate::training::{count_trainable, FreezePolicy};

/// STFT → mask estimation → masking → inverse STFT, trimmed to the input
/// length.
pub fn enhance_with_model(
    model: &Model<f32>,
    stft: &Stft<f32>,
    y: &Waveform<f32>,
    mode: ForwardMode,
) -> Result<Waveform<f32>> {
    let spec = stft.forward(y)?;
    let mask = model.forward(&spec, mode)?;
    let out = stft.inverse_trimmed(&apply_mask(&mask, &spec)?, y.len())?;
    if !out.samples.iter().all(|v| v.is_finite()) {
        return Err(Error::validation("enhancement produced non-finite samples"));
    }
    Ok(out)
}

enum Estimator {
    Model(Box<Model<f32>>, ForwardMode),
    /// Emits the all-ones mask; used to check the signal path.
    Identity,
}

/// A ready-to-run enhancer: STFT front end plus mask estimator.
pub struct EnhancementSession {
    stft: Stft<f32>,
    estimator: Estimator,
}

impl EnhancementSession {
    pub fn new(stft: StftConfig, model: Model<f32>, mode: ForwardMode) -> Result<Self> {
        if stft.bins() != model.config().bins() {
            return Err(Error::validation(format!(
                "STFT yields {} bins but the model expects {}",
                stft.bins(),
                model.config().bins()
            )));
        }
        Ok(EnhancementSession {
            stft: Stft::new(stft)?,
            estimator: Estimator::Model(Box::new(model), mode),
        })
    }

    /// Uses adapters whenever the model has any.
    pub fn from_state(state: &TrainState) -> Result<Self> {
        Self::new(state.stft, state.model.clone(), state.mode())
    }

    pub fn from_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_state(&load_checkpoint(path)?)
    }

    pub fn identity(stft: StftConfig) -> Result<Self> {
        Ok(EnhancementSession {
            stft: Stft::new(stft)?,
            estimator: Estimator::Identity,
        })
    }

    /// Enhances a 16 kHz signal; the output has the input's length.
    pub fn enhance(&self, y: &Waveform<f32>) -> Result<Waveform<f32>> {
        if y.sample_rate != SAMPLE_RATE {
            return Err(Error::validation(format!(
                "input is sampled at {} Hz; expected {SAMPLE_RATE} Hz",
                y.sample_rate
            )));
        }
        match &self.estimator {
            Estimator::Model(model, mode) => enhance_with_model(model, &self.stft, y, *mode),
            Estimator::Identity => {
                let spec = self.stft.forward(y)?;
                let mask = ComplexMask::identity(spec.frames, spec.bins);
                self.stft.inverse_trimmed(&apply_mask(&mask, &spec)?, y.len())
            }
        }
    }
}

/// Settings of the two-stage transfer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub stft: StftConfig,
    pub model: ModelConfig,
    pub crop_s: f64,
    pub pretrain_minutes: f64,
    pub adapt_minutes: f64,
    pub val_minutes: f64,
    pub test_minutes: f64,
    pub pretrain_snr_db: [f64; 2],
    pub adapt_snr_db: [f64; 2],
    pub pretrain: TrainConfig,
    pub adapt: TrainConfig,
    /// Also train a randomly initialized model on the drone data.
    pub include_scratch: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            seed: 1,
            stft: StftConfig::default(),
            model: ModelConfig::default(),
            crop_s: 2.0,
            pretrain_minutes: 20.0,
            adapt_minutes: 10.0,
            val_minutes: 1.0,
            test_minutes: 4.0,
            pretrain_snr_db: [-15.0, 5.0],
            adapt_snr_db: [-25.0, -5.0],
            pretrain: TrainConfig {
                epochs: 6,
                lr: 2e-3,
                ..TrainConfig::default()
            },
            adapt: TrainConfig {
                epochs: 6,
                lr: 2e-3,
                ..TrainConfig::default()
            },
            include_scratch: false,
        }
    }
}

/// Protocol condition labels, in report order.
pub const NOISY: &str = "noisy";
pub const WITHOUT_TUNING: &str = "without_tuning";
pub const FINE_TUNING: &str = "fine_tuning";
pub const ADAPTER_TUNING: &str = "adapter_tuning";
pub const WITHOUT_PRETRAINING: &str = "without_pretraining";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: String,
    /// Parameters updated in the condition's final training stage.
    pub trainable_params: usize,
    pub total_params: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed: u64,
    pub conditions: Vec<ConditionResult>,
}

impl ProtocolReport {
    pub fn get(&self, condition: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    /// One summary row per condition.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("condition\ttrainable_params\ttotal_params\tn\tmean_si_snr\tmean_estoi\n");
        for c in &self.conditions {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                c.condition, c.trainable_params, c.total_params, c.report.n, c.report.mean_si_snr, c.report.mean_estoi
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Datasets of both stages, built from disjoint source pools.
#[derive(Debug, Clone)]
pub struct ProtocolData {
    pub pretrain_train: Vec<MixtureRecord>,
    pub pretrain_val: Vec<MixtureRecord>,
    pub adapt_train: Vec<MixtureRecord>,
    pub adapt_val: Vec<MixtureRecord>,
    pub test: Vec<MixtureRecord>,
}

/// Training stage of the transfer protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Generic-noise pretraining.
    Pretrain,
    /// Drone-noise adaptation (and its test set).
    Adapt,
}

impl ProtocolConfig {
    /// Sampling settings of one stage's split, with a seed derived from the
    /// protocol seed.
    pub fn dataset_config(&self, stage: Stage, split: Split) -> DatasetConfig {
        let (snr, tag) = match stage {
            Stage::Pretrain => (self.pretrain_snr_db, 0),
            Stage::Adapt => (self.adapt_snr_db, 3),
        };
        let (minutes, offset) = match (stage, split) {
            (Stage::Pretrain, Split::Train) => (self.pretrain_minutes, 1),
            (Stage::Adapt, Split::Train) => (self.adapt_minutes, 1),
            (_, Split::Val) => (self.val_minutes, 2),
            (_, Split::Test) => (self.test_minutes, 3),
        };
        let base = DatasetConfig {
            snr_lo_db: snr[0],
            snr_hi_db: snr[1],
            crop_s: self.crop_s,
            count: 0,
            seed: derive_seed(self.seed, &[0xda7a, tag + offset]),
        };
        DatasetConfig {
            count: base.count_for_minutes(minutes),
            ..base
        }
    }

    fn stage_seed(&self, tag: u64) -> u64 {
        derive_seed(self.seed, &[0x57a9e, tag])
    }
}

/// Fails if any noise id is shared between the two pools.
pub fn check_disjoint_noise(pretrain_pool: &SourcePool, adapt_pool: &SourcePool) -> Result<()> {
    let pre_ids = pretrain_pool.noise_ids();
    match adapt_pool
        .noise_ids()
        .into_iter()
        .find(|id| pre_ids.binary_search(id).is_ok())
    {
        Some(id) => Err(Error::validation(format!(
            "noise source {id:?} appears in both the pretraining and adaptation data"
        ))),
        None => Ok(()),
    }
}

impl ProtocolData {
    /// Draws all datasets. Fails if any noise id is shared between the
    /// pretraining and adaptation pools.
    pub fn build(pretrain_pool: &SourcePool, adapt_pool: &SourcePool, cfg: &ProtocolConfig) -> Result<Self> {
        check_disjoint_noise(pretrain_pool, adapt_pool)?;
        let ds = |pool, stage, split| build_dataset(pool, split, &cfg.dataset_config(stage, split));
        Ok(ProtocolData {
            pretrain_train: ds(pretrain_pool, Stage::Pretrain, Split::Train)?,
            pretrain_val: ds(pretrain_pool, Stage::Pretrain, Split::Val)?,
            adapt_train: ds(adapt_pool, Stage::Adapt, Split::Train)?,
            adapt_val: ds(adapt_pool, Stage::Adapt, Split::Val)?,
            test: ds(adapt_pool, Stage::Adapt, Split::Test)?,
        })
    }
}

/// Stage 1: trains a fresh model with every parameter free, then freezes it.
pub fn pretrain_stage(
    train_set: &[MixtureRecord],
    val_set: &[MixtureRecord],
    cfg: &ProtocolConfig,
) -> Result<(TrainState, History)> {
    log::info!("pretraining on {} mixtures", train_set.len());
    let mut base = TrainState::new(cfg.stft, cfg.model.clone(), cfg.pretrain.adam(), cfg.stage_seed(1))?;
    let history = train(&mut base, train_set, val_set, FreezePolicy::Full, &cfg.pretrain)?;
    FreezePolicy::Frozen.apply(&mut base.model.store);
    Ok((base, history))
}

/// Stage 2: inserts fresh adapters into a copy of `base` and trains only the
/// adapters and attention gates.
pub fn adapter_stage(
    base: &TrainState,
    train_set: &[MixtureRecord],
    val_set: &[MixtureRecord],
    cfg: &ProtocolConfig,
) -> Result<(TrainState, History)> {
    log::info!("adapter tuning on {} mixtures", train_set.len());
    let mut adapted = base.clone();
    adapted.restart(cfg.adapt.adam(), cfg.stage_seed(2));
    let flags = adapted.model.config().adapter_placement.clone();
    adapted.model.insert_adapters(&flags, cfg.stage_seed(3))?;
    let history = train(&mut adapted, train_set, val_set, FreezePolicy::AdapterTune, &cfg.adapt)?;
    if !frozen_params_identical(&base.model, &adapted.model, FreezePolicy::AdapterTune) {
        return Err(Error::State("adapter tuning modified a frozen base parameter".into()));
    }
    Ok((adapted, history))
}

/// Stage 2 baseline: trains the encoder FSMN layers and attention gates of a
/// copy of `base`.
pub fn finetune_stage(
    base: &TrainState,
    train_set: &[MixtureRecord],
    val_set: &[MixtureRecord],
    cfg: &ProtocolConfig,
) -> Result<(TrainState, History)> {
    log::info!("fine-tuning on {} mixtures", train_set.len());
    let mut tuned = base.clone();
    tuned.restart(cfg.adapt.adam(), cfg.stage_seed(4));
    let history = train(&mut tuned, train_set, val_set, FreezePolicy::FineTune, &cfg.adapt)?;
    Ok((tuned, history))
}

/// Trains a randomly initialized model on the adaptation data.
pub fn scratch_stage(
    train_set: &[MixtureRecord],
    val_set: &[MixtureRecord],
    cfg: &ProtocolConfig,
) -> Result<(TrainState, History)> {
    log::info!("training from scratch on {} mixtures", train_set.len());
    let mut s = TrainState::new(cfg.stft, cfg.model.clone(), cfg.adapt.adam(), cfg.stage_seed(5))?;
    let history = train(&mut s, train_set, val_set, FreezePolicy::Full, &cfg.adapt)?;
    Ok((s, history))
}

/// Synthetic source pool of one stage: generic noise for pretraining,
/// harmonic drone noise for adaptation.
pub fn synthetic_stage_pool(seed: u64, stage: Stage) -> Result<SourcePool> {
    synthetic_pool(&synthetic_stage_config(seed, stage))
}

/// Default pool sizes of one stage with the family and seed filled in.
pub fn synthetic_stage_config(seed: u64, stage: Stage) -> SyntheticPoolConfig {
    let (family, tag) = match stage {
        Stage::Pretrain => (NoiseFamily::Generic, 0x9e0),
        Stage::Adapt => (NoiseFamily::Drone, 0xd0e),
    };
    SyntheticPoolConfig::desk(family, derive_seed(seed, &[tag]))
}

/// Synthetic pools of both stages.
pub fn synthetic_protocol_pools(seed: u64) -> Result<(SourcePool, SourcePool)> {
    Ok((
        synthetic_stage_pool(seed, Stage::Pretrain)?,
        synthetic_stage_pool(seed, Stage::Adapt)?,
    ))
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub base: TrainState,
    pub adapted: TrainState,
    pub finetuned: TrainState,
    pub scratch: Option<TrainState>,
    pub histories: Vec<(String, History)>,
    pub report: ProtocolReport,
}

impl ProtocolOutcome {
    /// Writes checkpoints, histories and the report into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.base, dir.join("base.ckpt"))?;
        save_checkpoint(&self.adapted, dir.join("adapted.ckpt"))?;
        save_checkpoint(&self.finetuned, dir.join("finetuned.ckpt"))?;
        if let Some(s) = &self.scratch {
            save_checkpoint(s, dir.join("scratch.ckpt"))?;
        }
        for (name, h) in &self.histories {
            let p = dir.join(format!("history_{name}.tsv"));
            std::fs::write(&p, h.to_tsv()).map_err(|e| Error::io(&p, e))?;
        }
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.tsv", self.report.to_tsv())?;
        write("report.json", self.report.to_json()?)?;
        for c in &self.report.conditions {
            c.report.write(dir, &format!("eval_{}", c.condition))?;
        }
        Ok(())
    }
}

/// True if every `base` parameter that `policy` freezes exists in `tuned`
/// with bit-identical values.
pub fn frozen_params_identical(base: &Model<f32>, tuned: &Model<f32>, policy: FreezePolicy) -> bool {
    base.store
        .iter()
        .filter(|(_, p)| !policy.trains(p.group))
        .all(|(_, p)| {
            tuned
                .store
                .find(&p.name)
                .map(|id| tuned.store.value(id))
                .is_some_and(|v| v.iter().map(|x| x.to_bits()).eq(p.value.iter().map(|x| x.to_bits())))
        })
}

fn eval_state(condition: &str, state: &TrainState, test: &[MixtureRecord]) -> Result<EvalReport> {
    let session = EnhancementSession::from_state(state)?;
    evaluate(condition, test, |w| session.enhance(w))
}

fn condition(name: &str, state: Option<&TrainState>, policy: FreezePolicy, report: EvalReport) -> ConditionResult {
    let (trainable_params, total_params) = state.map_or((0, 0), |s| {
        let c = count_trainable(&s.model, policy);
        (c.trainable, c.total)
    });
    ConditionResult {
        condition: name.to_string(),
        trainable_params,
        total_params,
        report,
    }
}

/// Stage 1 trains a base model on generic noise; stage 2 adapts copies of
/// it to drone noise by adapter tuning and by fine-tuning. All conditions
/// are scored on the drone test set.
pub fn transfer_protocol(
    pretrain_pool: &SourcePool,
    adapt_pool: &SourcePool,
    cfg: &ProtocolConfig,
) -> Result<ProtocolOutcome> {
    let data = ProtocolData::build(pretrain_pool, adapt_pool, cfg)?;
    run_protocol(&data, cfg)
}

/// Runs both stages on prepared datasets.
pub fn run_protocol(data: &ProtocolData, cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    let (base, h_pre) = pretrain_stage(&data.pretrain_train, &data.pretrain_val, cfg)?;
    let (adapted, h_adapt) = adapter_stage(&base, &data.adapt_train, &data.adapt_val, cfg)?;
    let (finetuned, h_fine) = finetune_stage(&base, &data.adapt_train, &data.adapt_val, cfg)?;
    let mut histories = vec![
        ("pretrain".to_string(), h_pre),
        ("adapter_tune".to_string(), h_adapt),
        ("fine_tune".to_string(), h_fine),
    ];
    let scratch = if cfg.include_scratch {
        let (s, h) = scratch_stage(&data.adapt_train, &data.adapt_val, cfg)?;
        histories.push(("scratch".to_string(), h));
        Some(s)
    } else {
        None
    };

    log::info!("scoring conditions on {} test mixtures", data.test.len());
    let mut conditions = vec![
        condition(NOISY, None, FreezePolicy::Frozen, evaluate_noisy(&data.test)?),
        condition(
            WITHOUT_TUNING,
            Some(&base),
            FreezePolicy::Frozen,
            eval_state(WITHOUT_TUNING, &base, &data.test)?,
        ),
        condition(
            FINE_TUNING,
            Some(&finetuned),
            FreezePolicy::FineTune,
            eval_state(FINE_TUNING, &finetuned, &data.test)?,
        ),
        condition(
            ADAPTER_TUNING,
            Some(&adapted),
            FreezePolicy::AdapterTune,
            eval_state(ADAPTER_TUNING, &adapted, &data.test)?,
        ),
    ];
    if let Some(s) = &scratch {
        conditions.push(condition(
            WITHOUT_PRETRAINING,
            Some(s),
            FreezePolicy::Full,
            eval_state(WITHOUT_PRETRAINING, s, &data.test)?,
        ));
    }
    Ok(ProtocolOutcome {
        base,
        adapted,
        finetuned,
        scratch,
        histories,
        report: ProtocolReport {
            seed: cfg.seed,
            conditions,
        },
    })
}
