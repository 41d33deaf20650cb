//! TOML run configuration. Every key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use drone_enhance::datagen::SyntheticPoolConfig;
use drone_enhance::dsp::StftConfig;
use drone_enhance::nn::ModelConfig;
use drone_enhance::pipeline::{synthetic_stage_config, ProtocolConfig, Stage};
use drone_enhance::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Data sources and mixture sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Crop length of every mixture, seconds.
    pub crop_s: f64,
    pub pretrain_minutes: f64,
    pub adapt_minutes: f64,
    pub val_minutes: f64,
    pub test_minutes: f64,
    pub pretrain_snr_db: [f64; 2],
    pub adapt_snr_db: [f64; 2],
    /// Manifest of pretraining sources; synthetic generic noise if absent.
    pub pretrain_manifest: Option<PathBuf>,
    /// Manifest of adaptation sources; synthetic drone noise if absent.
    pub adapt_manifest: Option<PathBuf>,
    /// Add synthetic drone noise to the sources of `adapt_manifest`.
    pub synthetic_drone: bool,
    pub synthetic: SyntheticSizes,
}

/// Sizes of generated source pools, per split (train, val, test).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSizes {
    pub clean_per_split: [usize; 3],
    pub noise_per_split: [usize; 3],
    pub clean_s: f64,
    pub noise_s: f64,
}

impl Default for SyntheticSizes {
    fn default() -> Self {
        let d = synthetic_stage_config(0, Stage::Pretrain);
        SyntheticSizes {
            clean_per_split: d.clean_per_split,
            noise_per_split: d.noise_per_split,
            clean_s: d.clean_s,
            noise_s: d.noise_s,
        }
    }
}

impl SyntheticSizes {
    /// Pool settings of `stage` for the given run seed.
    pub fn pool_config(&self, seed: u64, stage: Stage) -> SyntheticPoolConfig {
        SyntheticPoolConfig {
            clean_per_split: self.clean_per_split,
            noise_per_split: self.noise_per_split,
            clean_s: self.clean_s,
            noise_s: self.noise_s,
            ..synthetic_stage_config(seed, stage)
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        DataConfig {
            crop_s: p.crop_s,
            pretrain_minutes: p.pretrain_minutes,
            adapt_minutes: p.adapt_minutes,
            val_minutes: p.val_minutes,
            test_minutes: p.test_minutes,
            pretrain_snr_db: p.pretrain_snr_db,
            adapt_snr_db: p.adapt_snr_db,
            pretrain_manifest: None,
            adapt_manifest: None,
            synthetic_drone: false,
            synthetic: SyntheticSizes::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Also train the from-scratch condition in `protocol`.
    pub include_scratch: bool,
    pub stft: StftConfig,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub pretrain: TrainConfig,
    pub adapt: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        RunConfig {
            seed: p.seed,
            include_scratch: p.include_scratch,
            stft: p.stft,
            model: p.model,
            data: DataConfig::default(),
            pretrain: p.pretrain,
            adapt: p.adapt,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text).map_err(|e| CliError::Config(path.to_path_buf(), e))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            seed: self.seed,
            stft: self.stft,
            model: self.model.clone(),
            crop_s: self.data.crop_s,
            pretrain_minutes: self.data.pretrain_minutes,
            adapt_minutes: self.data.adapt_minutes,
            val_minutes: self.data.val_minutes,
            test_minutes: self.data.test_minutes,
            pretrain_snr_db: self.data.pretrain_snr_db,
            adapt_snr_db: self.data.adapt_snr_db,
            pretrain: self.pretrain.clone(),
            adapt: self.adapt.clone(),
            include_scratch: self.include_scratch,
        }
    }
}
