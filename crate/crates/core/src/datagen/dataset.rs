//! Source pools and randomized mixture datasets.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Role, Split};
use super::mix::{mix_at_snr, MixtureRecord};
use super::synth::{
    synth_drone_noise, synth_generic_noise, synth_speech, GenericNoiseKind, NoiseSynthSpec, NoiseType, SpeakerProfile,
};
use super::wav::{read_wav, write_wav};
use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One decoded clean utterance or noise clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub id: String,
    pub split: Split,
    pub noise_type: Option<NoiseType>,
    pub wave: Waveform<f32>,
}

/// Clean and noise sources across all splits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcePool {
    pub clean: Vec<Source>,
    pub noise: Vec<Source>,
}

impl SourcePool {
    /// Decodes every manifest entry (resampling to 16 kHz where needed).
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        manifest.check_split_hygiene()?;
        let decoded: Vec<(Role, Source)> = manifest
            .entries
            .par_iter()
            .map(|e| {
                let wave = read_wav(&e.path)?;
                Ok((
                    e.role,
                    Source {
                        id: e.id.clone(),
                        split: e.split,
                        noise_type: e.noise_type,
                        wave,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        let mut pool = SourcePool::default();
        for (role, source) in decoded {
            match role {
                Role::Clean => pool.clean.push(source),
                Role::Noise => pool.noise.push(source),
            }
        }
        Ok(pool)
    }

    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_manifest(&DatasetManifest::load(path)?)
    }

    /// Appends the sources of `other`, rejecting duplicate ids.
    pub fn extend(&mut self, other: SourcePool) -> Result<()> {
        self.clean.extend(other.clean);
        self.noise.extend(other.noise);
        self.check_split_hygiene()
    }

    /// Ids must be unique per role, which also keeps splits disjoint.
    pub fn check_split_hygiene(&self) -> Result<()> {
        for (role, sources) in [(Role::Clean, &self.clean), (Role::Noise, &self.noise)] {
            let mut seen = BTreeMap::new();
            for s in sources {
                if seen.insert(s.id.as_str(), s.split).is_some() {
                    return Err(Error::validation(format!(
                        "duplicate {} source id {:?}",
                        role.as_str(),
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sorted noise ids across all splits.
    pub fn noise_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.noise.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids
    }

    /// Writes every source to `dir/{clean,noise}/<id>.wav` and returns a
    /// manifest with paths relative to `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
        let dir = dir.as_ref();
        let mut entries = Vec::new();
        for (role, sources) in [(Role::Clean, &self.clean), (Role::Noise, &self.noise)] {
            let sub = dir.join(role.as_str());
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            for s in sources {
                let rel = Path::new(role.as_str()).join(format!("{}.wav", s.id));
                write_wav(dir.join(&rel), &s.wave)?;
                entries.push(ManifestEntry {
                    role,
                    split: s.split,
                    noise_type: s.noise_type,
                    id: s.id.clone(),
                    path: rel,
                });
            }
        }
        Ok(DatasetManifest { entries })
    }
}

/// Which synthetic noise family fills the noise side of a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// Harmonic rotor-like noise, alternating constant and dynamic clips.
    Drone,
    /// Pink and babble-like broadband noise.
    Generic,
}

impl NoiseFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::Drone => "drone",
            NoiseFamily::Generic => "generic",
        }
    }
}

/// Sizes of a synthetic source pool, indexed by split (train, val, test).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPoolConfig {
    pub family: NoiseFamily,
    pub clean_per_split: [usize; 3],
    pub noise_per_split: [usize; 3],
    pub clean_s: f64,
    pub noise_s: f64,
    pub seed: u64,
}

impl SyntheticPoolConfig {
    pub fn desk(family: NoiseFamily, seed: u64) -> Self {
        SyntheticPoolConfig {
            family,
            clean_per_split: [40, 10, 10],
            noise_per_split: [12, 4, 4],
            clean_s: 6.0,
            noise_s: 10.0,
            seed,
        }
    }
}

const CLEAN_TAG: u64 = 1;
const NOISE_TAG: u64 = 2;

/// Synthesizes a pool. Every clean utterance has its own speaker, so splits
/// never share speakers. Noise ids carry the family name, so drone and
/// generic pools never collide.
pub fn synthetic_pool(cfg: &SyntheticPoolConfig) -> Result<SourcePool> {
    if !(cfg.clean_s > 0.0 && cfg.noise_s > 0.0) {
        return Err(Error::validation("synthetic source durations must be positive"));
    }
    let mut jobs = Vec::new();
    for (si, split) in Split::ALL.into_iter().enumerate() {
        for k in 0..cfg.clean_per_split[si] {
            jobs.push((Role::Clean, split, k));
        }
        for k in 0..cfg.noise_per_split[si] {
            jobs.push((Role::Noise, split, k));
        }
    }
    let family = cfg.family;
    let made: Vec<(Role, Source)> = jobs
        .into_par_iter()
        .map(|(role, split, k)| {
            let split_tag = split as u64;
            match role {
                Role::Clean => {
                    let seed = derive_seed(cfg.seed, &[CLEAN_TAG, split_tag, k as u64]);
                    let speaker = SpeakerProfile::random(seed);
                    let wave = synth_speech(&speaker, cfg.clean_s, SAMPLE_RATE, seed ^ 0x5eed);
                    Ok((
                        role,
                        Source {
                            id: format!("spk-{split}-{k:03}"),
                            split,
                            noise_type: None,
                            wave,
                        },
                    ))
                }
                Role::Noise => {
                    let seed = derive_seed(cfg.seed, &[NOISE_TAG, family as u64, split_tag, k as u64]);
                    let noise_type = if k % 2 == 0 {
                        NoiseType::Constant
                    } else {
                        NoiseType::Dynamic
                    };
                    let wave = match family {
                        NoiseFamily::Drone => {
                            synth_drone_noise(&NoiseSynthSpec::random(noise_type, seed), cfg.noise_s, SAMPLE_RATE)?
                        }
                        NoiseFamily::Generic => {
                            let kind = if k % 2 == 0 {
                                GenericNoiseKind::Pink
                            } else {
                                GenericNoiseKind::Babble
                            };
                            synth_generic_noise(kind, cfg.noise_s, SAMPLE_RATE, seed)
                        }
                    };
                    Ok((
                        role,
                        Source {
                            id: format!("{}-{split}-{k:03}", family.as_str()),
                            split,
                            noise_type: Some(noise_type),
                            wave,
                        },
                    ))
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut pool = SourcePool::default();
    for (role, s) in made {
        match role {
            Role::Clean => pool.clean.push(s),
            Role::Noise => pool.noise.push(s),
        }
    }
    Ok(pool)
}

/// Mixture sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub snr_lo_db: f64,
    pub snr_hi_db: f64,
    pub crop_s: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            snr_lo_db: -25.0,
            snr_hi_db: -5.0,
            crop_s: 2.0,
            count: 600,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// Record count covering `minutes` of audio at the configured crop.
    pub fn count_for_minutes(&self, minutes: f64) -> usize {
        (minutes * 60.0 / self.crop_s).round() as usize
    }

    pub fn crop_len(&self) -> usize {
        (self.crop_s * SAMPLE_RATE as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr_lo_db.is_finite() && self.snr_hi_db.is_finite() && self.snr_lo_db <= self.snr_hi_db) {
            return Err(Error::validation(format!(
                "SNR range [{}, {}] is invalid",
                self.snr_lo_db, self.snr_hi_db
            )));
        }
        if self.crop_len() == 0 || !self.crop_s.is_finite() {
            return Err(Error::validation(format!("crop length {} s is invalid", self.crop_s)));
        }
        Ok(())
    }
}

const MAX_CROP_ATTEMPTS: usize = 32;

fn usable<'a>(sources: &'a [Source], split: Split, crop: usize, what: &str) -> Result<Vec<&'a Source>> {
    let mut out = Vec::new();
    for s in sources.iter().filter(|s| s.split == split) {
        if s.wave.len() < crop {
            log::warn!(
                "skipping {what} source {:?}: {} samples is shorter than the {crop}-sample crop",
                s.id,
                s.wave.len()
            );
        } else {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(Error::validation(format!(
            "no usable {what} sources in the {split} split for a {crop}-sample crop"
        )));
    }
    Ok(out)
}

fn crop<R: Rng>(rng: &mut R, s: &Source, len: usize) -> Waveform<f32> {
    let start = rng.gen_range(0..=s.wave.len() - len);
    s.wave.slice(start, len)
}

/// Draws `cfg.count` mixtures from one split. Record `i` uses its own RNG
/// stream `(seed, i)`, so results do not depend on the thread count.
pub fn build_dataset(pool: &SourcePool, split: Split, cfg: &DatasetConfig) -> Result<Vec<MixtureRecord>> {
    cfg.validate()?;
    if cfg.count == 0 {
        return Ok(Vec::new());
    }
    let len = cfg.crop_len();
    let clean = usable(&pool.clean, split, len, "clean")?;
    let noise = usable(&pool.noise, split, len, "noise")?;
    (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let snr = if cfg.snr_lo_db == cfg.snr_hi_db {
                cfg.snr_lo_db
            } else {
                rng.gen_range(cfg.snr_lo_db..cfg.snr_hi_db)
            };
            for _ in 0..MAX_CROP_ATTEMPTS {
                let c = clean[rng.gen_range(0..clean.len())];
                let v = noise[rng.gen_range(0..noise.len())];
                let (cw, vw) = (crop(&mut rng, c, len), crop(&mut rng, v, len));
                if cw.energy() > 0.0 && vw.energy() > 0.0 {
                    return mix_at_snr(&cw, &vw, snr, &c.id, &v.id);
                }
            }
            Err(Error::validation(format!(
                "record {i}: no non-silent crop found after {MAX_CROP_ATTEMPTS} attempts"
            )))
        })
        .collect()
}

pub fn build_dataset_from_manifest(
    manifest: &DatasetManifest,
    split: Split,
    cfg: &DatasetConfig,
) -> Result<Vec<MixtureRecord>> {
    build_dataset(&SourcePool::from_manifest(manifest)?, split, cfg)
}
