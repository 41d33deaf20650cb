//! Additive mixing at a target SNR measured on full-utterance energy.

use crate::dsp::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRecord {
    pub clean: Waveform<f32>,
    pub noise: Waveform<f32>,
    pub mixture: Waveform<f32>,
    pub target_snr_db: f64,
    pub applied_noise_gain: f64,
    pub clean_id: String,
    pub noise_id: String,
}

fn energy(x: &[f32]) -> f64 {
    x.iter().map(|v| (*v as f64) * (*v as f64)).sum()
}

impl MixtureRecord {
    /// SNR actually realized by the stored clean and scaled noise.
    pub fn realized_snr_db(&self) -> f64 {
        let g = self.applied_noise_gain;
        let noise: f64 = self.noise.samples.iter().map(|v| (g * *v as f64).powi(2)).sum();
        10.0 * (energy(&self.clean.samples) / noise).log10()
    }
}

/// Scales `noise` so that `10·log10(‖s‖² / ‖g·v‖²) = snr_db` and adds it.
pub fn mix_at_snr(
    clean: &Waveform<f32>,
    noise: &Waveform<f32>,
    snr_db: f64,
    clean_id: &str,
    noise_id: &str,
) -> Result<MixtureRecord> {
    if clean.len() != noise.len() {
        return Err(Error::validation(format!(
            "clean has {} samples, noise {}",
            clean.len(),
            noise.len()
        )));
    }
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::validation(format!(
            "clean at {} Hz, noise at {} Hz",
            clean.sample_rate, noise.sample_rate
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::validation(format!("target SNR must be finite, got {snr_db}")));
    }
    let (es, ev) = (energy(&clean.samples), energy(&noise.samples));
    if es <= 0.0 || ev <= 0.0 {
        return Err(Error::validation("clean and noise must both have nonzero energy"));
    }
    let gain = (es / (ev * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixture = clean
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, v)| (*s as f64 + gain * *v as f64) as f32)
        .collect();
    Ok(MixtureRecord {
        clean: clean.clone(),
        noise: noise.clone(),
        mixture: Waveform::new(mixture, clean.sample_rate),
        target_snr_db: snr_db,
        applied_noise_gain: gain,
        clean_id: clean_id.to_string(),
        noise_id: noise_id.to_string(),
    })
}
