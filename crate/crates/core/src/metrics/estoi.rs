//! Extended short-time objective intelligibility (ESTOI).
//!
//! Signals are resampled to 10 kHz, frames more than 40 dB below the
//! loudest clean frame are dropped, and 256-sample Hann frames (zero-padded
//! to 512, 50% overlap) are pooled into 15 third-octave bands from 150 Hz.
//! Each 30-frame segment of band envelopes is normalized per band row and
//! then per frame column; the score is the mean inner product of the
//! normalized clean and processed segments.

use realfft::RealFftPlanner;

use crate::datagen::resample;
use crate::dsp::Waveform;
use crate::error::{Error, Result};

const FS: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate-intelligibility segment (384 ms).
pub const SEGMENT_FRAMES: usize = 30;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Hann window without its zero end points, `hanning(n + 2)[1..n + 1]`.
fn hann(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Half-open bin ranges of the third-octave bands on a `NFFT`-point grid.
fn band_edges() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * FS as f64 / NFFT as f64).collect();
    let nearest = |target: f64| {
        let mut best = 0;
        for (k, f) in freqs.iter().enumerate() {
            if (f - target).powi(2) < (freqs[best] - target).powi(2) {
                best = k;
            }
        }
        best
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Drops frames of both signals where the clean frame energy is more than
/// the dynamic range below the loudest clean frame, then overlap-adds the
/// kept windowed frames.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann(FRAME);
    let starts: Vec<usize> = (0..x.len().saturating_sub(FRAME)).step_by(HOP).collect();
    let energy_db: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energy_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy_db)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let len = (kept.len() - 1) * HOP + FRAME;
    let (mut xo, mut yo) = (vec![0.0; len], vec![0.0; len]);
    for (j, &s) in kept.iter().enumerate() {
        for i in 0..FRAME {
            xo[j * HOP + i] += w[i] * x[s + i];
            yo[j * HOP + i] += w[i] * y[s + i];
        }
    }
    (xo, yo)
}

/// Third-octave band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64], edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hann(FRAME);
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let mut buf = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    let mut env = vec![Vec::new(); edges.len()];
    for s in (0..x.len().saturating_sub(FRAME)).step_by(HOP) {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..FRAME {
            buf[i] = w[i] * x[s + i];
        }
        fft.process(&mut buf, &mut spec).expect("fft buffer sizes");
        for (b, &(lo, hi)) in edges.iter().enumerate() {
            let power: f64 = spec[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            env[b].push(power.sqrt());
        }
    }
    env
}

/// Subtracts the mean of `v` and scales it to unit norm; an all-constant
/// vector becomes zero.
fn standardize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|a| *a -= mean);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
}

/// Row- then column-normalized copy of the segment starting at frame `m`,
/// laid out `[band][frame]` in a flat buffer.
fn normalized_segment(env: &[Vec<f64>], m: usize) -> Vec<f64> {
    let (j, n) = (env.len(), SEGMENT_FRAMES);
    let mut seg = vec![0.0; j * n];
    for (b, row) in env.iter().enumerate() {
        seg[b * n..(b + 1) * n].copy_from_slice(&row[m..m + n]);
        standardize(&mut seg[b * n..(b + 1) * n]);
    }
    let mut col = vec![0.0; j];
    for t in 0..n {
        for b in 0..j {
            col[b] = seg[b * n + t];
        }
        standardize(&mut col);
        for b in 0..j {
            seg[b * n + t] = col[b];
        }
    }
    seg
}

/// ESTOI of `processed` against `clean`; both must share length and rate.
pub fn estoi(clean: &Waveform<f32>, processed: &Waveform<f32>) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::shape(
            format!("{} samples", clean.len()),
            format!("{} samples", processed.len()),
        ));
    }
    if clean.sample_rate != processed.sample_rate {
        return Err(Error::validation(format!(
            "clean at {} Hz, processed at {} Hz",
            clean.sample_rate, processed.sample_rate
        )));
    }
    let to_f64 = |w: &Waveform<f32>| -> Vec<f64> {
        let x: Vec<f64> = w.samples.iter().map(|&v| v as f64).collect();
        resample(&x, w.sample_rate, FS)
    };
    estoi_at_10k(&to_f64(clean), &to_f64(processed))
}

/// ESTOI of signals already sampled at 10 kHz.
pub fn estoi_at_10k(clean: &[f64], processed: &[f64]) -> Result<f64> {
    let (x, y) = remove_silent_frames(clean, processed);
    let edges = band_edges();
    let xe = band_envelopes(&x, &edges);
    let ye = band_envelopes(&y, &edges);
    let frames = xe[0].len();
    if frames < SEGMENT_FRAMES {
        return Err(Error::TooShort {
            len: clean.len(),
            needed: SEGMENT_FRAMES,
        });
    }
    let segments = frames - SEGMENT_FRAMES + 1;
    let total: f64 = (0..segments)
        .map(|m| {
            let a = normalized_segment(&xe, m);
            let b = normalized_segment(&ye, m);
            a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>()
        })
        .sum();
    Ok(total / SEGMENT_FRAMES as f64 / segments as f64)
}
