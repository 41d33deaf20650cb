//! Parametric signal sources: harmonic drone ego-noise, speech-like
//! utterances, and broadband generic noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Peak level of every synthesized noise clip.
pub const NOISE_PEAK: f64 = 0.5;

/// Drone noise character: stable or time-varying rotor speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseType {
    Constant,
    Dynamic,
}

impl NoiseType {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseType::Constant => "constant",
            NoiseType::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(NoiseType::Constant),
            "dynamic" => Some(NoiseType::Dynamic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSynthSpec {
    /// Fundamental (Hz) at evenly spaced control points across the clip,
    /// linearly interpolated; a single value means constant pitch.
    pub f0_track: Vec<f64>,
    pub harmonics: usize,
    /// Linear gain of each harmonic, `harmonics` entries.
    pub gains: Vec<f64>,
    /// Broadband floor power relative to the harmonic power, dB;
    /// `-inf` disables it.
    pub floor_db: f64,
    pub am_depth: f64,
    pub am_rate_hz: f64,
    pub seed: u64,
}

impl NoiseSynthSpec {
    /// Constant pitch, equal-gain harmonics, no floor, no modulation.
    pub fn constant(f0: f64, harmonics: usize, seed: u64) -> Self {
        NoiseSynthSpec {
            f0_track: vec![f0],
            harmonics,
            gains: vec![1.0; harmonics],
            floor_db: f64::NEG_INFINITY,
            am_depth: 0.0,
            am_rate_hz: 0.0,
            seed,
        }
    }

    /// Randomized rotor-like spec of the given flight condition.
    pub fn random(kind: NoiseType, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd20e_5eed);
        let base = rng.gen_range(90.0..220.0);
        let (f0_track, am_depth, am_rate_hz) = match kind {
            NoiseType::Constant => (vec![base], rng.gen_range(0.0..0.05), rng.gen_range(0.2..1.0)),
            NoiseType::Dynamic => {
                let end = base * rng.gen_range(0.75..1.3);
                let mid = 0.5 * (base + end) * rng.gen_range(0.95..1.05);
                (vec![base, mid, end], rng.gen_range(0.2..0.6), rng.gen_range(0.5..4.0))
            }
        };
        let top = f0_track.iter().copied().fold(0.0, f64::max);
        let harmonics = ((7800.0 / top) as usize).min(40);
        let jitter = Normal::new(0.0, 4.0).expect("valid sigma");
        let gains = (1..=harmonics)
            .map(|h| (h as f64).powf(-0.7) * 10f64.powf(jitter.sample(&mut rng) / 20.0))
            .collect();
        NoiseSynthSpec {
            f0_track,
            harmonics,
            gains,
            floor_db: rng.gen_range(-25.0..-15.0),
            am_depth,
            am_rate_hz,
            seed,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.f0_track.is_empty() || self.f0_track.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::validation(
                "f0 track must be non-empty with positive finite values",
            ));
        }
        if self.gains.len() != self.harmonics {
            return Err(Error::validation(format!(
                "{} harmonic gains for {} harmonics",
                self.gains.len(),
                self.harmonics
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = self.f0_track.iter().copied().fold(0.0, f64::max) * self.harmonics as f64;
        if self.harmonics > 0 && top >= nyquist {
            return Err(Error::validation(format!(
                "harmonic {} reaches {top:.1} Hz, at or above Nyquist {nyquist} Hz",
                self.harmonics
            )));
        }
        if !(0.0..1.0).contains(&self.am_depth) {
            return Err(Error::validation(format!(
                "am_depth must be in [0, 1), got {}",
                self.am_depth
            )));
        }
        if self.floor_db.is_nan() || self.floor_db == f64::INFINITY {
            return Err(Error::validation("floor_db must be finite or -inf"));
        }
        Ok(())
    }

    fn f0_at(&self, frac: f64) -> f64 {
        let k = self.f0_track.len();
        if k == 1 {
            return self.f0_track[0];
        }
        let pos = frac.clamp(0.0, 1.0) * (k - 1) as f64;
        let i = (pos as usize).min(k - 2);
        let w = pos - i as f64;
        self.f0_track[i] * (1.0 - w) + self.f0_track[i + 1] * w
    }
}

fn peak_normalize(x: &mut [f64], peak: f64) {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / max);
    }
}

fn to_waveform(x: Vec<f64>, sample_rate: u32) -> Waveform<f32> {
    Waveform::new(x.into_iter().map(|v| v as f32).collect(), sample_rate)
}

/// Sum of harmonics `h·f0(t)` with continuous phase, optional lowpassed
/// broadband floor and amplitude modulation, peak-normalized.
pub fn synth_drone_noise(spec: &NoiseSynthSpec, duration_s: f64, sample_rate: u32) -> Result<Waveform<f32>> {
    spec.validate(sample_rate)?;
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases: Vec<f64> = (0..spec.harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let am_phase = rng.gen_range(0.0..2.0 * PI);
    let sr = sample_rate as f64;
    let mut out = vec![0.0; n];
    let mut phase = 0.0f64;
    for (i, o) in out.iter_mut().enumerate() {
        let f0 = spec.f0_at(i as f64 / n.max(2).saturating_sub(1) as f64);
        let mut acc = 0.0;
        for (h, (g, p)) in spec.gains.iter().zip(&phases).enumerate() {
            acc += g * ((h + 1) as f64 * phase + p).sin();
        }
        *o = acc;
        phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
    }
    if spec.floor_db > f64::NEG_INFINITY {
        let harmonic_power = if spec.harmonics > 0 {
            spec.gains.iter().map(|g| g * g / 2.0).sum::<f64>()
        } else {
            1.0
        };
        let mut floor: Vec<f64> = Vec::with_capacity(n);
        let mut state = 0.0;
        // one-pole lowpass, ~2 kHz corner
        let a = (-2.0 * PI * 2000.0 / sr).exp();
        for _ in 0..n {
            let w: f64 = StandardNormal.sample(&mut rng);
            state = a * state + (1.0 - a) * w;
            floor.push(state);
        }
        let p = floor.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
        if p > 0.0 {
            let g = (harmonic_power * 10f64.powf(spec.floor_db / 10.0) / p).sqrt();
            out.iter_mut().zip(&floor).for_each(|(o, f)| *o += g * f);
        }
    }
    if spec.am_depth > 0.0 {
        for (i, o) in out.iter_mut().enumerate() {
            *o *= 1.0 + spec.am_depth * (2.0 * PI * spec.am_rate_hz * i as f64 / sr + am_phase).sin();
        }
    }
    peak_normalize(&mut out, NOISE_PEAK);
    Ok(to_waveform(out, sample_rate))
}

/// Voice characteristics of one synthetic talker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub f0_hz: f64,
    pub formant_scale: f64,
    /// Syllables per second, roughly.
    pub rate: f64,
}

impl SpeakerProfile {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bea_4e55);
        let high = rng.gen_bool(0.5);
        SpeakerProfile {
            f0_hz: if high {
                rng.gen_range(170.0..250.0)
            } else {
                rng.gen_range(90.0..150.0)
            },
            formant_scale: if high {
                rng.gen_range(1.05..1.2)
            } else {
                rng.gen_range(0.9..1.05)
            },
            rate: rng.gen_range(3.0..5.0),
        }
    }
}

/// (F1, F2, F3) vowel targets in Hz.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];
const FORMANT_BW: [f64; 3] = [90.0, 110.0, 170.0];
const FORMANT_GAIN: [f64; 3] = [1.0, 0.6, 0.3];
/// Upper limit of voiced harmonics.
const VOICED_TOP_HZ: f64 = 7000.0;

fn formant_envelope(f: f64, formants: &[f64; 3]) -> f64 {
    let tilt = 1.0 / (1.0 + f / 600.0);
    let peaks: f64 = formants
        .iter()
        .zip(FORMANT_BW)
        .zip(FORMANT_GAIN)
        .map(|((fc, bw), g)| {
            let x = (f - fc) / (bw / 2.0);
            g / (1.0 + x * x)
        })
        .sum();
    tilt * (peaks + 0.01)
}

fn raised_cosine_env(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

/// Speech-like utterance: formant-shaped voiced syllables with gliding
/// pitch, occasional fricative bursts, and pauses. Peak-normalized to 0.5.
pub fn synth_speech(speaker: &SpeakerProfile, duration_s: f64, sample_rate: u32, seed: u64) -> Waveform<f32> {
    let sr = sample_rate as f64;
    let n = (duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0f64; n];
    let ms = |v: f64| (v * sr / 1000.0) as usize;
    let mut pos = ms(rng.gen_range(30.0..150.0));
    let syllable_ms = 1000.0 / speaker.rate;
    let mut hp_state = (0.0f64, 0.0f64);
    while pos < n {
        if rng.gen_bool(0.3) {
            // fricative onset: high-passed noise
            let len = ms(rng.gen_range(40.0..110.0)).min(n - pos);
            let amp = rng.gen_range(0.05..0.2);
            let a = (-2.0 * PI * 2500.0 / sr).exp();
            for i in 0..len {
                let w: f64 = StandardNormal.sample(&mut rng);
                let y = a * (hp_state.0 + w - hp_state.1);
                hp_state = (y, w);
                out[pos + i] += amp * y * raised_cosine_env(i, len, ms(10.0));
            }
            pos += len;
            if pos >= n {
                break;
            }
        }
        let len = ms(syllable_ms * rng.gen_range(0.6..1.4)).min(n - pos);
        let v0 = VOWELS[rng.gen_range(0..VOWELS.len())];
        let v1 = VOWELS[rng.gen_range(0..VOWELS.len())];
        let f0_start = speaker.f0_hz * rng.gen_range(0.9..1.15);
        let f0_end = speaker.f0_hz * rng.gen_range(0.8..1.05);
        let amp = rng.gen_range(0.6..1.0);
        let mut phase = rng.gen_range(0.0..2.0 * PI);
        let block = ms(5.0).max(1);
        let mut amps: Vec<f64> = Vec::new();
        for i in 0..len {
            let frac = i as f64 / len.max(1) as f64;
            let f0 = f0_start + (f0_end - f0_start) * frac;
            if i % block == 0 {
                let mut formants = [0.0; 3];
                for k in 0..3 {
                    formants[k] = (v0[k] + (v1[k] - v0[k]) * frac) * speaker.formant_scale;
                }
                let count = (VOICED_TOP_HZ / f0) as usize;
                amps = (1..=count)
                    .map(|h| formant_envelope(h as f64 * f0, &formants))
                    .collect();
            }
            // sin(hφ) by the Chebyshev recurrence
            let (s1, c1) = phase.sin_cos();
            let (mut prev, mut cur) = (0.0, s1);
            let mut acc = 0.0;
            for a in &amps {
                acc += a * cur;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
            out[pos + i] += amp * acc * raised_cosine_env(i, len, ms(25.0));
            phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
        }
        pos += len;
        let gap = if rng.gen_bool(0.12) {
            rng.gen_range(250.0..500.0)
        } else {
            rng.gen_range(30.0..150.0)
        };
        pos += ms(gap);
    }
    peak_normalize(&mut out, 0.5);
    to_waveform(out, sample_rate)
}

/// Broadband noise used for generic (non-drone) pretraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenericNoiseKind {
    Pink,
    Babble,
}

impl GenericNoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GenericNoiseKind::Pink => "pink",
            GenericNoiseKind::Babble => "babble",
        }
    }
}

/// Pink noise (Kellet's filter) or babble (a sum of synthetic talkers with
/// a light pink bed), peak-normalized.
pub fn synth_generic_noise(kind: GenericNoiseKind, duration_s: f64, sample_rate: u32, seed: u64) -> Waveform<f32> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pink = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut b = [0.0f64; 7];
        (0..n)
            .map(|_| {
                let w: f64 = StandardNormal.sample(rng);
                b[0] = 0.99886 * b[0] + w * 0.0555179;
                b[1] = 0.99332 * b[1] + w * 0.0750759;
                b[2] = 0.96900 * b[2] + w * 0.1538520;
                b[3] = 0.86650 * b[3] + w * 0.3104856;
                b[4] = 0.55000 * b[4] + w * 0.5329522;
                b[5] = -0.7616 * b[5] - w * 0.0168980;
                let y = b.iter().sum::<f64>() + w * 0.5362;
                b[6] = w * 0.115926;
                y
            })
            .collect()
    };
    let mut out = match kind {
        GenericNoiseKind::Pink => pink(&mut rng),
        GenericNoiseKind::Babble => {
            let talkers = rng.gen_range(4..8);
            let mut acc = vec![0.0; n];
            for _ in 0..talkers {
                let speaker = SpeakerProfile::random(rng.gen());
                let talk = synth_speech(&speaker, duration_s, sample_rate, rng.gen());
                acc.iter_mut().zip(&talk.samples).for_each(|(a, t)| *a += *t as f64);
            }
            let bed = pink(&mut rng);
            let p_acc = acc.iter().map(|v| v * v).sum::<f64>();
            let p_bed = bed.iter().map(|v| v * v).sum::<f64>();
            if p_bed > 0.0 {
                let g = (0.05 * p_acc / p_bed).sqrt();
                acc.iter_mut().zip(&bed).for_each(|(a, b)| *a += g * b);
            }
            acc
        }
    };
    peak_normalize(&mut out, NOISE_PEAK);
    to_waveform(out, sample_rate)
}
