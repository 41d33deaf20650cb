//! Time ↔ time-frequency conversion.
//!
//! Frames are centered: the signal is reflect-padded by `fft_size / 2` on
//! both sides before framing, so frame `l` is centered on sample `l * hop`.
//! Only the non-redundant half spectrum (`fft_size / 2 + 1` bins) is stored.
//! Synthesis divides the overlap-added frames by the analysis·synthesis
//! window envelope, which makes reconstruction exact wherever the envelope
//! is nonzero.

use std::sync::Arc;

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Canonical pipeline sample rate.
pub const SAMPLE_RATE: u32 = 16_000;

const ENVELOPE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T = f32> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Waveform::new(vec![T::zero(); len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.as_f64().powi(2)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Waveform<U> {
        Waveform {
            samples: self.samples.iter().map(|&x| U::lit(x.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Copy of `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Waveform<T> {
        Waveform::new(self.samples[start..start + len].to_vec(), self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic square-root Hann, used for both analysis and synthesis.
    SqrtHann,
    /// Periodic Hann analysis with rectangular synthesis.
    Hann,
    /// Rectangular analysis and synthesis; diagnostic use.
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            fft_size: 512,
            hop: 256,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count produced for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    pub fn analysis_window(&self) -> Vec<f64> {
        let n = self.fft_size;
        let hann = |i: usize| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
        match self.window {
            WindowKind::SqrtHann => (0..n).map(|i| hann(i).sqrt()).collect(),
            WindowKind::Hann => (0..n).map(hann).collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }

    pub fn synthesis_window(&self) -> Vec<f64> {
        match self.window {
            WindowKind::SqrtHann => self.analysis_window(),
            WindowKind::Hann | WindowKind::Rectangular => vec![1.0; self.fft_size],
        }
    }

    /// Steady-state overlap-add envelope of `analysis · synthesis` per
    /// position within one hop.
    pub fn cola_envelope(&self) -> Vec<f64> {
        let wa = self.analysis_window();
        let ws = self.synthesis_window();
        (0..self.hop)
            .map(|r| (r..self.fft_size).step_by(self.hop).map(|i| wa[i] * ws[i]).sum())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::validation(format!(
                "fft_size {} must be a power of two >= 2",
                self.fft_size
            )));
        }
        if self.hop == 0 || !self.fft_size.is_multiple_of(self.hop) || self.hop > self.fft_size / 2 {
            return Err(Error::validation(format!(
                "hop {} must divide fft_size {} and be at most fft_size/2",
                self.hop, self.fft_size
            )));
        }
        let env = self.cola_envelope();
        let (lo, hi) = env.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if hi - lo > 1e-10 {
            return Err(Error::validation(format!(
                "window pair violates constant overlap-add at hop {} (envelope spread {:e})",
                self.hop,
                hi - lo
            )));
        }
        Ok(())
    }
}

/// Half-spectrum STFT, frame-major: `data[frame * bins + bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T = f32> {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> ComplexSpectrogram<T> {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        ComplexSpectrogram {
            frames,
            bins,
            data: vec![Complex::new(T::zero(), T::zero()); frames * bins],
        }
    }

    pub fn from_data(frames: usize, bins: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(Error::shape(frames * bins, data.len()));
        }
        Ok(ComplexSpectrogram { frames, bins, data })
    }

    pub fn at(&self, frame: usize, bin: usize) -> Complex<T> {
        self.data[frame * self.bins + bin]
    }

    pub fn at_mut(&mut self, frame: usize, bin: usize) -> &mut Complex<T> {
        &mut self.data[frame * self.bins + bin]
    }

    pub fn same_grid(&self, other_frames: usize, other_bins: usize) -> Result<()> {
        if self.frames != other_frames || self.bins != other_bins {
            return Err(Error::shape(
                format!("{}x{} grid", self.frames, self.bins),
                format!("{other_frames}x{other_bins}"),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ComplexSpectrogram<U> {
        ComplexSpectrogram {
            frames: self.frames,
            bins: self.bins,
            data: self
                .data
                .iter()
                .map(|c| Complex::new(U::lit(c.re.as_f64()), U::lit(c.im.as_f64())))
                .collect(),
        }
    }
}

/// Reusable STFT/ISTFT plans and windows for one configuration.
#[derive(Clone)]
pub struct Stft<T: Real> {
    cfg: StftConfig,
    forward: Arc<dyn RealToComplex<T>>,
    inverse: Arc<dyn ComplexToReal<T>>,
    analysis: Vec<T>,
    synthesis: Vec<T>,
}

impl<T: Real> std::fmt::Debug for Stft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl<T: Real> Stft<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = RealFftPlanner::<T>::new();
        Ok(Stft {
            cfg,
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
            analysis: cfg.analysis_window().into_iter().map(T::lit).collect(),
            synthesis: cfg.synthesis_window().into_iter().map(T::lit).collect(),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    fn padded(&self, x: &[T]) -> Vec<T> {
        let pad = self.cfg.fft_size / 2;
        let n = x.len();
        let mut out = Vec::with_capacity(n + 2 * pad);
        out.extend((1..=pad).rev().map(|i| x[i]));
        out.extend_from_slice(x);
        out.extend((0..pad).map(|i| x[n - 2 - i]));
        out
    }

    pub fn forward(&self, w: &Waveform<T>) -> Result<ComplexSpectrogram<T>> {
        let n_fft = self.cfg.fft_size;
        if w.is_empty() || w.len() < n_fft {
            return Err(Error::TooShort {
                len: w.len(),
                needed: n_fft,
            });
        }
        w.validate()?;
        let padded = self.padded(&w.samples);
        let frames = (padded.len() - n_fft) / self.cfg.hop + 1;
        let bins = self.cfg.bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![T::zero(); n_fft];
        let mut spec = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for l in 0..frames {
            let start = l * self.cfg.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = padded[start + i] * self.analysis[i];
            }
            self.forward
                .process_with_scratch(&mut buf, &mut spec, &mut scratch)
                .expect("fft buffer sizes");
            data.extend_from_slice(&spec);
        }
        Ok(ComplexSpectrogram { frames, bins, data })
    }

    fn check_grid(&self, spec: &ComplexSpectrogram<T>) -> Result<()> {
        if spec.bins != self.cfg.bins() || spec.data.len() != spec.frames * spec.bins {
            return Err(Error::shape(
                format!("{} bins", self.cfg.bins()),
                format!("{} bins, {} values", spec.bins, spec.data.len()),
            ));
        }
        if spec.frames == 0 {
            return Err(Error::validation("spectrogram has no frames"));
        }
        Ok(())
    }

    fn envelope(&self, frames: usize) -> Vec<T> {
        let n_fft = self.cfg.fft_size;
        let mut env = vec![T::zero(); (frames - 1) * self.cfg.hop + n_fft];
        for l in 0..frames {
            let start = l * self.cfg.hop;
            for i in 0..n_fft {
                env[start + i] += self.analysis[i] * self.synthesis[i];
            }
        }
        env
    }

    /// Overlap-add synthesis over the padded time axis; output length is
    /// `(frames - 1) * hop + fft_size`.
    pub fn inverse(&self, spec: &ComplexSpectrogram<T>) -> Result<Waveform<T>> {
        self.check_grid(spec)?;
        let n_fft = self.cfg.fft_size;
        let scale = T::one() / T::lit(n_fft as f64);
        let env = self.envelope(spec.frames);
        let mut out = vec![T::zero(); env.len()];
        let mut buf = self.inverse.make_input_vec();
        let mut frame = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        for l in 0..spec.frames {
            buf.copy_from_slice(&spec.data[l * spec.bins..(l + 1) * spec.bins]);
            buf[0].im = T::zero();
            buf[spec.bins - 1].im = T::zero();
            self.inverse
                .process_with_scratch(&mut buf, &mut frame, &mut scratch)
                .expect("fft buffer sizes");
            let start = l * self.cfg.hop;
            for i in 0..n_fft {
                out[start + i] += frame[i] * scale * self.synthesis[i];
            }
        }
        let floor = T::lit(ENVELOPE_FLOOR);
        for (o, &e) in out.iter_mut().zip(&env) {
            *o = if e > floor { *o / e } else { T::zero() };
        }
        Ok(Waveform::new(out, SAMPLE_RATE))
    }

    /// Inverse followed by removal of the centering pad; the result has
    /// exactly `len` samples (zero-extended if the frames cover fewer).
    pub fn inverse_trimmed(&self, spec: &ComplexSpectrogram<T>, len: usize) -> Result<Waveform<T>> {
        let full = self.inverse(spec)?;
        let pad = self.cfg.fft_size / 2;
        let mut samples: Vec<T> = full.samples.into_iter().skip(pad).take(len).collect();
        samples.resize(len, T::zero());
        Ok(Waveform::new(samples, SAMPLE_RATE))
    }

    /// Adjoint of [`Stft::inverse_trimmed`]: maps a gradient on the trimmed
    /// waveform to the gradient on the real/imaginary parts of each bin.
    pub fn inverse_trimmed_adjoint(&self, grad: &[T], frames: usize) -> Result<ComplexSpectrogram<T>> {
        if frames == 0 {
            return Err(Error::validation("spectrogram has no frames"));
        }
        let n_fft = self.cfg.fft_size;
        let bins = self.cfg.bins();
        let pad = n_fft / 2;
        let env = self.envelope(frames);
        let floor = T::lit(ENVELOPE_FLOOR);
        // gradient on the normalized padded output
        let mut g = vec![T::zero(); env.len()];
        for (i, &v) in grad.iter().enumerate() {
            let j = i + pad;
            if j < g.len() && env[j] > floor {
                g[j] = v / env[j];
            }
        }
        let inv_n = T::one() / T::lit(n_fft as f64);
        let two = T::lit(2.0);
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![T::zero(); n_fft];
        let mut spec = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for l in 0..frames {
            let start = l * self.cfg.hop;
            for i in 0..n_fft {
                buf[i] = g[start + i] * self.synthesis[i];
            }
            self.forward
                .process_with_scratch(&mut buf, &mut spec, &mut scratch)
                .expect("fft buffer sizes");
            for (k, c) in spec.iter().enumerate() {
                if k == 0 || k == bins - 1 {
                    data.push(Complex::new(c.re * inv_n, T::zero()));
                } else {
                    data.push(Complex::new(c.re * two * inv_n, c.im * two * inv_n));
                }
            }
        }
        Ok(ComplexSpectrogram { frames, bins, data })
    }

    /// Windowed, padded analysis frames (time domain), as fed to the FFT.
    pub fn windowed_frames(&self, w: &Waveform<T>) -> Result<Vec<Vec<T>>> {
        let n_fft = self.cfg.fft_size;
        if w.len() < n_fft {
            return Err(Error::TooShort {
                len: w.len(),
                needed: n_fft,
            });
        }
        let padded = self.padded(&w.samples);
        let frames = (padded.len() - n_fft) / self.cfg.hop + 1;
        Ok((0..frames)
            .map(|l| {
                let start = l * self.cfg.hop;
                (0..n_fft).map(|i| padded[start + i] * self.analysis[i]).collect()
            })
            .collect())
    }

    /// Full (two-sided) spectrum of every analysis frame; diagnostic mode.
    pub fn full_spectrum(&self, w: &Waveform<T>) -> Result<Vec<Vec<Complex<T>>>> {
        let frames = self.windowed_frames(w)?;
        let mut planner = rustfft::FftPlanner::<T>::new();
        let fft = planner.plan_fft_forward(self.cfg.fft_size);
        Ok(frames
            .into_iter()
            .map(|f| {
                let mut buf: Vec<Complex<T>> = f.into_iter().map(|x| Complex::new(x, T::zero())).collect();
                fft.process(&mut buf);
                buf
            })
            .collect())
    }
}

pub fn stft<T: Real>(w: &Waveform<T>, cfg: &StftConfig) -> Result<ComplexSpectrogram<T>> {
    Stft::new(*cfg)?.forward(w)
}

pub fn istft<T: Real>(spec: &ComplexSpectrogram<T>, cfg: &StftConfig) -> Result<Waveform<T>> {
    Stft::new(*cfg)?.inverse(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(len: usize, seed: u64) -> Waveform<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), SAMPLE_RATE)
    }

    #[test]
    fn default_config_is_cola() {
        StftConfig::default().validate().unwrap();
        for hop in [128, 256] {
            StftConfig {
                fft_size: 512,
                hop,
                window: WindowKind::SqrtHann,
            }
            .validate()
            .unwrap();
        }
        let bad = StftConfig {
            fft_size: 512,
            hop: 384,
            window: WindowKind::SqrtHann,
        };
        assert!(bad.validate().is_err());
        let bad = StftConfig {
            fft_size: 500,
            hop: 250,
            window: WindowKind::SqrtHann,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_signal_gives_zero_spectrum_and_back() {
        let cfg = StftConfig::default();
        let spec = stft(&Waveform::<f64>::zeros(4000, SAMPLE_RATE), &cfg).unwrap();
        assert!(spec.data.iter().all(|c| c.norm() == 0.0));
        let back = istft(&spec, &cfg).unwrap();
        assert!(back.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn frame_count_and_output_length() {
        let cfg = StftConfig::default();
        let spec = stft(&random_wave(16000, 1), &cfg).unwrap();
        assert_eq!(spec.frames, 16000 / 256 + 1);
        assert_eq!(spec.bins, 257);
        let back = istft(&spec, &cfg).unwrap();
        assert_eq!(back.len(), (spec.frames - 1) * 256 + 512);
    }

    #[test]
    fn short_and_non_finite_inputs_are_rejected() {
        let cfg = StftConfig::default();
        assert!(matches!(
            stft(&Waveform::<f64>::zeros(100, SAMPLE_RATE), &cfg),
            Err(Error::TooShort { len: 100, needed: 512 })
        ));
        let mut w = random_wave(1024, 2);
        w.samples[10] = f64::NAN;
        assert!(matches!(stft(&w, &cfg), Err(Error::Validation(_))));
        let spec = ComplexSpectrogram::<f64>::zeros(3, 100);
        assert!(istft(&spec, &cfg).is_err());
    }

    #[test]
    fn bin_centered_cosine_is_confined_to_one_bin() {
        let cfg = StftConfig {
            fft_size: 512,
            hop: 256,
            window: WindowKind::Rectangular,
        };
        let k0 = 20usize;
        let x: Vec<f64> = (0..2048)
            .map(|n| (2.0 * std::f64::consts::PI * k0 as f64 * n as f64 / 512.0).cos())
            .collect();
        let frames = Stft::<f64>::new(cfg)
            .unwrap()
            .windowed_frames(&Waveform::new(x.clone(), SAMPLE_RATE))
            .unwrap();
        let spec = stft(&Waveform::new(x, SAMPLE_RATE), &cfg).unwrap();
        // interior frame, checked against a direct DFT of the same frame
        let l = 3;
        let frame = &frames[l];
        let peak = spec.at(l, k0).norm();
        for k in 0..spec.bins {
            let dft: Complex<f64> = frame
                .iter()
                .enumerate()
                .map(|(n, &v)| Complex::from_polar(v, -2.0 * std::f64::consts::PI * (k * n) as f64 / 512.0))
                .sum();
            assert!((dft - spec.at(l, k)).norm() < 1e-9 * peak);
            if k != k0 {
                assert!(spec.at(l, k).norm() < 1e-9 * peak, "bin {k} leaks");
            }
        }
        assert!((peak - 256.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_one_second() {
        let cfg = StftConfig::default();
        let s = Stft::<f64>::new(cfg).unwrap();
        let x = random_wave(16000, 3);
        let y = s.inverse_trimmed(&s.forward(&x).unwrap(), x.len()).unwrap();
        let err = x
            .samples
            .iter()
            .zip(&y.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "max err {err}");
    }

    #[test]
    fn single_frame_inverse_is_windowed_frame() {
        // A single frame of a windowed sine; inverse DFT of the frame must return
        // the windowed samples, and synthesis divides by the window envelope.
        let cfg = StftConfig {
            fft_size: 64,
            hop: 32,
            window: WindowKind::SqrtHann,
        };
        let s = Stft::<f64>::new(cfg).unwrap();
        let win = cfg.analysis_window();
        let frame: Vec<f64> = (0..64).map(|n| (0.3 * n as f64).sin() * win[n]).collect();
        let bins: Vec<Complex<f64>> = (0..33)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(n, &v)| Complex::from_polar(v, -2.0 * std::f64::consts::PI * (k * n) as f64 / 64.0))
                    .sum()
            })
            .collect();
        let spec = ComplexSpectrogram::from_data(1, 33, bins).unwrap();
        let out = s.inverse(&spec).unwrap();
        for n in 1..64 {
            // envelope of a single frame is win², so the output is frame / win
            let expected = frame[n] * win[n] / (win[n] * win[n]);
            assert!((out.samples[n] - expected).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::default();
        let s = Stft::<f64>::new(cfg).unwrap();
        let x = random_wave(4000, 4);
        let frames = s.windowed_frames(&x).unwrap();
        let full = s.full_spectrum(&x).unwrap();
        for (f, spec) in frames.iter().zip(&full) {
            let time: f64 = f.iter().map(|v| v * v).sum();
            let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 512.0;
            assert!((time - freq).abs() <= 1e-8 * time.max(1e-300));
        }
    }

    #[test]
    fn adjoint_matches_inner_product_identity() {
        // <istft(X), g> == <X, istft^T(g)> with the real inner product on (re, im)
        let cfg = StftConfig {
            fft_size: 64,
            hop: 16,
            window: WindowKind::SqrtHann,
        };
        let s = Stft::<f64>::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames = 20;
        let mut spec = ComplexSpectrogram::<f64>::zeros(frames, 33);
        for c in spec.data.iter_mut() {
            *c = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        for l in 0..frames {
            spec.at_mut(l, 0).im = 0.0;
            spec.at_mut(l, 32).im = 0.0;
        }
        let len = 300;
        let g: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = s.inverse_trimmed(&spec, len).unwrap();
        let lhs: f64 = y.samples.iter().zip(&g).map(|(a, b)| a * b).sum();
        let adj = s.inverse_trimmed_adjoint(&g, frames).unwrap();
        let rhs: f64 = spec
            .data
            .iter()
            .zip(&adj.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn stft_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let cfg = StftConfig::default();
            let x = random_wave(1500, seed);
            let y = random_wave(1500, seed + 7777);
            let mix = Waveform::new(x.samples.iter().zip(&y.samples).map(|(p, q)| a * p + b * q).collect(), SAMPLE_RATE);
            let sx = stft(&x, &cfg).unwrap();
            let sy = stft(&y, &cfg).unwrap();
            let sm = stft(&mix, &cfg).unwrap();
            for i in 0..sm.data.len() {
                let expect = sx.data[i] * a + sy.data[i] * b;
                prop_assert!((sm.data[i] - expect).norm() <= 1e-9);
            }
        }

        #[test]
        fn round_trip_interior(seed in 0u64..1000, len in 1024usize..6000, hop_sel in 0usize..2) {
            let cfg = StftConfig { fft_size: 512, hop: [128, 256][hop_sel], window: WindowKind::SqrtHann };
            let s = Stft::<f64>::new(cfg).unwrap();
            let x = random_wave(len, seed);
            let y = s.inverse_trimmed(&s.forward(&x).unwrap(), len).unwrap();
            for (p, q) in x.samples.iter().zip(&y.samples) {
                prop_assert!((p - q).abs() <= 1e-6);
            }
        }
    }
}
