//! Complex ideal ratio mask (cIRM) and its application.
//!
//! `M = S / Y` computed as `S · conj(Y) / max(|Y|², eps)`, so that
//! `M ⊙ Y == S` wherever `|Y|²` clears the floor.

use num_complex::Complex;

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_EPS: f64 = 1e-8;
/// Elementwise magnitude bound applied to training targets.
pub const TARGET_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask<T = f32> {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMask<T> {
    pub fn filled(frames: usize, bins: usize, value: Complex<T>) -> Self {
        ComplexMask {
            frames,
            bins,
            data: vec![value; frames * bins],
        }
    }

    pub fn identity(frames: usize, bins: usize) -> Self {
        Self::filled(frames, bins, Complex::new(T::one(), T::zero()))
    }

    pub fn at(&self, frame: usize, bin: usize) -> Complex<T> {
        self.data[frame * self.bins + bin]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Scales every entry with `|M| > max_mag` back onto the bound; returns
    /// how many entries were clamped.
    pub fn clamp_magnitude(&mut self, max_mag: f64) -> usize {
        let bound = T::lit(max_mag);
        let mut clamped = 0;
        for m in self.data.iter_mut() {
            let mag = m.norm();
            if mag > bound {
                *m *= bound / mag;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::debug!(
                "clamped {clamped}/{} mask entries ({:.3}%) to |M| <= {max_mag}",
                self.data.len(),
                100.0 * clamped as f64 / self.data.len().max(1) as f64
            );
        }
        clamped
    }
}

fn check_grid<T: Real>(a: &ComplexSpectrogram<T>, frames: usize, bins: usize) -> Result<()> {
    a.same_grid(frames, bins)
}

pub fn compute_cirm<T: Real>(
    clean: &ComplexSpectrogram<T>,
    mixture: &ComplexSpectrogram<T>,
    eps: f64,
) -> Result<ComplexMask<T>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::validation(format!("eps must be positive, got {eps}")));
    }
    check_grid(clean, mixture.frames, mixture.bins)?;
    let eps = T::lit(eps);
    let data = clean
        .data
        .iter()
        .zip(&mixture.data)
        .map(|(s, y)| {
            let denom = y.norm_sqr().max(eps);
            Complex::new((y.re * s.re + y.im * s.im) / denom, (y.re * s.im - y.im * s.re) / denom)
        })
        .collect();
    Ok(ComplexMask {
        frames: mixture.frames,
        bins: mixture.bins,
        data,
    })
}

pub fn apply_mask<T: Real>(mask: &ComplexMask<T>, mixture: &ComplexSpectrogram<T>) -> Result<ComplexSpectrogram<T>> {
    check_grid(mixture, mask.frames, mask.bins)?;
    Ok(ComplexSpectrogram {
        frames: mixture.frames,
        bins: mixture.bins,
        data: mask.data.iter().zip(&mixture.data).map(|(m, y)| m * y).collect(),
    })
}

/// Gradient of a real loss w.r.t. the mask, given its gradient w.r.t. the
/// masked spectrum (both as `∂L/∂re + i ∂L/∂im`).
pub fn apply_mask_backward<T: Real>(
    grad_out: &ComplexSpectrogram<T>,
    mixture: &ComplexSpectrogram<T>,
) -> Result<ComplexMask<T>> {
    check_grid(mixture, grad_out.frames, grad_out.bins)?;
    Ok(ComplexMask {
        frames: mixture.frames,
        bins: mixture.bins,
        data: grad_out
            .data
            .iter()
            .zip(&mixture.data)
            .map(|(g, y)| g * y.conj())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(values: &[(f64, f64)]) -> ComplexSpectrogram<f64> {
        ComplexSpectrogram::from_data(
            1,
            values.len(),
            values.iter().map(|&(r, i)| Complex::new(r, i)).collect(),
        )
        .unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, n: usize, min_mag: f64) -> ComplexSpectrogram<f64> {
        let data = (0..n)
            .map(|_| loop {
                let c = Complex::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                if c.norm() > min_mag {
                    break c;
                }
            })
            .collect();
        ComplexSpectrogram::from_data(4, n / 4, data).unwrap()
    }

    #[test]
    fn noise_free_mixture_gives_identity_mask() {
        let s = grid(&[(0.3, -0.2), (1.5, 2.0), (-0.7, 0.01)]);
        let m = compute_cirm(&s, &s, DEFAULT_EPS).unwrap();
        for c in &m.data {
            assert!((c - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn silent_clean_gives_zero_mask() {
        let y = grid(&[(0.3, -0.2), (0.0, 0.0)]);
        let s = grid(&[(0.0, 0.0), (0.0, 0.0)]);
        let m = compute_cirm(&s, &y, DEFAULT_EPS).unwrap();
        assert!(m.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn hand_evaluated_bin() {
        let y = grid(&[(1.0, 1.0)]);
        let s = grid(&[(1.0, 0.0)]);
        let m = compute_cirm(&s, &y, DEFAULT_EPS).unwrap();
        assert_eq!(m.data[0], Complex::new(0.5, -0.5));
        let back = apply_mask(&m, &y).unwrap();
        assert_eq!(back.data[0], Complex::new(1.0, 0.0));
    }

    #[test]
    fn identity_and_zero_masks() {
        let y = grid(&[(0.4, 2.0), (-1.0, 0.5)]);
        let id = apply_mask(&ComplexMask::identity(1, 2), &y).unwrap();
        assert_eq!(id, y);
        let zero = apply_mask(&ComplexMask::filled(1, 2, Complex::new(0.0, 0.0)), &y).unwrap();
        assert!(zero.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn zero_mixture_stays_finite_and_grid_mismatch_errors() {
        let y = grid(&[(0.0, 0.0)]);
        let s = grid(&[(1.0, 1.0)]);
        let m = compute_cirm(&s, &y, DEFAULT_EPS).unwrap();
        assert!(m.is_finite());
        let other = grid(&[(1.0, 1.0), (2.0, 2.0)]);
        assert!(compute_cirm(&other, &y, DEFAULT_EPS).is_err());
        assert!(apply_mask(&m, &other).is_err());
        assert!(compute_cirm(&s, &y, 0.0).is_err());
    }

    #[test]
    fn clamp_bounds_magnitude() {
        let mut m = ComplexMask::<f64> {
            frames: 1,
            bins: 3,
            data: vec![
                Complex::new(30.0, 40.0),
                Complex::new(1.0, 0.0),
                Complex::new(0.0, -11.0),
            ],
        };
        assert_eq!(m.clamp_magnitude(TARGET_CLAMP), 2);
        assert!((m.data[0] - Complex::new(6.0, 8.0)).norm() < 1e-12);
        assert_eq!(m.data[1], Complex::new(1.0, 0.0));
        assert!((m.data[2].norm() - 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mask_recovers_clean(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_grid(&mut rng, 64, 0.0);
            let y = random_grid(&mut rng, 64, 1e-3);
            let back = apply_mask(&compute_cirm(&s, &y, DEFAULT_EPS).unwrap(), &y).unwrap();
            for (a, b) in back.data.iter().zip(&s.data) {
                prop_assert!((a - b).norm() <= 1e-6 * b.norm().max(1e-12) + 1e-15);
            }
        }

        #[test]
        fn conjugation_equivariance(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_grid(&mut rng, 16, 0.0);
            let y = random_grid(&mut rng, 16, 1e-3);
            let conj = |g: &ComplexSpectrogram<f64>| ComplexSpectrogram { data: g.data.iter().map(|c| c.conj()).collect(), ..g.clone() };
            let m = compute_cirm(&s, &y, DEFAULT_EPS).unwrap();
            let mc = compute_cirm(&conj(&s), &conj(&y), DEFAULT_EPS).unwrap();
            for (a, b) in m.data.iter().zip(&mc.data) {
                prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }

        #[test]
        fn gain_invariance(seed in 0u64..10_000, alpha in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0]) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_grid(&mut rng, 16, 0.0);
            let y = random_grid(&mut rng, 16, 0.05);
            let scale = |g: &ComplexSpectrogram<f64>| ComplexSpectrogram { data: g.data.iter().map(|c| c * alpha).collect(), ..g.clone() };
            let m = compute_cirm(&s, &y, DEFAULT_EPS).unwrap();
            let ms = compute_cirm(&scale(&s), &scale(&y), DEFAULT_EPS).unwrap();
            for (a, b) in m.data.iter().zip(&ms.data) {
                prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
            }
        }
    }
}
