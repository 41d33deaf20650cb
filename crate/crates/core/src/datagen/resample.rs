//! Rational-rate resampling with a Kaiser-windowed sinc lowpass.
//!
//! The kernel matches Octave's `resample` (60 dB rejection, roll-off of a
//! tenth of the cutoff), normalized to unit DC gain per output phase, and is
//! applied with zero padding and the filter delay removed.

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Upsampled-rate filter taps for resampling by `up / down` (already reduced).
fn kernel(up: usize, down: usize) -> Vec<f64> {
    let rejection_db = 60.0;
    let cutoff = 1.0 / (2.0 * up.max(down) as f64);
    let roll_off = cutoff / 10.0;
    let half = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as i64;
    let beta = 0.1102 * (rejection_db - 8.7);
    let n = (2 * half + 1) as usize;
    let i0_beta = bessel_i0(beta);
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - half as f64;
            let ratio = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            let kaiser = bessel_i0(beta * (1.0 - ratio * ratio).max(0.0).sqrt()) / i0_beta;
            kaiser * 2.0 * up as f64 * cutoff * sinc(2.0 * cutoff * t)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v *= up as f64 / sum);
    h
}

/// Resamples `x` from `from_hz` to `to_hz`. The output has
/// `ceil(len · to / from)` samples.
pub fn resample(x: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    let g = gcd(from_hz as usize, to_hz as usize);
    let (up, down) = (to_hz as usize / g, from_hz as usize / g);
    if up == down {
        return x.to_vec();
    }
    let h = kernel(up, down);
    let half = (h.len() - 1) / 2;
    let n_out = (x.len() * up).div_ceil(down);
    (0..n_out)
        .map(|m| {
            // y[m] = Σ_n x[n] · h[half + m·down − n·up]
            let center = half + m * down;
            let n_hi = (center / up).min(x.len().saturating_sub(1));
            let n_lo = (center + 1).saturating_sub(h.len()).div_ceil(up);
            let mut acc = 0.0;
            if n_lo <= n_hi {
                for n in n_lo..=n_hi {
                    acc += x[n] * h[center - n * up];
                }
            }
            acc
        })
        .collect()
}
