//! Scale-invariant SNR loss with its analytic gradient.

use crate::error::{Error, Result};
use crate::real::Real;

/// Stabilizer added to both energies of the ratio.
pub const SI_SNR_EPS: f64 = 1e-8;

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Decomposition {
    est: Vec<f64>,
    target: Vec<f64>,
    target_energy: f64,
    error_energy: f64,
}

fn decompose<T: Real>(estimate: &[T], reference: &[T]) -> Result<Decomposition> {
    if estimate.len() != reference.len() {
        return Err(Error::validation(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::validation("empty signals"));
    }
    let est = zero_mean(&estimate.iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    let reference = zero_mean(&reference.iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    let ref_energy = dot(&reference, &reference);
    if ref_energy == 0.0 {
        return Err(Error::validation("reference signal is silent"));
    }
    let alpha = dot(&est, &reference) / ref_energy;
    let target: Vec<f64> = reference.iter().map(|v| alpha * v).collect();
    let error_energy = est.iter().zip(&target).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok(Decomposition {
        target_energy: dot(&target, &target),
        est,
        target,
        error_energy,
    })
}

/// SI-SNR in dB (higher is better).
pub fn si_snr_db<T: Real>(estimate: &[T], reference: &[T]) -> Result<f64> {
    let d = decompose(estimate, reference)?;
    Ok(10.0 * ((d.target_energy + SI_SNR_EPS) / (d.error_energy + SI_SNR_EPS)).log10())
}

/// Negative SI-SNR and its gradient with respect to `estimate`.
pub fn si_snr_loss<T: Real>(estimate: &[T], reference: &[T]) -> Result<(f64, Vec<T>)> {
    let d = decompose(estimate, reference)?;
    let p = d.target_energy + SI_SNR_EPS;
    let e = d.error_energy + SI_SNR_EPS;
    let loss = -10.0 * (p / e).log10();
    let k = -10.0 / std::f64::consts::LN_10;
    // d/dŝ' of ln P is 2·s_t/P, of ln E is 2·(ŝ' − s_t)/E
    let g: Vec<f64> = d
        .est
        .iter()
        .zip(&d.target)
        .map(|(x, t)| k * (2.0 * t / p - 2.0 * (x - t) / e))
        .collect();
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    Ok((loss, g.into_iter().map(|v| T::lit(v - mean)).collect()))
}
