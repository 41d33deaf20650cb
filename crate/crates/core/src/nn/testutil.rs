//! Finite-difference helpers shared by the layer tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::feature::ComplexFeatureMap;
use super::params::{Gradients, ParamId, ParameterStore};
use crate::real::Real;

pub(crate) fn random_map<T: Real>(channels: usize, freq: usize, time: usize, seed: u64) -> ComplexFeatureMap<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = channels * freq * time;
    let re = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let im = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    ComplexFeatureMap::from_planes(channels, freq, time, re, im).unwrap()
}

pub(crate) fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

const STEP: f64 = 1e-4;
/// Entries probed per parameter array / input plane.
const PROBES: usize = 24;

/// Checks a layer's backward pass against central differences of the scalar
/// loss `L = <r, layer(x)>` with a random projection `r`. Returns the worst
/// relative error over probed parameter and input entries.
pub(crate) fn check_layer_grads<C>(
    store: ParameterStore<f64>,
    x: ComplexFeatureMap<f64>,
    forward: impl Fn(&ParameterStore<f64>, &ComplexFeatureMap<f64>) -> (ComplexFeatureMap<f64>, C),
    backward: impl Fn(&ParameterStore<f64>, &C, &ComplexFeatureMap<f64>, &mut Gradients<f64>) -> ComplexFeatureMap<f64>,
    seed: u64,
) -> f64 {
    let (y, cache) = forward(&store, &x);
    let r = random_map::<f64>(y.channels, y.freq, y.time, seed ^ 0x5eed);
    let loss = |s: &ParameterStore<f64>, x: &ComplexFeatureMap<f64>| {
        let (y, _) = forward(s, x);
        y.re.iter()
            .zip(&r.re)
            .chain(y.im.iter().zip(&r.im))
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let mut grads = Gradients::for_store(&store);
    let dx = backward(&store, &cache, &r, &mut grads);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let ids: Vec<ParamId> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let n = store.get(id).len();
        let Some(g) = grads.get(id) else { continue };
        for _ in 0..PROBES.min(n) {
            let i = rng.gen_range(0..n);
            let mut s = store.clone();
            s.value_mut(id)[i] += STEP;
            let up = loss(&s, &x);
            s.value_mut(id)[i] -= 2.0 * STEP;
            let down = loss(&s, &x);
            worst = worst.max(rel_err(g[i], (up - down) / (2.0 * STEP)));
        }
    }
    for plane in 0..2 {
        for _ in 0..PROBES.min(x.len()) {
            let i = rng.gen_range(0..x.len());
            let mut xp = x.clone();
            let v = if plane == 0 { &mut xp.re[i] } else { &mut xp.im[i] };
            *v += STEP;
            let up = loss(&store, &xp);
            let v = if plane == 0 { &mut xp.re[i] } else { &mut xp.im[i] };
            *v -= 2.0 * STEP;
            let down = loss(&store, &xp);
            let analytic = if plane == 0 { dx.re[i] } else { dx.im[i] };
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * STEP)));
        }
    }
    worst
}
