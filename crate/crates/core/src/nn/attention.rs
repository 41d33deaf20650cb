//! Channel attention gate on encoder skip paths.
//!
//! Channel descriptors are the mean magnitude of each channel over
//! frequency and time; `g = sigmoid(W d + b)` then scales both planes of
//! that channel.

use rand::Rng;

use super::conv::accumulate;
use super::feature::ComplexFeatureMap;
use super::params::{Gradients, ParamGroup, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::real::Real;

/// Keeps the magnitude derivative finite at exact zeros.
const MAG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGate {
    pub channels: usize,
    /// `[C, C]`
    pub w: ParamId,
    pub b: ParamId,
}

pub struct GateCache<T> {
    skip: ComplexFeatureMap<T>,
    mags: Vec<T>,
    desc: Vec<T>,
    gate: Vec<T>,
}

fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

impl AttentionGate {
    pub fn new<T: Real, R: Rng>(store: &mut ParameterStore<T>, name: &str, channels: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (channels as f64).sqrt();
        let w = (0..channels * channels)
            .map(|_| T::lit(rng.gen_range(-bound..bound)))
            .collect();
        AttentionGate {
            channels,
            w: store.add(format!("{name}.w"), &[channels, channels], ParamGroup::AttentionGate, w),
            b: store.add(
                format!("{name}.b"),
                &[channels],
                ParamGroup::AttentionGate,
                vec![T::zero(); channels],
            ),
        }
    }

    pub fn param_count(channels: usize) -> usize {
        channels * channels + channels
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        skip: &ComplexFeatureMap<T>,
    ) -> Result<(ComplexFeatureMap<T>, GateCache<T>)> {
        if skip.channels != self.channels {
            return Err(Error::shape(
                format!("{} channels", self.channels),
                format!("{} channels", skip.channels),
            ));
        }
        let c = self.channels;
        let n = skip.freq * skip.time;
        let floor = T::lit(MAG_FLOOR);
        let mags: Vec<T> = skip
            .re
            .iter()
            .zip(&skip.im)
            .map(|(r, i)| (*r * *r + *i * *i + floor).sqrt())
            .collect();
        let inv_n = T::one() / T::lit(n.max(1) as f64);
        let desc: Vec<T> = mags
            .chunks_exact(n.max(1))
            .map(|m| m.iter().copied().sum::<T>() * inv_n)
            .collect();
        let (w, b) = (store.value(self.w), store.value(self.b));
        let gate: Vec<T> = (0..c)
            .map(|i| {
                let z = (0..c).map(|j| w[i * c + j] * desc[j]).sum::<T>() + b[i];
                sigmoid(z)
            })
            .collect();
        let mut out = skip.clone();
        for (ch, g) in gate.iter().enumerate() {
            out.re[ch * n..(ch + 1) * n].iter_mut().for_each(|v| *v *= *g);
            out.im[ch * n..(ch + 1) * n].iter_mut().for_each(|v| *v *= *g);
        }
        Ok((
            out,
            GateCache {
                skip: skip.clone(),
                mags,
                desc,
                gate,
            },
        ))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &GateCache<T>,
        dout: &ComplexFeatureMap<T>,
        grads: &mut Gradients<T>,
    ) -> ComplexFeatureMap<T> {
        let c = self.channels;
        let skip = &cache.skip;
        let n = skip.freq * skip.time;
        let mut dz = vec![T::zero(); c];
        for (ch, dzc) in dz.iter_mut().enumerate() {
            let r = ch * n..(ch + 1) * n;
            let dg = dout.re[r.clone()]
                .iter()
                .zip(&skip.re[r.clone()])
                .chain(dout.im[r.clone()].iter().zip(&skip.im[r]))
                .map(|(d, s)| *d * *s)
                .sum::<T>();
            let g = cache.gate[ch];
            *dzc = dg * g * (T::one() - g);
        }
        if grads.wants(self.w) {
            let mut gw = vec![T::zero(); c * c];
            for i in 0..c {
                for j in 0..c {
                    gw[i * c + j] = dz[i] * cache.desc[j];
                }
            }
            accumulate(grads, self.w, &gw);
        }
        accumulate(grads, self.b, &dz);
        let w = store.value(self.w);
        let inv_n = T::one() / T::lit(n.max(1) as f64);
        let mut dx = ComplexFeatureMap::zeros(skip.channels, skip.freq, skip.time);
        for j in 0..c {
            let ddesc = (0..c).map(|i| w[i * c + j] * dz[i]).sum::<T>() * inv_n;
            let g = cache.gate[j];
            for k in j * n..(j + 1) * n {
                let m = cache.mags[k];
                dx.re[k] = g * dout.re[k] + ddesc * skip.re[k] / m;
                dx.im[k] = g * dout.im[k] + ddesc * skip.im[k] / m;
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{check_layer_grads, random_map};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(c: usize, seed: u64) -> (ParameterStore<f64>, AttentionGate) {
        let mut store = ParameterStore::new();
        let gate = AttentionGate::new(&mut store, "g", c, &mut ChaCha8Rng::seed_from_u64(seed));
        (store, gate)
    }

    #[test]
    fn zero_params_halve_the_skip() {
        let (mut store, gate) = fixture(3, 1);
        store.value_mut(gate.w).iter_mut().for_each(|v| *v = 0.0);
        let x = random_map::<f64>(3, 4, 5, 2);
        let (y, _) = gate.forward(&store, &x).unwrap();
        for k in 0..x.len() {
            assert_eq!(y.re[k], x.re[k] / 2.0);
            assert_eq!(y.im[k], x.im[k] / 2.0);
        }
        assert_eq!(y.shape(), x.shape());
    }

    #[test]
    fn saturated_bias_passes_the_skip() {
        let (mut store, gate) = fixture(2, 3);
        store.value_mut(gate.w).iter_mut().for_each(|v| *v = 0.0);
        store.value_mut(gate.b).iter_mut().for_each(|v| *v = 20.0);
        let x = random_map::<f64>(2, 4, 3, 4);
        let (y, _) = gate.forward(&store, &x).unwrap();
        assert!(y.max_abs_diff(&x) <= 1e-8);
    }

    #[test]
    fn zero_skip_gives_zero_output() {
        let (store, gate) = fixture(4, 5);
        let (y, _) = gate.forward(&store, &ComplexFeatureMap::zeros(4, 3, 2)).unwrap();
        assert!(y.re.iter().chain(&y.im).all(|v| *v == 0.0));
        assert!(gate.forward(&store, &ComplexFeatureMap::zeros(3, 3, 2)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut store, gate) = fixture(3, 6);
        store.value_mut(gate.b).copy_from_slice(&[0.3, -0.2, 0.1]);
        let worst = check_layer_grads(
            store,
            random_map::<f64>(3, 4, 5, 7),
            |s, x| gate.forward(s, x).unwrap(),
            |s, c, dy, g| gate.backward(s, c, dy, g),
            8,
        );
        assert!(worst <= 1e-4, "gate worst rel err {worst}");
    }
}
