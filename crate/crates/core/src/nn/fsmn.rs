//! Complex FSMN layer: a frequency projection of the current frame plus a
//! learned weighted sum of the previous `taps` frames.
//!
//! `out[c, l] = P · x[c, l] + b + Σ_{τ=1..N} a_τ[c] ⊙ x[c, l − τ]`
//!
//! `P` is a complex `F × F` matrix shared across channels (initialized to the
//! identity), `a_τ` holds one complex weight per (channel, frequency).

use rand::Rng;

use super::conv::accumulate;
use super::feature::ComplexFeatureMap;
use super::params::{Gradients, ParamGroup, ParamId, ParameterStore};
use crate::error::Result;
use crate::real::{cgemm, CMat, Mat, MatMut, Real};

const TAP_INIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Fsmn {
    pub channels: usize,
    pub freq: usize,
    pub taps: usize,
    pub p_re: ParamId,
    pub p_im: ParamId,
    pub b_re: ParamId,
    pub b_im: ParamId,
    /// `[taps, channels, freq]`
    pub a_re: ParamId,
    pub a_im: ParamId,
}

pub struct FsmnCache<T> {
    x: ComplexFeatureMap<T>,
}

impl Fsmn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng>(
        store: &mut ParameterStore<T>,
        name: &str,
        channels: usize,
        freq: usize,
        taps: usize,
        group: ParamGroup,
        rng: &mut R,
    ) -> Self {
        let mut eye = vec![T::zero(); freq * freq];
        for f in 0..freq {
            eye[f * freq + f] = T::one();
        }
        let p_re = store.add(format!("{name}.p_re"), &[freq, freq], group, eye);
        let p_im = store.add(
            format!("{name}.p_im"),
            &[freq, freq],
            group,
            vec![T::zero(); freq * freq],
        );
        let b_re = store.add(format!("{name}.b_re"), &[freq], group, vec![T::zero(); freq]);
        let b_im = store.add(format!("{name}.b_im"), &[freq], group, vec![T::zero(); freq]);
        let n = taps * channels * freq;
        let mut init = || -> Vec<T> { (0..n).map(|_| T::lit(rng.gen_range(-TAP_INIT..TAP_INIT))).collect() };
        let a_re = store.add(format!("{name}.a_re"), &[taps, channels, freq], group, init());
        let a_im = store.add(format!("{name}.a_im"), &[taps, channels, freq], group, init());
        Fsmn {
            channels,
            freq,
            taps,
            p_re,
            p_im,
            b_re,
            b_im,
            a_re,
            a_im,
        }
    }

    fn proj<'a, T: Real>(&self, store: &'a ParameterStore<T>) -> CMat<'a, T> {
        CMat::new(
            Mat::row_major(store.value(self.p_re), self.freq, self.freq),
            Mat::row_major(store.value(self.p_im), self.freq, self.freq),
        )
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        x: &ComplexFeatureMap<T>,
    ) -> Result<(ComplexFeatureMap<T>, FsmnCache<T>)> {
        x.expect_shape(self.channels, self.freq)?;
        let (c, f, t) = x.shape();
        let mut out = ComplexFeatureMap::zeros(c, f, t);
        {
            let (o_re, o_im) = out.freq_cols_mut();
            cgemm(T::one(), x.freq_cols(), self.proj(store).t(), T::zero(), o_re, o_im);
        }
        let (b_re, b_im) = (store.value(self.b_re), store.value(self.b_im));
        for row in 0..c * t {
            let r = row * f..(row + 1) * f;
            out.re[r.clone()].iter_mut().zip(b_re).for_each(|(o, b)| *o += *b);
            out.im[r].iter_mut().zip(b_im).for_each(|(o, b)| *o += *b);
        }
        let (a_re, a_im) = (store.value(self.a_re), store.value(self.a_im));
        for tau in 1..=self.taps {
            for ch in 0..c {
                let a = (tau - 1) * c * f + ch * f;
                let (ar, ai) = (&a_re[a..a + f], &a_im[a..a + f]);
                for l in tau..t {
                    let dst = x.index(ch, 0, l);
                    let src = x.index(ch, 0, l - tau);
                    for k in 0..f {
                        let (xr, xi) = (x.re[src + k], x.im[src + k]);
                        out.re[dst + k] += ar[k] * xr - ai[k] * xi;
                        out.im[dst + k] += ar[k] * xi + ai[k] * xr;
                    }
                }
            }
        }
        Ok((out, FsmnCache { x: x.clone() }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &FsmnCache<T>,
        dout: &ComplexFeatureMap<T>,
        grads: &mut Gradients<T>,
        need_input: bool,
    ) -> Option<ComplexFeatureMap<T>> {
        let x = &cache.x;
        let (c, f, t) = x.shape();
        if grads.wants(self.p_re) || grads.wants(self.p_im) {
            // out = X Pᵀ  =>  dPᵀ = Xᴴ dOut
            let mut gp_re = vec![T::zero(); f * f];
            let mut gp_im = vec![T::zero(); f * f];
            cgemm(
                T::one(),
                x.freq_cols().h(),
                dout.freq_cols(),
                T::zero(),
                MatMut::row_major(&mut gp_re, f, f).t(),
                MatMut::row_major(&mut gp_im, f, f).t(),
            );
            accumulate(grads, self.p_re, &gp_re);
            accumulate(grads, self.p_im, &gp_im);
        }
        for (id, plane) in [(self.b_re, &dout.re), (self.b_im, &dout.im)] {
            if let Some(slot) = grads.slot(id) {
                for row in plane.chunks_exact(f) {
                    slot.iter_mut().zip(row).for_each(|(s, v)| *s += *v);
                }
            }
        }
        let (a_re, a_im) = (store.value(self.a_re), store.value(self.a_im));
        if grads.wants(self.a_re) || grads.wants(self.a_im) {
            let mut ga_re = vec![T::zero(); self.taps * c * f];
            let mut ga_im = vec![T::zero(); self.taps * c * f];
            for tau in 1..=self.taps {
                for ch in 0..c {
                    let a = (tau - 1) * c * f + ch * f;
                    for l in tau..t {
                        let dst = x.index(ch, 0, l);
                        let src = x.index(ch, 0, l - tau);
                        for k in 0..f {
                            let (gr, gi) = (dout.re[dst + k], dout.im[dst + k]);
                            let (xr, xi) = (x.re[src + k], x.im[src + k]);
                            // g · conj(x)
                            ga_re[a + k] += gr * xr + gi * xi;
                            ga_im[a + k] += gi * xr - gr * xi;
                        }
                    }
                }
            }
            accumulate(grads, self.a_re, &ga_re);
            accumulate(grads, self.a_im, &ga_im);
        }
        if !need_input {
            return None;
        }
        let mut dx = ComplexFeatureMap::zeros(c, f, t);
        {
            // dX = dOut · conj(P)
            let p = self.proj(store);
            let conj_p = CMat { conj: true, ..p };
            let (d_re, d_im) = dx.freq_cols_mut();
            cgemm(T::one(), dout.freq_cols(), conj_p, T::zero(), d_re, d_im);
        }
        for tau in 1..=self.taps {
            for ch in 0..c {
                let a = (tau - 1) * c * f + ch * f;
                let (ar, ai) = (&a_re[a..a + f], &a_im[a..a + f]);
                for l in tau..t {
                    let g = dx.index(ch, 0, l);
                    let s = dx.index(ch, 0, l - tau);
                    for k in 0..f {
                        let (gr, gi) = (dout.re[g + k], dout.im[g + k]);
                        // conj(a) · g
                        dx.re[s + k] += ar[k] * gr + ai[k] * gi;
                        dx.im[s + k] += ar[k] * gi - ai[k] * gr;
                    }
                }
            }
        }
        Some(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{check_layer_grads, random_map};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(c: usize, f: usize, taps: usize, seed: u64) -> (ParameterStore<f64>, Fsmn) {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = Fsmn::new(&mut store, "m", c, f, taps, ParamGroup::EncoderFsmn, &mut rng);
        (store, layer)
    }

    #[test]
    fn no_taps_identity_projection_is_identity() {
        let (store, layer) = fixture(2, 4, 0, 1);
        let x = random_map::<f64>(2, 4, 5, 2);
        let (y, _) = layer.forward(&store, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn impulse_response_spans_taps() {
        let (store, layer) = fixture(1, 3, 2, 3);
        let mut x = ComplexFeatureMap::zeros(1, 3, 6);
        for k in 0..3 {
            x.set(0, k, 0, (1.0, -0.5));
        }
        let (y, _) = layer.forward(&store, &x).unwrap();
        for l in 0..6 {
            let nonzero = (0..3).any(|k| y.get(0, k, l) != (0.0, 0.0));
            assert_eq!(nonzero, l <= 2, "frame {l}");
        }
    }

    #[test]
    fn all_ones_hand_evaluation() {
        let (mut store, layer) = fixture(1, 2, 1, 4);
        store.value_mut(layer.a_re).iter_mut().for_each(|v| *v = 0.5);
        store.value_mut(layer.a_im).iter_mut().for_each(|v| *v = 0.0);
        let x = ComplexFeatureMap::from_planes(1, 2, 4, vec![1.0; 8], vec![0.0; 8]).unwrap();
        let (y, _) = layer.forward(&store, &x).unwrap();
        for k in 0..2 {
            assert_eq!(y.get(0, k, 0), (1.0, 0.0));
            for l in 1..4 {
                assert_eq!(y.get(0, k, l), (1.5, 0.0));
            }
        }
    }

    #[test]
    fn causal_in_time() {
        let (store, layer) = fixture(2, 4, 3, 5);
        let x = random_map::<f64>(2, 4, 9, 6);
        let mut cut = x.clone();
        for c in 0..2 {
            for l in 5..9 {
                for k in 0..4 {
                    cut.set(c, k, l, (0.0, 0.0));
                }
            }
        }
        let (a, _) = layer.forward(&store, &x).unwrap();
        let (b, _) = layer.forward(&store, &cut).unwrap();
        for c in 0..2 {
            for l in 0..5 {
                for k in 0..4 {
                    assert_eq!(a.get(c, k, l), b.get(c, k, l));
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut store, layer) = fixture(3, 5, 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for id in [layer.p_re, layer.p_im, layer.b_re, layer.b_im] {
            store
                .value_mut(id)
                .iter_mut()
                .for_each(|v| *v += rng.gen_range(-0.3..0.3));
        }
        let x = random_map::<f64>(3, 5, 7, 9);
        let worst = check_layer_grads(
            store,
            x,
            |s, x| layer.forward(s, x).unwrap(),
            |s, c, dy, g| layer.backward(s, c, dy, g, true).unwrap(),
            10,
        );
        assert!(worst <= 1e-4, "fsmn worst rel err {worst}");
    }
}
