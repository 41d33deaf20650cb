//! Frequency-domain bottleneck adapter.
//!
//! Each real cell projects the frequency axis `F → F/2 → F`:
//! `h = ReLU(W1 u + b1)`, `u' = W2 h + b2`. Two cells combine like a complex
//! product, and a skip wraps the combination:
//!
//! `out_r = A_r + cell_r(A_r) − cell_i(A_i)`
//! `out_i = A_i + cell_r(A_i) + cell_i(A_r)`
//!
//! `W2` and `b2` start at zero, so a fresh adapter is an exact identity.

use rand::Rng;

use super::conv::accumulate;
use super::feature::ComplexFeatureMap;
use super::params::{Gradients, ParamGroup, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::real::{gemm, Mat, MatMut, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterCell {
    pub freq: usize,
    /// `[F/2, F]`
    pub w1: ParamId,
    pub b1: ParamId,
    /// `[F, F/2]`
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Forward cache of one cell evaluation on a `rows × F` plane.
pub struct CellCache<T> {
    u: Vec<T>,
    /// Post-ReLU hidden activations, `rows × F/2`.
    h: Vec<T>,
    rows: usize,
}

impl AdapterCell {
    pub fn new<T: Real, R: Rng>(store: &mut ParameterStore<T>, name: &str, freq: usize, rng: &mut R) -> Result<Self> {
        if freq < 2 || !freq.is_multiple_of(2) {
            return Err(Error::validation(format!(
                "adapter needs an even frequency size, got {freq}"
            )));
        }
        let half = freq / 2;
        let bound = 1.0 / (freq as f64).sqrt();
        let w1 = (0..half * freq).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        let group = ParamGroup::Adapter;
        Ok(AdapterCell {
            freq,
            w1: store.add(format!("{name}.w1"), &[half, freq], group, w1),
            b1: store.add(format!("{name}.b1"), &[half], group, vec![T::zero(); half]),
            w2: store.add(format!("{name}.w2"), &[freq, half], group, vec![T::zero(); freq * half]),
            b2: store.add(format!("{name}.b2"), &[freq], group, vec![T::zero(); freq]),
        })
    }

    pub fn param_count(freq: usize) -> usize {
        let half = freq / 2;
        2 * freq * half + half + freq
    }

    /// Applies the cell along frequency to every row of a `rows × F` plane.
    pub fn forward<T: Real>(&self, store: &ParameterStore<T>, u: &[T]) -> Result<(Vec<T>, CellCache<T>)> {
        let f = self.freq;
        if !u.len().is_multiple_of(f) {
            return Err(Error::shape(format!("multiple of {f} values"), u.len()));
        }
        let (rows, half) = (u.len() / f, f / 2);
        let mut h = vec![T::zero(); rows * half];
        gemm(
            T::one(),
            Mat::row_major(u, rows, f),
            Mat::row_major(store.value(self.w1), half, f).t(),
            T::zero(),
            MatMut::row_major(&mut h, rows, half),
        );
        let b1 = store.value(self.b1);
        for row in h.chunks_exact_mut(half) {
            for (v, b) in row.iter_mut().zip(b1) {
                *v = (*v + *b).max(T::zero());
            }
        }
        let mut out = vec![T::zero(); rows * f];
        gemm(
            T::one(),
            Mat::row_major(&h, rows, half),
            Mat::row_major(store.value(self.w2), f, half).t(),
            T::zero(),
            MatMut::row_major(&mut out, rows, f),
        );
        let b2 = store.value(self.b2);
        for row in out.chunks_exact_mut(f) {
            row.iter_mut().zip(b2).for_each(|(v, b)| *v += *b);
        }
        Ok((out, CellCache { u: u.to_vec(), h, rows }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &CellCache<T>,
        dout: &[T],
        grads: &mut Gradients<T>,
    ) -> Vec<T> {
        let (f, half, rows) = (self.freq, self.freq / 2, cache.rows);
        let d = Mat::row_major(dout, rows, f);
        if grads.wants(self.w2) {
            let mut g = vec![T::zero(); f * half];
            gemm(
                T::one(),
                d.t(),
                Mat::row_major(&cache.h, rows, half),
                T::zero(),
                MatMut::row_major(&mut g, f, half),
            );
            accumulate(grads, self.w2, &g);
        }
        if let Some(slot) = grads.slot(self.b2) {
            for row in dout.chunks_exact(f) {
                slot.iter_mut().zip(row).for_each(|(s, v)| *s += *v);
            }
        }
        let mut dh = vec![T::zero(); rows * half];
        gemm(
            T::one(),
            d,
            Mat::row_major(store.value(self.w2), f, half),
            T::zero(),
            MatMut::row_major(&mut dh, rows, half),
        );
        for (g, h) in dh.iter_mut().zip(&cache.h) {
            if *h <= T::zero() {
                *g = T::zero();
            }
        }
        if grads.wants(self.w1) {
            let mut g = vec![T::zero(); half * f];
            gemm(
                T::one(),
                Mat::row_major(&dh, rows, half).t(),
                Mat::row_major(&cache.u, rows, f),
                T::zero(),
                MatMut::row_major(&mut g, half, f),
            );
            accumulate(grads, self.w1, &g);
        }
        if let Some(slot) = grads.slot(self.b1) {
            for row in dh.chunks_exact(half) {
                slot.iter_mut().zip(row).for_each(|(s, v)| *s += *v);
            }
        }
        let mut du = vec![T::zero(); rows * f];
        gemm(
            T::one(),
            Mat::row_major(&dh, rows, half),
            Mat::row_major(store.value(self.w1), half, f),
            T::zero(),
            MatMut::row_major(&mut du, rows, f),
        );
        du
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckAdapter {
    pub channels: usize,
    pub freq: usize,
    pub cell_r: AdapterCell,
    pub cell_i: AdapterCell,
}

pub struct AdapterCache<T> {
    rr: CellCache<T>,
    ii: CellCache<T>,
    ri: CellCache<T>,
    ir: CellCache<T>,
}

impl BottleneckAdapter {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParameterStore<T>,
        name: &str,
        channels: usize,
        freq: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BottleneckAdapter {
            channels,
            freq,
            cell_r: AdapterCell::new(store, &format!("{name}.r"), freq, rng)?,
            cell_i: AdapterCell::new(store, &format!("{name}.i"), freq, rng)?,
        })
    }

    pub fn param_count(freq: usize) -> usize {
        2 * AdapterCell::param_count(freq)
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        a: &ComplexFeatureMap<T>,
    ) -> Result<(ComplexFeatureMap<T>, AdapterCache<T>)> {
        a.expect_shape(self.channels, self.freq)?;
        let (rr_out, rr) = self.cell_r.forward(store, &a.re)?;
        let (ii_out, ii) = self.cell_i.forward(store, &a.im)?;
        let (ri_out, ri) = self.cell_r.forward(store, &a.im)?;
        let (ir_out, ir) = self.cell_i.forward(store, &a.re)?;
        let mut out = a.clone();
        for k in 0..out.len() {
            out.re[k] += rr_out[k] - ii_out[k];
            out.im[k] += ri_out[k] + ir_out[k];
        }
        Ok((out, AdapterCache { rr, ii, ri, ir }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &AdapterCache<T>,
        dout: &ComplexFeatureMap<T>,
        grads: &mut Gradients<T>,
    ) -> ComplexFeatureMap<T> {
        let neg: Vec<T> = dout.re.iter().map(|v| -*v).collect();
        let d_rr = self.cell_r.backward(store, &cache.rr, &dout.re, grads);
        let d_ii = self.cell_i.backward(store, &cache.ii, &neg, grads);
        let d_ri = self.cell_r.backward(store, &cache.ri, &dout.im, grads);
        let d_ir = self.cell_i.backward(store, &cache.ir, &dout.im, grads);
        let mut dx = dout.clone();
        for k in 0..dx.len() {
            dx.re[k] += d_rr[k] + d_ir[k];
            dx.im[k] += d_ii[k] + d_ri[k];
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

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn set_cell(store: &mut ParameterStore<f64>, cell: &AdapterCell, w1: &[f64], w2: &[f64]) {
        store.value_mut(cell.w1).copy_from_slice(w1);
        store.value_mut(cell.w2).copy_from_slice(w2);
        store.value_mut(cell.b1).iter_mut().for_each(|v| *v = 0.0);
        store.value_mut(cell.b2).iter_mut().for_each(|v| *v = 0.0);
    }

    #[test]
    fn fresh_cell_outputs_zero() {
        let mut store = ParameterStore::<f64>::new();
        let cell = AdapterCell::new(&mut store, "c", 8, &mut rng(1)).unwrap();
        let u = random_map::<f64>(2, 8, 3, 2).re;
        let (out, _) = cell.forward(&store, &u).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cell_hand_evaluation() {
        let mut store = ParameterStore::<f64>::new();
        let cell = AdapterCell::new(&mut store, "c", 2, &mut rng(1)).unwrap();
        set_cell(&mut store, &cell, &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(cell.forward(&store, &[3.0, -1.0]).unwrap().0, vec![2.0, 2.0]);
        assert_eq!(cell.forward(&store, &[-3.0, 1.0]).unwrap().0, vec![0.0, 0.0]);
        assert!(cell.forward(&store, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn odd_frequency_is_rejected() {
        let mut store = ParameterStore::<f64>::new();
        assert!(AdapterCell::new(&mut store, "c", 5, &mut rng(1)).is_err());
    }

    #[test]
    fn fresh_adapter_is_identity_and_counts_match() {
        let mut store = ParameterStore::<f64>::new();
        let ad = BottleneckAdapter::new(&mut store, "a", 3, 64, &mut rng(3)).unwrap();
        assert_eq!(store.total_count(), 8384);
        assert_eq!(BottleneckAdapter::param_count(64), 8384);
        let x = random_map::<f64>(3, 64, 5, 4);
        let (y, _) = ad.forward(&store, &x).unwrap();
        assert_eq!(y, x);
        assert!(ad.forward(&store, &random_map::<f64>(3, 32, 5, 4)).is_err());
    }

    fn unit_input() -> ComplexFeatureMap<f64> {
        ComplexFeatureMap::from_planes(1, 2, 1, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn doubling_real_cell() {
        // on an all-ones column, W1 = [.5 .5], W2 = [2 2]ᵀ acts as u -> 2u
        let mut store = ParameterStore::<f64>::new();
        let ad = BottleneckAdapter::new(&mut store, "a", 1, 2, &mut rng(5)).unwrap();
        set_cell(&mut store, &ad.cell_r, &[0.5, 0.5], &[2.0, 2.0]);
        set_cell(&mut store, &ad.cell_i, &[0.0, 0.0], &[0.0, 0.0]);
        let (y, _) = ad.forward(&store, &unit_input()).unwrap();
        assert_eq!(y.get(0, 0, 0), (3.0, 3.0));
    }

    #[test]
    fn identity_imag_cell() {
        let mut store = ParameterStore::<f64>::new();
        let ad = BottleneckAdapter::new(&mut store, "a", 1, 2, &mut rng(6)).unwrap();
        set_cell(&mut store, &ad.cell_r, &[0.0, 0.0], &[0.0, 0.0]);
        set_cell(&mut store, &ad.cell_i, &[0.5, 0.5], &[1.0, 1.0]);
        let (y, _) = ad.forward(&store, &unit_input()).unwrap();
        assert_eq!(y.get(0, 0, 0), (0.0, 2.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut store = ParameterStore::<f64>::new();
        let mut r = rng(7);
        let ad = BottleneckAdapter::new(&mut store, "a", 2, 6, &mut r).unwrap();
        // move away from the zero init so every path carries gradient
        for cell in [&ad.cell_r, &ad.cell_i] {
            for id in [cell.w2, cell.b1, cell.b2] {
                store.value_mut(id).iter_mut().for_each(|v| *v = r.gen_range(-0.5..0.5));
            }
        }
        let x = random_map::<f64>(2, 6, 4, 8);
        let worst = check_layer_grads(
            store,
            x,
            |s, x| ad.forward(s, x).unwrap(),
            |s, c, dy, g| ad.backward(s, c, dy, g),
            9,
        );
        assert!(worst <= 1e-4, "adapter worst rel err {worst}");
    }
}
