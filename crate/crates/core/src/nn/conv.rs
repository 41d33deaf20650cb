//! Complex 2-D convolution over (frequency, time): strided and padded along
//! frequency, causal along time (kernel tap `j` reads frame `t - j`).
//!
//! Both the forward and the transposed convolution lower to one im2col /
//! col2im pass plus four real GEMMs:
//! `out_r = W_r*x_r - W_i*x_i`, `out_i = W_r*x_i + W_i*x_r`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::feature::ComplexFeatureMap;
use super::params::{Gradients, ParamGroup, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::real::{cgemm, CMat, Mat, MatMut, Real};

/// Geometry linking a "wide" frequency axis (conv input / transposed-conv
/// output) to a "narrow" one (conv output / transposed-conv input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel_f: usize,
    pub kernel_t: usize,
    pub stride: usize,
    pub pad: usize,
    pub wide: usize,
    pub narrow: usize,
}

impl ConvGeometry {
    pub fn new(kernel_f: usize, kernel_t: usize, stride: usize, pad: usize, wide: usize) -> Result<Self> {
        if kernel_f == 0 || kernel_t == 0 || stride == 0 {
            return Err(Error::validation("kernel sizes and stride must be positive"));
        }
        if wide + 2 * pad < kernel_f {
            return Err(Error::validation(format!(
                "frequency size {wide} too small for kernel {kernel_f}"
            )));
        }
        let narrow = (wide + 2 * pad - kernel_f) / stride + 1;
        Ok(ConvGeometry {
            kernel_f,
            kernel_t,
            stride,
            pad,
            wide,
            narrow,
        })
    }

    pub fn taps(&self) -> usize {
        self.kernel_f * self.kernel_t
    }

    #[inline]
    fn wide_index(&self, pos: usize, i: usize) -> Option<usize> {
        let f = (pos * self.stride + i) as isize - self.pad as isize;
        (f >= 0 && (f as usize) < self.wide).then_some(f as usize)
    }

    #[inline]
    fn src_time(shift: TimeShift, t: usize, j: usize, time: usize) -> Option<usize> {
        match shift {
            TimeShift::Past => t.checked_sub(j),
            TimeShift::Future => (t + j < time).then_some(t + j),
        }
    }

    /// Gathers `channels·taps × time·narrow` columns from a wide map plane.
    fn im2col<T: Real>(&self, img: &[T], channels: usize, time: usize, shift: TimeShift) -> Vec<T> {
        let n = time * self.narrow;
        let mut cols = vec![T::zero(); channels * self.taps() * n];
        for c in 0..channels {
            for i in 0..self.kernel_f {
                for j in 0..self.kernel_t {
                    let row = (c * self.kernel_f + i) * self.kernel_t + j;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for t in 0..time {
                        let Some(ts) = Self::src_time(shift, t, j, time) else {
                            continue;
                        };
                        let src = &img[(c * time + ts) * self.wide..(c * time + ts + 1) * self.wide];
                        let out = &mut dst[t * self.narrow..(t + 1) * self.narrow];
                        for (pos, o) in out.iter_mut().enumerate() {
                            if let Some(f) = self.wide_index(pos, i) {
                                *o = src[f];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Scatter-adds columns back onto a wide map plane (adjoint of im2col).
    fn col2im<T: Real>(&self, cols: &[T], img: &mut [T], channels: usize, time: usize, shift: TimeShift) {
        let n = time * self.narrow;
        for c in 0..channels {
            for i in 0..self.kernel_f {
                for j in 0..self.kernel_t {
                    let row = (c * self.kernel_f + i) * self.kernel_t + j;
                    let src = &cols[row * n..(row + 1) * n];
                    for t in 0..time {
                        let Some(ts) = Self::src_time(shift, t, j, time) else {
                            continue;
                        };
                        let dst = &mut img[(c * time + ts) * self.wide..(c * time + ts + 1) * self.wide];
                        let s = &src[t * self.narrow..(t + 1) * self.narrow];
                        for (pos, &v) in s.iter().enumerate() {
                            if let Some(f) = self.wide_index(pos, i) {
                                dst[f] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Which frame a kernel time tap `j` pairs column time `t` with.
/// The forward conv reads the past (`t - j`); the transposed conv writes
/// the future (`t + j`), so both layers stay causal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimeShift {
    Past,
    Future,
}

fn uniform_init<T: Real, R: Rng>(rng: &mut R, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.gen_range(-bound..bound))).collect()
}

fn bias_grad<T: Real>(grads: &mut Gradients<T>, id: ParamId, plane: &[T], channels: usize) {
    if let Some(slot) = grads.slot(id) {
        let n = plane.len() / channels;
        for (c, s) in slot.iter_mut().enumerate() {
            *s += plane[c * n..(c + 1) * n].iter().copied().sum::<T>();
        }
    }
}

fn add_bias<T: Real>(plane: &mut [T], bias: &[T]) {
    let n = plane.len() / bias.len();
    for (c, &b) in bias.iter().enumerate() {
        plane[c * n..(c + 1) * n].iter_mut().for_each(|v| *v += b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexConv {
    pub in_channels: usize,
    pub out_channels: usize,
    pub geom: ConvGeometry,
    pub w_re: ParamId,
    pub w_im: ParamId,
    pub b_re: ParamId,
    pub b_im: ParamId,
}

pub struct ConvCache<T> {
    cols_re: Vec<T>,
    cols_im: Vec<T>,
    time: usize,
}

impl ComplexConv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng>(
        store: &mut ParameterStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        geom: ConvGeometry,
        group: ParamGroup,
        rng: &mut R,
    ) -> Self {
        let shape = [out_channels, in_channels, geom.kernel_f, geom.kernel_t];
        let n: usize = shape.iter().product();
        let bound = (3.0 / (2.0 * (in_channels * geom.taps()) as f64)).sqrt();
        let w_re = store.add(format!("{name}.w_re"), &shape, group, uniform_init(rng, n, bound));
        let w_im = store.add(format!("{name}.w_im"), &shape, group, uniform_init(rng, n, bound));
        let b_re = store.add(
            format!("{name}.b_re"),
            &[out_channels],
            group,
            vec![T::zero(); out_channels],
        );
        let b_im = store.add(
            format!("{name}.b_im"),
            &[out_channels],
            group,
            vec![T::zero(); out_channels],
        );
        ComplexConv {
            in_channels,
            out_channels,
            geom,
            w_re,
            w_im,
            b_re,
            b_im,
        }
    }

    fn k(&self) -> usize {
        self.in_channels * self.geom.taps()
    }

    fn weights<'a, T: Real>(&self, store: &'a ParameterStore<T>) -> CMat<'a, T> {
        CMat::new(
            Mat::row_major(store.value(self.w_re), self.out_channels, self.k()),
            Mat::row_major(store.value(self.w_im), self.out_channels, self.k()),
        )
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        x: &ComplexFeatureMap<T>,
    ) -> Result<(ComplexFeatureMap<T>, ConvCache<T>)> {
        x.expect_shape(self.in_channels, self.geom.wide)?;
        let time = x.time;
        let cols_re = self.geom.im2col(&x.re, self.in_channels, time, TimeShift::Past);
        let cols_im = self.geom.im2col(&x.im, self.in_channels, time, TimeShift::Past);
        let n = time * self.geom.narrow;
        let mut out = ComplexFeatureMap::zeros(self.out_channels, self.geom.narrow, time);
        {
            let cols = CMat::new(
                Mat::row_major(&cols_re, self.k(), n),
                Mat::row_major(&cols_im, self.k(), n),
            );
            let (o_re, o_im) = out.channel_rows_mut();
            cgemm(T::one(), self.weights(store), cols, T::zero(), o_re, o_im);
        }
        add_bias(&mut out.re, store.value(self.b_re));
        add_bias(&mut out.im, store.value(self.b_im));
        Ok((out, ConvCache { cols_re, cols_im, time }))
    }

    /// Accumulates parameter gradients into `grads`; returns the input
    /// gradient when `need_input` is set.
    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &ConvCache<T>,
        dout: &ComplexFeatureMap<T>,
        grads: &mut Gradients<T>,
        need_input: bool,
    ) -> Option<ComplexFeatureMap<T>> {
        let time = cache.time;
        let (k, n) = (self.k(), time * self.geom.narrow);
        let d = dout.channel_rows();
        let cols = CMat::new(
            Mat::row_major(&cache.cols_re, k, n),
            Mat::row_major(&cache.cols_im, k, n),
        );
        if grads.wants(self.w_re) || grads.wants(self.w_im) {
            let mut gw_re = vec![T::zero(); self.out_channels * k];
            let mut gw_im = vec![T::zero(); self.out_channels * k];
            cgemm(
                T::one(),
                d,
                cols.h(),
                T::zero(),
                MatMut::row_major(&mut gw_re, self.out_channels, k),
                MatMut::row_major(&mut gw_im, self.out_channels, k),
            );
            accumulate(grads, self.w_re, &gw_re);
            accumulate(grads, self.w_im, &gw_im);
        }
        bias_grad(grads, self.b_re, &dout.re, self.out_channels);
        bias_grad(grads, self.b_im, &dout.im, self.out_channels);
        if !need_input {
            return None;
        }
        let mut dcols_re = vec![T::zero(); k * n];
        let mut dcols_im = vec![T::zero(); k * n];
        cgemm(
            T::one(),
            self.weights(store).h(),
            d,
            T::zero(),
            MatMut::row_major(&mut dcols_re, k, n),
            MatMut::row_major(&mut dcols_im, k, n),
        );
        let mut dx = ComplexFeatureMap::zeros(self.in_channels, self.geom.wide, time);
        self.geom
            .col2im(&dcols_re, &mut dx.re, self.in_channels, time, TimeShift::Past);
        self.geom
            .col2im(&dcols_im, &mut dx.im, self.in_channels, time, TimeShift::Past);
        Some(dx)
    }
}

pub(crate) fn accumulate<T: Real>(grads: &mut Gradients<T>, id: ParamId, g: &[T]) {
    if let Some(slot) = grads.slot(id) {
        for (s, v) in slot.iter_mut().zip(g) {
            *s += *v;
        }
    }
}

/// Transposed complex convolution: upsamples frequency from `geom.narrow`
/// to `geom.wide`. Weights are stored `[in, out, kernel_f, kernel_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexConvTranspose {
    pub in_channels: usize,
    pub out_channels: usize,
    pub geom: ConvGeometry,
    pub w_re: ParamId,
    pub w_im: ParamId,
    pub b_re: ParamId,
    pub b_im: ParamId,
}

pub struct ConvTransposeCache<T> {
    x: ComplexFeatureMap<T>,
}

impl ComplexConvTranspose {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng>(
        store: &mut ParameterStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        geom: ConvGeometry,
        group: ParamGroup,
        rng: &mut R,
    ) -> Self {
        let shape = [in_channels, out_channels, geom.kernel_f, geom.kernel_t];
        let n: usize = shape.iter().product();
        // each output cell receives roughly in_channels·taps/stride contributions
        let fan_in = (in_channels * geom.taps()).div_ceil(geom.stride).max(1);
        let bound = (3.0 / (2.0 * fan_in as f64)).sqrt();
        let w_re = store.add(format!("{name}.w_re"), &shape, group, uniform_init(rng, n, bound));
        let w_im = store.add(format!("{name}.w_im"), &shape, group, uniform_init(rng, n, bound));
        let b_re = store.add(
            format!("{name}.b_re"),
            &[out_channels],
            group,
            vec![T::zero(); out_channels],
        );
        let b_im = store.add(
            format!("{name}.b_im"),
            &[out_channels],
            group,
            vec![T::zero(); out_channels],
        );
        ComplexConvTranspose {
            in_channels,
            out_channels,
            geom,
            w_re,
            w_im,
            b_re,
            b_im,
        }
    }

    fn k(&self) -> usize {
        self.out_channels * self.geom.taps()
    }

    fn weights<'a, T: Real>(&self, store: &'a ParameterStore<T>) -> CMat<'a, T> {
        CMat::new(
            Mat::row_major(store.value(self.w_re), self.in_channels, self.k()),
            Mat::row_major(store.value(self.w_im), self.in_channels, self.k()),
        )
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        x: &ComplexFeatureMap<T>,
    ) -> Result<(ComplexFeatureMap<T>, ConvTransposeCache<T>)> {
        x.expect_shape(self.in_channels, self.geom.narrow)?;
        let time = x.time;
        let (k, n) = (self.k(), time * self.geom.narrow);
        let mut cols_re = vec![T::zero(); k * n];
        let mut cols_im = vec![T::zero(); k * n];
        cgemm(
            T::one(),
            self.weights(store).t(),
            x.channel_rows(),
            T::zero(),
            MatMut::row_major(&mut cols_re, k, n),
            MatMut::row_major(&mut cols_im, k, n),
        );
        let mut out = ComplexFeatureMap::zeros(self.out_channels, self.geom.wide, time);
        self.geom
            .col2im(&cols_re, &mut out.re, self.out_channels, time, TimeShift::Future);
        self.geom
            .col2im(&cols_im, &mut out.im, self.out_channels, time, TimeShift::Future);
        add_bias(&mut out.re, store.value(self.b_re));
        add_bias(&mut out.im, store.value(self.b_im));
        Ok((out, ConvTransposeCache { x: x.clone() }))
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &ConvTransposeCache<T>,
        dout: &ComplexFeatureMap<T>,
        grads: &mut Gradients<T>,
        need_input: bool,
    ) -> Option<ComplexFeatureMap<T>> {
        let time = cache.x.time;
        let (k, n) = (self.k(), time * self.geom.narrow);
        let dcols_re = self.geom.im2col(&dout.re, self.out_channels, time, TimeShift::Future);
        let dcols_im = self.geom.im2col(&dout.im, self.out_channels, time, TimeShift::Future);
        let dcols = CMat::new(Mat::row_major(&dcols_re, k, n), Mat::row_major(&dcols_im, k, n));
        if grads.wants(self.w_re) || grads.wants(self.w_im) {
            let mut gw_re = vec![T::zero(); self.in_channels * k];
            let mut gw_im = vec![T::zero(); self.in_channels * k];
            cgemm(
                T::one(),
                dcols,
                cache.x.channel_rows().h(),
                T::zero(),
                MatMut::row_major(&mut gw_re, self.in_channels, k).t(),
                MatMut::row_major(&mut gw_im, self.in_channels, k).t(),
            );
            accumulate(grads, self.w_re, &gw_re);
            accumulate(grads, self.w_im, &gw_im);
        }
        bias_grad(grads, self.b_re, &dout.re, self.out_channels);
        bias_grad(grads, self.b_im, &dout.im, self.out_channels);
        if !need_input {
            return None;
        }
        let mut dx = ComplexFeatureMap::zeros(self.in_channels, self.geom.narrow, time);
        {
            let (dx_re, dx_im) = dx.channel_rows_mut();
            cgemm(T::one(), self.weights(store).t().h(), dcols, T::zero(), dx_re, dx_im);
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

    fn conv_fixture(cin: usize, cout: usize, geom: ConvGeometry, seed: u64) -> (ParameterStore<f64>, ComplexConv) {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = ComplexConv::new(&mut store, "c", cin, cout, geom, ParamGroup::EncoderConv, &mut rng);
        for id in [conv.b_re, conv.b_im] {
            for v in store.value_mut(id) {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
        (store, conv)
    }

    #[test]
    fn geometry_sizes() {
        assert_eq!(ConvGeometry::new(5, 2, 4, 0, 257).unwrap().narrow, 64);
        assert_eq!(ConvGeometry::new(3, 2, 2, 1, 64).unwrap().narrow, 32);
        assert_eq!(ConvGeometry::new(3, 2, 2, 1, 16).unwrap().narrow, 8);
        assert!(ConvGeometry::new(5, 2, 4, 0, 3).is_err());
    }

    #[test]
    fn zero_input_gives_bias() {
        let geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let (store, conv) = conv_fixture(2, 3, geom, 1);
        let (out, _) = conv.forward(&store, &ComplexFeatureMap::zeros(2, 8, 5)).unwrap();
        for c in 0..3 {
            for f in 0..4 {
                for t in 0..5 {
                    let (r, i) = out.get(c, f, t);
                    assert_eq!(r, store.value(conv.b_re)[c]);
                    assert_eq!(i, store.value(conv.b_im)[c]);
                }
            }
        }
    }

    #[test]
    fn real_input_with_zero_imag_weights_gives_imag_bias() {
        let geom = ConvGeometry::new(3, 2, 1, 1, 6).unwrap();
        let (mut store, conv) = conv_fixture(2, 2, geom, 2);
        store.value_mut(conv.w_im).iter_mut().for_each(|v| *v = 0.0);
        let mut x = random_map::<f64>(2, 6, 4, 3);
        x.im.iter_mut().for_each(|v| *v = 0.0);
        let (out, _) = conv.forward(&store, &x).unwrap();
        for c in 0..2 {
            for f in 0..6 {
                for t in 0..4 {
                    assert!((out.get(c, f, t).1 - store.value(conv.b_im)[c]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn one_by_one_kernel_is_complex_product() {
        let geom = ConvGeometry::new(1, 1, 1, 0, 3).unwrap();
        let (mut store, conv) = conv_fixture(1, 1, geom, 3);
        let (a, b) = (0.7, -1.3);
        store.value_mut(conv.w_re)[0] = a;
        store.value_mut(conv.w_im)[0] = b;
        store.value_mut(conv.b_re)[0] = 0.0;
        store.value_mut(conv.b_im)[0] = 0.0;
        let x = random_map::<f64>(1, 3, 2, 4);
        let (out, _) = conv.forward(&store, &x).unwrap();
        for i in 0..x.len() {
            let (c, d) = (x.re[i], x.im[i]);
            assert!((out.re[i] - (a * c - b * d)).abs() < 1e-14);
            assert!((out.im[i] - (a * d + b * c)).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_linearity_without_bias() {
        let geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let (mut store, conv) = conv_fixture(2, 3, geom, 4);
        store.value_mut(conv.b_re).iter_mut().for_each(|v| *v = 0.0);
        store.value_mut(conv.b_im).iter_mut().for_each(|v| *v = 0.0);
        let x = random_map::<f64>(2, 8, 6, 5);
        let (zr, zi) = (0.6, -1.7);
        let mut zx = x.clone();
        for i in 0..x.len() {
            zx.re[i] = zr * x.re[i] - zi * x.im[i];
            zx.im[i] = zr * x.im[i] + zi * x.re[i];
        }
        let (y, _) = conv.forward(&store, &x).unwrap();
        let (zy, _) = conv.forward(&store, &zx).unwrap();
        for i in 0..y.len() {
            assert!((zy.re[i] - (zr * y.re[i] - zi * y.im[i])).abs() < 1e-6);
            assert!((zy.im[i] - (zr * y.im[i] + zi * y.re[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn causal_in_time() {
        let geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let (store, conv) = conv_fixture(2, 2, geom, 5);
        let x = random_map::<f64>(2, 8, 10, 6);
        let mut cut = x.clone();
        let l0 = 4;
        for c in 0..2 {
            for t in (l0 + 1)..10 {
                for f in 0..8 {
                    cut.set(c, f, t, (0.0, 0.0));
                }
            }
        }
        let (a, _) = conv.forward(&store, &x).unwrap();
        let (b, _) = conv.forward(&store, &cut).unwrap();
        for c in 0..2 {
            for t in 0..=l0 {
                for f in 0..4 {
                    assert_eq!(a.get(c, f, t), b.get(c, f, t));
                }
            }
        }
        let tconv_geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let mut store2 = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tconv = ComplexConvTranspose::new(&mut store2, "t", 2, 2, tconv_geom, ParamGroup::DecoderConv, &mut rng);
        let xs = random_map::<f64>(2, 4, 10, 7);
        let mut xs_cut = xs.clone();
        for c in 0..2 {
            for t in (l0 + 1)..10 {
                for f in 0..4 {
                    xs_cut.set(c, f, t, (0.0, 0.0));
                }
            }
        }
        let (a, _) = tconv.forward(&store2, &xs).unwrap();
        let (b, _) = tconv.forward(&store2, &xs_cut).unwrap();
        for c in 0..2 {
            for t in 0..=l0 {
                for f in 0..8 {
                    assert_eq!(a.get(c, f, t), b.get(c, f, t));
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let (store, conv) = conv_fixture(2, 3, geom, 1);
        assert!(conv.forward(&store, &ComplexFeatureMap::zeros(3, 8, 4)).is_err());
        assert!(conv.forward(&store, &ComplexFeatureMap::zeros(2, 7, 4)).is_err());
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        for (seed, geom) in [
            (11, ConvGeometry::new(3, 2, 2, 1, 8).unwrap()),
            (12, ConvGeometry::new(5, 2, 4, 0, 13).unwrap()),
        ] {
            let (store, conv) = conv_fixture(2, 3, geom, seed);
            let x = random_map::<f64>(2, geom.wide, 5, seed + 100);
            let worst = check_layer_grads(
                store,
                x,
                |s, x| conv.forward(s, x).unwrap(),
                |s, c, dy, g| conv.backward(s, c, dy, g, true).unwrap(),
                seed,
            );
            assert!(worst <= 1e-4, "conv worst rel err {worst}");
        }
    }

    #[test]
    fn transposed_conv_gradients_match_finite_differences() {
        let geom = ConvGeometry::new(3, 2, 2, 1, 8).unwrap();
        let mut store = ParameterStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tconv = ComplexConvTranspose::new(&mut store, "t", 3, 2, geom, ParamGroup::DecoderConv, &mut rng);
        let x = random_map::<f64>(3, 4, 6, 22);
        let worst = check_layer_grads(
            store,
            x,
            |s, x| tconv.forward(s, x).unwrap(),
            |s, c, dy, g| tconv.backward(s, c, dy, g, true).unwrap(),
            23,
        );
        assert!(worst <= 1e-4, "tconv worst rel err {worst}");
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // with shared weights, <conv(x), y> == <x, conv^T(y)> for bias-free layers;
        // single time tap, since the two layers shift time in opposite directions
        let geom = ConvGeometry::new(3, 1, 2, 1, 8).unwrap();
        let (mut store, conv) = conv_fixture(2, 3, geom, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let tconv = ComplexConvTranspose::new(&mut store, "t", 3, 2, geom, ParamGroup::DecoderConv, &mut rng);
        // tconv weight [in=3, out=2, kf, kt] = conj of conv weight [out=3, in=2, kf, kt]
        let wr = store.value(conv.w_re).to_vec();
        let wi: Vec<f64> = store.value(conv.w_im).iter().map(|v| -v).collect();
        store.value_mut(tconv.w_re).copy_from_slice(&wr);
        store.value_mut(tconv.w_im).copy_from_slice(&wi);
        for id in [conv.b_re, conv.b_im, tconv.b_re, tconv.b_im] {
            store.value_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
        let x = random_map::<f64>(2, 8, 5, 33);
        let y = random_map::<f64>(3, 4, 5, 34);
        let (cx, _) = conv.forward(&store, &x).unwrap();
        let (ty, _) = tconv.forward(&store, &y).unwrap();
        let dot = |a: &ComplexFeatureMap<f64>, b: &ComplexFeatureMap<f64>| {
            a.re.iter()
                .zip(&b.re)
                .chain(a.im.iter().zip(&b.im))
                .map(|(p, q)| p * q)
                .sum::<f64>()
        };
        assert!((dot(&cx, &y) - dot(&x, &ty)).abs() < 1e-10);
    }
}
