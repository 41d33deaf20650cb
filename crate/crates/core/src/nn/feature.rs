use crate::error::{Error, Result};
use crate::real::{CMat, Mat, MatMut, Real};

/// Complex activations with `channels × freq × time` logical shape.
///
/// Storage is channel-major then time then frequency (`[c][t][f]`), so each
/// channel is a `time × freq` row-major matrix and the whole map is a
/// `(channels·time) × freq` matrix for projections along frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFeatureMap<T = f32> {
    pub channels: usize,
    pub freq: usize,
    pub time: usize,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Real> ComplexFeatureMap<T> {
    pub fn zeros(channels: usize, freq: usize, time: usize) -> Self {
        let n = channels * freq * time;
        ComplexFeatureMap {
            channels,
            freq,
            time,
            re: vec![T::zero(); n],
            im: vec![T::zero(); n],
        }
    }

    pub fn from_planes(channels: usize, freq: usize, time: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        let n = channels * freq * time;
        if re.len() != n || im.len() != n {
            return Err(Error::shape(
                format!("{n} values per plane"),
                format!("re {} / im {}", re.len(), im.len()),
            ));
        }
        Ok(ComplexFeatureMap {
            channels,
            freq,
            time,
            re,
            im,
        })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, f: usize, t: usize) -> usize {
        (c * self.time + t) * self.freq + f
    }

    pub fn get(&self, c: usize, f: usize, t: usize) -> (T, T) {
        let i = self.index(c, f, t);
        (self.re[i], self.im[i])
    }

    pub fn set(&mut self, c: usize, f: usize, t: usize, v: (T, T)) {
        let i = self.index(c, f, t);
        self.re[i] = v.0;
        self.im[i] = v.1;
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.freq, self.time)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn expect_shape(&self, channels: usize, freq: usize) -> Result<()> {
        if self.channels != channels || self.freq != freq {
            return Err(Error::shape(
                format!("{channels} channels x {freq} freq"),
                format!("{} channels x {} freq", self.channels, self.freq),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// `channels × (time·freq)` view.
    pub fn channel_rows(&self) -> CMat<'_, T> {
        let (c, n) = (self.channels, self.time * self.freq);
        CMat::new(Mat::row_major(&self.re, c, n), Mat::row_major(&self.im, c, n))
    }

    pub fn channel_rows_mut(&mut self) -> (MatMut<'_, T>, MatMut<'_, T>) {
        let (c, n) = (self.channels, self.time * self.freq);
        (
            MatMut::row_major(&mut self.re, c, n),
            MatMut::row_major(&mut self.im, c, n),
        )
    }

    /// `(channels·time) × freq` view.
    pub fn freq_cols(&self) -> CMat<'_, T> {
        let (m, f) = (self.channels * self.time, self.freq);
        CMat::new(Mat::row_major(&self.re, m, f), Mat::row_major(&self.im, m, f))
    }

    pub fn freq_cols_mut(&mut self) -> (MatMut<'_, T>, MatMut<'_, T>) {
        let (m, f) = (self.channels * self.time, self.freq);
        (
            MatMut::row_major(&mut self.re, m, f),
            MatMut::row_major(&mut self.im, m, f),
        )
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += *b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in self.re.iter_mut().chain(self.im.iter_mut()) {
            *v *= s;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .fold(0.0, f64::max)
    }
}
