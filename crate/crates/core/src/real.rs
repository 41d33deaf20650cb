//! Floating-point abstraction shared by every numeric path.
//!
//! Training runs in `f32`; gradient checks run the identical code in `f64`.
//! Matrix products go through `matrixmultiply` with explicit strides so that
//! transposed operands are views, never copies.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumAssign};
use realfft::FftNum;

pub trait Real:
    Float
    + FftNum
    + FromPrimitive
    + NumAssign
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// `c = alpha * a * b + beta * c` on strided row/column views.
    ///
    /// # Safety
    /// Callers guarantee every addressed element is in bounds; the safe
    /// wrapper [`gemm`] checks this.
    #[allow(clippy::too_many_arguments)]
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable literal")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    unsafe fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub struct Mat<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, T: Copy> Mat<'a, T> {
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(data: &'a [T], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        let m = Mat {
            data,
            rows,
            cols,
            rs,
            cs,
        };
        assert!(m.fits(data.len()), "matrix view out of bounds");
        m
    }

    pub fn t(self) -> Self {
        Mat {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.rs + c * self.cs]
    }

    fn fits(&self, len: usize) -> bool {
        self.rows == 0 || self.cols == 0 || (self.rows - 1) * self.rs + (self.cols - 1) * self.cs < len
    }
}

/// Mutable strided matrix view.
pub struct MatMut<'a, T> {
    data: &'a mut [T],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, T: Copy> MatMut<'a, T> {
    pub fn row_major(data: &'a mut [T], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(data: &'a mut [T], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(
            rows == 0 || cols == 0 || (rows - 1) * rs + (cols - 1) * cs < data.len(),
            "matrix view out of bounds"
        );
        MatMut {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }

    pub fn t(self) -> Self {
        MatMut {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    pub fn reborrow(&mut self) -> MatMut<'_, T> {
        MatMut {
            data: self.data,
            rows: self.rows,
            cols: self.cols,
            rs: self.rs,
            cs: self.cs,
        }
    }
}

/// `c = alpha * a * b + beta * c`. With `beta == 0` the prior contents of
/// `c` are ignored.
pub fn gemm<T: Real>(alpha: T, a: Mat<'_, T>, b: Mat<'_, T>, beta: T, c: MatMut<'_, T>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(a.rows, c.rows, "gemm output rows");
    assert_eq!(b.cols, c.cols, "gemm output cols");
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        let (rs, cs) = (c.rs, c.cs);
        for r in 0..c.rows {
            for col in 0..c.cols {
                let v = &mut c.data[r * rs + col * cs];
                *v = if beta == T::zero() { T::zero() } else { *v * beta };
            }
        }
        return;
    }
    // SAFETY: all three views were bounds-checked at construction.
    unsafe {
        T::raw_gemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

/// Complex matrix view as separate real and imaginary planes with an
/// optional conjugation flag.
#[derive(Clone, Copy)]
pub struct CMat<'a, T> {
    pub re: Mat<'a, T>,
    pub im: Mat<'a, T>,
    pub conj: bool,
}

impl<'a, T: Copy> CMat<'a, T> {
    pub fn new(re: Mat<'a, T>, im: Mat<'a, T>) -> Self {
        CMat { re, im, conj: false }
    }

    /// Conjugate transpose.
    pub fn h(self) -> Self {
        CMat {
            re: self.re.t(),
            im: self.im.t(),
            conj: !self.conj,
        }
    }

    pub fn t(self) -> Self {
        CMat {
            re: self.re.t(),
            im: self.im.t(),
            conj: self.conj,
        }
    }
}

/// Complex `c = alpha * a * b + beta * c` via four real products.
pub fn cgemm<T: Real>(
    alpha: T,
    a: CMat<'_, T>,
    b: CMat<'_, T>,
    beta: T,
    mut c_re: MatMut<'_, T>,
    mut c_im: MatMut<'_, T>,
) {
    let sa = if a.conj { -T::one() } else { T::one() };
    let sb = if b.conj { -T::one() } else { T::one() };
    gemm(alpha, a.re, b.re, beta, c_re.reborrow());
    gemm(-alpha * sa * sb, a.im, b.im, T::one(), c_re);
    gemm(alpha * sb, a.re, b.im, beta, c_im.reborrow());
    gemm(alpha * sa, a.im, b.re, T::one(), c_im);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_with_transposed_views() {
        let a: Vec<f64> = (0..6).map(|x| x as f64 - 2.5).collect();
        let b: Vec<f64> = (0..12).map(|x| (x as f64).sin()).collect();
        let expected = naive(&a, &b, 2, 3, 4);
        let mut c = vec![0.0; 8];
        gemm(
            1.0,
            Mat::row_major(&a, 2, 3),
            Mat::row_major(&b, 3, 4),
            0.0,
            MatMut::row_major(&mut c, 2, 4),
        );
        for (x, y) in c.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
        // (B^T A^T)^T == A B, written into a column-major view
        let mut ct = vec![0.0; 8];
        gemm(
            1.0,
            Mat::row_major(&b, 3, 4).t(),
            Mat::row_major(&a, 2, 3).t(),
            0.0,
            MatMut::row_major(&mut ct, 4, 2),
        );
        for i in 0..2 {
            for j in 0..4 {
                assert!((ct[j * 2 + i] - expected[i * 4 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cgemm_scalar_product() {
        // (1+2i)(3-1i) = 5+5i ; conj(1+2i)(3-1i) = 1-7i
        let (ar, ai, br, bi) = ([1.0f64], [2.0], [3.0], [-1.0]);
        let mut cr = [0.0];
        let mut ci = [0.0];
        let a = CMat::new(Mat::row_major(&ar, 1, 1), Mat::row_major(&ai, 1, 1));
        let b = CMat::new(Mat::row_major(&br, 1, 1), Mat::row_major(&bi, 1, 1));
        cgemm(
            1.0,
            a,
            b,
            0.0,
            MatMut::row_major(&mut cr, 1, 1),
            MatMut::row_major(&mut ci, 1, 1),
        );
        assert_eq!((cr[0], ci[0]), (5.0, 5.0));
        cgemm(
            1.0,
            a.h(),
            b,
            0.0,
            MatMut::row_major(&mut cr, 1, 1),
            MatMut::row_major(&mut ci, 1, 1),
        );
        assert_eq!((cr[0], ci[0]), (1.0, -7.0));
    }
}
