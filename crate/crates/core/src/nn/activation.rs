//! Split ELU: applied to the real and imaginary planes independently.

use super::feature::ComplexFeatureMap;
use crate::real::Real;

#[inline]
fn elu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Returns the activated map; the output doubles as the backward cache.
pub fn elu_forward<T: Real>(x: &ComplexFeatureMap<T>) -> ComplexFeatureMap<T> {
    ComplexFeatureMap {
        re: x.re.iter().map(|&v| elu(v)).collect(),
        im: x.im.iter().map(|&v| elu(v)).collect(),
        ..*x
    }
}

/// Backward from the forward output: `elu'(x) = 1` for `x > 0`, else `out + 1`.
pub fn elu_backward<T: Real>(out: &ComplexFeatureMap<T>, dout: &ComplexFeatureMap<T>) -> ComplexFeatureMap<T> {
    let d = |o: &[T], g: &[T]| -> Vec<T> {
        o.iter()
            .zip(g)
            .map(|(&o, &g)| if o > T::zero() { g } else { g * (o + T::one()) })
            .collect()
    };
    ComplexFeatureMap {
        re: d(&out.re, &dout.re),
        im: d(&out.im, &dout.im),
        ..*out
    }
}
