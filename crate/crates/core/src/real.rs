//! Working-precision reals.
//!
//! Kernels are written once against [`Scalar`]. At 53 bits they run on `f64`;
//! above that they run on MPFR floats at exactly the requested precision.

use rug::float::Constant;
use rug::{Float, Integer};

use crate::quadfield::QuadExt;

pub trait Scalar: Clone + Send + Sync + PartialOrd + 'static {
    fn precision(&self) -> u32;
    fn from_f64(x: f64, prec: u32) -> Self;
    fn from_integer(x: &Integer, prec: u32) -> Self;
    fn from_i128(x: i128, prec: u32) -> Self;
    /// Correctly rounded conversion of an exact field element.
    fn from_qx(x: &QuadExt, prec: u32) -> Self;
    fn sqrt_of(x: &Integer, prec: u32) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    /// `sin(πx)`.
    fn sin_pi(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn to_float(&self) -> Float;
}

/// `2^{−prec}`, the unit roundoff of round-to-nearest at `prec` bits.
pub fn unit_roundoff(prec: u32) -> f64 {
    2f64.powi(-(prec as i32))
}

impl Scalar for f64 {
    fn precision(&self) -> u32 {
        53
    }
    fn from_f64(x: f64, _: u32) -> Self {
        x
    }
    fn from_integer(x: &Integer, _: u32) -> Self {
        x.to_f64()
    }
    fn from_i128(x: i128, _: u32) -> Self {
        x as f64
    }
    fn from_qx(x: &QuadExt, _: u32) -> Self {
        x.to_f64()
    }
    fn sqrt_of(x: &Integer, _: u32) -> Self {
        Float::with_val(53, x).sqrt().to_f64()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sin_pi(&self) -> Self {
        (std::f64::consts::PI * self).sin()
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_float(&self) -> Float {
        Float::with_val(53, *self)
    }
}

/// An MPFR float carrying its own precision.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct Mp(pub Float);

impl Mp {
    fn prec(&self) -> u32 {
        self.0.prec()
    }
}

impl Scalar for Mp {
    fn precision(&self) -> u32 {
        self.prec()
    }
    fn from_f64(x: f64, prec: u32) -> Self {
        Mp(Float::with_val(prec, x))
    }
    fn from_integer(x: &Integer, prec: u32) -> Self {
        Mp(Float::with_val(prec, x))
    }
    fn from_i128(x: i128, prec: u32) -> Self {
        Mp(Float::with_val(prec, x))
    }
    fn from_qx(x: &QuadExt, prec: u32) -> Self {
        Mp(x.to_float(prec))
    }
    fn sqrt_of(x: &Integer, prec: u32) -> Self {
        Mp(Float::with_val(prec, x).sqrt())
    }
    fn add(&self, o: &Self) -> Self {
        Mp(Float::with_val(self.prec(), &self.0 + &o.0))
    }
    fn sub(&self, o: &Self) -> Self {
        Mp(Float::with_val(self.prec(), &self.0 - &o.0))
    }
    fn mul(&self, o: &Self) -> Self {
        Mp(Float::with_val(self.prec(), &self.0 * &o.0))
    }
    fn div(&self, o: &Self) -> Self {
        Mp(Float::with_val(self.prec(), &self.0 / &o.0))
    }
    fn neg(&self) -> Self {
        Mp(Float::with_val(self.prec(), -&self.0))
    }
    fn abs(&self) -> Self {
        Mp(Float::with_val(self.prec(), self.0.abs_ref()))
    }
    fn sin_pi(&self) -> Self {
        // a few guard bits so the product with π does not cost the last place
        let p = self.prec();
        let pi = Float::with_val(p + 16, Constant::Pi);
        let arg = Float::with_val(p + 16, &pi * &self.0);
        Mp(Float::with_val(p, arg.sin_ref()))
    }
    fn ln(&self) -> Self {
        Mp(Float::with_val(self.prec(), self.0.ln_ref()))
    }
    fn exp(&self) -> Self {
        Mp(Float::with_val(self.prec(), self.0.exp_ref()))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn to_float(&self) -> Float {
        self.0.clone()
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Debug)]
pub struct CompSum<S: Scalar> {
    sum: S,
    comp: S,
}

impl<S: Scalar> CompSum<S> {
    pub fn new(prec: u32) -> Self {
        CompSum { sum: S::from_f64(0.0, prec), comp: S::from_f64(0.0, prec) }
    }

    pub fn add(&mut self, x: &S) {
        let t = self.sum.add(x);
        let c = if self.sum.abs() >= x.abs() {
            self.sum.sub(&t).add(x)
        } else {
            x.sub(&t).add(&self.sum)
        };
        self.comp = self.comp.add(&c);
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompSum<S>) {
        self.add(&other.sum);
        self.add(&other.comp);
    }

    pub fn value(&self) -> S {
        self.sum.add(&self.comp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompSum::<f64>::new(53);
        s.add(&1e16);
        for _ in 0..1000 {
            s.add(&1.0);
        }
        s.add(&-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn mp_sin_pi_matches_f64() {
        for x in [0.1, 0.25, 0.4999, -0.3] {
            let m = Mp::from_f64(x, 128).sin_pi().to_f64();
            assert!((m - x.sin_pi()).abs() < 1e-15);
        }
    }
}
