//! Exact Kronecker orbit `{rα}` for `α ∈ Q(√D)`.
//!
//! The stepper keeps `{rα} = (A + B√D)/den` with integer `A, B` and advances by
//! adding the coordinates of `α` and subtracting `den` when the value reaches 1,
//! a decision made by an exact sign test. When every coordinate that can appear
//! in a run fits comfortably in `i128` the fast path is used; otherwise the same
//! logic runs on big integers.

use std::cmp::Ordering;

use rug::Integer;

use crate::quadfield::{surd_sign, QuadExt, SurdScratch};
use crate::real::Scalar;

#[derive(Clone, Debug)]
enum State {
    Small { a: i128, b: i128, p: i128, q: i128, den: i128, d: i128 },
    Big { a: Integer, b: Integer, p: Integer, q: Integer, den: Integer, d: Integer },
}

#[derive(Clone, Debug)]
pub struct OrbitStepper {
    state: State,
    r: u64,
}

fn sign_i128(a: i128, b: i128, d: i128) -> Ordering {
    match (a.cmp(&0), b.cmp(&0)) {
        (Ordering::Equal, s) | (s, Ordering::Equal) => s,
        (x, y) if x == y => x,
        (sa, sb) => match (a * a).cmp(&(b * b * d)) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        },
    }
}

/// `(a + b√D)/den` as a working-precision real, rationalizing when `a` and
/// `b√D` would cancel.
fn surd_value<S: Scalar>(a: &Integer, b: &Integer, den: &Integer, d: &Integer, sqrt_d: &S, prec: u32) -> S {
    let sa = a.cmp0();
    let sb = b.cmp0();
    let den_s = S::from_integer(den, prec);
    if sa == Ordering::Equal || sb == Ordering::Equal || sa == sb {
        let v = S::from_integer(a, prec).add(&S::from_integer(b, prec).mul(sqrt_d));
        v.div(&den_s)
    } else {
        let num = Integer::from(a.square_ref()) - Integer::from(b.square_ref()) * d;
        let conj = S::from_integer(a, prec).sub(&S::from_integer(b, prec).mul(sqrt_d));
        S::from_integer(&num, prec).div(&den_s.mul(&conj))
    }
}

fn surd_value_i128<S: Scalar>(a: i128, b: i128, den: i128, d: i128, sqrt_d: &S, prec: u32) -> S {
    let den_s = S::from_i128(den, prec);
    if a == 0 || b == 0 || (a > 0) == (b > 0) {
        S::from_i128(a, prec).add(&S::from_i128(b, prec).mul(sqrt_d)).div(&den_s)
    } else {
        let num = a * a - b * b * d;
        let conj = S::from_i128(a, prec).sub(&S::from_i128(b, prec).mul(sqrt_d));
        S::from_i128(num, prec).div(&den_s.mul(&conj))
    }
}

impl OrbitStepper {
    /// Positions the stepper at `{r0 α}`; `len` is the number of steps that
    /// will be taken, used only to pick the integer width.
    pub fn new(alpha: &QuadExt, r0: u64, len: u64) -> Self {
        let d = alpha.d().clone();
        let den = alpha.r().clone();
        // work with the fractional part of α so each step wraps at most once
        let fl = alpha.floor();
        let p = Integer::from(alpha.p() - &fl * &den);
        let q = alpha.q().clone();
        let start = Integer::from(r0);
        let scaled = alpha.scale(&start);
        let n = scaled.floor();
        let a = Integer::from(alpha.p() * &start) - n * &den;
        let b = Integer::from(&q * &start);

        let reach = Integer::from(r0) + len + 2u32;
        let bmax = Integer::from(q.abs_ref()) * &reach;
        let amax = Integer::from(bmax.square_ref()) * &d;
        let amax = amax.sqrt() + Integer::from(&den * 4u32);
        let limit = Integer::from(1) << 120u32;
        let fits = Integer::from(amax.square_ref()) * 4u32 < limit
            && Integer::from(bmax.square_ref()) * &d * 4u32 < limit
            && Integer::from(p.abs_ref()) < limit;
        let state = if fits {
            State::Small {
                a: a.to_i128().unwrap(),
                b: b.to_i128().unwrap(),
                p: p.to_i128().unwrap(),
                q: q.to_i128().unwrap(),
                den: den.to_i128().unwrap(),
                d: d.to_i128().unwrap(),
            }
        } else {
            State::Big { a, b, p, q, den, d }
        };
        OrbitStepper { state, r: r0 }
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn is_big(&self) -> bool {
        matches!(self.state, State::Big { .. })
    }

    pub fn advance(&mut self, scratch: &mut SurdScratch) {
        self.r += 1;
        match &mut self.state {
            State::Small { a, b, p, q, den, d } => {
                *a += *p;
                *b += *q;
                if sign_i128(*a - *den, *b, *d) != Ordering::Less {
                    *a -= *den;
                }
            }
            State::Big { a, b, p, q, den, d } => {
                *a += &*p;
                *b += &*q;
                *a -= &*den;
                if scratch.sign(a, b, d) == Ordering::Less {
                    *a += &*den;
                }
            }
        }
    }

    /// `{rα} = 0` exactly.
    pub fn is_integral(&self) -> bool {
        match &self.state {
            State::Small { a, b, .. } => *a == 0 && *b == 0,
            State::Big { a, b, .. } => a.cmp0() == Ordering::Equal && b.cmp0() == Ordering::Equal,
        }
    }

    /// `{rα}` in `[0, 1)`.
    pub fn frac<S: Scalar>(&self, sqrt_d: &S, prec: u32) -> S {
        match &self.state {
            State::Small { a, b, den, d, .. } => surd_value_i128(*a, *b, *den, *d, sqrt_d, prec),
            State::Big { a, b, den, d, .. } => surd_value(a, b, den, d, sqrt_d, prec),
        }
    }

    /// `rα − round(rα)` in `[−1/2, 1/2)`.
    pub fn offset<S: Scalar>(&self, sqrt_d: &S, prec: u32) -> S {
        match &self.state {
            State::Small { a, b, den, d, .. } => {
                let a2 = 2 * *a - *den;
                let ah = if sign_i128(a2, 2 * *b, *d) == Ordering::Less { *a } else { *a - *den };
                surd_value_i128(ah, *b, *den, *d, sqrt_d, prec)
            }
            State::Big { a, b, den, d, .. } => {
                let a2 = Integer::from(a * 2u32) - &*den;
                let b2 = Integer::from(b * 2u32);
                let ah = if surd_sign(&a2, &b2, d) == Ordering::Less { a.clone() } else { Integer::from(a - &*den) };
                surd_value(&ah, b, den, d, sqrt_d, prec)
            }
        }
    }

    /// Exact `{rα}` as a field element.
    pub fn frac_exact(&self) -> QuadExt {
        match &self.state {
            State::Small { a, b, den, d, .. } => {
                QuadExt::raw(Integer::from(*a), Integer::from(*b), Integer::from(*den), Integer::from(*d))
            }
            State::Big { a, b, den, d, .. } => QuadExt::raw(a.clone(), b.clone(), den.clone(), d.clone()),
        }
    }
}
