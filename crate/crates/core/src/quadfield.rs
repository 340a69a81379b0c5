//! Exact arithmetic in a real quadratic field Q(√D).
//!
//! Elements are stored as `(p + q√D)/r` with big-integer coordinates, kept in
//! canonical form (`r > 0`, `gcd(p, q, r) = 1`) so equality is structural.
//! Floors, signs and comparisons are decided with integer square roots only.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::ops::DivRounding;
use rug::{Assign, Float, Integer, Rational};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadExt {
    p: Integer,
    q: Integer,
    r: Integer,
    d: Integer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Sign of `p + q√D` for a non-square `D > 0`.
pub(crate) fn surd_sign(p: &Integer, q: &Integer, d: &Integer) -> Ordering {
    let sp = p.cmp0();
    let sq = q.cmp0();
    match (sp, sq) {
        (Ordering::Equal, s) | (s, Ordering::Equal) => s,
        (a, b) if a == b => a,
        _ => {
            let p2 = Integer::from(p.square_ref());
            let q2d = Integer::from(q.square_ref()) * d;
            match p2.cmp(&q2d) {
                Ordering::Greater => sp,
                Ordering::Less => sq,
                Ordering::Equal => Ordering::Equal,
            }
        }
    }
}

/// `floor(q√D)` for non-square `D`.
fn floor_q_sqrt_d(q: &Integer, d: &Integer) -> Integer {
    let s = (Integer::from(q.square_ref()) * d).sqrt();
    match q.cmp0() {
        Ordering::Less => -(s + 1u32),
        _ => s,
    }
}

/// `floor((p + q√D)/r)` for `r > 0`.
///
/// `p + q√D` lies strictly between `m = p + floor(q√D)` and `m + 1` (or equals
/// `m` when `q = 0`), and no multiple of `r` falls in that open interval, so
/// the floor equals `floor(m / r)`.
fn floor_parts(p: &Integer, q: &Integer, r: &Integer, d: &Integer) -> Integer {
    let m = Integer::from(p + &floor_q_sqrt_d(q, d));
    m.div_floor(r.clone())
}

pub(crate) fn is_perfect_square(n: &Integer) -> bool {
    n.cmp0() != Ordering::Less && n.is_perfect_square()
}

impl QuadExt {
    pub fn new(p: Integer, q: Integer, r: Integer, d: Integer) -> Result<Self> {
        if d < 2 || is_perfect_square(&d) {
            return Err(Error::InvalidDiscriminant(d.to_string()));
        }
        if r.cmp0() == Ordering::Equal {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::raw(p, q, r, d))
    }

    /// Builds and normalizes without validating `D`.
    pub(crate) fn raw(p: Integer, q: Integer, r: Integer, d: Integer) -> Self {
        let mut x = QuadExt { p, q, r, d };
        x.normalize();
        x
    }

    pub fn from_int(n: impl Into<Integer>, d: &Integer) -> Self {
        Self::raw(n.into(), Integer::new(), Integer::from(1), d.clone())
    }

    pub fn from_ratio(num: impl Into<Integer>, den: impl Into<Integer>, d: &Integer) -> Result<Self> {
        let den = den.into();
        if den.cmp0() == Ordering::Equal {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::raw(num.into(), Integer::new(), den, d.clone()))
    }

    /// The element `√D` itself.
    pub fn sqrt_d(d: &Integer) -> Result<Self> {
        Self::new(Integer::new(), Integer::from(1), Integer::from(1), d.clone())
    }

    pub fn zero(d: &Integer) -> Self {
        Self::from_int(0, d)
    }

    fn normalize(&mut self) {
        let mut g = self.p.clone().gcd(&self.q);
        g.gcd_mut(&self.r);
        if g != 1 && g.cmp0() != Ordering::Equal {
            self.p.div_exact_mut(&g);
            self.q.div_exact_mut(&g);
            self.r.div_exact_mut(&g);
        }
        if self.r.cmp0() == Ordering::Less {
            self.p = -std::mem::take(&mut self.p);
            self.q = -std::mem::take(&mut self.q);
            self.r = -std::mem::take(&mut self.r);
        }
    }

    pub fn p(&self) -> &Integer {
        &self.p
    }
    pub fn q(&self) -> &Integer {
        &self.q
    }
    pub fn r(&self) -> &Integer {
        &self.r
    }
    pub fn d(&self) -> &Integer {
        &self.d
    }

    pub fn is_zero(&self) -> bool {
        self.p.cmp0() == Ordering::Equal && self.q.cmp0() == Ordering::Equal
    }

    pub fn is_rational(&self) -> bool {
        self.q.cmp0() == Ordering::Equal
    }

    pub fn is_integer(&self) -> bool {
        self.is_rational() && self.r == 1
    }

    pub fn signum(&self) -> Ordering {
        surd_sign(&self.p, &self.q, &self.d)
    }

    fn check_field(&self, other: &QuadExt) -> Result<()> {
        if self.d == other.d {
            Ok(())
        } else {
            Err(Error::FieldMismatch { left: self.d.to_string(), right: other.d.to_string() })
        }
    }

    pub fn arith(&self, other: &QuadExt, op: ArithOp) -> Result<QuadExt> {
        self.check_field(other)?;
        let (p, q, r) = match op {
            ArithOp::Add | ArithOp::Sub => {
                let (op_, oq) = if op == ArithOp::Add {
                    (other.p.clone(), other.q.clone())
                } else {
                    (-other.p.clone(), -other.q.clone())
                };
                if self.r == other.r {
                    (op_ + &self.p, oq + &self.q, self.r.clone())
                } else {
                    (
                        Integer::from(&self.p * &other.r) + op_ * &self.r,
                        Integer::from(&self.q * &other.r) + oq * &self.r,
                        Integer::from(&self.r * &other.r),
                    )
                }
            }
            ArithOp::Mul => mul_parts(&self.p, &self.q, &self.r, &other.p, &other.q, &other.r, &self.d),
            ArithOp::Div => {
                if other.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                // x / y = x · r_y (p_y − q_y√D) / (p_y² − q_y² D)
                let norm = Integer::from(other.p.square_ref()) - Integer::from(other.q.square_ref()) * &self.d;
                let cp = Integer::from(&other.p * &other.r);
                let cq = -Integer::from(&other.q * &other.r);
                mul_parts(&self.p, &self.q, &self.r, &cp, &cq, &norm, &self.d)
            }
        };
        Ok(QuadExt::raw(p, q, r, self.d.clone()))
    }

    pub fn try_add(&self, o: &QuadExt) -> Result<QuadExt> {
        self.arith(o, ArithOp::Add)
    }
    pub fn try_sub(&self, o: &QuadExt) -> Result<QuadExt> {
        self.arith(o, ArithOp::Sub)
    }
    pub fn try_mul(&self, o: &QuadExt) -> Result<QuadExt> {
        self.arith(o, ArithOp::Mul)
    }
    pub fn try_div(&self, o: &QuadExt) -> Result<QuadExt> {
        self.arith(o, ArithOp::Div)
    }

    pub fn recip(&self) -> Result<QuadExt> {
        QuadExt::from_int(1, &self.d).try_div(self)
    }

    pub fn scale(&self, n: &Integer) -> QuadExt {
        QuadExt::raw(Integer::from(&self.p * n), Integer::from(&self.q * n), self.r.clone(), self.d.clone())
    }

    pub fn scale_ratio(&self, num: &Integer, den: &Integer) -> Result<QuadExt> {
        if den.cmp0() == Ordering::Equal {
            return Err(Error::DivisionByZero);
        }
        Ok(QuadExt::raw(
            Integer::from(&self.p * num),
            Integer::from(&self.q * num),
            Integer::from(&self.r * den),
            self.d.clone(),
        ))
    }

    pub fn add_int(&self, n: &Integer) -> QuadExt {
        QuadExt::raw(Integer::from(n * &self.r) + &self.p, self.q.clone(), self.r.clone(), self.d.clone())
    }

    pub fn pow(&self, e: u32) -> QuadExt {
        let mut acc = QuadExt::from_int(1, &self.d);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn conjugate(&self) -> QuadExt {
        QuadExt::raw(self.p.clone(), -self.q.clone(), self.r.clone(), self.d.clone())
    }

    pub fn abs(&self) -> QuadExt {
        if self.signum() == Ordering::Less {
            -self
        } else {
            self.clone()
        }
    }

    pub fn cmp_exact(&self, other: &QuadExt) -> Result<Ordering> {
        Ok(self.try_sub(other)?.signum())
    }

    pub fn cmp_int(&self, n: &Integer) -> Ordering {
        self.add_int(&Integer::from(-n)).signum()
    }

    pub fn floor(&self) -> Integer {
        floor_parts(&self.p, &self.q, &self.r, &self.d)
    }

    pub fn ceil(&self) -> Integer {
        -(-self).floor()
    }

    /// `x − floor(x)`, in `[0, 1)`.
    pub fn frac(&self) -> QuadExt {
        self.add_int(&-self.floor())
    }

    /// Nearest integer, ties rounded up.
    pub fn round(&self) -> Integer {
        let p = Integer::from(&self.p << 1u32) + &self.r;
        floor_parts(&p, &Integer::from(&self.q << 1u32), &Integer::from(&self.r << 1u32), &self.d)
    }

    /// `x − round(x)`, in `[−1/2, 1/2)`.
    pub fn signed_offset(&self) -> QuadExt {
        self.add_int(&-self.round())
    }

    /// Distance to the nearest integer, `‖x‖`.
    pub fn dist_to_int(&self) -> QuadExt {
        self.signed_offset().abs()
    }

    /// Value correctly rounded (round-to-nearest) to `prec` bits.
    ///
    /// Irrational values are rounded from an exact floor of `x · 2^s` taken with
    /// enough guard bits; the odd integer `2F + 1` cannot sit on a rounding
    /// midpoint, so a single rounding of it is the correct rounding of `x`.
    pub fn to_float(&self, prec: u32) -> Float {
        let prec = prec.max(2);
        if self.is_rational() {
            return Float::with_val(prec, Rational::from((self.p.clone(), self.r.clone())));
        }
        let need = prec as i64 + 3;
        let size = |z: &Integer| z.significant_bits() as i64;
        let mut s = need + 8 + size(&self.r) - size(&self.p).max(size(&self.q) + size(&self.d) / 2);
        loop {
            let (sp, sq, sr) = if s >= 0 {
                (Integer::from(&self.p << s as u32), Integer::from(&self.q << s as u32), self.r.clone())
            } else {
                (self.p.clone(), self.q.clone(), Integer::from(&self.r << (-s) as u32))
            };
            let f = floor_parts(&sp, &sq, &sr, &self.d);
            let bits = size(&f);
            if bits >= need {
                let odd = Integer::from(&f << 1u32) + 1u32;
                let mut out = Float::with_val(prec, &odd);
                let shift = s + 1;
                if shift >= 0 {
                    out >>= shift as u32;
                } else {
                    out <<= (-shift) as u32;
                }
                return out;
            }
            s += need - bits + 16;
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.to_float(53).to_f64()
    }
}

fn mul_parts(
    p1: &Integer,
    q1: &Integer,
    r1: &Integer,
    p2: &Integer,
    q2: &Integer,
    r2: &Integer,
    d: &Integer,
) -> (Integer, Integer, Integer) {
    let mut p = Integer::from(p1 * p2);
    let qq = Integer::from(q1 * q2) * d;
    p += qq;
    let mut q = Integer::from(p1 * q2);
    q += Integer::from(q1 * p2);
    (p, q, Integer::from(r1 * r2))
}

impl PartialOrd for QuadExt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.cmp_exact(other).ok()
    }
}

impl fmt::Display for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.q.cmp0() == Ordering::Less { '-' } else { '+' };
        write!(f, "({}{}{}√{})/{}", self.p, sign, Integer::from(self.q.abs_ref()), self.d, self.r)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<&QuadExt> for &QuadExt {
            type Output = QuadExt;
            /// Panics on mixed fields; use [`QuadExt::arith`] to get an error instead.
            fn $method(self, rhs: &QuadExt) -> QuadExt {
                self.arith(rhs, $op).expect("QuadExt operands must share one field")
            }
        }
        impl $trait<QuadExt> for QuadExt {
            type Output = QuadExt;
            fn $method(self, rhs: QuadExt) -> QuadExt {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, ArithOp::Add);
forward_binop!(Sub, sub, ArithOp::Sub);
forward_binop!(Mul, mul, ArithOp::Mul);

impl Neg for &QuadExt {
    type Output = QuadExt;
    fn neg(self) -> QuadExt {
        QuadExt { p: -self.p.clone(), q: -self.q.clone(), r: self.r.clone(), d: self.d.clone() }
    }
}

impl Neg for QuadExt {
    type Output = QuadExt;
    fn neg(mut self) -> QuadExt {
        self.p = -self.p;
        self.q = -self.q;
        self
    }
}

/// Reusable scratch for repeated exact sign tests on `A + B√D`.
#[derive(Default)]
pub struct SurdScratch {
    a2: Integer,
    b2d: Integer,
}

impl SurdScratch {
    pub fn new() -> Self {
        SurdScratch { a2: Integer::new(), b2d: Integer::new() }
    }

    pub fn sign(&mut self, a: &Integer, b: &Integer, d: &Integer) -> Ordering {
        let sa = a.cmp0();
        let sb = b.cmp0();
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            _ => {
                self.a2.assign(a.square_ref());
                self.b2d.assign(b.square_ref());
                self.b2d *= d;
                match self.a2.cmp(&self.b2d) {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }
}
