//! Periods, convergents and the spectral constants of α = [0; a₁,…,a_ℓ repeated].
//!
//! Indexing is shifted relative to the textbook convention: `q₀ = 0, q₁ = 1`,
//! `p₀ = 1, p₁ = 0`, and `q_{n+1} = a_n q_n + q_{n−1}`, so `q₂ = a₁`. Digits are
//! read periodically, `a_n = a_{((n−1) mod ℓ) + 1}`.
//!
//! Two rotations of the period are used. `τ_k` shifts left by `k` and is
//! naturally indexed by `k mod ℓ ∈ 0..ℓ`; `σ_k` reads the period backwards
//! starting at `a_{k−1}` and is naturally indexed by `k ∈ 1..=ℓ`. Both accept
//! any `k` and reduce it modulo `ℓ`, so `τ_ℓ = τ_0` and `σ_0 = σ_ℓ`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::ops::RemRounding;
use rug::Integer;

use crate::error::{Error, Result};
use crate::quadfield::QuadExt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodSpec {
    digits: Vec<u32>,
    k: usize,
}

impl PeriodSpec {
    pub fn new(digits: Vec<u32>, k: usize) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InvalidPeriod("empty digit tuple".into()));
        }
        if let Some(pos) = digits.iter().position(|&a| a == 0) {
            return Err(Error::InvalidPeriod(format!("digit a_{} is 0; digits must be >= 1", pos + 1)));
        }
        if k == 0 || k > digits.len() {
            return Err(Error::InvalidPeriod(format!("k = {k} outside 1..={}", digits.len())));
        }
        Ok(PeriodSpec { digits, k })
    }

    /// Parses a comma separated digit list such as `"1,2"`.
    pub fn parse(s: &str, k: usize) -> Result<Self> {
        let digits = parse_digits(s)?;
        Self::new(digits, k)
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn ell(&self) -> usize {
        self.digits.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.digits.clone(), k)
    }

    /// `a_n` with the index read modulo `ℓ` (1-based, `a_0 = a_ℓ`).
    pub fn digit(&self, n: i64) -> u32 {
        let l = self.ell() as i64;
        self.digits[((n - 1).rem_euclid(l)) as usize]
    }

    /// The digit `a_k` selected by this spec.
    pub fn a_k(&self) -> u32 {
        self.digit(self.k as i64)
    }

    pub fn max_digit(&self) -> u32 {
        *self.digits.iter().max().unwrap()
    }

    pub fn k_is_maximal(&self) -> bool {
        self.a_k() == self.max_digit()
    }

    /// Every digit is 1, i.e. α is the golden-ratio conjugate.
    pub fn is_golden(&self) -> bool {
        self.digits.iter().all(|&a| a == 1)
    }

    pub fn is_even(&self) -> bool {
        self.ell() % 2 == 0
    }
}

impl fmt::Display for PeriodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", digits_string(&self.digits))
    }
}

pub fn digits_string(digits: &[u32]) -> String {
    digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_digits(s: &str) -> Result<Vec<u32>> {
    let digits = s
        .split(',')
        .map(|t| u32::from_str(t.trim()).map_err(|_| Error::InvalidPeriod(format!("bad digit {t:?} in {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if digits.iter().any(|&d| d == 0) {
        return Err(Error::InvalidPeriod(format!("digits must be >= 1 in {s:?}")));
    }
    if digits.is_empty() {
        return Err(Error::InvalidPeriod("empty digit tuple".into()));
    }
    Ok(digits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perm {
    Tau,
    Sigma,
}

/// Digits of `τ_k(a)` or `σ_k(a)`.
pub fn permute_digits(digits: &[u32], which: Perm, k: i64) -> Vec<u32> {
    let l = digits.len() as i64;
    match which {
        Perm::Tau => {
            let j = k.rem_euclid(l) as usize;
            let mut v = digits.to_vec();
            v.rotate_left(j);
            v
        }
        Perm::Sigma => {
            // entry i is a_{k−1−i}, 1-based and cyclic
            (0..l).map(|i| digits[((k - 2 - i).rem_euclid(l)) as usize]).collect()
        }
    }
}

/// `τ_k` or `σ_k` applied to the digit tuple; the selector `k` is carried over.
pub fn permute(period: &PeriodSpec, which: Perm, k: i64) -> PeriodSpec {
    PeriodSpec { digits: permute_digits(&period.digits, which, k), k: period.k }
}

/// Paper-indexed convergent tables `(p, q)` for indices `0..=n_max`.
pub fn convergents(digits: &[u32], n_max: usize) -> (Vec<Integer>, Vec<Integer>) {
    let n_max = n_max.max(1);
    let l = digits.len();
    let mut p = Vec::with_capacity(n_max + 1);
    let mut q = Vec::with_capacity(n_max + 1);
    p.push(Integer::from(1));
    p.push(Integer::from(0));
    q.push(Integer::from(0));
    q.push(Integer::from(1));
    for n in 1..n_max {
        let a = digits[(n - 1) % l];
        let pn = Integer::from(&p[n] * a) + &p[n - 1];
        let qn = Integer::from(&q[n] * a) + &q[n - 1];
        p.push(pn);
        q.push(qn);
    }
    (p, q)
}

/// Convergent data of one purely periodic irrational.
#[derive(Clone, Debug)]
pub struct PeriodNumber {
    pub digits: Vec<u32>,
    pub p: Vec<Integer>,
    pub q: Vec<Integer>,
    /// `c = q_{ℓ+1} + p_ℓ`.
    pub c: Integer,
    /// `D = c² + 4(−1)^{ℓ−1}`.
    pub d: Integer,
    pub value: QuadExt,
}

impl PeriodNumber {
    pub fn new(digits: &[u32], n_max: usize) -> Result<Self> {
        let l = digits.len();
        let (p, q) = convergents(digits, n_max.max(l + 1));
        let c = Integer::from(&q[l + 1] + &p[l]);
        let disc = Integer::from(c.square_ref()) + if l % 2 == 1 { 4i32 } else { -4i32 };
        // α is the root in (0,1) of q_ℓ x² + (q_{ℓ+1} − p_ℓ) x − p_{ℓ+1} = 0
        let lin = Integer::from(&q[l + 1] - &p[l]);
        let quad_disc = Integer::from(lin.square_ref()) + Integer::from(&q[l] * &p[l + 1]) * 4u32;
        if quad_disc != disc {
            return Err(Error::Internal(format!("fixed-point discriminant {quad_disc} differs from c^2 +- 4 = {disc}")));
        }
        let value = QuadExt::new(-lin, Integer::from(1), Integer::from(&q[l] * 2u32), disc.clone())?;
        if value.signum() != Ordering::Greater || value.cmp_int(&Integer::from(1)) != Ordering::Less {
            return Err(Error::Internal(format!("fixed point {value} outside (0,1)")));
        }
        Ok(PeriodNumber { digits: digits.to_vec(), p, q, c, d: disc, value })
    }

    pub fn ell(&self) -> usize {
        self.digits.len()
    }

    pub fn q_ell(&self) -> &Integer {
        &self.q[self.ell()]
    }

    pub fn p_ell(&self) -> &Integer {
        &self.p[self.ell()]
    }
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    pub period: PeriodSpec,
    /// `k mod ℓ`, the index used for `c_k`, `e_k` and `τ_k`.
    pub k_mod: usize,
    pub c: Integer,
    pub d: Integer,
    pub a: QuadExt,
    pub b: QuadExt,
    pub alpha: QuadExt,
    pub alpha_sigma_k: QuadExt,
    pub alpha_tau_k: QuadExt,
    pub c_k: QuadExt,
    pub e_k: QuadExt,
    /// `1/|c_k e_k|`.
    pub inv_ckek: QuadExt,
    /// `2/|c_k e_k|`, the mean spacing of `u_k(t)`.
    pub big_a: QuadExt,
    pub p_table: Vec<Integer>,
    pub q_table: Vec<Integer>,
    pub number: PeriodNumber,
    pub sigma: PeriodNumber,
    pub tau: PeriodNumber,
}

pub fn spectral(period: &PeriodSpec) -> Result<SpectralData> {
    spectral_with_table(period, 2 * period.ell() + 2)
}

pub fn spectral_with_table(period: &PeriodSpec, n_max: usize) -> Result<SpectralData> {
    let l = period.ell();
    let k = period.k();
    let number = PeriodNumber::new(period.digits(), n_max.max(2 * l + 1))?;
    let d = number.d.clone();
    let c = number.c.clone();
    let sqrt_d = QuadExt::sqrt_d(&d)?;
    let half = QuadExt::from_ratio(1, 2, &d)?;
    let cq = QuadExt::from_int(c.clone(), &d);
    let a = &(&cq + &sqrt_d) * &half;
    let b = &(&cq - &sqrt_d) * &half;

    let sigma = PeriodNumber::new(&permute_digits(period.digits(), Perm::Sigma, k as i64), l + 1)?;
    let tau = PeriodNumber::new(&permute_digits(period.digits(), Perm::Tau, k as i64), l + 1)?;
    if sigma.d != d || tau.d != d {
        return Err(Error::Internal("rotated periods landed in a different quadratic field".into()));
    }
    // α_{σ_k} two ways: its own fixed point, and (p_ℓ − b)/q_ℓ
    let via_b = QuadExt::from_int(sigma.p_ell().clone(), &d)
        .try_sub(&b)?
        .scale_ratio(&Integer::from(1), sigma.q_ell())?;
    if via_b != sigma.value {
        return Err(Error::Internal(format!("alpha_sigma fixed point {} != (p_l - b)/q_l = {via_b}", sigma.value)));
    }

    let kk = k % l;
    let q = &number.q;
    let q_l = &q[l];
    let qk = QuadExt::from_int(q[kk].clone(), &d);
    let ql_k = QuadExt::from_int(q[l + kk].clone(), &d);
    let c_k = (&ql_k - &(&b * &qk)).try_div(&(&a - &b))?;
    let e_abs = (&(&a * &qk) - &ql_k).abs().scale_ratio(&Integer::from(1), q_l)?;
    let e_k = if kk % 2 == 1 { e_abs } else { -e_abs };
    let inv_ckek = (&c_k * &e_k).abs().recip()?;
    let big_a = inv_ckek.scale(&Integer::from(2));

    Ok(SpectralData {
        period: period.clone(),
        k_mod: kk,
        c,
        d,
        a,
        b,
        alpha: number.value.clone(),
        alpha_sigma_k: sigma.value.clone(),
        alpha_tau_k: tau.value.clone(),
        c_k,
        e_k,
        inv_ckek,
        big_a,
        p_table: number.p.clone(),
        q_table: number.q.clone(),
        number,
        sigma,
        tau,
    })
}

impl SpectralData {
    pub fn ell(&self) -> usize {
        self.period.ell()
    }

    pub fn a_k(&self) -> u32 {
        self.period.a_k()
    }

    pub fn is_even(&self) -> bool {
        self.period.is_even()
    }

    /// `q_ℓ(α_{σ_k})`, which equals `q_ℓ(α_{τ_k})`.
    pub fn q_ell_sigma(&self) -> &Integer {
        self.sigma.q_ell()
    }

    /// `|c_k e_k|`.
    pub fn ckek(&self) -> QuadExt {
        self.inv_ckek.recip().expect("c_k e_k is nonzero")
    }

    pub fn big_a_f64(&self) -> f64 {
        self.big_a.to_f64()
    }

    pub fn one(&self) -> QuadExt {
        QuadExt::from_int(1, &self.d)
    }

    pub fn int(&self, n: impl Into<Integer>) -> QuadExt {
        QuadExt::from_int(n, &self.d)
    }

    /// `δ_t = 1 − 2{tα_{σ_k}}`, in `(−1, 1]`.
    pub fn delta_t(&self, t: u64) -> QuadExt {
        let frac = self.alpha_sigma_k.scale(&Integer::from(t)).frac();
        self.one() - frac.scale(&Integer::from(2))
    }
}

/// `Λ_n = q_n α − p_n`.
pub fn lambda_n(period: &PeriodSpec, n: usize) -> Result<QuadExt> {
    if n < 1 {
        return Err(Error::InvalidArgument("lambda_n needs n >= 1".into()));
    }
    let number = PeriodNumber::new(period.digits(), n + 1)?;
    Ok(lambda_from(&number, n))
}

pub(crate) fn lambda_from(number: &PeriodNumber, n: usize) -> QuadExt {
    number.value.scale(&number.q[n]).add_int(&-number.p[n].clone())
}

/// `u_k(t) = 2(t/|c_k e_k| − {tα_{σ_k}} + 1/2)`.
pub fn u_of_t(spec: &SpectralData, t: u64) -> Result<QuadExt> {
    if t < 1 {
        return Err(Error::InvalidArgument("u_k(t) needs t >= 1".into()));
    }
    let tt = Integer::from(t);
    Ok(&spec.big_a.scale(&tt) + &spec.delta_t(t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RtValue {
    pub r: QuadExt,
    /// `‖R_t‖`.
    pub dist: QuadExt,
    /// `‖R_t + b‖`.
    pub dist_plus_b: QuadExt,
}

/// `R_t = {t p_ℓ(α_τ)/q_ℓ(α_τ)} + t(p_ℓ(α_σ)/q_ℓ(α_σ) − α_σ) − 2bt/q_ℓ(α_τ)`.
pub fn r_of_t(spec: &SpectralData, t: u64) -> Result<RtValue> {
    if t < 1 {
        return Err(Error::InvalidArgument("R_t needs t >= 1".into()));
    }
    let d = &spec.d;
    let tt = Integer::from(t);
    let (p_tau, q_tau) = (spec.tau.p_ell(), spec.tau.q_ell());
    let (p_sig, q_sig) = (spec.sigma.p_ell(), spec.sigma.q_ell());
    let frac_num = Integer::from(&tt * p_tau).rem_euc(q_tau.clone());
    let frac = QuadExt::from_ratio(frac_num, q_tau.clone(), d)?;
    let gap = QuadExt::from_ratio(p_sig.clone(), q_sig.clone(), d)?.try_sub(&spec.alpha_sigma_k)?;
    let two_b = spec.b.scale_ratio(&Integer::from(2), q_tau)?;
    let r = &frac + &(&gap - &two_b).scale(&tt);
    let dist = r.dist_to_int();
    let dist_plus_b = (&r + &spec.b).dist_to_int();
    Ok(RtValue { r, dist, dist_plus_b })
}

/// `½(u_k(t) − (2s+1)) = t/|c_k e_k| − {tα_{σ_k}} − s`.
pub fn half_gap(spec: &SpectralData, t: u64, s: i64) -> Result<QuadExt> {
    let u = u_of_t(spec, t)?;
    let shifted = u.add_int(&Integer::from(-(2 * s + 1)));
    shifted.scale_ratio(&Integer::from(1), &Integer::from(2))
}
