//! Analytic bounds: the constants `f` and `g`, the two-sided estimate on
//! `|G(x)|`, upper bounds for `C_k`, the threshold arithmetic for large
//! digits, and the digit-space scan.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use rug::Integer;

use crate::cfrac::{spectral, u_of_t, PeriodSpec, SpectralData};
use crate::error::{Error, Result};
use crate::limitfn::{c_k_closed, g_of_x};

/// Smallest maximal digit for which the `C_k` bounds are stated.
pub const MIN_BOUND_DIGIT: u32 = 6;

fn check_digit(a: u32) -> Result<f64> {
    if a <= 1 {
        return Err(Error::DigitTooSmall { a_k: a, min: 2 });
    }
    Ok(a as f64)
}

pub fn f_of(a_k: u32) -> Result<f64> {
    let a = check_digit(a_k)?;
    Ok(13.7 / a + 1.0 / (20.0 * a.ln()) + 0.01 + 2.0 / (a * a))
}

pub fn g_of(a_k: u32) -> Result<f64> {
    let a = check_digit(a_k)?;
    Ok(3.3 / a + 1.0 / (80.0 * a.ln()) + 0.0025 + 2.0 / (a * a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    SmallX,
    MEqualsOne,
    LargeX,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::SmallX => "small_x",
            Branch::MEqualsOne => "m_equals_1",
            Branch::LargeX => "large_x",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichResult {
    pub x: f64,
    /// `m ≥ 1` minimizing `|Am − |x||`; 0 on the small-`x` branch.
    pub m_of_x: u64,
    pub dist_to_u: f64,
    pub lower: f64,
    pub upper: f64,
    /// `|G(x)|`.
    pub g_value: f64,
    pub branch: Branch,
    /// Containment up to the evaluation tolerance.
    pub holds: bool,
}

fn require_maximal(spec: &SpectralData, min: u32) -> Result<u32> {
    let a_k = spec.a_k();
    if !spec.period.k_is_maximal() {
        return Err(Error::NotMaximalDigit { k: spec.period.k(), a_k, max: spec.period.max_digit() });
    }
    if a_k < min {
        return Err(Error::DigitTooSmall { a_k, min });
    }
    Ok(a_k)
}

/// `min_t |x − u_k(t)|` from exact `u_k(t)`.
pub fn dist_to_u(spec: &SpectralData, x: f64) -> Result<f64> {
    let x = x.abs();
    let a = spec.big_a_f64();
    // |u_k(t) − At| ≤ 1 confines the nearest point to a short window
    let lo = (((x - 1.0) / a).floor() - 1.0).max(1.0) as u64;
    let hi = ((x + 1.0) / a).ceil() as u64 + 1;
    let mut best = f64::INFINITY;
    for t in lo..=hi.max(lo) {
        best = best.min((u_of_t(spec, t)?.to_f64() - x).abs());
    }
    Ok(best)
}

/// Evaluates `G(x)` and the bounds that apply to it. Requires `k` to index a
/// maximal digit `a_k ≥ 2`.
pub fn sandwich(spec: &SpectralData, x: f64, tol: f64) -> Result<SandwichResult> {
    let a_k = require_maximal(spec, 2)?;
    let big_a = spec.big_a_f64();
    let ax = x.abs();
    let dist = dist_to_u(spec, ax)?;
    let (branch, m, lower, upper) = if ax < big_a / 2.0 {
        (Branch::SmallX, 0, 2.0 / PI * (-g_of(a_k)?).exp(), 1.0)
    } else {
        let m = ((ax / big_a).round() as u64).max(1);
        let mf = m as f64;
        let (branch, h) = if m == 1 { (Branch::MEqualsOne, g_of(a_k)?) } else { (Branch::LargeX, f_of(a_k)?) };
        let am = big_a * mf;
        let lower = 2.0 / PI * (-h).exp() * (1.0 - 2.0 / (3.0 * am)) * (1.0 - 1.0 / am).powi(2) * dist / ax;
        let upper = 14.0 * big_a / 9.0 * h.exp() / ax;
        (branch, m, lower, upper)
    };
    let g = g_of_x(spec, x, tol)?;
    let g_value = g.value.abs();
    let slack = 4.0 * tol;
    let holds = g_value >= lower * (1.0 - slack) && g_value <= upper * (1.0 + slack);
    Ok(SandwichResult { x, m_of_x: m, dist_to_u: dist, lower, upper, g_value, branch, holds })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Even `ℓ` with `q_ℓ(α_{σ_k}) ≥ 2`.
    Even,
    /// Even `ℓ` with `q_ℓ(α_{σ_k}) = 1`.
    EvenQ1,
    Odd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperBound {
    pub value: f64,
    pub kind: BoundKind,
}

/// Upper bound on `C_k` for `k` indexing a maximal digit `a_k ≥ 6`.
pub fn ck_upper(spec: &SpectralData) -> Result<UpperBound> {
    let a_k = require_maximal(spec, MIN_BOUND_DIGIT)?;
    let a = a_k as f64;
    let c = spec.c.to_f64();
    let q = spec.q_ell_sigma().to_f64();
    if spec.is_even() {
        // these bound C_k^{(c−2)/c}
        let (log_x, kind) = if *spec.q_ell_sigma() == 1 {
            let log_x = (PI / a).ln() + 1.0 + g_of(a_k)? + (6.2f64.ln() + 4.0 * (a + 2.0).ln()) / (a + 2.0);
            (log_x, BoundKind::EvenQ1)
        } else {
            let log_x = (PI / (2.0 * a)).ln()
                + 1.0
                + f_of(a_k)?
                + (200f64.ln() + 2.4 + 2.0 * c.ln()) / c
                + 2f64.ln() / q
                + (2.5 * a.ln() - 1.0) / a;
            (log_x, BoundKind::Even)
        };
        Ok(UpperBound { value: (log_x * c / (c - 2.0)).exp(), kind })
    } else {
        let log_c = (PI / (2.0 * a)).ln()
            + 1.0
            + f_of(a_k)?
            + (40f64.ln() + 1.5 * c.ln()) / c
            + 2f64.ln() / q
            + 2.5 * a.ln() / a;
        Ok(UpperBound { value: log_c.exp(), kind: BoundKind::Odd })
    }
}

/// Odd-`ℓ` bound after the worst case `q_ℓ = 2`, `c = a_k q_ℓ` is inserted.
pub fn reduced_bound_odd(a_k: u32) -> Result<f64> {
    let a = a_k as f64;
    Ok(PI / (2f64.sqrt() * a) * (1.0 + f_of(a_k)?).exp() * (160.0 * a.powf(6.5)).powf(1.0 / (2.0 * a)))
}

/// Even-`ℓ`, `q_ℓ ≥ 2` analogue of [`reduced_bound_odd`]; bounds `C_k^{(c−2)/c}`.
pub fn reduced_bound_even(a_k: u32) -> Result<f64> {
    let a = a_k as f64;
    let inner = 200.0 * 2.4f64.exp() * a.powi(7);
    Ok(PI / (2f64.sqrt() * a) * (1.0 + f_of(a_k)?).exp() * inner.powf(1.0 / (2.0 * a)))
}

fn q1_bound(a: f64, g: f64) -> f64 {
    PI / a * (1.0 + g).exp() * (6.2 * (a + 2.0).powi(4)).powf(1.0 / (a + 2.0))
}

/// The `q_ℓ = 1` bound on `C_k^{(c−2)/c}` with `g` evaluated exactly.
pub fn reduced_bound_q1(a_k: u32) -> Result<f64> {
    Ok(q1_bound(a_k as f64, g_of(a_k)?))
}

/// The same with `g(a_k)` replaced by its cruder majorant `3.3/a_k + 0.1`.
pub fn reduced_bound_q1_relaxed(a_k: u32) -> Result<f64> {
    check_digit(a_k)?;
    let a = a_k as f64;
    Ok(q1_bound(a, 3.3 / a + 0.1))
}

/// Smallest `a ≥ 2` with `bound(a') < 1` for every `a' ∈ [a, 2000]`.
pub fn threshold(bound: impl Fn(u32) -> Result<f64>) -> Result<u32> {
    let mut first = None;
    for a in (2..=2000u32).rev() {
        if bound(a)? < 1.0 {
            first = Some(a);
        } else {
            break;
        }
    }
    first.ok_or_else(|| Error::Internal("bound never drops below 1".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    CertifiedLt1,
    Lt1Numeric,
    Ge1Numeric,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::CertifiedLt1 => "certified_lt_1",
            Verdict::Lt1Numeric => "lt_1_numeric",
            Verdict::Ge1Numeric => "ge_1_numeric",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub digits: Vec<u32>,
    /// 1-based index of the first maximal digit.
    pub k_max: usize,
    /// `q_ℓ(α_{σ_{k_max}})`, the quantity the bound dispatch depends on.
    pub q_ell: Integer,
    /// `C_1, …, C_ℓ`.
    pub c_values: Vec<f64>,
    pub c_kmax: f64,
    pub upper_bound: Option<UpperBound>,
    pub verdict: Verdict,
    /// `|C_{k_max} − 1| < 10·tol`.
    pub inconclusive: bool,
}

/// Tuples of length `ell` over `1..=digit_max` that are the lexicographically
/// least among their cyclic rotations, in lexicographic order.
pub fn canonical_tuples(ell: usize, digit_max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if ell == 0 || digit_max == 0 {
        return out;
    }
    let mut cur = vec![1u32; ell];
    loop {
        if (1..ell).all(|r| {
            let rot: Vec<u32> = cur[r..].iter().chain(&cur[..r]).copied().collect();
            cur <= rot
        }) {
            out.push(cur.clone());
        }
        let mut i = ell;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < digit_max {
                cur[i] += 1;
                for v in &mut cur[i + 1..] {
                    *v = 1;
                }
                break;
            }
        }
    }
}

pub fn scan_record(digits: &[u32], tol: f64) -> Result<ScanRecord> {
    let max = *digits.iter().max().ok_or_else(|| Error::InvalidPeriod("empty".into()))?;
    let k_max = digits.iter().position(|&d| d == max).unwrap() + 1;
    let mut c_values = Vec::with_capacity(digits.len());
    for k in 1..=digits.len() {
        let s = spectral(&PeriodSpec::new(digits.to_vec(), k)?)?;
        c_values.push(c_k_closed(&s, tol)?.value);
    }
    let spec = spectral(&PeriodSpec::new(digits.to_vec(), k_max)?)?;
    let upper_bound = if max >= MIN_BOUND_DIGIT { Some(ck_upper(&spec)?) } else { None };
    let c_kmax = c_values[k_max - 1];
    let margin = 10.0 * tol;
    let verdict = match &upper_bound {
        Some(u) if u.value < 1.0 => Verdict::CertifiedLt1,
        _ if c_kmax < 1.0 - margin => Verdict::Lt1Numeric,
        _ => Verdict::Ge1Numeric,
    };
    Ok(ScanRecord {
        digits: digits.to_vec(),
        k_max,
        q_ell: spec.q_ell_sigma().clone(),
        c_values,
        c_kmax,
        upper_bound,
        verdict,
        inconclusive: (c_kmax - 1.0).abs() < margin,
    })
}

pub fn scan(ell: usize, digit_max: u32, tol: f64) -> Result<Vec<ScanRecord>> {
    scan_with(ell, digit_max, tol, 1)
}

pub fn scan_with(ell: usize, digit_max: u32, tol: f64, workers: usize) -> Result<Vec<ScanRecord>> {
    if ell == 0 || digit_max == 0 {
        return Err(Error::InvalidArgument("scan needs ell ≥ 1 and digit_max ≥ 1".into()));
    }
    let tuples = canonical_tuples(ell, digit_max);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| tuples.par_iter().map(|d| scan_record(d, tol)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: &[u32], k: usize) -> SpectralData {
        spectral(&PeriodSpec::new(d.to_vec(), k).unwrap()).unwrap()
    }

    #[test]
    fn f_and_g_values() {
        assert!((f_of(6).unwrap() - 2.376794420216451).abs() < 1e-15);
        assert!((g_of(6).unwrap() - 0.6150319383874461).abs() < 1e-15);
        for a in 2..200 {
            let f = f_of(a).unwrap();
            let af = a as f64;
            assert!((f - 0.01 - 2.0 / (af * af) - 1.0 / (20.0 * af.ln()) - 13.7 / af).abs() < 1e-14);
            assert!(g_of(a).unwrap() < f);
        }
        assert!((f_of(1_000_000_000).unwrap() - 0.01).abs() < 0.003);
        assert!(f_of(1).is_err() && g_of(0).is_err());
    }

    #[test]
    fn sandwich_branches() {
        let s = spec(&[1, 7], 2);
        let a = s.big_a_f64();
        let r0 = sandwich(&s, 0.0, 1e-9).unwrap();
        assert_eq!(r0.branch, Branch::SmallX);
        assert_eq!(r0.g_value, 1.0);
        assert!(r0.holds);
        let r1 = sandwich(&s, a, 1e-9).unwrap();
        assert_eq!((r1.branch, r1.m_of_x), (Branch::MEqualsOne, 1));
        assert!(r1.holds, "{r1:?}");
        let r5 = sandwich(&s, 5.0 * a, 1e-9).unwrap();
        assert_eq!((r5.branch, r5.m_of_x), (Branch::LargeX, 5));
        assert!(r5.holds, "{r5:?}");
    }

    #[test]
    fn small_x_example() {
        let r = sandwich(&spec(&[1, 2], 2), 1.0, 1e-9).unwrap();
        assert_eq!(r.branch, Branch::SmallX);
        assert!(r.g_value > 0.0 && r.g_value < 1.0 && r.holds);
    }

    #[test]
    fn sandwich_refuses_non_maximal_k() {
        assert!(matches!(sandwich(&spec(&[1, 7], 1), 1.0, 1e-8), Err(Error::NotMaximalDigit { .. })));
        assert!(matches!(ck_upper(&spec(&[1, 5], 2)), Err(Error::DigitTooSmall { .. })));
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(threshold(reduced_bound_odd).unwrap(), 22);
        assert_eq!(threshold(reduced_bound_even).unwrap(), 23);
        assert_eq!(threshold(reduced_bound_q1_relaxed).unwrap(), 21);
        assert_eq!(threshold(reduced_bound_q1).unwrap(), 20);
        assert!((reduced_bound_odd(21).unwrap() - 1.0294).abs() < 1e-3);
        assert!((reduced_bound_even(22).unwrap() - 1.027).abs() < 1e-3);
    }

    #[test]
    fn upper_bound_dominates_constant() {
        for (d, k) in [(&[6u32][..], 1), (&[1, 8], 2), (&[3, 9], 2), (&[2, 1, 7], 3), (&[7, 1, 1, 2], 1)] {
            let s = spec(d, k);
            let u = ck_upper(&s).unwrap();
            let c = c_k_closed(&s, 1e-9).unwrap().value;
            assert!(u.value >= c, "{d:?}: {} < {c}", u.value);
        }
        assert_eq!(ck_upper(&spec(&[1, 8], 2)).unwrap().kind, BoundKind::EvenQ1);
        assert_eq!(ck_upper(&spec(&[3, 9], 2)).unwrap().kind, BoundKind::Even);
        assert_eq!(ck_upper(&spec(&[2, 1, 7], 3)).unwrap().kind, BoundKind::Odd);
    }

    #[test]
    fn canonical_rotation_classes() {
        assert_eq!(canonical_tuples(2, 3), vec![vec![1, 1], vec![1, 2], vec![1, 3], vec![2, 2], vec![2, 3], vec![3, 3]]);
        // necklaces of length 3 over 2 letters
        assert_eq!(canonical_tuples(3, 2).len(), 4);
        assert_eq!(canonical_tuples(1, 4).len(), 4);
    }

    #[test]
    fn figure_families_are_monotone_with_thresholds() {
        for (a1, first_below) in [(1u32, 4u32), (2, 5)] {
            let mut prev = f64::INFINITY;
            for a2 in (a1 + 1)..=10 {
                let c = c_k_closed(&spec(&[a1, a2], 2), 1e-9).unwrap().value;
                assert!(c < prev, "({a1},{a2})");
                assert_eq!(c < 1.0, a2 >= first_below, "({a1},{a2}) C = {c}");
                prev = c;
            }
        }
    }

    #[test]
    fn scan_small_cases() {
        let recs = scan(2, 1, 1e-8).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].verdict, Verdict::Ge1Numeric);
        let recs = scan_with(2, 6, 1e-8, 2).unwrap();
        let find = |d: &[u32]| recs.iter().find(|r| r.digits == d).unwrap().verdict;
        assert_eq!(find(&[1, 4]), Verdict::Lt1Numeric);
        assert_eq!(find(&[1, 3]), Verdict::Ge1Numeric);
        let halved = scan(2, 6, 5e-9).unwrap();
        for (a, b) in recs.iter().zip(&halved) {
            assert_eq!(a.digits, b.digits);
            if !a.inconclusive {
                assert_eq!(a.verdict, b.verdict);
            }
        }
    }

    #[test]
    fn large_digit_is_certified() {
        let r = scan_record(&[3, 23], 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedLt1);
        assert!(r.upper_bound.unwrap().value < 1.0);
    }
}
