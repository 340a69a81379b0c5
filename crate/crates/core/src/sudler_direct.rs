//! Brute-force Sudler products, the perturbed subsequence products and their
//! three-factor split `P_{q_n}(α, ε) = A_n · B_n · C_n`.
//!
//! Orbit points `{rα}` come from the exact stepper; floats only appear inside
//! the sine. Log-terms are added with compensated summation. At 53 bits the
//! kernel runs on `f64`, above that on MPFR at the requested precision.

use rayon::prelude::*;
use rug::{Float, Integer};

use crate::cfrac::{convergents, lambda_from, PeriodNumber, PeriodSpec};
use crate::error::{Error, Result};
use crate::orbit::OrbitStepper;
use crate::quadfield::SurdScratch;
use crate::real::{unit_roundoff, CompSum, Mp, Scalar};

pub const DEFAULT_PRECISION_BITS: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectOptions {
    pub precision_bits: u32,
    pub workers: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions { precision_bits: DEFAULT_PRECISION_BITS, workers: 1 }
    }
}

impl DirectOptions {
    pub fn with_precision(precision_bits: u32) -> Self {
        DirectOptions { precision_bits, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct ProductValue {
    /// Natural log of the product; `-inf` when a factor vanishes.
    pub log_value: Float,
    pub value: Float,
    pub n_terms: u64,
    /// Bound on the rounding accumulated in `log_value`.
    pub est_error: f64,
    pub precision_bits: u32,
}

impl ProductValue {
    pub fn log_f64(&self) -> f64 {
        self.log_value.to_f64()
    }

    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }

    fn from_log(log_value: Float, n_terms: u64, est_error: f64, precision_bits: u32) -> Self {
        let value = Float::with_val(precision_bits, log_value.exp_ref());
        ProductValue { log_value, value, n_terms, est_error, precision_bits }
    }
}

/// Partial log-sum over one chunk of the orbit.
struct Partial<S: Scalar> {
    sum: CompSum<S>,
    err: f64,
    zero: bool,
}

/// `Σ_{r=lo}^{hi} log|2 sin π(rα + shift)|` over one chunk.
fn chunk_log_sum<S: Scalar>(number: &PeriodNumber, lo: u64, hi: u64, shift: Option<&S>, prec: u32) -> Result<Partial<S>> {
    let sqrt_d = S::sqrt_of(&number.d, prec);
    let two = S::from_f64(2.0, prec);
    let u = unit_roundoff(prec);
    let shift_abs = shift.map(|s| s.abs().to_f64()).unwrap_or(0.0);
    let mut st = OrbitStepper::new(&number.value, lo, hi - lo + 1);
    let mut scratch = SurdScratch::new();
    let mut acc = Partial { sum: CompSum::new(prec), err: 0.0, zero: false };
    for r in lo..=hi {
        if st.is_integral() {
            return Err(Error::IntegralOrbitPoint(r));
        }
        let w = st.offset::<S>(&sqrt_d, prec);
        let (y, cond) = match shift {
            None => (w, 1.0),
            Some(s) => {
                let y = w.add(s);
                let ya = y.abs().to_f64();
                let cond = if ya > 0.0 { (w.abs().to_f64() + shift_abs) / ya } else { f64::INFINITY };
                (y, cond)
            }
        };
        let sn = y.sin_pi().abs();
        if sn.is_zero() {
            acc.zero = true;
        } else {
            let term = two.mul(&sn).ln();
            acc.err += u * (8.0 + term.abs().to_f64() + cond);
            acc.sum.add(&term);
        }
        if r < hi {
            st.advance(&mut scratch);
        }
    }
    Ok(acc)
}

fn chunk_bounds(n: u64, workers: usize) -> Vec<(u64, u64)> {
    let chunks = if n < 4096 { 1 } else { workers.max(1) as u64 };
    let base = n / chunks;
    let extra = n % chunks;
    let mut out = Vec::new();
    let mut lo = 1u64;
    for i in 0..chunks {
        let len = base + u64::from(i < extra);
        if len > 0 {
            out.push((lo, lo + len - 1));
            lo += len;
        }
    }
    out
}

fn run_chunks<S: Scalar>(number: &PeriodNumber, n: u64, shift: Option<S>, opts: &DirectOptions) -> Result<ProductValue> {
    let prec = opts.precision_bits;
    if n == 0 {
        return Ok(ProductValue::from_log(Float::with_val(prec, 0), 0, 0.0, prec));
    }
    let bounds = chunk_bounds(n, opts.workers);
    let eval = |&(lo, hi): &(u64, u64)| chunk_log_sum::<S>(number, lo, hi, shift.as_ref(), prec);
    let partials: Vec<Result<Partial<S>>> = if bounds.len() == 1 {
        bounds.iter().map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| bounds.par_iter().map(eval).collect())
    };
    let mut total = CompSum::<S>::new(prec);
    let mut err = 0.0;
    let mut zero = false;
    for p in partials {
        let p = p?;
        total.merge(&p.sum);
        err += p.err;
        zero |= p.zero;
    }
    let log_value = if zero { Float::with_val(prec, f64::NEG_INFINITY) } else { total.value().to_float() };
    Ok(ProductValue::from_log(Float::with_val(prec, log_value), n, err, prec))
}

/// `P_N(α) = ∏_{r=1}^N 2|sin πrα|`.
pub fn sudler(period: &PeriodSpec, n: u64, precision_bits: u32) -> Result<ProductValue> {
    sudler_with(period, n, &DirectOptions::with_precision(precision_bits))
}

pub fn sudler_with(period: &PeriodSpec, n: u64, opts: &DirectOptions) -> Result<ProductValue> {
    let number = PeriodNumber::new(period.digits(), period.ell() + 1)?;
    if opts.precision_bits <= 53 {
        run_chunks::<f64>(&number, n, None, opts)
    } else {
        run_chunks::<Mp>(&number, n, None, opts)
    }
}

/// `log P_N(α)` for every `N` in `1..=n_max`, in one sequential pass.
pub fn sudler_trajectory(period: &PeriodSpec, n_max: u64, precision_bits: u32) -> Result<Vec<Float>> {
    let number = PeriodNumber::new(period.digits(), period.ell() + 1)?;
    if precision_bits <= 53 {
        trajectory::<f64>(&number, n_max, precision_bits)
    } else {
        trajectory::<Mp>(&number, n_max, precision_bits)
    }
}

fn trajectory<S: Scalar>(number: &PeriodNumber, n_max: u64, prec: u32) -> Result<Vec<Float>> {
    let mut out = Vec::with_capacity(n_max as usize);
    if n_max == 0 {
        return Ok(out);
    }
    let sqrt_d = S::sqrt_of(&number.d, prec);
    let two = S::from_f64(2.0, prec);
    let mut st = OrbitStepper::new(&number.value, 1, n_max);
    let mut scratch = SurdScratch::new();
    let mut sum = CompSum::<S>::new(prec);
    for r in 1..=n_max {
        if st.is_integral() {
            return Err(Error::IntegralOrbitPoint(r));
        }
        let w = st.offset::<S>(&sqrt_d, prec);
        sum.add(&two.mul(&w.sin_pi().abs()).ln());
        out.push(Float::with_val(prec, sum.value().to_float()));
        st.advance(&mut scratch);
    }
    Ok(out)
}

fn q_n_u64(number: &PeriodNumber, n: usize) -> Result<(u64, u64)> {
    let qn = number.q[n].to_u64().ok_or_else(|| Error::InvalidArgument(format!("q_{n} exceeds 64 bits")))?;
    let qn1 = number.q[n - 1].to_u64().unwrap();
    Ok((qn, qn1))
}

fn sign_n(n: usize) -> f64 {
    // (−1)^{n+1}
    if n % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `P_{q_n}(α, ε) = ∏_{r=1}^{q_n} 2|sin π(rα + (−1)^{n+1} ε/q_n)|`.
pub fn perturbed(period: &PeriodSpec, n: usize, eps: f64, precision_bits: u32) -> Result<ProductValue> {
    perturbed_with(period, n, eps, &DirectOptions::with_precision(precision_bits))
}

pub fn perturbed_with(period: &PeriodSpec, n: usize, eps: f64, opts: &DirectOptions) -> Result<ProductValue> {
    if n < 2 {
        return Err(Error::InvalidArgument("perturbed products need n >= 2".into()));
    }
    let number = PeriodNumber::new(period.digits(), n + 1)?;
    let (qn, _) = q_n_u64(&number, n)?;
    let prec = opts.precision_bits;
    let signed = sign_n(n) * eps;
    if prec <= 53 {
        let shift = (eps != 0.0).then(|| signed / qn as f64);
        run_chunks::<f64>(&number, qn, shift, opts)
    } else {
        let shift = (eps != 0.0).then(|| Mp(Float::with_val(prec, signed) / qn));
        run_chunks::<Mp>(&number, qn, shift, opts)
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub a_n: Float,
    pub b_n: Float,
    pub c_n: Float,
    pub log_a: Float,
    pub log_b: Float,
    pub log_c: Float,
    /// `s_n(0, ε)`.
    pub s0: Float,
    /// A few `(t, s_n(t))` pairs spread over `1..q_n`.
    pub s_samples: Vec<(u64, f64)>,
    pub q_n: u64,
}

impl Decomposition {
    pub fn log_product(&self) -> f64 {
        let p = self.log_a.prec();
        Float::with_val(p, &self.log_a + &self.log_b).to_f64() + self.log_c.to_f64()
    }

    pub fn product(&self) -> Float {
        let p = self.a_n.prec();
        Float::with_val(p, &self.a_n * &self.b_n) * &self.c_n
    }
}

/// The factors `A_n(ε)`, `B_n` and `C_n(ε)` of `P_{q_n}(α, ε)`, each computed
/// from its own closed expression.
pub fn decompose(period: &PeriodSpec, n: usize, eps: f64, precision_bits: u32) -> Result<Decomposition> {
    if n < 2 {
        return Err(Error::InvalidArgument("decompose needs n >= 2".into()));
    }
    if precision_bits <= 53 {
        decompose_in::<f64>(period, n, eps, precision_bits)
    } else {
        decompose_in::<Mp>(period, n, eps, precision_bits)
    }
}

fn decompose_in<S: Scalar>(period: &PeriodSpec, n: usize, eps: f64, prec: u32) -> Result<Decomposition> {
    let number = PeriodNumber::new(period.digits(), n + 1)?;
    let (qn, qn1) = q_n_u64(&number, n)?;
    let lambda = lambda_from(&number, n);
    let lam = S::from_qx(&lambda, prec);
    let lam_abs = lam.abs();
    let qn_s = S::from_integer(&Integer::from(qn), prec);
    let delta = S::from_f64(sign_n(n) * eps, prec).div(&qn_s);
    let two = S::from_f64(2.0, prec);
    let half = S::from_f64(0.5, prec);

    let a_n = two.mul(&qn_s).mul(&lam.add(&delta).sin_pi().abs());
    let s0 = two.mul(&lam.mul(&half).add(&delta).sin_pi());
    let s0_sq = s0.mul(&s0);
    let one = S::from_f64(1.0, prec);

    let mut log_b = CompSum::<S>::new(prec);
    let mut log_c = CompSum::<S>::new(prec);
    let stride = (qn / 16).max(1);
    let mut samples = Vec::new();
    for t in 1..qn {
        // {t q_{n−1}/q_n} − 1/2 = (2 (t q_{n−1} mod q_n) − q_n) / (2 q_n)
        let m = ((t as u128 * qn1 as u128) % qn as u128) as i128;
        let centered = S::from_i128(2 * m - qn as i128, prec).div(&two.mul(&qn_s));
        let shift = lam_abs.mul(&centered);
        // sin π(t/q − x) = sin π((q − t)/q + x) keeps the argument small
        let (tt, arg) = if 2 * t <= qn {
            let tt = S::from_i128(t as i128, prec).div(&qn_s);
            (tt.clone(), tt.sub(&shift))
        } else {
            let tt = S::from_i128((qn - t) as i128, prec).div(&qn_s);
            (tt.clone(), tt.add(&shift))
        };
        let st = two.mul(&arg.sin_pi());
        if st.is_zero() {
            return Err(Error::ZeroFactor(t));
        }
        let den = two.mul(&tt.sin_pi());
        log_b.add(&st.div(&den).abs().ln());
        let ratio = one.sub(&s0_sq.div(&st.mul(&st))).abs();
        log_c.add(&half.mul(&ratio.ln()));
        if t % stride == 0 && samples.len() < 16 {
            samples.push((t, st.to_f64()));
        }
    }
    let lb = log_b.value().to_float();
    let lc = log_c.value().to_float();
    let la = Float::with_val(prec, a_n.to_float().ln_ref());
    Ok(Decomposition {
        a_n: Float::with_val(prec, a_n.to_float()),
        b_n: Float::with_val(prec, lb.exp_ref()),
        c_n: Float::with_val(prec, lc.exp_ref()),
        log_a: la,
        log_b: Float::with_val(prec, lb),
        log_c: Float::with_val(prec, lc),
        s0: Float::with_val(prec, s0.to_float()),
        s_samples: samples,
        q_n: qn,
    })
}

/// Paper-indexed `q_n` for a period, as a big integer table.
pub fn q_table(period: &PeriodSpec, n_max: usize) -> Vec<Integer> {
    convergents(period.digits(), n_max).1
}

/// Largest `n = mℓ + k` (with `k` taken mod `ℓ`) whose `q_n ≤ q_max`, and the
/// matching `m` list in increasing order.
pub fn subsequence_indices(period: &PeriodSpec, q_max: u64) -> Vec<(u32, usize)> {
    let l = period.ell();
    let k = period.k() % l;
    let mut out = Vec::new();
    let mut n_max = 4 * l + 8;
    loop {
        let q = q_table(period, n_max);
        if q[n_max] > q_max {
            for m in 0u32.. {
                let n = m as usize * l + k;
                if n > n_max {
                    break;
                }
                if n >= 2 && q[n] <= q_max {
                    out.push((m, n));
                }
            }
            return out;
        }
        n_max *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per(d: &[u32], k: usize) -> PeriodSpec {
        PeriodSpec::new(d.to_vec(), k).unwrap()
    }

    #[test]
    fn empty_product_is_one() {
        for prec in [53, 128] {
            let v = sudler(&per(&[1], 1), 0, prec).unwrap();
            assert_eq!(v.value_f64(), 1.0);
            assert_eq!(v.n_terms, 0);
        }
    }

    #[test]
    fn first_golden_factor() {
        // 2 sin(π(√5 − 1)/2), evaluated at 300 bits
        let x = Float::with_val(300, 5).sqrt() - 1u32;
        let x = x / 2u32 * Float::with_val(300, rug::float::Constant::Pi);
        let expect = (x.sin() * 2u32).to_f64();
        for prec in [53, 128] {
            let got = sudler(&per(&[1], 1), 1, prec).unwrap().value_f64();
            assert!((got - expect).abs() < 1e-15, "{got} {expect}");
        }
        assert!((expect - 1.8640).abs() < 1e-4);
    }

    #[test]
    fn f64_and_mpfr_paths_agree() {
        let p = per(&[2, 3], 1);
        let lo = sudler(&p, 5000, 53).unwrap();
        let hi = sudler(&p, 5000, 128).unwrap();
        assert!((lo.log_f64() - hi.log_f64()).abs() < lo.est_error + 1e-20);
        assert!(hi.est_error < 1e-30);
    }

    #[test]
    fn workers_do_not_change_the_value_beyond_rounding() {
        let p = per(&[1, 2], 1);
        let one = sudler_with(&p, 20000, &DirectOptions { precision_bits: 53, workers: 1 }).unwrap();
        let four = sudler_with(&p, 20000, &DirectOptions { precision_bits: 53, workers: 4 }).unwrap();
        let again = sudler_with(&p, 20000, &DirectOptions { precision_bits: 53, workers: 4 }).unwrap();
        assert!((one.log_f64() - four.log_f64()).abs() <= one.est_error);
        assert_eq!(four.log_value, again.log_value);
    }

    #[test]
    fn trajectory_matches_pointwise() {
        let p = per(&[1, 5], 1);
        let traj = sudler_trajectory(&p, 300, 53).unwrap();
        for n in [1u64, 17, 300] {
            let direct = sudler(&p, n, 53).unwrap().log_f64();
            assert!((traj[n as usize - 1].to_f64() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_at_zero_is_sudler() {
        let p = per(&[1, 2], 2);
        let (_, q) = convergents(p.digits(), 10);
        for prec in [53, 128] {
            let a = perturbed(&p, 10, 0.0, prec).unwrap();
            let b = sudler(&p, q[10].to_u64().unwrap(), prec).unwrap();
            assert_eq!(a.log_value, b.log_value);
        }
    }

    #[test]
    fn perturbation_sign_follows_index_parity() {
        // at odd n the shift is +ε/q_n, at even n it is −ε/q_n
        let p = per(&[1, 2], 1);
        let (_, q) = convergents(p.digits(), 10);
        for n in [7usize, 8] {
            let qn = q[n].to_u64().unwrap();
            let got = perturbed(&p, n, 0.3, 53).unwrap().log_f64();
            let alpha = PeriodNumber::new(p.digits(), 3).unwrap().value.to_f64();
            let s = if n % 2 == 1 { 0.3 } else { -0.3 } / qn as f64;
            let manual: f64 = (1..=qn).map(|r| (2.0 * (std::f64::consts::PI * (r as f64 * alpha + s)).sin().abs()).ln()).sum();
            assert!((got - manual).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn perturbed_subsequence_is_cauchy() {
        let p = per(&[1, 2], 2);
        let vals: Vec<f64> = (3..=8).map(|m| perturbed(&p, 2 * m + 2, 0.1, 53).unwrap().value_f64()).collect();
        let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(diffs.last().unwrap() < &1e-5);
    }

    #[test]
    fn decomposition_reproduces_product() {
        for prec in [53, 128] {
            let p = per(&[1, 2], 1);
            let d = decompose(&p, 8, 0.1, prec).unwrap();
            let direct = perturbed(&p, 8, 0.1, prec).unwrap();
            let rel = (d.log_product() - direct.log_f64()).abs();
            assert!(rel < 1e-10, "prec {prec}: {rel}");
        }
    }

    #[test]
    fn decomposition_trivial_factors_when_q_is_one() {
        let d = decompose(&per(&[1, 2], 1), 2, 0.2, 53).unwrap();
        assert_eq!(d.q_n, 1);
        assert_eq!(d.b_n.to_f64(), 1.0);
        assert_eq!(d.c_n.to_f64(), 1.0);
    }

    #[test]
    fn a_n_tends_to_two_pi_ckek() {
        let p = per(&[1, 2], 2);
        let s = crate::cfrac::spectral(&p).unwrap();
        let target = 2.0 * std::f64::consts::PI * s.ckek().to_f64();
        let d = decompose(&p, 20, 0.0, 53).unwrap();
        assert!((d.a_n.to_f64() - target).abs() < 1e-6);
    }

    #[test]
    fn subsequence_index_list() {
        let idx = subsequence_indices(&per(&[1], 1), 1_000_000);
        let (_, n) = *idx.last().unwrap();
        let q = q_table(&per(&[1], 1), n + 1);
        assert!(q[n] <= 1_000_000 && q[n + 1] > 1_000_000);
    }
}
