//! Closed-form limit functions `G_k(α, ε)`, the constants `C_k = G_k(α, 0)` and
//! the residuals of their functional equations.
//!
//! Every quantity here is a weighted sum `Σ_j w_j log|G(x_j)|` with
//! `G(x) = ∏_t (1 − x²/u_k(t)²)`. Since `u_k(t) = At + δ_t` with `|δ_t| ≤ 1`,
//! each factor is divided by its unperturbed counterpart `1 − x²/(At)²`, whose
//! full product is the closed form `sin(πx/A)/(πx/A)`. The quotients decay like
//! `x²δ_t/(At)³`, and the bounded discrepancy of `δ_t` makes their tail
//! summable at rate `log T / T³`, so a few thousand terms reach `1e−8` where a
//! plain truncation would need around `10⁸`.
//!
//! For one `t`, abscissae with `|x_j| ≤ (u − 1)/3` are summed together through
//! precomputed power sums `Σ w_j x_j^{2i}`; only the few large ones are taken
//! factor by factor.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use rug::Integer;

use crate::cfrac::{permute_digits, spectral, u_of_t, Perm, PeriodSpec, SpectralData};
use crate::error::{Error, Result};
use crate::orbit::OrbitStepper;
use crate::quadfield::{QuadExt, SurdScratch};
use crate::real::{CompSum, Scalar};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const T_CAP: u64 = 100_000_000;
const SERIES_ORDER: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitOptions {
    pub tol: f64,
    pub workers: usize,
    pub t_cap: u64,
}

impl LimitOptions {
    pub fn with_tol(tol: f64) -> Self {
        LimitOptions { tol, workers: 1, t_cap: T_CAP }
    }
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self::with_tol(DEFAULT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedProduct {
    pub value: f64,
    pub log_value: f64,
    /// The plain truncated product `∏_{t ≤ T}` without the sinc resummation.
    pub raw_value: f64,
    pub raw_log_value: f64,
    pub t_max: u64,
    /// Bound on the neglected part of `log_value`.
    pub tail_bound: f64,
    /// `−Σ w_j x_j²`, the coefficient of `1/u²` in the grouped log-factor;
    /// `log_value − raw_log_value ≈ κ/(A²T)`.
    pub kappa: f64,
    pub zero_factor: bool,
    /// False when `T_CAP` was reached before the tail bound met the tolerance.
    pub converged: bool,
}

impl TruncatedProduct {
    fn zero(t_max: u64) -> Self {
        TruncatedProduct {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            raw_value: 0.0,
            raw_log_value: f64::NEG_INFINITY,
            t_max,
            tail_bound: 0.0,
            kappa: 0.0,
            zero_factor: true,
            converged: true,
        }
    }

    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.zero_factor {
            f.push("zero");
        }
        if !self.converged {
            f.push("capped");
        }
        f.join("|")
    }
}

/// One abscissa `x` with its weight, and the exact value when known.
#[derive(Clone, Debug)]
pub struct Term {
    pub x: f64,
    pub w: f64,
    pub exact: Option<QuadExt>,
}

impl Term {
    pub fn float(x: f64, w: f64) -> Self {
        Term { x: x.abs(), w, exact: None }
    }

    pub fn exact(x: QuadExt, w: f64) -> Self {
        let x = x.abs();
        Term { x: x.to_f64(), w, exact: Some(x) }
    }
}

/// Precomputed per-abscissa data.
struct Prepared {
    x: f64,
    w: f64,
    /// `round(x/A)` when `x ≥ A/2`, else 0; that factor is handled in `base`.
    m: u64,
}

struct Engine {
    a: f64,
    alpha_sigma: QuadExt,
    terms: Vec<Prepared>,
    /// `prefix[i][k−1] = Σ_{j<i} w_j x_j^{2k}`.
    prefix: Vec<[f64; SERIES_ORDER]>,
    /// Largest `x_j²` among the first `i` abscissae.
    prefix_xmax2: Vec<f64>,
    /// `Σ_j w_j log|sinc(πx_j/A)|` with the `t = m_j` factor replaced by the
    /// true `1 − x_j²/u(m_j)²`.
    base: f64,
    zero: bool,
    disc_k: f64,
    disc_c: f64,
    sum_abs_wx2: f64,
    kappa: f64,
}

fn log_sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        -z * z * PI * PI / 6.0
    } else {
        ((PI * z).sin() / (PI * z)).abs().ln()
    }
}

impl Engine {
    fn new(spec: &SpectralData, terms: &[Term]) -> Result<Self> {
        let a = spec.big_a_f64();
        let mut items: Vec<&Term> = terms.iter().filter(|t| t.x != 0.0 && t.w != 0.0).collect();
        items.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap_or(Ordering::Equal));
        let mut prepared = Vec::with_capacity(items.len());
        let mut base = CompSum::<f64>::new(53);
        let mut zero = false;
        for term in &items {
            let x = term.x;
            if x < a / 2.0 {
                base.add(&(term.w * log_sinc(x / a)));
                prepared.push(Prepared { x, w: term.w, m: 0 });
                continue;
            }
            let m = (x / a).round().max(1.0) as u64;
            let am = a * m as f64;
            let d = x / a - m as f64;
            // sinc(πx/A) / (1 − x²/(Am)²) = ±sinc(πd)·(Am)²/(x(Am + x))
            let without_m = log_sinc(d) + 2.0 * am.ln() - x.ln() - (am + x).ln();
            let u_exact = u_of_t(spec, m)?;
            let u = u_exact.to_f64();
            let gap = match &term.exact {
                Some(xe) => u_exact.try_sub(xe)?.to_f64(),
                None => u - x,
            };
            let factor = gap.abs() * (u + x) / (u * u);
            if gap == 0.0 || factor < 1e-300 {
                zero = true;
            } else {
                base.add(&(term.w * (without_m + factor.ln())));
            }
            prepared.push(Prepared { x, w: term.w, m });
        }
        let mut prefix = Vec::with_capacity(prepared.len() + 1);
        let mut prefix_xmax2 = Vec::with_capacity(prepared.len() + 1);
        let mut acc = [0.0f64; SERIES_ORDER];
        let mut xmax2 = 0.0f64;
        prefix.push(acc);
        prefix_xmax2.push(0.0);
        for p in &prepared {
            let x2 = p.x * p.x;
            let mut pw = x2;
            for slot in acc.iter_mut() {
                *slot += p.w * pw;
                pw *= x2;
            }
            xmax2 = xmax2.max(x2);
            prefix.push(acc);
            prefix_xmax2.push(xmax2);
        }
        // discrepancy constants of the partial sums of δ_t
        let amax = spec.period.max_digit().max(2) as f64;
        let disc_k = amax / (4.0 * amax.ln()) + 12.0;
        let disc_c = amax / 4.0 + 11.5;
        let sum_abs_wx2 = prepared.iter().map(|p| p.w.abs() * p.x * p.x).sum();
        let kappa = -prepared.iter().map(|p| p.w * p.x * p.x).sum::<f64>();
        Ok(Engine {
            a,
            alpha_sigma: spec.alpha_sigma_k.clone(),
            terms: prepared,
            prefix,
            prefix_xmax2,
            base: base.value(),
            zero,
            disc_k,
            disc_c,
            sum_abs_wx2,
            kappa,
        })
    }

    fn x_max(&self) -> f64 {
        self.terms.last().map(|p| p.x).unwrap_or(0.0)
    }

    /// Smallest admissible truncation: every neglected factor has `x ≤ u/4`.
    fn t_min(&self) -> u64 {
        (((4.0 * self.x_max() + 4.0) / self.a).ceil() as u64).max(64)
    }

    fn tail_bound(&self, t: u64) -> f64 {
        let t = t as f64;
        let a3 = self.a.powi(3);
        let first = 2.14 * (self.disc_c + self.disc_k * (t.ln() + 4.0 / 3.0)) / (a3 * t.powi(3));
        let second = 1.2 / (a3 * self.a * t.powi(3));
        self.sum_abs_wx2 * (first + second)
    }

    /// `Σ_j w_j Σ_{t>T} log(1 − x_j²/(At)²)`, the part of the sinc product a
    /// plain truncation at `T` would drop.
    fn sinc_tail(&self, t: u64) -> f64 {
        let all = self.prefix.last().unwrap();
        let tf = t as f64;
        let inv_a2 = 1.0 / (self.a * self.a);
        let mut total = 0.0;
        let mut apow = 1.0;
        for (i, p) in all.iter().enumerate() {
            let k = (i + 1) as f64;
            apow *= inv_a2;
            let s = 2.0 * k;
            // Euler–Maclaurin for Σ_{n>T} n^{−s}
            let zeta = tf.powf(1.0 - s) / (s - 1.0) - tf.powf(-s) / 2.0 + s * tf.powf(-s - 1.0) / 12.0
                - s * (s + 1.0) * (s + 2.0) * tf.powf(-s - 3.0) / 720.0;
            let term = p / k * apow * zeta;
            total -= term;
            if term.abs() < 1e-30 {
                break;
            }
        }
        total
    }

    /// Grouped log-factors for `t ∈ [lo, hi]`.
    fn block(&self, lo: u64, hi: u64) -> (CompSum<f64>, bool) {
        let sqrt_d = f64::sqrt_of(self.alpha_sigma.d(), 53);
        let mut st = OrbitStepper::new(&self.alpha_sigma, lo, hi - lo + 1);
        let mut scratch = SurdScratch::new();
        let mut sum = CompSum::<f64>::new(53);
        let mut zero = false;
        let n = self.terms.len();
        let mut split = 0usize;
        for t in lo..=hi {
            let frac: f64 = st.frac(&sqrt_d, 53);
            let delta = 1.0 - 2.0 * frac;
            let v = self.a * t as f64;
            let u = v + delta;
            let lim = (u - 1.0) / 3.0;
            while split < n && self.terms[split].x <= lim {
                split += 1;
            }
            let mut grouped = 0.0;
            if split > 0 {
                let z = 1.0 / (u * u);
                let zv = 1.0 / (v * v);
                // v^{−2k} − u^{−2k} = (zv − z)·h_k
                let dz = delta * (2.0 * v + delta) * z * zv;
                let rho = self.prefix_xmax2[split] * zv;
                let coeffs = &self.prefix[split];
                let mut h = 1.0;
                let mut z_pow = 1.0;
                let mut acc = 0.0;
                let mut rho_pow = 1.0;
                for (i, c) in coeffs.iter().enumerate() {
                    acc += c / (i + 1) as f64 * h;
                    rho_pow *= rho;
                    if rho_pow < 1e-20 {
                        break;
                    }
                    z_pow *= z;
                    h = zv * h + z_pow;
                }
                grouped += dz * acc;
            }
            for p in &self.terms[split..] {
                if p.m == t {
                    continue;
                }
                let x = p.x;
                let num = (u - x) * (u + x) * v * v;
                let den = (v - x) * (v + x) * u * u;
                if num == 0.0 {
                    zero = true;
                    continue;
                }
                grouped += p.w * (num / den).abs().ln();
            }
            sum.add(&grouped);
            if t < hi {
                st.advance(&mut scratch);
            }
        }
        (sum, zero)
    }

    fn run(&self, opts: &LimitOptions) -> Result<TruncatedProduct> {
        if self.zero {
            return Ok(TruncatedProduct::zero(0));
        }
        if self.terms.is_empty() {
            return Ok(TruncatedProduct {
                value: self.base.exp(),
                log_value: self.base,
                raw_value: self.base.exp(),
                raw_log_value: self.base,
                t_max: 0,
                tail_bound: 0.0,
                kappa: 0.0,
                zero_factor: false,
                converged: true,
            });
        }
        let budget = opts.tol / 2.0;
        let mut t_end = self.t_min();
        while self.tail_bound(t_end) > budget && t_end < opts.t_cap {
            t_end = (t_end * 2).min(opts.t_cap);
        }
        let ranges = split_range(1, t_end, opts.workers);
        let parts: Vec<(CompSum<f64>, bool)> = if ranges.len() == 1 {
            vec![self.block(1, t_end)]
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            pool.install(|| ranges.par_iter().map(|&(lo, hi)| self.block(lo, hi)).collect())
        };
        let mut total = CompSum::<f64>::new(53);
        total.add(&self.base);
        for (s, z) in &parts {
            if *z {
                return Ok(TruncatedProduct::zero(t_end));
            }
            total.merge(s);
        }
        let log_value = total.value();
        let raw_log_value = log_value - self.sinc_tail(t_end);
        let tail_bound = self.tail_bound(t_end);
        Ok(TruncatedProduct {
            value: log_value.exp(),
            log_value,
            raw_value: raw_log_value.exp(),
            raw_log_value,
            t_max: t_end,
            tail_bound,
            kappa: self.kappa,
            zero_factor: false,
            converged: tail_bound <= budget,
        })
    }
}

fn split_range(lo: u64, hi: u64, workers: usize) -> Vec<(u64, u64)> {
    let n = hi - lo + 1;
    let chunks = if n < 8192 { 1 } else { workers.max(1) as u64 };
    let base = n / chunks;
    let extra = n % chunks;
    let mut out = Vec::new();
    let mut start = lo;
    for i in 0..chunks {
        let len = base + u64::from(i < extra);
        if len > 0 {
            out.push((start, start + len - 1));
            start += len;
        }
    }
    out
}

/// `Σ_j w_j log|G(x_j)|` plus the constant `log_const`.
pub fn weighted_log_product(spec: &SpectralData, terms: &[Term], log_const: f64, opts: &LimitOptions) -> Result<TruncatedProduct> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", opts.tol)));
    }
    let engine = Engine::new(spec, terms)?;
    let mut out = engine.run(opts)?;
    if !out.zero_factor {
        out.log_value += log_const;
        out.raw_log_value += log_const;
        out.value = out.log_value.exp();
        out.raw_value = out.raw_log_value.exp();
    }
    Ok(out)
}

/// `G(x) = ∏_{t≥1} (1 − x²/u_k(t)²)`.
pub fn g_of_x(spec: &SpectralData, x: f64, tol: f64) -> Result<TruncatedProduct> {
    g_of_x_with(spec, Term::float(x, 1.0), &LimitOptions::with_tol(tol))
}

/// `G(x)` at an exact abscissa, so a vanishing factor is detected exactly.
pub fn g_of_x_exact(spec: &SpectralData, x: &QuadExt, tol: f64) -> Result<TruncatedProduct> {
    g_of_x_with(spec, Term::exact(x.clone(), 1.0), &LimitOptions::with_tol(tol))
}

pub fn g_of_x_with(spec: &SpectralData, term: Term, opts: &LimitOptions) -> Result<TruncatedProduct> {
    let sign = g_sign(spec, &term)?;
    let mut out = weighted_log_product(spec, &[term], 0.0, opts)?;
    if !out.zero_factor {
        out.value = sign * out.value;
        out.raw_value = sign * out.raw_value;
    }
    Ok(out)
}

/// `(−1)^{#{t : u(t) < |x|}}`, the sign of `G(x)`.
fn g_sign(spec: &SpectralData, term: &Term) -> Result<f64> {
    let a = spec.big_a_f64();
    let t_hi = ((term.x + 1.0) / a).ceil() as u64 + 1;
    let mut negative = false;
    for t in 1..=t_hi {
        let u = u_of_t(spec, t)?;
        let below = match &term.exact {
            Some(x) => u.cmp_exact(x)? == Ordering::Less,
            None => u.to_f64() < term.x,
        };
        negative ^= below;
    }
    Ok(if negative { -1.0 } else { 1.0 })
}

fn ln_factorial(c: &Integer) -> f64 {
    let n = c.to_u64().unwrap_or(u64::MAX);
    (2..=n).map(|s| (s as f64).ln()).sum()
}

/// The terms of `G_k(α, ε)` as printed, without the prefactor.
fn limit_terms(spec: &SpectralData, eps: f64, use_a: bool) -> Result<(Vec<Term>, f64)> {
    let d = &spec.d;
    let c = spec.c.to_f64();
    let x_eps = 1.0 + eps * spec.big_a_f64();
    let mut terms = vec![Term::float(x_eps, 1.0)];
    if spec.is_even() {
        if spec.c <= 2 {
            return Err(Error::Internal(format!("even period with c = {}", spec.c)));
        }
        let w = 1.0 / (c - 2.0);
        // 1/|b| = a for even ℓ; the two spellings feed independent code paths
        let inv_b2 = if use_a { &spec.a * &spec.a } else { spec.b.abs().recip()?.pow(2) };
        let one = QuadExt::from_int(1, d);
        let big = &one + &inv_b2.scale(&Integer::from(2));
        terms.push(Term::exact(big, w));
        let cu = spec.c.to_u64().ok_or_else(|| Error::InvalidArgument("c too large".into()))?;
        for s in 1..cu {
            terms.push(Term::exact(QuadExt::from_int(2 * s + 1, d), -w));
        }
        let log_const = ((&one + &inv_b2).to_f64().ln() - ln_factorial(&spec.c)) * w;
        Ok((terms, log_const))
    } else {
        let w = 1.0 / c;
        let inv_b = if use_a { spec.a.clone() } else { spec.b.abs().recip()? };
        let cu = spec.c.to_u64().ok_or_else(|| Error::InvalidArgument("c too large".into()))?;
        for s in 0..cu {
            let x = QuadExt::from_int(1 + 2 * s as i64, d) - inv_b.scale(&Integer::from(2));
            terms.push(Term::exact(x, -w));
        }
        let mut log_const = 0.0;
        for s in 1..=cu {
            log_const -= QuadExt::from_int(s, d).try_sub(&spec.a)?.abs().to_f64().ln() * w;
        }
        Ok((terms, log_const))
    }
}

/// `G_k(α, ε)` for the period and `k` carried by `spec`.
pub fn g_limit(spec: &SpectralData, eps: f64, tol: f64) -> Result<TruncatedProduct> {
    g_limit_with(spec, eps, &LimitOptions::with_tol(tol))
}

pub fn g_limit_with(spec: &SpectralData, eps: f64, opts: &LimitOptions) -> Result<TruncatedProduct> {
    let pref = 1.0 + eps * spec.inv_ckek.to_f64();
    if pref.abs() <= 4.0 * f64::EPSILON * (1.0 + eps.abs() * spec.inv_ckek.to_f64()) {
        return Ok(TruncatedProduct::zero(0));
    }
    let (terms, log_const) = limit_terms(spec, eps, false)?;
    weighted_log_product(spec, &terms, log_const + pref.abs().ln(), opts)
}

/// `C_k = G_k(α, 0)` through the product formulas in terms of `a`.
pub fn c_k_closed(spec: &SpectralData, tol: f64) -> Result<TruncatedProduct> {
    c_k_closed_with(spec, &LimitOptions::with_tol(tol))
}

pub fn c_k_closed_with(spec: &SpectralData, opts: &LimitOptions) -> Result<TruncatedProduct> {
    let (terms, log_const) = limit_terms(spec, 0.0, true)?;
    let mut terms = terms;
    terms[0] = Term::exact(QuadExt::from_int(1, &spec.d), 1.0);
    weighted_log_product(spec, &terms, log_const, opts)
}

/// `|LHS/RHS − 1|` for the functional equation matching the parity of `ℓ`.
pub fn functional_residual(spec: &SpectralData, tol: f64) -> Result<f64> {
    let opts = LimitOptions::with_tol(tol);
    let ckek = spec.ckek().to_f64();
    let cu = spec.c.to_u64().ok_or_else(|| Error::InvalidArgument("c too large".into()))?;
    let mut lhs = CompSum::<f64>::new(53);
    let log_of = |eps: f64| -> Result<f64> {
        let g = g_limit_with(spec, eps, &opts)?;
        if g.zero_factor {
            Err(Error::InvalidArgument(format!("G_k vanishes at eps = {eps}")))
        } else {
            Ok(g.log_value)
        }
    };
    let rhs = if spec.is_even() {
        for s in 0..cu {
            lhs.add(&log_of(s as f64 * ckek)?);
        }
        let inv_b2 = spec.a.to_f64().powi(2);
        log_of(0.0)? + log_of(ckek * inv_b2)?
    } else {
        let inv_b = spec.a.to_f64();
        for s in 0..cu {
            lhs.add(&log_of(ckek * (s as f64 - inv_b))?);
        }
        0.0
    };
    Ok((lhs.value() - rhs).exp_m1().abs())
}

/// `|G_{k+1}(α, ε) − G_k(β, ε)|` with `β` the Gauss-map image of `α`, i.e. the
/// period rotated by one place.
pub fn gauss_invariance_residual(period: &PeriodSpec, eps: f64, tol: f64) -> Result<f64> {
    let l = period.ell();
    let k = period.k();
    let beta = PeriodSpec::new(permute_digits(period.digits(), Perm::Tau, 1), k)?;
    let next = if k == l { 1 } else { k + 1 };
    let alpha = period.with_k(next)?;
    let ga = g_limit(&spectral(&alpha)?, eps, tol)?;
    let gb = g_limit(&spectral(&beta)?, eps, tol)?;
    Ok((ga.value - gb.value).abs())
}
