//! Identity and property suites run by `sudler verify` and the acceptance
//! tests.
//!
//! Identities between integers or field elements are checked exactly. Suites
//! built on inequalities report the worst normalized slack as their residual,
//! `(lhs − rhs)/|rhs|` for a claim `lhs ≤ rhs`, so a passing suite has a
//! residual `≤ 0`. Suites built on numerical agreement report the worst error.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::ops::RemRounding;
use rug::Integer;
use serde::Serialize;

use crate::bounds::{canonical_tuples, ck_upper, sandwich, MIN_BOUND_DIGIT};
use crate::cfrac::{convergents, lambda_from, r_of_t, spectral, PeriodNumber, PeriodSpec, SpectralData};
use crate::error::{Error, Result};
use crate::limitfn::{c_k_closed, functional_residual, gauss_invariance_residual};
use crate::orbit::OrbitStepper;
use crate::quadfield::{QuadExt, SurdScratch};
use crate::sudler_direct::{decompose, perturbed};

pub const SUITES: &[&str] = &[
    "qnrel",
    "identities",
    "ckek_formula",
    "ckek_bracket",
    "lambda",
    "rt_bracket",
    "rt_products",
    "discrepancy",
    "decomposition",
    "functional",
    "sandwich",
    "bound_validity",
    "gauss",
];

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corpus {
    Default,
    Exhaustive,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub corpus: Corpus,
    pub seed: u64,
    pub tol: f64,
    pub precision_bits: u32,
    /// Restrict to these suites; `None` runs all of them.
    pub suites: Option<Vec<String>>,
    /// Periods appended to every corpus.
    pub extra_periods: Vec<Vec<u32>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { corpus: Corpus::Default, seed: DEFAULT_SEED, tol: 1e-8, precision_bits: 53, suites: None, extra_periods: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub worst_residual: f64,
    pub cases: u64,
    #[serde(skip)]
    pub failures: Vec<String>,
}

/// Accumulates cases for one suite.
#[derive(Debug)]
struct Tally {
    worst: f64,
    cases: u64,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { worst: f64::NEG_INFINITY, cases: 0, failures: Vec::new() }
    }

    fn fail(&mut self, what: String) {
        if self.failures.len() < 20 {
            self.failures.push(what);
        }
    }

    /// An exact check; residual 0 when it holds, 1 otherwise.
    fn exact(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(if ok { 0.0 } else { 1.0 });
        if !ok {
            self.fail(what());
        }
    }

    /// `lhs ≤ rhs`, judged exactly by `ok`, with a float slack for reporting.
    fn le(&mut self, ok: bool, lhs: f64, rhs: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let slack = (lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE);
        self.worst = self.worst.max(slack);
        if !ok {
            self.fail(what());
        }
    }

    /// A numerical error that must stay below `limit`.
    fn err(&mut self, err: f64, limit: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(err);
        if !(err < limit) {
            self.fail(what());
        }
    }

    fn report(self) -> SuiteReport {
        SuiteReport {
            pass: self.failures.is_empty(),
            worst_residual: if self.cases == 0 { 0.0 } else { self.worst },
            cases: self.cases,
            failures: self.failures,
        }
    }
}

/// Periods used by the numerical suites.
pub fn numeric_corpus() -> Vec<Vec<u32>> {
    vec![
        vec![1],
        vec![2],
        vec![1, 2],
        vec![2, 3],
        vec![1, 4],
        vec![2, 5],
        vec![1, 1, 2],
        vec![3, 1, 2],
        vec![1, 2, 1, 3],
        vec![4, 1, 2],
    ]
}

/// Periods with a maximal digit `≥ 6`, for the bound suites.
pub fn bound_corpus() -> Vec<Vec<u32>> {
    vec![vec![7], vec![1, 7], vec![3, 8], vec![2, 1, 6], vec![1, 2, 3, 9], vec![6, 6, 1]]
}

/// Periods for the exact suites: all rotation classes up to the corpus size
/// plus seeded random periods with larger digits.
pub fn identity_corpus(corpus: Corpus, seed: u64) -> Vec<Vec<u32>> {
    let (max_ell, max_digit, n_random) = match corpus {
        Corpus::Default => (3, 5, 12),
        Corpus::Exhaustive => (4, 8, 60),
    };
    let mut out = Vec::new();
    for ell in 1..=max_ell {
        out.extend(canonical_tuples(ell, max_digit));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let ell = rng.gen_range(1..=6);
        out.push((0..ell).map(|_| rng.gen_range(1..=60)).collect());
    }
    out
}

fn specs_for(digits: &[u32]) -> Result<Vec<SpectralData>> {
    (1..=digits.len()).map(|k| spectral(&PeriodSpec::new(digits.to_vec(), k)?)).collect()
}

fn suite_qnrel(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let l = d.len();
        let number = PeriodNumber::new(d, 2 * l + 1)?;
        let (_, q) = convergents(d, 6 * l + 20);
        let sign: i32 = if l % 2 == 1 { 1 } else { -1 };
        for n in 2 * l..q.len() - l {
            let rhs = Integer::from(&number.c * &q[n]) + Integer::from(&q[n - l] * sign);
            tally.exact(q[n + l] == rhs, || format!("{d:?}: n = {n}"));
        }
    }
    Ok(tally.report())
}

fn suite_identities(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            let k = s.period.k();
            let l = s.ell();
            let (tau, sig) = (&s.tau, &s.sigma);
            let tag = || format!("{d:?}, k = {k}");
            tally.exact(s.c == tau.c && s.c == sig.c, || format!("c invariance, {}", tag()));
            tally.exact(tau.q_ell() == sig.q_ell(), || format!("q_l(tau) = q_l(sigma), {}", tag()));
            tally.exact(tau.p_ell() == &sig.q[l - 1] && sig.p_ell() == &tau.q[l - 1], || format!("p_l/q_l-1 swap, {}", tag()));
            let lhs = Integer::from(&tau.q[l + 1] * sig.q_ell());
            let rhs = Integer::from(tau.q_ell() * sig.q_ell()) * s.a_k() + Integer::from(sig.p_ell() * tau.q_ell());
            tally.exact(lhs == rhs, || format!("q_l+1 ratio, {}", tag()));
            let denom = QuadExt::from_int(s.c.clone(), &s.d).try_sub(&s.b.scale(&Integer::from(2)))?;
            let ckek = QuadExt::from_int(tau.q_ell().clone(), &s.d).try_div(&denom)?;
            tally.exact(ckek == s.ckek(), || format!("|c_k e_k| = q_l/(c - 2b), {}", tag()));
            tally.exact(s.c_k.signum().is_gt(), || format!("c_k > 0, {}", tag()));
        }
    }
    Ok(tally.report())
}

fn suite_ckek_formula(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            let dd = &s.d;
            let rhs = QuadExt::from_int(s.a_k(), dd)
                .try_add(&QuadExt::from_ratio(s.sigma.p_ell().clone(), s.sigma.q_ell().clone(), dd)?)?
                .try_add(&QuadExt::from_ratio(s.tau.p_ell().clone(), s.tau.q_ell().clone(), dd)?)?
                .try_sub(&s.b.scale_ratio(&Integer::from(2), s.tau.q_ell())?)?;
            tally.exact(rhs == s.inv_ckek, || format!("{d:?}, k = {}", s.period.k()));
        }
    }
    Ok(tally.report())
}

fn suite_ckek_bracket(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            let a_k = s.a_k();
            let lo = s.inv_ckek.cmp_int(&Integer::from(a_k)).is_gt();
            let hi = s.inv_ckek.cmp_int(&Integer::from(a_k + 2)).is_lt();
            let v = s.inv_ckek.to_f64();
            tally.le(lo && hi, v - (a_k as f64 + 2.0), 1.0, || format!("{d:?}, k = {}: {v}", s.period.k()));
        }
    }
    Ok(tally.report())
}

fn suite_lambda(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let l = d.len();
        for s in specs_for(d)? {
            let kk = s.k_mod;
            let number = PeriodNumber::new(d, 8 * l + kk + 2)?;
            let mut bm = s.one();
            for m in 0..8usize {
                let n = m * l + kk;
                if n >= 1 {
                    let lam = lambda_from(&number, n);
                    let ok = lam == &s.e_k * &bm && lam.signum().is_gt() == (n % 2 == 1);
                    tally.exact(ok, || format!("{d:?}, n = {n}"));
                }
                bm = &bm * &s.b;
            }
        }
    }
    Ok(tally.report())
}

fn suite_rt_bracket(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            let q = s.sigma.q_ell().clone();
            let Some(qu) = q.to_u64().filter(|&v| v <= 5000) else { continue };
            let q1 = s.sigma.q[s.ell() + 1].clone();
            let dd = &s.d;
            let a_k = s.a_k();
            let below = QuadExt::from_ratio(1, q1.clone(), dd)?;
            // even ℓ: a_k/(a_k+1) in general, which is ≥ 6/7 once a_k ≥ 6
            let above_even = QuadExt::from_ratio(a_k, Integer::from(a_k + 1) * &q * &q1, dd)?;
            let above_odd = QuadExt::from_ratio(1, Integer::from(7) * &q1, dd)?;
            for t in 1..qu {
                let rt = r_of_t(&s, t)?;
                let i = Integer::from(s.tau.p_ell() * t).rem_euc(q.clone());
                let base = QuadExt::from_ratio(i, q.clone(), dd)?;
                let lo = base.try_sub(&below)?;
                let (value, hi) = if s.is_even() {
                    (rt.r.clone(), base.try_sub(&above_even)?)
                } else {
                    (rt.r.try_add(&s.b)?, base.try_add(&above_odd)?)
                };
                let ok = lo.cmp_exact(&value)?.is_le() && value.cmp_exact(&hi)?.is_le();
                tally.le(ok, value.to_f64(), hi.to_f64(), || format!("{d:?}, k = {}, t = {t}", s.period.k()));
            }
        }
    }
    Ok(tally.report())
}

fn suite_rt_products(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            // stated for the maximal digit at least 6
            if !s.period.k_is_maximal() || s.a_k() < MIN_BOUND_DIGIT {
                continue;
            }
            let Some(q) = s.sigma.q_ell().to_u64().filter(|&v| v <= 20000) else { continue };
            let qf = q as f64;
            let mut log_prod = 0.0;
            for t in 1..q {
                let rt = r_of_t(&s, t)?;
                let dist = if s.is_even() { rt.dist } else { rt.dist_plus_b };
                log_prod += dist.to_f64().ln();
            }
            let log_bound = if s.is_even() {
                0.5 * qf.ln() - 2f64.ln() - (qf + 1.0) * (2.0 * std::f64::consts::E).ln()
            } else {
                (4.0 * PI).ln() - 3.0 - qf * (2.0 * std::f64::consts::E).ln()
            };
            // the float log-sum is accurate to far better than 1e-9
            let ok = log_prod >= log_bound - 1e-9;
            tally.le(ok, -log_prod, -log_bound, || format!("{d:?}, k = {}: {log_prod} < {log_bound}", s.period.k()));
        }
    }
    Ok(tally.report())
}

/// `log N (a/(4 log a) + 12) + a/4 + 23/2`; digits below 2 use `a = 2`.
pub fn discrepancy_bound(max_digit: u32, n: u64) -> f64 {
    let a = max_digit.max(2) as f64;
    let nf = n as f64;
    nf.min(nf.ln() * (a / (4.0 * a.ln()) + 12.0) + a / 4.0 + 11.5)
}

fn suite_discrepancy(corpus: &[Vec<u32>]) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let s = spectral(&PeriodSpec::new(d.clone(), 1)?)?;
        let max = *d.iter().max().unwrap();
        for start in [0u64, 997, 1_000_003] {
            let mut st = OrbitStepper::new(&s.alpha_sigma_k, start + 1, 1200);
            let mut scratch = SurdScratch::new();
            // Σ δ_t = N − 2 Σ {tα}, accumulated exactly
            let mut frac_sum = QuadExt::zero(&s.d);
            for n in 1..=1200u64 {
                frac_sum = frac_sum.try_add(&st.frac_exact())?;
                let sum = QuadExt::from_int(n, &s.d).try_sub(&frac_sum.scale(&Integer::from(2)))?;
                let bound = discrepancy_bound(max, n);
                // the bound is irrational; compare through a correctly rounded value
                let lhs = sum.abs().to_f64();
                let ok = lhs <= bound * (1.0 + 1e-12);
                tally.le(ok, lhs, bound, || format!("{d:?}, start = {start}, N = {n}: {lhs} > {bound}"));
                st.advance(&mut scratch);
            }
        }
    }
    Ok(tally.report())
}

/// Largest `n` with `q_n ≤ q_max`.
fn n_limit(digits: &[u32], q_max: u64) -> usize {
    let (_, q) = convergents(digits, 200);
    (1..q.len()).take_while(|&n| q[n] <= q_max).last().unwrap_or(1)
}

/// `A_n B_n C_n` against the direct perturbed product, relative error.
pub fn decomposition_error(period: &PeriodSpec, n: usize, eps: f64, prec: u32) -> Result<f64> {
    let dec = decompose(period, n, eps, prec)?;
    let direct = perturbed(period, n, eps, prec)?;
    Ok((dec.log_product() - direct.log_f64()).exp_m1().abs())
}

fn suite_decomposition(corpus: &[Vec<u32>], q_max: u64, prec: u32) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let p = PeriodSpec::new(d.clone(), 1)?;
        for n in 2..=n_limit(d, q_max) {
            for eps in [0.0, 0.25, -0.25] {
                let e = decomposition_error(&p, n, eps, prec)?;
                tally.err(e, 1e-9, || format!("{d:?}, n = {n}, eps = {eps}: {e:e}"));
            }
        }
    }
    Ok(tally.report())
}

fn suite_functional(corpus: &[Vec<u32>], tol: f64) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        for s in specs_for(d)? {
            let r = functional_residual(&s, tol)?;
            tally.err(r, 1e-6, || format!("{d:?}, k = {}: {r:e}", s.period.k()));
        }
    }
    Ok(tally.report())
}

/// Sample abscissae covering the three branches of the sandwich.
pub fn sandwich_samples(spec: &SpectralData, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = spec.big_a_f64();
    (0..count)
        .map(|i| match i % 3 {
            0 => rng.gen_range(-0.5..0.5) * a,
            1 => rng.gen_range(0.5..1.5) * a,
            _ => rng.gen_range(1.5..40.0) * a,
        })
        .collect()
}

fn suite_sandwich(corpus: &[Vec<u32>], tol: f64, rng: &mut ChaCha8Rng) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let max = *d.iter().max().unwrap();
        let k = d.iter().position(|&v| v == max).unwrap() + 1;
        let s = spectral(&PeriodSpec::new(d.clone(), k)?)?;
        for x in sandwich_samples(&s, 30, rng) {
            let r = sandwich(&s, x, tol)?;
            let slack = ((r.lower - r.g_value) / r.g_value).max((r.g_value - r.upper) / r.upper);
            tally.cases += 1;
            tally.worst = tally.worst.max(slack);
            if !r.holds {
                tally.fail(format!("{d:?}, x = {x}: {r:?}"));
            }
        }
    }
    Ok(tally.report())
}

fn suite_bound_validity(corpus: &[Vec<u32>], tol: f64) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for d in corpus {
        let max = *d.iter().max().unwrap();
        for s in specs_for(d)? {
            if s.a_k() != max {
                continue;
            }
            let upper = ck_upper(&s)?.value;
            let c = c_k_closed(&s, tol)?.value;
            tally.le(c <= upper, c, upper, || format!("{d:?}, k = {}: C = {c} > {upper}", s.period.k()));
        }
    }
    Ok(tally.report())
}

pub fn gauss_cases() -> Vec<(Vec<u32>, usize, f64)> {
    vec![
        (vec![1, 2], 1, 0.0),
        (vec![1, 2], 1, 0.3),
        (vec![1, 2], 2, -0.2),
        (vec![2, 5], 1, 0.0),
        (vec![1, 1, 2], 1, 0.1),
        (vec![1, 1, 2], 2, 0.0),
        (vec![3, 1, 2], 3, 0.25),
        (vec![1, 2, 1, 3], 2, 0.0),
        (vec![1, 2, 1, 3], 4, -0.3),
        (vec![4, 1, 2], 2, 0.5),
    ]
}

fn suite_gauss(tol: f64) -> Result<SuiteReport> {
    let mut tally = Tally::new();
    for (d, k, eps) in gauss_cases() {
        let r = gauss_invariance_residual(&PeriodSpec::new(d.clone(), k)?, eps, tol)?;
        tally.err(r, 1e-6, || format!("{d:?}, k = {k}, eps = {eps}: {r:e}"));
    }
    Ok(tally.report())
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<SuiteReport> {
    let with_extra = |mut v: Vec<Vec<u32>>| {
        v.extend(opts.extra_periods.iter().cloned());
        v
    };
    let ids = || with_extra(identity_corpus(opts.corpus, opts.seed));
    let q_max = match opts.corpus {
        Corpus::Default => 10_000,
        Corpus::Exhaustive => 100_000,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    match name {
        "qnrel" => suite_qnrel(&ids()),
        "identities" => suite_identities(&ids()),
        "ckek_formula" => suite_ckek_formula(&ids()),
        "ckek_bracket" => suite_ckek_bracket(&ids()),
        "lambda" => suite_lambda(&ids()),
        "rt_bracket" => suite_rt_bracket(&ids()),
        "rt_products" => {
            let mut corpus = ids();
            corpus.extend(bound_corpus());
            suite_rt_products(&corpus)
        }
        "discrepancy" => suite_discrepancy(&ids()),
        "decomposition" => suite_decomposition(&with_extra(numeric_corpus()), q_max, opts.precision_bits),
        "functional" => suite_functional(&with_extra(numeric_corpus()), opts.tol),
        "sandwich" => suite_sandwich(&bound_corpus(), opts.tol, &mut rng),
        "bound_validity" => suite_bound_validity(&bound_corpus(), opts.tol),
        "gauss" => suite_gauss(opts.tol),
        other => Err(Error::InvalidArgument(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", ")))),
    }
}

/// Runs the selected suites in a fixed order.
pub fn run(opts: &VerifyOptions) -> Result<BTreeMap<String, SuiteReport>> {
    let names: Vec<String> = match &opts.suites {
        Some(list) => {
            for n in list {
                if !SUITES.contains(&n.as_str()) {
                    return Err(Error::InvalidArgument(format!("unknown suite '{n}'")));
                }
            }
            list.clone()
        }
        None => SUITES.iter().map(|s| s.to_string()).collect(),
    };
    let mut out = BTreeMap::new();
    for n in names {
        let r = run_suite(&n, opts)?;
        out.insert(n, r);
    }
    Ok(out)
}

pub fn all_pass(reports: &BTreeMap<String, SuiteReport>) -> bool {
    reports.values().all(|r| r.pass)
}

pub fn to_json(reports: &BTreeMap<String, SuiteReport>) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}
