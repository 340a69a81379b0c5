//! Acceptance criteria 1–9, one line each. Runs as a plain binary so the
//! summary is printed on success too; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sudler::bounds::{ck_upper, reduced_bound_even, reduced_bound_odd, reduced_bound_q1, reduced_bound_q1_relaxed, sandwich, threshold, Branch};
use sudler::cfrac::{convergents, spectral, PeriodSpec};
use sudler::limitfn::{c_k_closed, functional_residual, gauss_invariance_residual};
use sudler::sudler_direct::{subsequence_indices, sudler};
use sudler::verify::{self, bound_corpus, decomposition_error, gauss_cases, numeric_corpus, sandwich_samples, Corpus, VerifyOptions};

const TOL: f64 = 1e-8;
const ORACLE_GAP: f64 = 1e-4;
const ORACLE_Q_MAX: u64 = 1_000_000;
const THRESHOLD_MARGIN: f64 = 10.0 * TOL;
const RESIDUAL_LIMIT: f64 = 1e-6;
const DECOMPOSITION_REL: f64 = 1e-9;
const DECOMPOSITION_Q_MAX: u64 = 100_000;
const DECOMPOSITION_BITS: u32 = 128;
const SEED: u64 = 0x5EED_0001;

type Outcome = Result<String, String>;

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for digits in [vec![1u32], vec![1, 2], vec![2, 3], vec![1, 1, 2], vec![1, 4]] {
        for k in 1..=digits.len() {
            let period = PeriodSpec::new(digits.clone(), k).map_err(|e| e.to_string())?;
            let c = c_k_closed(&spectral(&period).map_err(|e| e.to_string())?, 1e-10).map_err(|e| e.to_string())?.value;
            let idx = subsequence_indices(&period, ORACLE_Q_MAX);
            let last: Vec<_> = idx.iter().rev().take(3).rev().collect();
            if last.len() < 3 {
                return Err(format!("{digits:?} k={k}: fewer than three indices below the cap"));
            }
            let q = convergents(&digits, last[2].1).1;
            let mut gaps = Vec::new();
            for &&(_, n) in &last {
                let p = sudler(&period, q[n].to_u64().unwrap(), 53).map_err(|e| e.to_string())?;
                gaps.push((p.value_f64() - c).abs());
            }
            if !(gaps[0] > gaps[1] && gaps[1] > gaps[2]) {
                return Err(format!("{digits:?} k={k}: gaps not decreasing {gaps:?}"));
            }
            if gaps[2] >= ORACLE_GAP {
                return Err(format!("{digits:?} k={k}: gap {:e} at q = {}", gaps[2], q[last[2].1]));
            }
            worst = worst.max(gaps[2]);
            cases += 1;
        }
    }
    Ok(format!("{cases} (period, k) pairs, worst final gap {worst:.3e} < {ORACLE_GAP:e}, all decreasing"))
}

fn c2(a1: u32, a2: u32) -> Result<f64, String> {
    let s = spectral(&PeriodSpec::new(vec![a1, a2], 2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(c_k_closed(&s, TOL).map_err(|e| e.to_string())?.value)
}

fn criterion_2() -> Outcome {
    let mut closest: f64 = f64::INFINITY;
    for (a1, below_from, range) in [(1u32, 4u32, 2..=10u32), (2, 5, 3..=10)] {
        for a2 in range {
            let c = c2(a1, a2)?;
            closest = closest.min((c - 1.0).abs());
            let want_below = a2 >= below_from;
            if (c < 1.0) != want_below || (c - 1.0).abs() < THRESHOLD_MARGIN {
                return Err(format!("C_2({a1},{a2}) = {c}"));
            }
        }
    }
    Ok(format!("(1,a2) < 1 iff a2 >= 4, (2,a2) < 1 iff a2 >= 5; closest |C-1| = {closest:.4e}"))
}

fn criterion_3() -> Outcome {
    let mut values = Vec::new();
    let mut wrong = Vec::new();
    for b in 1..=12u32 {
        let s = spectral(&PeriodSpec::new(vec![b], 1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let c = c_k_closed(&s, TOL).map_err(|e| e.to_string())?.value;
        if (c < 1.0) != (b >= 6) || (c - 1.0).abs() < THRESHOLD_MARGIN {
            wrong.push(format!("C([0; {b}]) = {c:.8}"));
        }
        values.push(c);
    }
    if !wrong.is_empty() {
        return Err(format!("expected < 1 exactly for b >= 6, got {}", wrong.join(", ")));
    }
    Ok(format!("C(5) = {:.6}, C(6) = {:.6}; < 1 exactly for b in 6..=12", values[4], values[5]))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let ell = rng.gen_range(2..=5);
        let mut digits: Vec<u32> = (0..ell).map(|_| rng.gen_range(1..=40)).collect();
        let pos = rng.gen_range(0..ell);
        digits[pos] = digits[pos].max(rng.gen_range(23..=60));
        let max = *digits.iter().max().unwrap();
        let k = digits.iter().position(|&d| d == max).unwrap() + 1;
        let s = spectral(&PeriodSpec::new(digits.clone(), k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let u = ck_upper(&s).map_err(|e| e.to_string())?;
        if u.value >= 1.0 {
            return Err(format!("{digits:?}: bound {} ({:?})", u.value, u.kind));
        }
        worst = worst.max(u.value);
    }
    let odd = reduced_bound_odd(22).unwrap();
    let q1 = reduced_bound_q1(21).unwrap();
    let q1_relaxed = reduced_bound_q1_relaxed(21).unwrap();
    let even = reduced_bound_even(23).unwrap();
    if !(odd < 1.0 && q1 < 1.0 && q1_relaxed < 1.0 && even < 1.0) {
        return Err(format!("boundary values odd(22) = {odd}, q1(21) = {q1}, even(23) = {even}"));
    }
    let thresholds = (
        threshold(reduced_bound_odd).unwrap(),
        threshold(reduced_bound_q1_relaxed).unwrap(),
        threshold(reduced_bound_even).unwrap(),
    );
    if thresholds != (22, 21, 23) {
        return Err(format!("thresholds {thresholds:?}"));
    }
    Ok(format!(
        "50 random periods (ell 2..=5) bounded by {worst:.4}; odd(22) = {odd:.4}, q1(21) = {q1_relaxed:.4}, even(23) = {even:.4}; thresholds 22/21/23"
    ))
}

fn criterion_5() -> Outcome {
    let even: [&[u32]; 10] = [&[1, 2], &[2, 3], &[1, 4], &[2, 5], &[3, 1], &[1, 7], &[4, 5], &[1, 2, 1, 3], &[2, 2, 1, 1], &[1, 1, 1, 2]];
    let odd: [&[u32]; 10] = [&[1], &[2], &[3], &[5], &[1, 1, 2], &[3, 1, 2], &[4, 1, 2], &[1, 2, 3], &[2, 2, 1], &[1, 1, 1, 1, 2]];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in even.iter().chain(odd.iter()) {
        for k in 1..=d.len() {
            let s = spectral(&PeriodSpec::new(d.to_vec(), k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let r = functional_residual(&s, TOL).map_err(|e| e.to_string())?;
            if !(r < RESIDUAL_LIMIT) {
                return Err(format!("{d:?} k={k}: residual {r:e}"));
            }
            worst = worst.max(r);
            cases += 1;
        }
    }
    Ok(format!("{cases} (period, k) cases over 10 even + 10 odd periods, worst residual {worst:.3e}"))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in numeric_corpus() {
        let period = PeriodSpec::new(d.clone(), 1).map_err(|e| e.to_string())?;
        let q = convergents(&d, 120).1;
        for n in 2..q.len() {
            if q[n] > DECOMPOSITION_Q_MAX {
                break;
            }
            for eps in [0.0, 0.25, -0.25] {
                let e = decomposition_error(&period, n, eps, DECOMPOSITION_BITS).map_err(|e| e.to_string())?;
                if !(e < DECOMPOSITION_REL) {
                    return Err(format!("{d:?} n={n} eps={eps}: relative error {e:e}"));
                }
                worst = worst.max(e);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (period, n, eps) cases at {DECOMPOSITION_BITS} bits, worst relative error {worst:.3e}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let mut counts = [0usize; 3];
    let mut bound_cases = 0;
    for d in bound_corpus().into_iter().take(5) {
        let max = *d.iter().max().unwrap();
        let k = d.iter().position(|&v| v == max).unwrap() + 1;
        let s = spectral(&PeriodSpec::new(d.clone(), k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for x in sandwich_samples(&s, 100, &mut rng) {
            let r = sandwich(&s, x, TOL).map_err(|e| e.to_string())?;
            if !r.holds {
                return Err(format!("{d:?} x={x}: {r:?}"));
            }
            counts[match r.branch {
                Branch::SmallX => 0,
                Branch::MEqualsOne => 1,
                Branch::LargeX => 2,
            }] += 1;
        }
        let upper = ck_upper(&s).map_err(|e| e.to_string())?.value;
        let c = c_k_closed(&s, TOL).map_err(|e| e.to_string())?.value;
        if c > upper {
            return Err(format!("{d:?}: C = {c} exceeds bound {upper}"));
        }
        bound_cases += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(format!("branch coverage {counts:?}"));
    }
    Ok(format!(
        "500 samples (small_x {}, m_equals_1 {}, large_x {}), zero violations; ck_upper >= C_k on {bound_cases} periods",
        counts[0], counts[1], counts[2]
    ))
}

fn criterion_8() -> Outcome {
    let suites = ["qnrel", "identities", "ckek_formula", "ckek_bracket", "lambda", "rt_bracket", "rt_products", "discrepancy"];
    let opts = VerifyOptions {
        corpus: Corpus::Exhaustive,
        suites: Some(suites.iter().map(|s| s.to_string()).collect()),
        ..Default::default()
    };
    let reports = verify::run(&opts).map_err(|e| e.to_string())?;
    let mut total = 0;
    for (name, r) in &reports {
        if !r.pass {
            return Err(format!("suite {name}: {:?}", r.failures.first()));
        }
        total += r.cases;
    }
    Ok(format!("{} suites, {total} cases over all rotation classes with ell <= 4, digits <= 8, plus random periods", reports.len()))
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    let cases = gauss_cases();
    for (d, k, eps) in &cases {
        let p = PeriodSpec::new(d.clone(), *k).map_err(|e| e.to_string())?;
        let r = gauss_invariance_residual(&p, *eps, TOL).map_err(|e| e.to_string())?;
        if !(r < RESIDUAL_LIMIT) {
            return Err(format!("{d:?} k={k} eps={eps}: residual {r:e}"));
        }
        worst = worst.max(r);
    }
    Ok(format!("{} period/eps pairs, worst residual {worst:.3e}", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {n}: PASS ({secs:.1}s) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
