//! Command-line front end. `main.rs` only forwards to [`run`].

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bounds::{scan_with, Verdict};
use crate::cfrac::{convergents, digits_string, parse_digits, spectral, PeriodSpec};
use crate::error::{Error, Result};
use crate::limitfn::{c_k_closed_with, g_limit_with, LimitOptions, T_CAP};
use crate::sudler_direct::{subsequence_indices, sudler_trajectory, sudler_with, DirectOptions};
use crate::verify::{self, Corpus, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

const SCHEMA: &str = "# schema=1";

#[derive(Parser, Debug)]
#[command(name = "sudler", version, about = "Sudler products, their subsequence limits and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate G_k(α, ε) over a grid of ε.
    LimitFn(LimitFnArgs),
    /// Closed-form C_k next to the direct product at the largest feasible index.
    Constants(ConstantsArgs),
    /// Classify every digit tuple up to rotation.
    Scan(ScanArgs),
    /// Run the identity and property suites.
    Verify(VerifyArgs),
    /// Direct Sudler products P_N(α).
    Sudler(SudlerArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Target accuracy of the limit-function evaluations.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Working precision of direct products; 53 selects plain doubles.
    #[arg(long, default_value_t = 128)]
    precision_bits: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct LimitFnArgs {
    /// Comma separated period, e.g. 1,4.
    #[arg(long)]
    period: String,
    #[arg(long)]
    k: usize,
    /// ε grid as min:max:step.
    #[arg(long, allow_hyphen_values = true)]
    eps: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long)]
    period: String,
    /// Largest q_n used for the direct product.
    #[arg(long, default_value_t = 1_000_000)]
    q_max: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    max_digit: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Suites to run (repeatable or comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long, value_enum, default_value_t = CorpusArg::Default)]
    corpus: CorpusArg,
    /// Extra period added to the corpus.
    #[arg(long)]
    period: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CorpusArg {
    Default,
    Exhaustive,
}

#[derive(Args, Debug)]
struct SudlerArgs {
    #[arg(long)]
    period: String,
    /// Range of N as a:b.
    #[arg(long = "N")]
    n: Option<String>,
    /// Emit P along q_{mℓ+k} instead of a range of N.
    #[arg(long)]
    subseq: bool,
    #[arg(long)]
    k: Option<usize>,
    /// Range of m as a:b, with --subseq.
    #[arg(long)]
    m: Option<String>,
    #[command(flatten)]
    common: Common,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_range(s: &str, what: &str) -> Result<(u64, u64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("{what} expects a:b with a <= b, got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: u64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: u64 = parts[1].trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// `min:max:step` into the grid `min + i·step`, endpoints included.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("--eps expects min:max:step with step > 0 and min <= max, got {s:?}"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    // tolerate rounding in (hi − lo)/step
    let n = ((hi - lo) / step + 1e-9).floor() as u64;
    if n > 10_000_000 {
        return Err(bad());
    }
    // with step = 1/p for an integer p, i/p is correctly rounded and 0 stays 0
    let inv = 1.0 / step;
    let start = lo * inv;
    if (inv - inv.round()).abs() < 1e-9 * inv && (start - start.round()).abs() < 1e-6 {
        let (inv, start) = (inv.round(), start.round());
        return Ok((0..=n).map(|i| (start + i as f64) / inv).collect());
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    footer: Vec<String>,
}

enum Cell {
    Num(f64),
    Int(String),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(s) | Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(num(*x)),
            Cell::Int(s) => s.parse::<u64>().map(|v| json!(v)).unwrap_or_else(|_| json!(s)),
            Cell::Text(s) => json!(s),
        }
    }
}

impl Table {
    fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut out = Vec::new();
                out.extend_from_slice(SCHEMA.as_bytes());
                out.push(b'\n');
                {
                    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
                    w.write_record(&self.header).map_err(|e| Error::Internal(e.to_string()))?;
                    for row in &self.rows {
                        w.write_record(row.iter().map(Cell::csv)).map_err(|e| Error::Internal(e.to_string()))?;
                    }
                    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
                }
                for line in &self.footer {
                    out.extend_from_slice(format!("# {line}\n").as_bytes());
                }
                Ok(out)
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let mut m = Map::new();
                        for (h, c) in self.header.iter().zip(r) {
                            m.insert(h.to_string(), c.json());
                        }
                        Value::Object(m)
                    })
                    .collect();
                let mut v = json!({ "schema": 1, "rows": rows });
                if !self.footer.is_empty() {
                    v["summary"] = json!(self.footer);
                }
                let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Internal(e.to_string()))?;
                s.push('\n');
                Ok(s.into_bytes())
            }
        }
    }
}

fn limit_opts(c: &Common) -> Result<LimitOptions> {
    if !(c.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    if c.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    Ok(LimitOptions { tol: c.tol, workers: c.workers, t_cap: T_CAP })
}

fn direct_opts(c: &Common) -> Result<DirectOptions> {
    if c.precision_bits < 24 {
        return Err(usage("--precision-bits must be at least 24"));
    }
    Ok(DirectOptions { precision_bits: c.precision_bits, workers: c.workers.max(1) })
}

fn cmd_limit_fn(a: &LimitFnArgs) -> Result<Table> {
    let opts = limit_opts(&a.common)?;
    let grid = parse_grid(&a.eps)?;
    let spec = spectral(&PeriodSpec::parse(&a.period, a.k)?)?;
    let mut rows = Vec::with_capacity(grid.len());
    for eps in grid {
        let g = g_limit_with(&spec, eps, &opts)?;
        rows.push(vec![Cell::Num(eps), Cell::Num(g.value), Cell::Int(g.t_max.to_string()), Cell::Num(g.tail_bound), Cell::Text(g.flags())]);
    }
    Ok(Table { header: vec!["eps", "value", "T", "tail_bound", "flags"], rows, footer: vec![] })
}

fn cmd_constants(a: &ConstantsArgs) -> Result<Table> {
    let lopts = limit_opts(&a.common)?;
    let dopts = direct_opts(&a.common)?;
    let digits = parse_digits(&a.period)?;
    let mut rows = Vec::new();
    for k in 1..=digits.len() {
        let period = PeriodSpec::new(digits.clone(), k)?;
        let closed = c_k_closed_with(&spectral(&period)?, &lopts)?.value;
        let idx = subsequence_indices(&period, a.q_max);
        let (empirical, q_used) = match idx.last() {
            Some(&(_, n)) => {
                let q = convergents(&digits, n).1[n].to_u64().ok_or_else(|| usage("q_n out of range"))?;
                (sudler_with(&period, q, &dopts)?.value_f64(), q)
            }
            None => (f64::NAN, 0),
        };
        rows.push(vec![
            Cell::Int(k.to_string()),
            Cell::Num(closed),
            Cell::Num(empirical),
            Cell::Num((closed - empirical).abs()),
            Cell::Int(q_used.to_string()),
        ]);
    }
    Ok(Table { header: vec!["k", "C_closed", "C_empirical", "gap", "q_n_used"], rows, footer: vec![] })
}

fn cmd_scan(a: &ScanArgs) -> Result<Table> {
    let opts = limit_opts(&a.common)?;
    if a.ell == 0 || a.max_digit == 0 {
        return Err(usage("--ell and --max-digit must be at least 1"));
    }
    let records = scan_with(a.ell, a.max_digit, opts.tol, opts.workers)?;
    let mut counts = [0usize; 3];
    let mut inconclusive = 0;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        counts[match r.verdict {
            Verdict::CertifiedLt1 => 0,
            Verdict::Lt1Numeric => 1,
            Verdict::Ge1Numeric => 2,
        }] += 1;
        let mut verdict = r.verdict.to_string();
        if r.inconclusive {
            inconclusive += 1;
            verdict.push_str("|inconclusive");
        }
        rows.push(vec![
            Cell::Text(digits_string(&r.digits)),
            Cell::Int(r.k_max.to_string()),
            Cell::Int(r.q_ell.to_string()),
            Cell::Num(r.c_kmax),
            r.upper_bound.as_ref().map_or(Cell::Text(String::new()), |u| Cell::Num(u.value)),
            Cell::Text(verdict),
        ]);
    }
    let footer = vec![format!(
        "summary total={} certified_lt_1={} lt_1_numeric={} ge_1_numeric={} inconclusive={}",
        records.len(),
        counts[0],
        counts[1],
        counts[2],
        inconclusive
    )];
    Ok(Table { header: vec!["digits", "k_max", "q_ell", "C_kmax", "upper_bound", "verdict"], rows, footer })
}

fn cmd_sudler(a: &SudlerArgs) -> Result<Table> {
    let dopts = direct_opts(&a.common)?;
    let digits = parse_digits(&a.period)?;
    if a.subseq {
        let k = a.k.ok_or_else(|| usage("--subseq needs --k"))?;
        let (m0, m1) = parse_range(a.m.as_deref().ok_or_else(|| usage("--subseq needs --m a:b"))?, "--m")?;
        let period = PeriodSpec::new(digits.clone(), k)?;
        let l = digits.len() as u64;
        let n_hi = (m1 * l + k as u64) as usize;
        let q = convergents(&digits, n_hi).1;
        let mut rows = Vec::new();
        for m in m0..=m1 {
            let n = (m * l + k as u64) as usize;
            let qn = q[n].to_u64().filter(|&v| v <= 1u64 << 36).ok_or_else(|| usage(format!("q_n at m = {m} is too large")))?;
            let p = sudler_with(&period, qn, &dopts)?;
            rows.push(vec![Cell::Int(m.to_string()), Cell::Int(qn.to_string()), Cell::Num(p.value_f64()), Cell::Num(p.log_f64())]);
        }
        return Ok(Table { header: vec!["m", "N", "P", "logP"], rows, footer: vec![] });
    }
    if a.k.is_some() || a.m.is_some() {
        return Err(usage("--k and --m are only meaningful with --subseq"));
    }
    let (n0, n1) = parse_range(a.n.as_deref().ok_or_else(|| usage("sudler needs --N a:b or --subseq"))?, "--N")?;
    if n1 > 1u64 << 32 {
        return Err(usage("--N upper end is too large"));
    }
    let period = PeriodSpec::new(digits, 1)?;
    let traj = sudler_trajectory(&period, n1, dopts.precision_bits)?;
    let mut rows = Vec::new();
    for n in n0..=n1 {
        let log_p = if n == 0 { 0.0 } else { traj[(n - 1) as usize].to_f64() };
        rows.push(vec![Cell::Int(n.to_string()), Cell::Num(log_p.exp()), Cell::Num(log_p)]);
    }
    Ok(Table { header: vec!["N", "P", "logP"], rows, footer: vec![] })
}

fn cmd_verify(a: &VerifyArgs) -> Result<(Vec<u8>, bool, Vec<String>)> {
    let mut extra = Vec::new();
    for p in &a.period {
        extra.push(parse_digits(p)?);
    }
    if !(a.common.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let opts = VerifyOptions {
        corpus: match a.corpus {
            CorpusArg::Default => Corpus::Default,
            CorpusArg::Exhaustive => Corpus::Exhaustive,
        },
        seed: a.common.seed,
        tol: a.common.tol,
        precision_bits: a.common.precision_bits,
        suites: if a.suite.is_empty() { None } else { Some(a.suite.clone()) },
        extra_periods: extra,
    };
    let reports = verify::run(&opts)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|(_, r)| !r.pass)
        .map(|(n, r)| format!("suite {n} failed: {}", r.failures.first().cloned().unwrap_or_default()))
        .collect();
    let mut body = verify::to_json(&reports).into_bytes();
    body.push(b'\n');
    Ok((body, failed.is_empty(), failed))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8], stdout: &mut dyn Write) -> io::Result<()> {
    match out {
        Some(path) => File::create(path)?.write_all(bytes),
        None => stdout.write_all(bytes),
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::LimitFn(a) => &a.common,
        Command::Constants(a) => &a.common,
        Command::Scan(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Sudler(a) => &a.common,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let c = common(&cli.command);
    let (bytes, code, messages) = match &cli.command {
        Command::Verify(a) => match cmd_verify(a) {
            Ok((body, true, _)) => (body, EXIT_OK, vec![]),
            Ok((body, false, msgs)) => (body, EXIT_VERIFY, msgs),
            Err(e) => (Vec::new(), EXIT_USAGE, vec![format!("error: {e}")]),
        },
        cmd => {
            let table = match cmd {
                Command::LimitFn(a) => cmd_limit_fn(a),
                Command::Constants(a) => cmd_constants(a),
                Command::Scan(a) => cmd_scan(a),
                Command::Sudler(a) => cmd_sudler(a),
                Command::Verify(_) => unreachable!(),
            };
            match table.and_then(|t| t.render(c.format)) {
                Ok(b) => (b, EXIT_OK, vec![]),
                Err(e) => (Vec::new(), EXIT_USAGE, vec![format!("error: {e}")]),
            }
        }
    };
    for m in &messages {
        let _ = writeln!(stderr, "{m}");
    }
    if !bytes.is_empty() {
        if let Err(e) = emit(&c.out, &bytes, stdout) {
            let _ = writeln!(stderr, "error: cannot write output: {e}");
            return EXIT_USAGE;
        }
    }
    code
}
