//! Command-line front end for the `fracexp` library.
//!
//! Exit codes: 0 success, 2 usage or invalid argument, 3 numerical failure
//! or resource guard, 4 domain error, 1 I/O failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use fracexp::coeff::{c_coefficient_analytic, c_coefficient_mc, McConfig};
use fracexp::expansion::{cond_expand_driftless, evaluate_truncation, expand_p0, CoeffSource, ExpandSettings, TermList};
use fracexp::expr::parse;
use fracexp::fbm::{FbmSampler, HurstIndex, TimeGrid};
use fracexp::fmt::fmt17;
use fracexp::mc::{mc_p0, McSettings};
use fracexp::sde::{doss_sussmann_solve, euler_young_solve, SdeProblem};
use fracexp::variance::{r_fn, sigma_h_sq, variance_scan};
use fracexp::word::Word;
use fracexp::{Error, ErrorKind};

const WORD_HELP: &str = "Binary word i_1...i_k, innermost integral first \
(0 = dt, 1 = dB). \"011\" is the integral of dt_1 dB_2 dB_3 with t_1 < t_2 < t_3";

#[derive(Parser)]
#[command(
    name = "fracexp",
    version,
    about = "Small-time expansions for SDEs driven by fractional Brownian motion (H > 1/2)",
    after_help = "Words are written innermost integral first: in \"011\" the dt integral is the innermost.\n\
                  Exit codes: 0 ok, 2 usage or invalid argument, 3 numerical failure, 4 domain error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected iterated integral c_I over the unit simplex.
    Coeff(CoeffArgs),
    /// Expansion of E[f(X_h)] - f(x0) in powers h^(2mH+n).
    Expand(ExpandArgs),
    /// Driftless expansion of E[f(B_{t+h}) - f(B_t) | B_t = beta].
    CondExpand(CondExpandArgs),
    /// Monte Carlo estimates of E[f(X_h)] - f(x0) against the truncated expansion.
    McCheck(McCheckArgs),
    /// Variance of the conditional increment along a grid of h.
    VarScan(VarScanArgs),
    /// The limit constant sigma_H^2.
    Sigma2(Sigma2Args),
    /// The function r(x) on a grid.
    RFn(RFnArgs),
    /// Exact fBm paths on a uniform grid.
    FbmSample(FbmSampleArgs),
    /// Solve dX = b(X) dt + sigma(X) dB along one sampled path.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output format [default: json for coeff and sigma2, csv otherwise].
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CoeffMethodArg {
    Analytic,
    Mc,
}

#[derive(Args, Serialize)]
struct CoeffArgs {
    #[arg(long, help = WORD_HELP)]
    word: String,
    #[arg(long)]
    hurst: f64,
    #[arg(long, value_enum, default_value = "analytic")]
    method: CoeffMethodArg,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Monte Carlo time steps per path.
    #[arg(long, default_value_t = 512)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quadrature tolerance for the analytic method.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SourceArg {
    Auto,
    Analytic,
    Mc,
}

#[derive(Args, Serialize)]
struct ExpandArgs {
    /// Test function, e.g. "sin(x)".
    #[arg(long)]
    f: String,
    /// Drift b(x).
    #[arg(long, default_value = "0")]
    b: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long)]
    hurst: f64,
    /// Keep exponents up to 2pH + q.
    #[arg(long)]
    p: u32,
    #[arg(long)]
    q: u32,
    /// How c_I is obtained; auto uses Monte Carlo only beyond three dt letters.
    #[arg(long, value_enum, default_value = "auto")]
    coeff_source: SourceArg,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 512)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct CondExpandArgs {
    #[arg(long)]
    f: String,
    /// Conditioning time.
    #[arg(long)]
    t: f64,
    /// Conditioning value of B_t.
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long)]
    hurst: f64,
    #[arg(long)]
    p: u32,
    #[arg(long)]
    q: u32,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct McCheckArgs {
    #[arg(long)]
    f: String,
    #[arg(long, default_value = "0")]
    b: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long)]
    hurst: f64,
    /// Comma-separated values of h.
    #[arg(long, value_parser = parse_grid)]
    h_grid: Grid,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 128)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation of the reference expansion.
    #[arg(long, default_value_t = 1)]
    p: u32,
    #[arg(long, default_value_t = 1)]
    q: u32,
    /// Plain sample mean without control variates.
    #[arg(long)]
    no_control_variates: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct VarScanArgs {
    #[arg(long)]
    t: f64,
    #[arg(long)]
    hurst: f64,
    #[arg(long)]
    alpha: f64,
    /// Strictly decreasing comma-separated values of h.
    #[arg(long, value_parser = parse_grid)]
    h_grid: Grid,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct Sigma2Args {
    #[arg(long)]
    hurst: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct RFnArgs {
    #[arg(long)]
    hurst: f64,
    /// Comma-separated positive values of x.
    #[arg(long, value_parser = parse_grid)]
    x_grid: Grid,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct FbmSampleArgs {
    #[arg(long)]
    hurst: f64,
    /// Grid points including t = 0.
    #[arg(long, default_value_t = 513)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolveMethod {
    Euler,
    Doss,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    /// Output the solution path only, without applying a test function.
    /// This is the only mode; the flag is accepted for explicitness.
    #[arg(long)]
    f_none: bool,
    #[arg(long, default_value = "0")]
    b: String,
    #[arg(long, default_value = "1")]
    sigma: String,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long)]
    hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    #[arg(long, value_enum, default_value = "euler")]
    method: SolveMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance of the Doss-Sussmann ODE solve.
    #[arg(long, default_value_t = 1e-10)]
    ode_tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Serialize)]
#[serde(transparent)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Grid)
}

/// A result ready to be written as CSV or JSON.
struct Report {
    config: Map<String, Value>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    json: Map<String, Value>,
}

impl Report {
    fn new(command: &str, args: &impl Serialize) -> Self {
        let mut config = Map::new();
        config.insert("command".into(), Value::from(command));
        if let Value::Object(m) = serde_json::to_value(args).expect("arguments serialize") {
            config.extend(m);
        }
        Report {
            config,
            header: Vec::new(),
            rows: Vec::new(),
            json: Map::new(),
        }
    }

    fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => {
                for (k, v) in &self.config {
                    match v {
                        Value::String(s) => writeln!(out, "# {k} = {s}")?,
                        other => writeln!(out, "# {k} = {other}")?,
                    }
                }
                writeln!(out, "{}", self.header.join(","))?;
                for row in &self.rows {
                    writeln!(out, "{}", row.join(","))?;
                }
            }
            Format::Json => {
                let mut doc = Map::new();
                doc.insert("config".into(), Value::Object(self.config.clone()));
                doc.extend(self.json.clone());
                serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

enum Failure {
    Lib(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn hurst(h: f64) -> Result<HurstIndex, Error> {
    HurstIndex::new(h)
}

fn term_rows(report: &mut Report, terms: &TermList) {
    let se = terms.has_stderr();
    report.header = if se {
        cols(&["m", "n", "exponent", "coefficient", "stderr"])
    } else {
        cols(&["m", "n", "exponent", "coefficient"])
    };
    for t in &terms.terms {
        let mut row = vec![
            t.pair.m.to_string(),
            t.pair.n.to_string(),
            fmt17(t.exponent),
            fmt17(t.coefficient),
        ];
        if se {
            row.push(t.stderr.map(fmt17).unwrap_or_default());
        }
        report.rows.push(row);
    }
    report.json.insert("terms".into(), json!(terms.terms));
}

fn coeff(a: &CoeffArgs) -> Result<Report, Error> {
    let word: Word = a.word.parse()?;
    let h = hurst(a.hurst)?;
    let r = match a.method {
        CoeffMethodArg::Analytic => c_coefficient_analytic(&word, h, a.tol)?,
        CoeffMethodArg::Mc => c_coefficient_mc(&word, h, McConfig::new(a.samples, a.steps, a.seed))?,
    };
    let mut rep = Report::new("coeff", a);
    rep.header = cols(&["word", "hurst", "method", "value", "stderr"]);
    rep.rows.push(vec![
        word.to_string(),
        fmt17(a.hurst),
        serde_json::to_value(r.method).expect("enum").as_str().unwrap_or_default().to_string(),
        fmt17(r.value),
        r.stderr.map(fmt17).unwrap_or_default(),
    ]);
    rep.json.insert("word".into(), json!(word));
    rep.json.insert("method".into(), json!(r.method));
    rep.json.insert("value".into(), json!(r.value));
    rep.json.insert("stderr".into(), json!(r.stderr));
    Ok(rep)
}

fn expand(a: &ExpandArgs) -> Result<Report, Error> {
    let settings = ExpandSettings {
        source: match a.coeff_source {
            SourceArg::Auto => CoeffSource::Auto,
            SourceArg::Analytic => CoeffSource::Analytic,
            SourceArg::Mc => CoeffSource::Mc,
        },
        tol: a.tol,
        mc: McConfig::new(a.samples, a.steps, a.seed),
    };
    let terms = expand_p0(&parse(&a.f)?, &parse(&a.b)?, a.x0, hurst(a.hurst)?, a.p, a.q, &settings)?;
    let mut rep = Report::new("expand", a);
    term_rows(&mut rep, &terms);
    Ok(rep)
}

fn cond_expand(a: &CondExpandArgs) -> Result<Report, Error> {
    let terms = cond_expand_driftless(&parse(&a.f)?, a.t, a.beta, hurst(a.hurst)?, a.p, a.q)?;
    let mut rep = Report::new("cond-expand", a);
    term_rows(&mut rep, &terms);
    Ok(rep)
}

fn mc_check(a: &McCheckArgs) -> Result<Report, Error> {
    let (f, b, h) = (parse(&a.f)?, parse(&a.b)?, hurst(a.hurst)?);
    let terms = expand_p0(&f, &b, a.x0, h, a.p, a.q, &ExpandSettings::default())?;
    let mut rep = Report::new("mc-check", a);
    rep.header = cols(&["h", "mc", "stderr", "truncation", "difference"]);
    let mut rows = Vec::new();
    for (i, &step) in a.h_grid.0.iter().enumerate() {
        // One seed per grid point keeps the estimates independent.
        let settings = McSettings::new(a.samples, a.steps, a.seed.wrapping_add(i as u64));
        let est = mc_p0(&f, &b, a.x0, h, step, settings, !a.no_control_variates)?;
        let trunc = evaluate_truncation(&terms, step);
        rep.rows.push(vec![
            fmt17(step),
            fmt17(est.value),
            fmt17(est.stderr),
            fmt17(trunc),
            fmt17(est.value - trunc),
        ]);
        rows.push(json!({
            "h": step, "mc": est.value, "stderr": est.stderr,
            "truncation": trunc, "difference": est.value - trunc,
        }));
    }
    rep.json.insert("terms".into(), json!(terms.terms));
    rep.json.insert("rows".into(), Value::Array(rows));
    Ok(rep)
}

fn var_scan(a: &VarScanArgs) -> Result<Report, Error> {
    let rows = variance_scan(a.t, hurst(a.hurst)?, a.alpha, &a.h_grid.0, a.tol)?;
    let mut rep = Report::new("var-scan", a);
    rep.header = cols(&["h", "raw_var", "normalized", "ratio_to_limit"]);
    for r in &rows {
        rep.rows
            .push(vec![fmt17(r.h), fmt17(r.raw_var), fmt17(r.normalized), fmt17(r.ratio_to_limit)]);
    }
    rep.json.insert("rows".into(), json!(rows));
    Ok(rep)
}

fn sigma2(a: &Sigma2Args) -> Result<Report, Error> {
    let v = sigma_h_sq(hurst(a.hurst)?, a.tol)?;
    let mut rep = Report::new("sigma2", a);
    rep.header = cols(&["hurst", "sigma2"]);
    rep.rows.push(vec![fmt17(a.hurst), fmt17(v)]);
    rep.json.insert("value".into(), json!(v));
    Ok(rep)
}

fn r_grid(a: &RFnArgs) -> Result<Report, Error> {
    let h = hurst(a.hurst)?;
    let mut rep = Report::new("r-fn", a);
    rep.header = cols(&["x", "r"]);
    let mut rows = Vec::new();
    for &x in &a.x_grid.0 {
        let r = r_fn(x, h, a.tol)?;
        rep.rows.push(vec![fmt17(x), fmt17(r)]);
        rows.push(json!({ "x": x, "r": r }));
    }
    rep.json.insert("rows".into(), Value::Array(rows));
    Ok(rep)
}

fn fbm_sample(a: &FbmSampleArgs) -> Result<Report, Error> {
    if a.points < 2 {
        return Err(Error::InvalidArgument("at least 2 grid points are required".into()));
    }
    let grid = TimeGrid::uniform(a.horizon, a.points - 1)?;
    let sampler = FbmSampler::new(grid.clone(), hurst(a.hurst)?)?;
    let paths: Vec<Vec<f64>> = (0..a.paths as u64).map(|i| sampler.sample(a.seed, i).values).collect();
    let mut rep = Report::new("fbm-sample", a);
    rep.header = std::iter::once("t".to_string())
        .chain((0..a.paths).map(|i| format!("path{i}")))
        .collect();
    for (k, t) in grid.points().iter().enumerate() {
        let mut row = vec![fmt17(*t)];
        row.extend(paths.iter().map(|p| fmt17(p[k])));
        rep.rows.push(row);
    }
    rep.json.insert("t".into(), json!(grid.points()));
    rep.json.insert("paths".into(), json!(paths));
    Ok(rep)
}

fn solve(a: &SolveArgs) -> Result<Report, Error> {
    let h = hurst(a.hurst)?;
    let problem = SdeProblem::with_diffusion(parse(&a.b)?, parse(&a.sigma)?, a.x0, h, a.horizon)?;
    let grid = TimeGrid::uniform(a.horizon, a.steps)?;
    let path = FbmSampler::new(grid, h)?.sample(a.seed, 0);
    let x = match a.method {
        SolveMethod::Euler => euler_young_solve(&problem, &path)?,
        SolveMethod::Doss => doss_sussmann_solve(&problem, &path, a.ode_tol)?,
    };
    let mut rep = Report::new("solve", a);
    rep.header = cols(&["t", "b", "x"]);
    for ((t, b), x) in path.grid.points().iter().zip(&path.values).zip(&x) {
        rep.rows.push(vec![fmt17(*t), fmt17(*b), fmt17(*x)]);
    }
    rep.json.insert("t".into(), json!(path.grid.points()));
    rep.json.insert("b".into(), json!(path.values));
    rep.json.insert("x".into(), json!(x));
    Ok(rep)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (report, output, default_format) = match &cli.command {
        Command::Coeff(a) => (coeff(a)?, &a.output, Format::Json),
        Command::Expand(a) => (expand(a)?, &a.output, Format::Csv),
        Command::CondExpand(a) => (cond_expand(a)?, &a.output, Format::Csv),
        Command::McCheck(a) => (mc_check(a)?, &a.output, Format::Csv),
        Command::VarScan(a) => (var_scan(a)?, &a.output, Format::Csv),
        Command::Sigma2(a) => (sigma2(a)?, &a.output, Format::Json),
        Command::RFn(a) => (r_grid(a)?, &a.output, Format::Csv),
        Command::FbmSample(a) => (fbm_sample(a)?, &a.output, Format::Csv),
        Command::Solve(a) => (solve(a)?, &a.output, Format::Csv),
    };
    let format = output.format.unwrap_or(default_format);
    match &output.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.write(format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("fracexp: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("fracexp: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Syntax | ErrorKind::InvalidArgument => 2,
                ErrorKind::Numerical | ErrorKind::Resource => 3,
                ErrorKind::Domain => 4,
            })
        }
    }
}
