//! Command-line front end.
//!
//! Exit codes: 0 success, 1 expression or config parse error, 2 validation
//! error, 3 a check failed, 64 usage error, 74 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::construct::{
    construct_f, make_staircase_rho, random_pair, table_row, ConstructError, GeneratorConfig,
    StaircaseSpec, DEFAULT_QUAD_TOL,
};
use crate::expr::parse;
use crate::func::DifferentiableFn;
use crate::interval::Interval;
use crate::patterns::{DEFAULT_TOL_CONST, DEFAULT_TOL_ZERO};
use crate::ratio::{make_pair, FunctionPair, PairError, MIN_GRID};
use crate::rules::{check_construction, check_pair, rule_rows, AnalysisConfig, AnalysisReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CHECKS: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

/// Environment variable capping the worker threads of `verify`.
pub const THREADS_ENV: &str = "MONOTONE_RATIO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "monotone-ratio", version, about = "Monotonicity patterns of ratios f/g via the derivative ratio f'/g'")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a pair f, g on a window.
    Analyze(AnalyzeArgs),
    /// Build f from g and a monotone rho, then analyze the result.
    Construct(ConstructArgs),
    /// Run a seeded verification campaign over generated pairs.
    Verify(VerifyArgs),
    /// Print the rule tables as text and JSON.
    Tables,
}

#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    #[arg(long, default_value_t = DEFAULT_TOL_ZERO)]
    pub tol_zero: f64,
    /// Constancy band for interval-of-constancy detection.
    #[arg(long, default_value_t = DEFAULT_TOL_CONST)]
    pub tol_const: f64,
}

impl Tolerances {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            tol_zero: self.tol_zero,
            tol_const: self.tol_const,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, required = true)]
    pub window: Vec<f64>,
    #[arg(long, default_value_t = 2048, value_parser = clap::value_parser!(u64).range(MIN_GRID as u64..))]
    pub grid_n: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write x,f,g,r,rho,rho_tilde samples here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
    #[arg(long, allow_hyphen_values = true)]
    pub g: String,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub g: String,
    /// Monotone rho as an expression.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "staircase", required_unless_present = "staircase")]
    pub rho: Option<String>,
    /// Staircase rho as a JSON file with flat_intervals, slopes, direction and anchor.
    #[arg(long)]
    pub staircase: Option<PathBuf>,
    /// Flat of the staircase to make the interval of constancy of r.
    #[arg(long, default_value_t = 0, requires = "staircase")]
    pub flat: usize,
    /// Base point; defaults to the midpoint of the chosen flat or of the window.
    #[arg(long, allow_negative_numbers = true)]
    pub z: Option<f64>,
    /// Level f(z)/g(z); defaults to rho(z).
    #[arg(long = "K", allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub tol: Tolerances,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub cases: u64,
    #[arg(long, default_value_t = 2048, value_parser = clap::value_parser!(u64).range(MIN_GRID as u64..))]
    pub grid_n: u64,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<PairError> for Failure {
    fn from(e: PairError) -> Self {
        Failure::new(EXIT_VALIDATION, format!("validation error: {e}"))
    }
}

impl From<ConstructError> for Failure {
    fn from(e: ConstructError) -> Self {
        Failure::new(EXIT_VALIDATION, format!("construction error: {e}"))
    }
}

fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(&a, stdout),
        Command::Construct(c) => run_construct(&c, stdout),
        Command::Verify(v) => run_verify(&v, stdout),
        Command::Tables => run_tables(stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn parse_fn(flag: &str, text: &str) -> Result<DifferentiableFn, Failure> {
    parse(text)
        .map(|e| Arc::new(e) as DifferentiableFn)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot parse --{flag} {text:?}: {e}")))
}

fn window_of(w: &WindowArgs) -> Result<Interval, Failure> {
    let (lo, hi) = (w.window[0], w.window[1]);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Failure::new(EXIT_USAGE, format!("--window needs finite LO < HI, got {lo} {hi}")));
    }
    Ok(Interval::open(lo, hi))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| io_failure(path, e)),
        None => writeln!(stdout, "{text}").map_err(|e| Failure::new(EXIT_IO, e.to_string())),
    }
}

/// The analysis grid as CSV with header `x,f,g,r,rho,rho_tilde`.
pub fn csv_text(pair: &FunctionPair) -> Result<String, PairError> {
    let pts = pair.sample_points(pair.grid_n())?;
    let mut text = String::from("x,f,g,r,rho,rho_tilde\n");
    for p in &pts {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.x,
            p.f.value,
            p.g.value,
            p.r(),
            p.rho(),
            p.rho_tilde()
        ));
    }
    Ok(text)
}

fn emit_csv(pair: &FunctionPair, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        Some(path) => fs::write(path, csv_text(pair)?).map_err(|e| io_failure(path, e)),
        None => Ok(()),
    }
}

fn exit_for(passed: bool) -> i32 {
    if passed {
        EXIT_OK
    } else {
        EXIT_CHECKS
    }
}

fn run_analyze(a: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_fn("f", &a.f)?;
    let g = parse_fn("g", &a.g)?;
    let window = window_of(&a.window)?;
    let pair = make_pair(f, g, window, a.window.grid_n as usize)?;
    let report = check_pair(&pair, &a.tol.config())?;
    emit_csv(&pair, a.output.csv.as_ref())?;
    emit_json(&report, a.output.out.as_ref(), stdout)?;
    Ok(exit_for(report.passed()))
}

#[derive(Debug, Serialize)]
struct Construction {
    g: String,
    rho: String,
    z: f64,
    #[serde(rename = "K")]
    k: f64,
    chosen: Option<Interval>,
    quad_tol: f64,
    roundtrip_error: f64,
    chosen_is_r_mic: Option<bool>,
}

#[derive(Debug, Serialize)]
struct ConstructOutput {
    construction: Construction,
    report: AnalysisReport,
}

fn run_construct(c: &ConstructArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let g = parse_fn("g", &c.g)?;
    let window = window_of(&c.window)?;
    let (rho, chosen): (DifferentiableFn, Option<Interval>) = match (&c.rho, &c.staircase) {
        (Some(text), _) => (parse_fn("rho", text)?, None),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let spec: StaircaseSpec = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot parse {}: {e}", path.display())))?;
            let rho = make_staircase_rho(&spec)?;
            let flats = spec.flat_intervals();
            let chosen = match flats.get(c.flat) {
                Some(f) => Some(*f),
                None if flats.is_empty() => None,
                None => {
                    return Err(ConstructError::NoSuchFlat {
                        index: c.flat,
                        count: flats.len(),
                    }
                    .into())
                }
            };
            (Arc::new(rho), chosen)
        }
        (None, None) => unreachable!("clap requires --rho or --staircase"),
    };
    let z = c.z.unwrap_or_else(|| chosen.map_or(window.midpoint(), |i| i.midpoint()));
    if !window.contains_interior(z) {
        return Err(ConstructError::ZOutsideWindow { z, window }.into());
    }
    let k = match c.k {
        Some(k) => k,
        None => rho
            .value(z)
            .map_err(|e| Failure::new(EXIT_VALIDATION, format!("rho at z: {e}")))?,
    };
    let f = construct_f(g.clone(), rho.clone(), z, k, window, c.quad_tol)?;
    let pair = make_pair(Arc::new(f), g.clone(), window, c.window.grid_n as usize)?;
    let report = check_pair(&pair, &c.tol.config())?;

    let mut roundtrip_error: f64 = 0.0;
    for p in pair.sample_points(pair.grid_n())? {
        let want = rho.value(p.x).map_err(PairError::from)?;
        roundtrip_error = roundtrip_error.max((p.rho() - want).abs() / (1.0 + want.abs()));
    }
    let match_tol = report.tolerances.switch_tol;
    let chosen_is_r_mic = chosen.map(|i| match report.mics.r.intervals.as_slice() {
        [only] => only.endpoint_distance(&i) <= match_tol,
        _ => false,
    });
    let passed = report.passed() && roundtrip_error <= 1e-9 && chosen_is_r_mic != Some(false);
    emit_csv(&pair, c.output.csv.as_ref())?;
    let output = ConstructOutput {
        construction: Construction {
            g: g.describe(),
            rho: rho.describe(),
            z,
            k,
            chosen,
            quad_tol: c.quad_tol,
            roundtrip_error,
            chosen_is_r_mic,
        },
        report,
    };
    emit_json(&output, c.output.out.as_ref(), stdout)?;
    Ok(exit_for(passed))
}

/// Per-check pass counts and failing seeds of a campaign.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct CheckTally {
    pub passed: usize,
    pub failed_seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CaseError {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerifySummary {
    pub seed: u64,
    pub cases: u64,
    pub grid_n: usize,
    pub quad_tol: f64,
    pub tolerances: AnalysisConfig,
    /// Cases per `(rho direction, sign gg')` row.
    pub rows: BTreeMap<String, usize>,
    pub checks: BTreeMap<&'static str, CheckTally>,
    pub errors: Vec<CaseError>,
    pub all_passed: bool,
}

#[derive(Debug)]
struct CaseOutcome {
    seed: u64,
    result: Result<[bool; 5], String>,
}

fn run_case(seed: u64, gen: &GeneratorConfig, config: &AnalysisConfig) -> CaseOutcome {
    let result = (|| {
        let generated = random_pair(seed, gen).map_err(|e| e.to_string())?;
        let report = check_pair(&generated.pair, config).map_err(|e| e.to_string())?;
        let construction =
            check_construction(&generated, &report, config.switch_tol, 1e-9).map_err(|e| e.to_string())?;
        let c = report.checks;
        Ok([c.prop1, c.prop2, c.uniqueness, c.sign_identity, construction.passed()])
    })();
    CaseOutcome { seed, result }
}

const CHECK_NAMES: [&str; 5] = ["prop1", "prop2", "uniqueness", "sign_identity", "prop4"];

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// Runs `cases` generated pairs with seeds `seed, seed + 1, …`.
pub fn verify_campaign(seed: u64, cases: u64, gen: &GeneratorConfig, config: &AnalysisConfig) -> VerifySummary {
    let seeds: Vec<u64> = (0..cases).map(|i| seed.wrapping_add(i)).collect();
    let work = || -> Vec<CaseOutcome> { seeds.par_iter().map(|&s| run_case(s, gen, config)).collect() };
    let mut outcomes = match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    };
    outcomes.sort_by_key(|o| o.seed);

    let mut rows = BTreeMap::new();
    let mut checks: BTreeMap<&'static str, CheckTally> =
        CHECK_NAMES.iter().map(|&n| (n, CheckTally::default())).collect();
    let mut errors = Vec::new();
    for o in &outcomes {
        let (dir, sign) = table_row((o.seed % 4) as usize);
        *rows.entry(format!("{dir}/{sign}")).or_insert(0) += 1;
        match &o.result {
            Ok(flags) => {
                for (name, ok) in CHECK_NAMES.iter().zip(flags) {
                    let tally = checks.get_mut(name).expect("known check");
                    if *ok {
                        tally.passed += 1;
                    } else {
                        tally.failed_seeds.push(o.seed);
                    }
                }
            }
            Err(message) => errors.push(CaseError {
                seed: o.seed,
                message: message.clone(),
            }),
        }
    }
    let all_passed = errors.is_empty() && checks.values().all(|t| t.failed_seeds.is_empty());
    VerifySummary {
        seed,
        cases,
        grid_n: gen.grid_n,
        quad_tol: gen.quad_tol,
        tolerances: *config,
        rows,
        checks,
        errors,
        all_passed,
    }
}

fn run_verify(v: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let gen = GeneratorConfig {
        grid_n: v.grid_n as usize,
        quad_tol: v.quad_tol,
        ..GeneratorConfig::default()
    };
    let summary = verify_campaign(v.seed, v.cases, &gen, &v.tol.config());
    emit_json(&summary, v.out.as_ref(), stdout)?;
    Ok(exit_for(summary.all_passed))
}

#[derive(Debug, Serialize)]
struct FamilyRow {
    rho: String,
    sign_gg: String,
    r: String,
}

#[derive(Debug, Serialize)]
struct DirectionRow {
    rho: String,
    sign_gg: String,
    rho_tilde: String,
}

#[derive(Debug, Serialize)]
struct TablesJson {
    switch_point: Vec<FamilyRow>,
    switch_interval: Vec<FamilyRow>,
    rho_tilde: Vec<DirectionRow>,
}

/// Text and JSON renderings of the three rule tables, built from [`rule_rows`].
pub fn render_tables() -> (String, String) {
    let rows = rule_rows();
    let gg = |s: crate::ratio::Sign| if s.as_i8() > 0 { ">0" } else { "<0" }.to_string();
    let mut text = String::new();
    let mut section = |title: &str, header: &str, body: Vec<[String; 3]>| {
        text.push_str(title);
        text.push('\n');
        text.push_str(&format!("  {:<6}{:<6}{}\n", "rho", "gg'", header));
        for [a, b, c] in body {
            text.push_str(&format!("  {a:<6}{b:<6}{c}\n"));
        }
        text.push('\n');
    };
    section(
        "Switch point rules: non-strict rules (r switches at some c in [a, b])",
        "r",
        rows.iter()
            .map(|r| [r.rho_dir.to_string(), gg(r.sign_gg), r.r_family.to_string()])
            .collect(),
    );
    section(
        "Switch interval rules: improved rules (r' < 0 or > 0 off a switch interval [c, d], r constant on it)",
        "r",
        rows.iter()
            .map(|r| [r.rho_dir.to_string(), gg(r.sign_gg), r.r_family.to_string()])
            .collect(),
    );
    section(
        "Directions of rho and rho_tilde",
        "rho_tilde",
        rows.iter()
            .map(|r| [r.rho_dir.to_string(), gg(r.sign_gg), r.rho_tilde_dir.to_string()])
            .collect(),
    );
    text.push_str("Every switch interval conclusion implies the switch point conclusion for the same row.\n");

    let r_rows = || {
        rows.iter()
            .map(|r| FamilyRow {
                rho: r.rho_dir.to_string(),
                sign_gg: r.sign_gg.to_string(),
                r: r.r_family.to_string(),
            })
            .collect()
    };
    let json = TablesJson {
        switch_point: r_rows(),
        switch_interval: r_rows(),
        rho_tilde: rows
            .iter()
            .map(|r| DirectionRow {
                rho: r.rho_dir.to_string(),
                sign_gg: r.sign_gg.to_string(),
                rho_tilde: r.rho_tilde_dir.to_string(),
            })
            .collect(),
    };
    (text, serde_json::to_string_pretty(&json).expect("tables serialize"))
}

fn run_tables(stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (text, json) = render_tables();
    write!(stdout, "{text}\n{json}\n").map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    Ok(EXIT_OK)
}
