//! Command-line front end: source ingestion, grid sweeps, CSV/JSON output,
//! Monte Carlo runs and figure data.

mod figures;
mod grid;
mod output;
mod validate;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::erokhin::{erokhin_exact, theorem1_bounds, theorem3_bounds};
use crate::error::{check_epsilon, Error, Result};
use crate::iidlimits::{
    block_code, build_type_table, curve_point, einfo_from_table, erokhin_block, RemainderMode,
};
use crate::lossy::{
    rd_excess_solve_product, rd_solve, rplus, tilted_cutoff_expansion, DistortionSpec,
};
use crate::optcode::{build_code, mc_validate, theorem2_bounds, McReport};
use crate::source::{Pmf, ProductSource};
use crate::special::LOG2_E;

pub use figures::{figure_table, Figure};
pub use grid::{parse_int_grid, parse_real_grid};
pub use output::{config_hash, fmt12, Cell, Format, Table, Target};
pub use validate::{validation_suite, CheckResult};

/// Largest expanded alphabet for single-shot codes of a block.
pub const LSTAR_EXPAND_CAP: usize = 1 << 20;
const SLACK: f64 = 1e-9;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "vlc-limits",
    version,
    about = "Exact values, bounds and approximations for variable-length compression with nonzero error probability"
)]
pub struct Cli {
    /// Worker threads (further capped by the VLC_THREADS environment variable).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Minimum average length of a single block, with bounds and optional simulation.
    Lstar(LstarArgs),
    /// Erokhin's function and its bounds over an error grid.
    Erokhin(ErokhinArgs),
    /// Blockwise exact values, bounds and Gaussian approximation over a k grid.
    Curve(CurveArgs),
    /// Lossy rates, tilted-information cutoff and length bounds over a k grid.
    Lossy(LossyArgs),
    /// Runs the invariant suite.
    Validate(ValidateArgs),
    /// Emits the data behind the figures.
    Figures(FiguresArgs),
}

/// Source selection.
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Source file: {"probs": [...], "labels": [...]}.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Binary source with P(1) = p.
    #[arg(long)]
    pub bernoulli: Option<f64>,
    /// Equiprobable source on n symbols.
    #[arg(long)]
    pub uniform: Option<usize>,
}

impl SourceArgs {
    pub fn load(&self) -> Result<Pmf> {
        match (&self.source, self.bernoulli, self.uniform) {
            (Some(path), _, _) => Pmf::from_json_path(path),
            (_, Some(p), _) => Pmf::bernoulli(p),
            (_, _, Some(n)) => Pmf::uniform(n),
            _ => Err(Error::InvalidArgument("no source given".into())),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output path, `-` for stdout, or `csv`/`json` to pick a format on stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<String>,
    /// Output format, overriding the one inferred from --out.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl OutputArgs {
    fn target(&self) -> Target {
        Target::resolve(self.out.as_deref(), self.format)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LstarArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Error probability.
    #[arg(long)]
    pub eps: f64,
    /// Block length.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Also report the length without randomization.
    #[arg(long)]
    pub deterministic: bool,
    /// Monte Carlo trials.
    #[arg(long)]
    pub mc: Option<u64>,
    /// Seed for the simulation streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent random streams for the simulation.
    #[arg(long, default_value_t = 8)]
    pub workers: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ErokhinArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Error grid `start:stop:step` or a comma list.
    #[arg(long)]
    pub eps_grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Remainder added to the Gaussian main term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemainderArg {
    None,
    /// Binary closed form with `-log2(k)/2`.
    Refined,
    /// Binary closed form with `+log2(k)/2`.
    RefinedPlus,
}

impl From<RemainderArg> for RemainderMode {
    fn from(r: RemainderArg) -> Self {
        match r {
            RemainderArg::None => RemainderMode::None,
            RemainderArg::Refined => RemainderMode::BinaryRefinedDefault,
            RemainderArg::RefinedPlus => RemainderMode::BinaryRefined { sign: 1.0 },
        }
    }
}

pub const CURVE_COLUMNS: [&str; 8] = [
    "exact", "zero", "einfo", "approx", "main", "theta", "t2lower", "t2upper",
];

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Error probability or grid.
    #[arg(long)]
    pub eps: String,
    /// Block-length grid `start:stop[:step]`.
    #[arg(long)]
    pub k: String,
    /// Comma list from exact, zero, einfo, approx, main, theta, t2lower, t2upper.
    #[arg(long, default_value = "exact,approx,t2lower,t2upper")]
    pub columns: String,
    #[arg(long, value_enum, default_value_t = RemainderArg::Refined)]
    pub remainder: RemainderArg,
    /// Divide lengths by k.
    #[arg(long)]
    pub per_symbol: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LossyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Distortion file {"matrix": [[...], ...]}; Hamming when absent.
    #[arg(long)]
    pub distortion: Option<PathBuf>,
    /// Per-letter distortion level.
    #[arg(long)]
    pub d: f64,
    /// Excess-distortion probability.
    #[arg(long)]
    pub eps: f64,
    /// Block-length grid `start:stop[:step]`.
    #[arg(long, default_value = "1")]
    pub k: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    /// Small grids and fewer Monte Carlo trials.
    #[arg(long)]
    pub quick: bool,
    /// Seed for the Monte Carlo checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FiguresArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    /// File or `-` for one figure; a directory for `all`.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    All,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on usage or input errors, 2 when a bound ordering is violated.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let threads = thread_count(cli.threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return 1;
        }
    };
    let hash = config_hash(&cli.command);
    let result =
        pool.install(|| dispatch(&cli.command, &hash))
            .and_then(|(artifacts, violations)| {
                for a in &artifacts {
                    output::emit(&a.target, &a.text, &a.notes, out, err)?;
                }
                Ok(violations)
            });
    finish(result, err)
}

/// Exit status: 0 on success, 2 when bound orderings fail, 1 on errors.
fn finish(result: Result<Vec<String>>, err: &mut dyn Write) -> i32 {
    match result {
        Ok(violations) if violations.is_empty() => 0,
        Ok(violations) => {
            for v in violations {
                let _ = writeln!(err, "violation: {v}");
            }
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Rendered output waiting to be written.
struct Artifact {
    target: Target,
    text: String,
    notes: Vec<String>,
}

fn thread_count(flag: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("VLC_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(usize::MAX);
    flag.unwrap_or(available).clamp(1, cap.max(1))
}

fn dispatch(cmd: &Command, hash: &str) -> Result<(Vec<Artifact>, Vec<String>)> {
    let table_artifact = |(table, violations): (Table, Vec<String>), args: &OutputArgs| {
        let target = args.target();
        let text = output::render_table(&table, target.format, hash);
        (
            vec![Artifact {
                target,
                text,
                notes: table.notes,
            }],
            violations,
        )
    };
    match cmd {
        Command::Lstar(a) => {
            let (report, violations) = lstar_report(a)?;
            let artifact = Artifact {
                target: a.output.target(),
                text: output::render_report(&report, hash),
                notes: Vec::new(),
            };
            Ok((vec![artifact], violations))
        }
        Command::Erokhin(a) => Ok(table_artifact(erokhin_table(a)?, &a.output)),
        Command::Curve(a) => Ok(table_artifact(curve_table(a)?, &a.output)),
        Command::Lossy(a) => Ok(table_artifact(lossy_table(a)?, &a.output)),
        Command::Validate(a) => {
            let results = validation_suite(a.quick, a.seed)?;
            let mut table = Table::new(&["check", "result", "detail"]);
            let mut failed = Vec::new();
            for r in &results {
                let verdict = if r.passed { "pass" } else { "fail" };
                table.push(
                    vec![
                        r.name.as_str().into(),
                        verdict.into(),
                        r.detail.as_str().into(),
                    ],
                    &r.name,
                );
                if !r.passed {
                    failed.push(format!("{}: {}", r.name, r.detail));
                }
            }
            Ok(table_artifact((table, failed), &a.output))
        }
        Command::Figures(a) => {
            let figs: Vec<Figure> = match a.which {
                Which::Fig1 => vec![Figure::Fig1],
                Which::Fig2 => vec![Figure::Fig2],
                Which::Fig3 => vec![Figure::Fig3],
                Which::Fig4 => vec![Figure::Fig4],
                Which::All => vec![Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4],
            };
            let mut artifacts = Vec::new();
            let mut violations = Vec::new();
            for fig in figs {
                let (table, v) = figure_table(fig)?;
                violations.extend(v);
                let target = match (a.which, a.out.as_deref()) {
                    (Which::All, Some(dir)) if dir != "-" => {
                        std::fs::create_dir_all(dir).map_err(|e| {
                            Error::InvalidArgument(format!("cannot create {dir}: {e}"))
                        })?;
                        Target {
                            path: Some(PathBuf::from(dir).join(format!("{}.csv", fig.name()))),
                            format: Format::Csv,
                        }
                    }
                    (_, o) => Target::resolve(o, None),
                };
                let fig_hash = config_hash(&(hash, fig.name()));
                let text = output::render_table(&table, target.format, &fig_hash);
                artifacts.push(Artifact {
                    target,
                    text,
                    notes: table.notes,
                });
            }
            Ok((artifacts, violations))
        }
    }
}

fn ordered(label: &str, lower: f64, value: f64, upper: f64, violations: &mut Vec<String>) {
    if !(lower <= value + SLACK && value <= upper + SLACK) {
        violations.push(format!("{label}: {lower} <= {value} <= {upper} fails"));
    }
}

/// Report of the `lstar` command.
#[derive(Debug, Clone, Serialize)]
pub struct LstarReport {
    pub k: usize,
    pub epsilon: f64,
    pub l_star: f64,
    /// Number of kept outcomes, in decimal.
    pub m: String,
    pub eta: u64,
    pub alpha: f64,
    pub deterministic_length: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub erokhin: Option<f64>,
    pub mc: Option<McReport>,
}

pub fn lstar_report(a: &LstarArgs) -> Result<(LstarReport, Vec<String>)> {
    let base = a.source.load()?;
    check_epsilon(a.eps)?;
    let src = ProductSource::new(base.clone(), a.k)?;
    let expanded = if a.k == 1 {
        Some(base)
    } else {
        src.expand(LSTAR_EXPAND_CAP).ok()
    };
    let mut violations = Vec::new();
    let report = match expanded {
        Some(pmf) => {
            let code = build_code(&pmf, a.eps)?;
            let bounds = theorem2_bounds(&pmf, a.eps).ok();
            let mc = match a.mc {
                Some(n) => Some(mc_validate(&code, n, a.seed, a.workers)?),
                None => None,
            };
            LstarReport {
                k: a.k,
                epsilon: a.eps,
                l_star: code.avg_length,
                m: code.m.to_string(),
                eta: u64::from(code.eta),
                alpha: code.alpha,
                deterministic_length: a.deterministic.then(|| code.deterministic_length()),
                lower_bound: bounds.map(|b| b.lower),
                upper_bound: bounds.map(|b| b.upper),
                erokhin: erokhin_exact(&pmf, a.eps).ok().map(|e| e.value),
                mc,
            }
        }
        None => {
            if a.mc.is_some() || a.deterministic {
                return Err(Error::InvalidArgument(format!(
                    "--mc and --deterministic need at most {LSTAR_EXPAND_CAP} block outcomes"
                )));
            }
            let table = build_type_table(&src)?;
            let code = block_code(&table, a.eps)?;
            let in_range = a.eps < 1.0 - table.max_prob();
            let einfo = einfo_from_table(&table, a.eps)?;
            let zero = block_code(&table, 0.0)?.avg_length;
            let h = crate::source::entropy(src.base()) * a.k as f64;
            LstarReport {
                k: a.k,
                epsilon: a.eps,
                l_star: code.avg_length,
                m: code.m,
                eta: code.eta,
                alpha: code.alpha,
                deterministic_length: None,
                lower_bound: in_range.then_some(einfo + zero - h),
                upper_bound: in_range.then_some(einfo),
                erokhin: erokhin_block(&table, a.eps).ok(),
                mc: None,
            }
        }
    };
    if let (Some(lo), Some(hi)) = (report.lower_bound, report.upper_bound) {
        ordered("length bounds", lo, report.l_star, hi, &mut violations);
    }
    Ok((report, violations))
}

type ErokhinRow = (f64, Result<(f64, f64, f64, f64)>);

pub fn erokhin_table(a: &ErokhinArgs) -> Result<(Table, Vec<String>)> {
    let p = a.source.load()?;
    let grid = parse_real_grid(&a.eps_grid)?;
    let rows: Vec<ErokhinRow> = grid
        .par_iter()
        .map(|&eps| {
            let r = (|| {
                let h = erokhin_exact(&p, eps)?.value;
                let t1 = theorem1_bounds(&p, eps)?;
                let t3 = theorem3_bounds(&p, eps)?;
                Ok((h, t1.lower, t1.upper, t3.psi_lower))
            })();
            (eps, r)
        })
        .collect();
    let mut table = Table::new(&["eps", "H_exact", "T1_lower", "T1_upper", "psi_lower"]);
    let mut violations = Vec::new();
    for (eps, r) in rows {
        let label = format!("eps={}", fmt12(eps));
        match r {
            Ok((h, lo, hi, psi)) => {
                ordered(&label, lo, h, hi, &mut violations);
                table.push(
                    vec![eps.into(), h.into(), lo.into(), hi.into(), psi.into()],
                    &label,
                );
            }
            Err(Error::InvalidEpsilon(..)) => {
                table
                    .notes
                    .push(format!("{label}: omitted, outside [0, 1 - P(1))"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((table, violations))
}

pub fn curve_table(a: &CurveArgs) -> Result<(Table, Vec<String>)> {
    let p = a.source.load()?;
    let eps_grid = parse_real_grid(&a.eps)?;
    let k_grid = parse_int_grid(&a.k)?;
    if k_grid.contains(&0) {
        return Err(Error::InvalidBlockLength);
    }
    let cols: Vec<String> = a.columns.split(',').map(|c| c.trim().to_string()).collect();
    for c in &cols {
        if !CURVE_COLUMNS.contains(&c.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown column `{c}` (choose from {})",
                CURVE_COLUMNS.join(", ")
            )));
        }
    }
    let mode: RemainderMode = a.remainder.into();
    let points: Vec<(f64, usize)> = eps_grid
        .iter()
        .flat_map(|&e| k_grid.iter().map(move |&k| (e, k)))
        .collect();
    let results: Vec<Result<crate::iidlimits::CurvePoint>> = points
        .par_iter()
        .map(|&(eps, k)| curve_point(&p, k, eps, mode))
        .collect();
    let mut header = vec!["k", "eps"];
    header.extend(cols.iter().map(|c| c.as_str()));
    let mut table = Table::new(&header);
    let mut violations = Vec::new();
    for (&(eps, k), r) in points.iter().zip(results) {
        let pt = r?;
        let label = format!("k={k} eps={}", fmt12(eps));
        if let (Some(lo), Some(hi)) = (pt.t2_lower, pt.t2_upper) {
            ordered(&label, lo, pt.lstar, hi, &mut violations);
        }
        let scale = if a.per_symbol { k as f64 } else { 1.0 };
        let mut row: Vec<Cell> = vec![k.into(), eps.into()];
        let mut missing = None;
        for c in &cols {
            let v = match c.as_str() {
                "exact" => Some(pt.lstar),
                "zero" => Some(pt.lstar_zero),
                "einfo" => Some(pt.einfo),
                "approx" => Some(pt.approx.total()),
                "main" => Some(pt.approx.main),
                "theta" => pt.approx.theta,
                "t2lower" => pt.t2_lower,
                _ => pt.t2_upper,
            };
            match v {
                Some(v) => row.push((v / scale).into()),
                None => {
                    missing = Some(c.clone());
                    break;
                }
            }
        }
        match missing {
            None => table.push(row, &label),
            Some(c) => table
                .notes
                .push(format!("{label}: omitted, `{c}` is undefined here")),
        }
    }
    Ok((table, violations))
}

/// Hamming distortion sized to the source's original alphabet.
fn default_distortion(p: &Pmf) -> DistortionSpec {
    let n = p.original_indices().iter().copied().max().unwrap_or(0) + 1;
    DistortionSpec::hamming(n)
}

pub fn lossy_table(a: &LossyArgs) -> Result<(Table, Vec<String>)> {
    let p = a.source.load()?;
    check_epsilon(a.eps)?;
    let dist = match &a.distortion {
        Some(path) => DistortionSpec::from_json_path(path)?,
        None => default_distortion(&p),
    };
    let k_grid = parse_int_grid(&a.k)?;
    if k_grid.contains(&0) {
        return Err(Error::InvalidBlockLength);
    }
    let sol = rd_solve(&p, &dist, a.d)?;
    type Row = (Result<f64>, Result<f64>, f64, f64);
    let rows: Vec<Result<Row>> = k_grid
        .par_iter()
        .map(|&k| {
            let tilted = tilted_cutoff_expansion(&p, &dist, a.d, a.eps, &[k])?[0];
            let src = ProductSource::new(p.clone(), k)?;
            let rate = rd_excess_solve_product(&p, &dist, a.d, a.eps, k);
            let rp = rplus(&src, &dist, a.d, a.eps, &sol.output_dist);
            Ok((rate, rp, tilted.exact, tilted.main))
        })
        .collect();
    let mut table = Table::new(&[
        "k",
        "rd_rate",
        "tilted_cutoff",
        "main_term",
        "t6_lower",
        "rplus",
    ]);
    let mut violations = Vec::new();
    for (&k, r) in k_grid.iter().zip(rows) {
        let (rate, rp, tilted, main) = r?;
        let label = format!("k={k}");
        let (rate, rp) = match (rate, rp) {
            (Ok(rate), Ok(rp)) => (rate, rp),
            (Err(e), _) | (_, Err(e)) => {
                table.notes.push(format!("{label}: omitted, {e}"));
                continue;
            }
        };
        let t6 = (rate - (rate + 1.0).log2() - LOG2_E).max(0.0);
        if t6 > rp + SLACK {
            violations.push(format!("{label}: lower bound {t6} exceeds rplus {rp}"));
        }
        if tilted > rp + SLACK {
            violations.push(format!(
                "{label}: tilted cutoff {tilted} exceeds rplus {rp}"
            ));
        }
        table.push(
            vec![
                k.into(),
                rate.into(),
                tilted.into(),
                main.into(),
                t6.into(),
                rp.into(),
            ],
            &label,
        );
    }
    Ok((table, violations))
}
