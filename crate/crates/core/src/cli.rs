//! The `boxes-sim` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{load_config, ScenarioConfig};
use crate::error::Error;
use crate::experiment::{build_scenario, run_ensemble_with, snapshot_sequence, OutcomeModel, Scenario};
use crate::field_file::FieldFile;
use crate::optics::BoxId;
use crate::transitions::{probability, Formulation, TransitionResult};
use crate::verify::{run_check, Check, CheckResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Absolute tolerance quoted for quadrature probabilities at the default grid.
pub const PROBABILITY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(
    name = "boxes-sim",
    version,
    about = "Einstein's Boxes: collapse vs. time-symmetric transition probabilities"
)]
pub struct Cli {
    /// Scenario config file (TOML); defaults reproduce the reference setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collapse (cf) and transition (tsf) probabilities for each box.
    Probability(ProbabilityArgs),
    /// Write density panels as .grid/.pgm pairs.
    Snapshot(SnapshotArgs),
    /// Monte Carlo outcome sampling.
    Sample(SampleArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ProbabilityArgs {
    #[arg(long)]
    pub formulation: Option<Formulation>,
    #[arg(long = "box")]
    pub box_id: Option<BoxId>,
    /// Compute-grid samples per axis (window extent is kept).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Print probabilities at full precision instead of 4 significant digits.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    #[arg(long)]
    pub formulation: Formulation,
    #[arg(long)]
    pub final_box: Option<BoxId>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(short = 'n')]
    pub runs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "cf")]
    pub formulation: Formulation,
    #[arg(long)]
    pub renormalize_outcomes: bool,
    /// Write runs.ndjson and summary.json here instead of streaming records.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Restrict to the named checks (repeatable).
    #[arg(long = "check")]
    pub checks: Vec<Check>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INVALID;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn load_scenario(cli: &Cli, grid: Option<usize>, renormalize: bool) -> Result<Scenario, Error> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    if grid.is_some() {
        config.grid.n = grid;
    }
    if renormalize {
        config.run.renormalize_outcomes = Some(true);
    }
    let scenario = build_scenario(&config)?;
    Ok(scenario)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    match &cli.command {
        Command::Probability(args) => cmd_probability(cli, args, out),
        Command::Snapshot(args) => cmd_snapshot(cli, args, out),
        Command::Sample(args) => cmd_sample(cli, args, out, err),
        Command::Verify(args) => cmd_verify(cli, args, out),
    }
}

/// Formats `x` with `digits` significant digits.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cmd_probability(cli: &Cli, args: &ProbabilityArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let scenario = load_scenario(cli, args.grid, false)?;
    let formulations = match args.formulation {
        Some(f) => vec![f],
        None => vec![Formulation::Cf, Formulation::Tsf],
    };
    let boxes = match args.box_id {
        Some(b) => vec![b],
        None => BoxId::BOTH.to_vec(),
    };
    let mut results: Vec<TransitionResult> = Vec::new();
    for &f in &formulations {
        for &b in &boxes {
            results.push(probability(&scenario, f, b)?);
        }
    }
    let fmt_p = |p: f64| {
        if args.full_precision {
            format!("{p}")
        } else {
            significant(p, 4)
        }
    };

    let g = &scenario.grid;
    if cli.json {
        let doc = json!({
            "grid": { "n": g.n, "dx": g.dx(), "extent": g.extent },
            "tolerance": PROBABILITY_TOLERANCE,
            "results": results,
        });
        writeln!(out, "{doc}").map_err(stdout_err)?;
    } else if results.len() == 1 {
        writeln!(out, "{}", fmt_p(results[0].probability)).map_err(stdout_err)?;
    } else {
        let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(stdout_err);
        w(
            out,
            format!("grid {}x{} dx={} (co-moving window per branch)", g.n, g.n, g.dx()),
        )?;
        w(
            out,
            format!("{:<5} {:<4} {:>24} {:>12}", "form", "box", "amplitude", "probability"),
        )?;
        for r in &results {
            let label = match r.formulation {
                Formulation::Cf => "P_c",
                Formulation::Tsf => "P_t",
            };
            w(
                out,
                format!(
                    "{:<5} {:<4} {:>24} {:>12}   {label}({}) = {}",
                    r.formulation.to_string(),
                    r.box_id.to_string(),
                    format!("{:+.6}{:+.6}i", r.amplitude.re, r.amplitude.im),
                    fmt_p(r.probability),
                    r.box_id.to_string().to_uppercase(),
                    fmt_p(r.probability),
                ),
            )?;
        }
        w(out, format!("quadrature tolerance ±{PROBABILITY_TOLERANCE} (absolute)"))?;
    }
    Ok(EXIT_OK)
}

fn cmd_snapshot(cli: &Cli, args: &SnapshotArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let scenario = load_scenario(cli, None, false)?;
    if args.formulation == Formulation::Tsf && args.final_box.is_none() {
        return Err(Error::MissingFinalCondition);
    }
    let snapshots = snapshot_sequence(&scenario, args.formulation, args.final_box)?;
    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut written = Vec::new();
    for s in &snapshots {
        let stem = format!("{}_{}", args.formulation, s.time);
        FieldFile::from_snapshot(s)?.save(&args.out, &stem)?;
        written.push(stem);
    }
    if cli.json {
        writeln!(out, "{}", json!({ "dir": args.out, "panels": written })).map_err(stdout_err)?;
    } else {
        for stem in &written {
            writeln!(out, "{}", args.out.join(format!("{stem}.{{grid,pgm}}")).display()).map_err(stdout_err)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_sample(cli: &Cli, args: &SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let scenario = load_scenario(cli, None, args.renormalize_outcomes)?;
    let runs = args.runs.or(config.run.runs).unwrap_or(100_000);
    if runs == 0 {
        return Err(Error::config("n", "must be >= 1"));
    }
    let seed = match args.seed.or(config.run.seed) {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            writeln!(err, "seed: {s}").map_err(|e| Error::io("<stderr>", e))?;
            s
        }
    };
    let model = OutcomeModel::from_scenario(&scenario, args.formulation)?;

    let summary = match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let log_path = dir.join("runs.ndjson");
            let file = std::fs::File::create(&log_path).map_err(io_err(&log_path))?;
            let mut log = std::io::BufWriter::new(file);
            let mut failure = None;
            let summary = run_ensemble_with(&model, runs, seed, |r| {
                if failure.is_none() {
                    if let Err(e) = serde_json::to_writer(&mut log, r)
                        .map_err(std::io::Error::from)
                        .and_then(|_| log.write_all(b"\n"))
                    {
                        failure = Some(e);
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(Error::io(&log_path, e));
            }
            log.flush().map_err(io_err(&log_path))?;
            let summary_path = dir.join("summary.json");
            let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::io(&summary_path, e.into()))?;
            std::fs::write(&summary_path, text + "\n").map_err(io_err(&summary_path))?;
            summary
        }
        None => {
            let mut failure = None;
            let summary = run_ensemble_with(&model, runs, seed, |r| {
                if failure.is_none() {
                    if let Err(e) = serde_json::to_writer(&mut *out, r)
                        .map_err(std::io::Error::from)
                        .and_then(|_| out.write_all(b"\n"))
                    {
                        failure = Some(e);
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(stdout_err(e));
            }
            summary
        }
    };

    if cli.json {
        writeln!(out, "{}", serde_json::to_string(&summary).expect("summary serializes")).map_err(stdout_err)?;
    } else {
        writeln!(
            out,
            "# {} runs, seed {}, formulation {}{}",
            summary.n_runs,
            summary.seed,
            summary.formulation,
            if summary.renormalized_outcomes {
                ", renormalized outcomes"
            } else {
                ""
            }
        )
        .map_err(stdout_err)?;
        writeln!(
            out,
            "# {:<13} {:>10} {:>8} {:>10} {:>10}  within 4σ",
            "outcome", "p", "count", "freq", "band"
        )
        .map_err(stdout_err)?;
        for t in &summary.outcomes {
            writeln!(
                out,
                "# {:<13} {:>10.6} {:>8} {:>10.6} {:>10.6}  {}",
                t.outcome.name(),
                t.probability,
                t.count,
                t.frequency,
                t.band,
                if t.within_band { "yes" } else { "NO" }
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let scenario = load_scenario(cli, args.grid, false)?;
    let checks = if args.checks.is_empty() {
        Check::ALL.to_vec()
    } else {
        args.checks.clone()
    };
    let mut results: Vec<CheckResult> = Vec::new();
    for c in checks {
        results.extend(run_check(&scenario, c, args.dt)?);
    }
    let ok = results.iter().all(|r| r.passed);
    if cli.json {
        writeln!(out, "{}", json!({ "passed": ok, "checks": results })).map_err(stdout_err)?;
    } else {
        writeln!(
            out,
            "{:<22} {:<30} {:>12} {:>10}  result",
            "check", "case", "measured", "tolerance"
        )
        .map_err(stdout_err)?;
        for r in &results {
            writeln!(
                out,
                "{:<22} {:<30} {:>12.3e} {:>10.0e}  {}",
                r.check,
                r.case,
                r.measured,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}
