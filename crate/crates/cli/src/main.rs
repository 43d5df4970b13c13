use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use contagion_core::scenario::{
    env_tolerance, parse_number, resolve_solver, write_trajectory_csv, Mode, Overrides, RunReport,
    ScenarioError, ScenarioFile,
};
use contagion_core::{
    check_nonspeculative, compare_static_dynamic, detect_nonexistence, load_scenario,
    run_scenario, sensitivity_in_assets, validate_network, ClearingError, Direction,
    RemovalPolicy, StaticOutcome,
};
use rayon::prelude::*;

mod render;

#[derive(Parser)]
#[command(name = "contagion-clear", version, about = "Clear interbank networks with contingent obligations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and print clearing wealths.
    Clear(ClearArgs),
    /// Sample the nonspeculative property.
    Check(CheckArgs),
    /// Decide whether a static clearing wealth exists.
    Diagnose(CommonArgs),
    /// Ramp external assets along a direction.
    Sensitivity(SensitivityArgs),
    /// Compare static and two-date dynamic clearing.
    Compare(CommonArgs),
    /// Parse and validate a scenario.
    Validate(SourceArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Scenario file, or `bundled:<name>`.
    scenario: String,
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Solver tolerance (sup norm); accepts fractions.
    #[arg(long, value_parser = number)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Asset amount received at the first date by split nodes.
    #[arg(long, value_parser = number)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ClearArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    removal_policy: Option<PolicyArg>,
    /// Epsilon values to run in parallel: `a,b,c` or `start:stop:count`.
    #[arg(long)]
    sweep: Option<String>,
    /// Write the wealth trajectory as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated nonnegative perturbation, one entry per node.
    #[arg(long)]
    direction_vector: String,
    #[arg(long, default_value_t = 21)]
    steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Greatest,
    Least,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    RollForwardOnly,
    RemoveOnDefault,
}

fn number(s: &str) -> Result<f64, String> {
    parse_number(s).ok_or_else(|| format!("{s:?} is not a number"))
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| parse_number(p).with_context(|| format!("{p:?} is not a number")))
        .collect()
}

fn parse_sweep(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(s),
        [a, b, k] => {
            let (a, b) = (number(a).map_err(anyhow::Error::msg)?, number(b).map_err(anyhow::Error::msg)?);
            let k: usize = k.trim().parse().context("sweep count")?;
            if k < 2 {
                bail!("sweep count must be at least 2");
            }
            Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
        }
        _ => bail!("sweep must be a list or start:stop:count"),
    }
}

impl CommonArgs {
    fn overrides(&self) -> anyhow::Result<Overrides> {
        Ok(Overrides {
            direction: self.direction.map(|d| match d {
                DirectionArg::Greatest => Direction::Greatest,
                DirectionArg::Least => Direction::Least,
            }),
            tolerance: self.tol,
            max_iterations: self.max_iter,
            epsilon: self.epsilon,
            env_tolerance: env_tolerance()?,
            ..Overrides::default()
        })
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn clear(args: &ClearArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.common.source.scenario)?;
    let mut overrides = args.common.overrides()?;
    overrides.mode = args.mode.map(|m| match m {
        ModeArg::Static => Mode::Static,
        ModeArg::Dynamic => Mode::Dynamic,
    });
    overrides.removal_policy = args.removal_policy.map(|p| match p {
        PolicyArg::RollForwardOnly => RemovalPolicy::RollForwardOnly,
        PolicyArg::RemoveOnDefault => RemovalPolicy::RemoveOnDefault,
    });

    if let Some(sweep) = &args.sweep {
        let values = parse_sweep(sweep)?;
        let reports = values
            .par_iter()
            .map(|&eps| {
                let o = Overrides {
                    epsilon: Some(eps),
                    ..overrides.clone()
                };
                run_scenario(&file, &o)
            })
            .collect::<Result<Vec<RunReport>, ScenarioError>>()?;
        print!("{}", render::sweep(&values, &reports));
        if let Some(out) = &args.common.source.out {
            write_json(out, &reports)?;
        }
        if args.csv.is_some() {
            bail!("--csv cannot be combined with --sweep");
        }
        return Ok(reports.iter().map(|r| r.exit_code as u8).max().unwrap_or(0));
    }

    let report = run_scenario(&file, &overrides)?;
    print!("{}", render::report(&report));
    if let Some(out) = &args.common.source.out {
        write_json(out, &report)?;
    }
    if let Some(path) = &args.csv {
        let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_trajectory_csv(&report.trajectory(), BufWriter::new(f))?;
    }
    Ok(report.exit_code as u8)
}

fn check(args: &CheckArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.source.scenario)?;
    let net = file.to_network()?;
    let report = check_nonspeculative(&net, args.samples, args.seed)?;
    print!("{}", render::speculation(&net.labels, &report, args.samples));
    if let Some(out) = &args.source.out {
        write_json(out, &report)?;
    }
    Ok(0)
}

fn solver_for(file: &ScenarioFile, args: &CommonArgs) -> anyhow::Result<contagion_core::scenario::SolverMeta> {
    Ok(resolve_solver(file, &args.overrides()?)?)
}

fn diagnose(args: &CommonArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.source.scenario)?;
    let meta = solver_for(&file, args)?;
    let net = file.to_network()?;
    let outcome = detect_nonexistence(&net, &meta.options())?;
    print!("{}", render::outcome(&net.labels, &outcome));
    if let Some(out) = &args.source.out {
        write_json(out, &outcome)?;
    }
    Ok(match outcome {
        StaticOutcome::FixedPoint(_) => 0,
        StaticOutcome::Nonexistent(_) => 2,
        StaticOutcome::Inconclusive(_) => 3,
    })
}

fn sensitivity(args: &SensitivityArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.common.source.scenario)?;
    let meta = solver_for(&file, &args.common)?;
    let net = file.to_network()?;
    let direction = parse_list(&args.direction_vector)?;
    let report = sensitivity_in_assets(&net, &direction, args.steps, &meta.options())?;
    print!("{}", render::sensitivity(&net.labels, &report));
    if let Some(out) = &args.common.source.out {
        write_json(out, &report)?;
    }
    Ok(if report.failure.is_some() { 3 } else { 0 })
}

fn compare(args: &CommonArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.source.scenario)?;
    let meta = solver_for(&file, args)?;
    let net = file.to_network()?;
    let schedule = file.split_schedule(meta.epsilon)?;
    let report = compare_static_dynamic(&net, &schedule, &meta.options())?;
    print!("{}", render::comparison(&net.labels, &report));
    if let Some(out) = &args.source.out {
        write_json(out, &report)?;
    }
    Ok(0)
}

fn validate(args: &SourceArgs) -> anyhow::Result<u8> {
    let file = load_scenario(&args.scenario)?;
    let report = file.validate(None)?;
    let net_warnings = match file.mode {
        Mode::Dynamic => file.to_network().map(|n| validate_network(&n).warnings).unwrap_or_default(),
        Mode::Static => Vec::new(),
    };
    println!(
        "{}: valid {} scenario, {} nodes, {} obligations, {} contracts",
        if file.meta.name.is_empty() { &args.scenario } else { &file.meta.name },
        match file.mode {
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        },
        file.network.nodes.len(),
        file.liabilities.len(),
        file.contracts.len()
    );
    for w in report.warnings.iter().chain(&net_warnings) {
        println!("warning: {w}");
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(0)
}

fn failure_code(err: &anyhow::Error) -> u8 {
    let clearing = match err.downcast_ref::<ScenarioError>() {
        Some(ScenarioError::Clearing(e)) => Some(e),
        Some(_) => return 1,
        None => err.downcast_ref::<ClearingError>(),
    };
    match clearing {
        Some(ClearingError::InvalidInput(_) | ClearingError::Structural(_)) | None => 1,
        Some(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Clear(a) => clear(a),
        Command::Check(a) => check(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Compare(a) => compare(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_code(&e))
        }
    }
}
