//! `skewlab` command line: runs one experiment (or a sweep of one) and writes
//! JSON-lines records. Exit code 0 when every verdict passes, 1 when a
//! verdict fails or an experiment errors, 2 for invalid configuration.

mod config;
mod experiments;
mod record;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use skewlab::LabError;

use config::{Flags, RunConfig};
use record::{ExperimentRecord, Sink};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Experiment { stage: String, message: String },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Experiment { stage, message } => write!(f, "experiment failed at stage `{stage}`: {message}"),
        }
    }
}

fn experiment_error(name: &str, e: LabError) -> CliError {
    match e {
        LabError::Stage { stage, source } => CliError::Experiment { stage: format!("{name}/{stage}"), message: source.to_string() },
        LabError::InvalidParameter(m) => CliError::Config(m),
        other => CliError::Experiment { stage: name.to_string(), message: other.to_string() },
    }
}

#[derive(Parser, Debug)]
#[command(name = "skewlab", version, about = "Experiments on skew products of the standard map over a toral automorphism")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Forward orbit of a point, with one-step and exact base round trips.
    Orbit,
    /// Finite-time Lyapunov spectra at random points.
    Lyapunov,
    /// Stable and unstable cone invariance sweep.
    Cones,
    /// Strong stable and unstable directions at a point.
    Bundle,
    /// Projection bounds of the strong bundles.
    Pinch,
    /// Fraction of a long unstable image in the good region.
    GoodFraction,
    /// Point whose forward orbit stays in the good region.
    GoodPoint,
    /// Growth of a horizontal segment through a good point.
    CurveGrow,
    /// Center leaf shared by a strong unstable and a strong stable leaf.
    Heteroclinic,
    /// Stable holonomy against the vertical map on a fiber grid.
    Holonomy,
    /// Orbits from the source box to the target box.
    Mix,
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; an empty list runs nothing.
        #[arg(long, default_value = "")]
        values: String,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(experiments::NAMES))]
        experiment: String,
    },
    /// Print the JSON schema of the records.
    Schema,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Axis {
    #[value(name = "N")]
    N,
    Epsilon,
    Seed,
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Orbit => "orbit",
        Command::Lyapunov => "lyapunov",
        Command::Cones => "cones",
        Command::Bundle => "bundle",
        Command::Pinch => "pinch",
        Command::GoodFraction => "good-fraction",
        Command::GoodPoint => "good-point",
        Command::CurveGrow => "curve-grow",
        Command::Heteroclinic => "heteroclinic",
        Command::Holonomy => "holonomy",
        Command::Mix => "mix",
        Command::Sweep { .. } => "sweep",
        Command::Schema => "schema",
    }
}

fn record(name: &str, config: &RunConfig) -> Result<(ExperimentRecord, Option<record::Table>), CliError> {
    let t = Instant::now();
    let outcome = experiments::run(name, config).map_err(|e| experiment_error(name, e))?;
    let pass = outcome.verdicts.values().all(|v| *v);
    let r = ExperimentRecord {
        experiment: name.to_string(),
        config: config.clone(),
        measured: outcome.measured,
        verdicts: outcome.verdicts,
        pass,
        duration_s: t.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        report: outcome.report,
    };
    Ok((r, outcome.table))
}

fn sweep_config(base: &RunConfig, axis: Axis, value: f64, i: usize) -> Result<RunConfig, CliError> {
    let mut c = base.clone();
    match axis {
        Axis::N => c.n = value,
        Axis::Epsilon => c.epsilon = value,
        Axis::Seed => {
            if value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
                return Err(CliError::Config(format!("seed {value} is not a non-negative integer")));
            }
            c.seed = value as u64;
        }
    }
    if !matches!(axis, Axis::Seed) {
        c.seed = experiments::derived_seed(base.seed, i);
    }
    c.validate()?;
    Ok(c)
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Config(format!("sweep value `{t}`: {e}"))))
        .collect()
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Command::Schema = cli.command {
        println!("{}", record::SCHEMA);
        return Ok(true);
    }
    let config = RunConfig::resolve(&cli.flags)?;
    config.validate()?;
    match &cli.command {
        Command::Sweep { axis, values, experiment } => {
            let values = parse_values(values)?;
            let configs = values
                .iter()
                .enumerate()
                .map(|(i, v)| sweep_config(&config, *axis, *v, i))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sink = Sink::open(&config)?;
            let mut all = true;
            for (c, v) in configs.iter().zip(&values) {
                let (r, table) = record(experiment, c)?;
                all &= r.pass;
                sink.write(&r, table.as_ref(), Some(*v))?;
            }
            Ok(all)
        }
        other => {
            let mut sink = Sink::open(&config)?;
            let (r, table) = record(name(other), &config)?;
            sink.write(&r, table.as_ref(), None)?;
            Ok(r.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
