use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lorasim::run::{self, Overrides};
use lorasim::scenario::{self, LoadError};
use lorasim::{report, Experiment};
use lorasim_core::experiment::{RunError, Scenario, ScenarioError};

/// Deterministic LoRaWAN attack simulations with CSV output.
#[derive(Parser)]
#[command(name = "lorasim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Receive rate per data rate without an attacker.
    Baseline(RunArgs),
    /// ADR spoofing through a wormhole.
    AdrSpoof(RunArgs),
    /// Beacon drifting against a Class B device.
    BeaconSpoof(RunArgs),
    /// Rebuild summaries from the raw CSVs in --out.
    Report {
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; the built-in scenario of the experiment if omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Trials per parameter cell.
    #[arg(long)]
    trials: Option<u32>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

/// Scenario problems exit with 2, everything else with 1.
enum Failure {
    Scenario(anyhow::Error),
    Other(anyhow::Error),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { .. } => Failure::Other(e.into()),
            _ => Failure::Scenario(e.into()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Scenario(e.into())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(s) => s.into(),
            RunError::Sim(_) => Failure::Other(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn prepare(exp: Experiment, args: &RunArgs) -> Result<Scenario, Failure> {
    let mut sc = match &args.scenario {
        Some(p) => scenario::load(p)?,
        None => exp.builtin(),
    };
    Overrides { trials: args.trials, seed: args.seed }.apply(&mut sc);
    sc.validate()?;
    sc.expect_attack(exp.attack_kind())?;
    Ok(sc)
}

fn write_scenario(out: &Path, sc: &Scenario) -> anyhow::Result<PathBuf> {
    let path = out.join("scenario.toml");
    std::fs::write(&path, scenario::to_toml(sc)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn execute(exp: Experiment, args: &RunArgs) -> Result<(), Failure> {
    let sc = prepare(exp, args)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = match exp {
        Experiment::Baseline => report::write_baseline(&args.out, &run::baseline(&sc, args.parallel)?),
        Experiment::AdrSpoof => report::write_adr(&args.out, &run::adr_spoof(&sc, args.parallel)?),
        Experiment::BeaconSpoof => report::write_beacon(&args.out, &run::beacon_spoof(&sc, args.parallel)?),
    }
    .map_err(anyhow::Error::from)?;
    written.push(write_scenario(&args.out, &sc)?);
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Baseline(a) => execute(Experiment::Baseline, a),
        Command::AdrSpoof(a) => execute(Experiment::AdrSpoof, a),
        Command::BeaconSpoof(a) => execute(Experiment::BeaconSpoof, a),
        Command::Report { out } => report::regenerate(out)
            .map(|ps| ps.iter().for_each(|p| println!("{}", p.display())))
            .map_err(|e| Failure::Other(e.into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
