// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{config_error, ConfigError, ExperimentConfig};
use crate::run::Table;

const EXIT_NUMERICAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 numerical failure (including any failed grid point
or Monte Carlo mismatch), 2 configuration or usage error.

Presets: fig-nig, fig-cgmye, fig-drift, mc-nig, mc-bs, moments-nig, moments-cgmye.

CSV output is UTF-8 with a header row and '.' as decimal separator.
Per-strategy columns in error-sweep and drift-sweep, prefixed by the
strategy name (bs, delta, mvo, mvo_proxy; numbered when a kind repeats):
  <name>_capital         endowment c the error is measured at
  <name>_w               optimal endowment of the strategy
  <name>_mse             mean squared hedging error
  <name>_relative_error  sqrt(mse) / c, empty when c <= 0
  <name>_quad_error      absolute quadrature error estimate of mse
  <name>_status          ok, or 'error: <message>' with the other cells empty
error-sweep:  s0, then the per-strategy columns
drift-sweep:  kappa1, mu (NIG location reaching kappa1), then the per-strategy columns
mc-check:     s0, strategy, capital, engine_mse, engine_quad_error, mc_mse,
              mc_std_error, z, allowance, adjusted_z, status (pass/fail);
              adjusted_z = max(0, |engine - mc| - allowance) / se must stay <= 4
moments:      horizon (daily = 1/252, yearly = 1), t, variance, skewness, excess_kurtosis";

/// Mean squared hedging errors of delta strategies in exponential Lévy models.
#[derive(Debug, Parser)]
#[command(name = "levy-hedge", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hedging error of each strategy over a grid of spot prices.
    ErrorSweep(Common),
    /// Hedging error over a grid of drift rates kappa(1) of an NIG model.
    DriftSweep(Common),
    /// Compare engine errors with Monte Carlo simulation.
    McCheck(Common),
    /// Daily and yearly log-return variance, skewness and excess kurtosis.
    Moments(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment config.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output CSV (default: the config's output, else stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Relative quadrature tolerance, overriding the config.
    #[arg(long, value_name = "REL")]
    tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Monte Carlo seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => config::load(path),
            (None, Some(name)) => config::preset(name),
            (None, None) => Err(config_error("pass --config or --preset")),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("error: {failures} computation(s) failed; see the status column");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<levy_hedge::Error>() {
        Some(err) if err.is_usage_error() => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the command and returns the number of failed computations.
fn execute(cli: Cli) -> anyhow::Result<usize> {
    let (Command::ErrorSweep(common)
    | Command::DriftSweep(common)
    | Command::McCheck(common)
    | Command::Moments(common)) = &cli.command;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(config_error("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(config_error(format!("--tol must lie in (0, 1), got {tol}")));
        }
    }
    let cfg = common.load()?;
    if !matches!(cli.command, Command::Moments(_)) {
        eprintln!("note: spot, strike and capital are read as discounted amounts (a discounted strike K=99 means 99 in today's money)");
    }
    let quad = || cfg.quadrature.resolve(common.tol);
    let table = match &cli.command {
        Command::ErrorSweep(_) => run::run_error_sweep(&cfg, quad()?)?,
        Command::DriftSweep(_) => run::run_drift_sweep(&cfg, quad()?)?,
        Command::McCheck(_) => run::run_mc_check(&cfg, quad()?, common.seed)?,
        Command::Moments(_) => run::run_moments(&cfg)?,
    };
    emit(&table, common.out.as_ref().or(cfg.output.as_ref()))?;
    Ok(table.failures)
}

fn emit(table: &Table, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}
