//! Command-line front end: reads a scenario config, runs it, writes CSV/JSON
//! files to the output directory and prints a one-line JSON summary.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 fit did not converge (outputs are still written), 1 I/O.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
mod scenarios;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
pub use io::{load_counttrace_csv, load_dataset_csv, load_spectrum_csv, load_timetrace_csv};
pub use scenarios::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Transmission spectrum and window metrics.
    Spectrum,
    /// Gaussian pulse through the medium at constant control.
    Propagate,
    /// Storage and retrieval with a ramped control.
    Store,
    /// Fit a transmission spectrum.
    FitSpectrum,
    /// Global fit of delay, duration and transmission versus control power.
    FitSlowlight,
    /// Synthetic photon counts.
    Synth,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Propagate => "propagate",
            Scenario::Store => "store",
            Scenario::FitSpectrum => "fit-spectrum",
            Scenario::FitSlowlight => "fit-slowlight",
            Scenario::Synth => "synth",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Scenario::Synth)
    }
}

#[derive(Debug, Parser)]
#[command(name = "eitsim", version, about = "EIT, slow-light and light-storage simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Scenario config (TOML, dotted keys).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// RNG seed; required by stochastic scenarios.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Progress messages on stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transmission spectrum and window metrics.
    Spectrum(Common),
    /// Gaussian pulse through the medium at constant control.
    Propagate(Common),
    /// Storage and retrieval with a ramped control.
    Store(Common),
    /// Fit a transmission spectrum (EIT model or Lorentzian).
    FitSpectrum(Common),
    /// Global fit of delay, duration and transmission versus control power.
    FitSlowlight(Common),
    /// Synthetic photon counts (requires --seed).
    Synth(Common),
}

impl Command {
    fn split(self) -> (Scenario, Common) {
        match self {
            Command::Spectrum(c) => (Scenario::Spectrum, c),
            Command::Propagate(c) => (Scenario::Propagate, c),
            Command::Store(c) => (Scenario::Store, c),
            Command::FitSpectrum(c) => (Scenario::FitSpectrum, c),
            Command::FitSlowlight(c) => (Scenario::FitSlowlight, c),
            Command::Synth(c) => (Scenario::Synth, c),
        }
    }
}

/// Resolved invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub scenario: Scenario,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub verbose: bool,
}

/// Parses `argv` (including the program name), runs the scenario and
/// returns the process exit code. The summary goes to stdout, errors to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (scenario, common) = cli.command.split();
    let inv = Invocation {
        scenario,
        config: common.config,
        seed: common.seed,
        out: common.out,
        verbose: common.verbose,
    };
    match execute(&inv) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.converged {
                0
            } else {
                eprintln!("error: fit did not converge");
                4
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a resolved invocation. Non-convergence is reported through
/// [`Outcome::converged`], not as an error.
pub fn execute(inv: &Invocation) -> CliResult<Outcome> {
    let cfg = config::load(&inv.config)?;
    cfg.check_sections(inv.scenario)?;
    if inv.scenario.is_stochastic() && inv.seed.is_none() {
        return Err(CliError::config(format!("--seed is required for scenario `{}`", inv.scenario.name())));
    }
    std::fs::create_dir_all(&inv.out).map_err(|e| CliError::io(&inv.out, e))?;
    scenarios::run(inv, &cfg)
}
