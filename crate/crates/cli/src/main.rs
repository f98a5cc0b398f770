//! `bangbang`: optimize, sweep, analyze and verify bang-bang protocols for the
//! square-lattice XXZ model.

mod analyze;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use bangbang::io::RunConfig;
use bangbang::Boundary;
use clap::{Args, Parser, Subcommand};

use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "bangbang", version, about = "Time-optimal bang-bang control of XXZ ground states")]
struct Cli {
    /// Log progress (repeat for more detail); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find the critical time and optimal protocol for one transfer.
    Optimize(commands::OptimizeArgs),
    /// Run or resume a grid sweep over (ln r_i, ln r_t).
    Sweep(commands::SweepArgs),
    /// Derive phase diagrams, correlations, fits and plot data from a sweep.
    Analyze(analyze::AnalyzeArgs),
    /// Check a stored protocol against the Pontryagin sign rule.
    Verify(commands::VerifyArgs),
    /// Ground-state overlap grid, no optimization.
    Overlap(commands::OverlapArgs),
    /// Linear-ramp adiabatic comparison at given total times.
    Baseline(commands::BaselineArgs),
}

/// System and run options shared by the commands that build a config.
/// Flags override values from `--config`.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML config file; see docs/config.md for every key.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Number of sites M (a perfect square L^2).
    #[arg(long = "M", value_name = "M")]
    pub sites: Option<usize>,

    /// Number of up spins C.
    #[arg(long = "C", value_name = "C")]
    pub occupants: Option<usize>,

    #[arg(long, value_parser = parse_boundary)]
    pub boundary: Option<Boundary>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, env = "BANGBANG_THREADS")]
    pub threads: Option<usize>,

    /// Root under which default output directories are created.
    #[arg(long, env = "BANGBANG_OUTPUT_ROOT", default_value = "runs")]
    pub output_root: PathBuf,
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    match s {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        _ => Err(format!("expected open or periodic, got {s}")),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.sites {
            let l = (m as f64).sqrt().round() as usize;
            if l * l != m {
                return Err(CliError::usage(format!("--M {m} is not a perfect square")));
            }
            config.system.side_length = l;
        }
        if let Some(c) = self.occupants {
            config.system.occupants = c;
        }
        if let Some(b) = self.boundary {
            config.system.boundary = b;
        }
        if let Some(s) = self.seed {
            config.run.seed = s;
        }
        if self.threads.is_some() {
            config.run.threads = self.threads;
        }
        config.validate()?;
        Ok(config)
    }

    /// `--out`, then the config's output, then `<output root>/<name>`.
    pub fn output_dir(&self, config: &RunConfig, out: &Option<PathBuf>, name: String) -> PathBuf {
        out.clone().or_else(|| config.run.output.clone()).unwrap_or_else(|| self.output_root.join(name))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let (result, out_dir) = match cli.command {
        Command::Optimize(a) => commands::optimize(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Analyze(a) => analyze::analyze(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Overlap(a) => commands::overlap(&a),
        Command::Baseline(a) => commands::baseline(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.document());
            if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
                e.write_to(&dir);
            }
            ExitCode::from(e.code as u8)
        }
    }
}
