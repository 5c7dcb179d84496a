//! Command-line front end for `dlza`: TOML configs in, CSV and plot
//! scripts out.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 numerical failure
//! (divergence, instability), 3 I/O error.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{SimulateOptions, ValidateOptions};
use crate::config::{FourthMoment, Resolved, RunConfig};
pub use crate::error::{CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(name = "dlza", version, about = "Leaky zero-attracting diffusion LMS: simulation and theory")]
pub struct Cli {
    /// Worker threads for Monte Carlo trials (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo experiment and write the averaged MSD curves.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Exit with status 2 if any trial of any variant diverged.
        #[arg(long)]
        strict: bool,
        /// Add theory_<label> columns for ATC variants.
        #[arg(long)]
        theory: bool,
        /// Also dump the weights of trial 0 for each variant.
        #[arg(long)]
        weight_history: bool,
    },
    /// Iterate the mean-square recursion and compute the steady state.
    Theory {
        #[command(flatten)]
        run: RunArgs,
        /// Add per-coefficient mean-error columns.
        #[arg(long)]
        means: bool,
    },
    /// Print the mean, mean-square and combined step-size bounds.
    Stability {
        #[command(flatten)]
        run: RunArgs,
        /// Also bisect the step size by simulation.
        #[arg(long)]
        empirical: bool,
        #[arg(long, value_enum)]
        fourth_moment: Option<FourthMomentArg>,
    },
    /// Write a matplotlib script for a CSV produced by this tool.
    Plot {
        csv: PathBuf,
        /// Script path (default: the CSV path with a .py extension).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a topology and its combination matrix.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Edge-list file to check instead of the configured topology.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Combination matrix file (one row per line) to check.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Write the topology in edge-list form.
        #[arg(long)]
        export_topology: Option<PathBuf>,
        /// Print the resolved config.
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FourthMomentArg {
    Auto,
    Analytic,
    Sampled,
}

/// Flags shared by the config-driven subcommands. Flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config, or a CSV written by this tool (its echoed config).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Preset to start from.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output directory (default: $DLZA_OUT_DIR, else the current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Output file name, relative to the output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Leave the generated_at line out of the metadata.
    #[arg(long)]
    pub no_timestamp: bool,
}

impl RunArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.scenario.is_some() {
            cfg.scenario = self.scenario.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if self.iterations.is_some() {
            cfg.iterations = self.iterations;
        }
        if self.out_dir.is_some() {
            cfg.output.dir = self.out_dir.clone();
        }
        if self.output.is_some() {
            cfg.output.file = self.output.clone();
        }
        if self.no_timestamp {
            cfg.output.timestamp = false;
        }
        Ok(cfg)
    }

    fn resolve(&self) -> Result<Resolved, CliError> {
        self.load()?.resolve()
    }
}

fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Simulate {
            run,
            strict,
            theory,
            weight_history,
        } => {
            let mut cfg = run.load()?;
            cfg.output.theory_overlay |= theory;
            cfg.output.weight_history |= weight_history;
            commands::simulate(&cfg.resolve()?, &SimulateOptions { strict })
        }
        Command::Theory { run, means } => {
            let mut cfg = run.load()?;
            cfg.analysis.record_means |= means;
            commands::theory(&cfg.resolve()?)
        }
        Command::Stability {
            run,
            empirical,
            fourth_moment,
        } => {
            let mut cfg = run.load()?;
            cfg.analysis.empirical |= empirical;
            if let Some(f) = fourth_moment {
                cfg.analysis.fourth_moment = match f {
                    FourthMomentArg::Auto => FourthMoment::Auto,
                    FourthMomentArg::Analytic => FourthMoment::Analytic,
                    FourthMomentArg::Sampled => FourthMoment::Sampled,
                };
            }
            commands::stability(&cfg.resolve()?)
        }
        Command::Plot { csv, output } => commands::plot(&csv, output.as_deref()),
        Command::Validate {
            run,
            topology,
            matrix,
            export_topology,
            print_config,
        } => {
            let resolved = if topology.is_some() && run.config.is_none() && run.scenario.is_none() {
                None
            } else {
                Some(run.resolve()?)
            };
            commands::validate(
                resolved.as_ref(),
                &ValidateOptions {
                    topology: topology.as_deref(),
                    matrix: matrix.as_deref(),
                    export_topology: export_topology.as_deref(),
                    print_config,
                },
            )
        }
    }
}

/// Runs a parsed command line, on a dedicated pool when `--jobs` is given.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.jobs {
        None => execute(cli.command),
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| execute(cli.command))
        }
    }
}
