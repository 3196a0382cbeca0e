//! Command-line front end: configuration, subcommands and artifact files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use commands::SweepMode;
use config::Config;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "onset-cvi",
    version,
    about = "Onset-based validity sweeps over time-ordered event features"
)]
pub struct Cli {
    /// Worker threads for the sweep (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config and ONSET_CVI_OUTPUT_DIR).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Seed override; recorded in every artifact.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the configured preprocessing and write the resulting table.
    Preprocess(Common),
    /// Generate a staged synthetic dataset with its change points.
    Synth(Common),
    /// Sweep feature subsets and K, select by onset validity, write the histogram.
    Search(Common),
    /// Same sweep, selected by the shape-index voting baseline.
    Vote(Common),
    /// Rand index summaries of stored partitions against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Partition CSVs; defaults to those found in the output directory.
        inputs: Vec<PathBuf>,
    },
    /// Track cluster onsets over `t,cluster_id` lines, printing one JSON line per new cluster.
    Stream {
        /// Axis end used to normalize gaps.
        #[arg(long)]
        t_end: f64,
        /// Input file; standard input when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the tallest histogram bins and their nearest change points.
    Report(Common),
}

fn load_config(common: &Common) -> CliResult<Config> {
    match &common.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
}

fn out_dir(common: &Common, cfg: &Config) -> PathBuf {
    output::output_dir(
        common.out.as_deref(),
        cfg.output_dir.as_deref().map(|p| cfg.resolve(p)),
    )
}

fn require_config(common: &Common) -> CliResult<&Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --config".into()))
}

/// Runs one parsed command line.
pub fn execute(cli: Cli) -> CliResult<()> {
    let jobs = cli.jobs;
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Stream { t_end, input } => commands::cmd_stream(t_end, input.as_deref()),
        Command::Synth(common) => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.synth.seed = seed;
            }
            commands::cmd_synth(&cfg, &out_dir(&common, &cfg))
        }
        Command::Preprocess(common) => {
            require_config(&common)?;
            let cfg = load_config(&common)?;
            commands::cmd_preprocess(&cfg, &out_dir(&common, &cfg))
        }
        Command::Search(common) => sweep(&common, jobs, SweepMode::Search),
        Command::Vote(common) => sweep(&common, jobs, SweepMode::Vote),
        Command::Eval { common, inputs } => {
            let cfg = with_seed(load_config(&common)?, common.seed);
            commands::cmd_eval(&cfg, &out_dir(&common, &cfg), &inputs)
        }
        Command::Report(common) => {
            let cfg = with_seed(load_config(&common)?, common.seed);
            commands::cmd_report(&cfg, &out_dir(&common, &cfg))
        }
    }
}

fn with_seed(mut cfg: Config, seed: Option<u64>) -> Config {
    if let Some(seed) = seed {
        cfg.search.seed = seed;
    }
    cfg
}

fn sweep(common: &Common, jobs: Option<usize>, mode: SweepMode) -> CliResult<()> {
    require_config(common)?;
    let cfg = with_seed(load_config(common)?, common.seed);
    commands::cmd_search(&cfg, &out_dir(common, &cfg), jobs, mode)
}

/// Runs the command line and maps the outcome to a process exit code.
pub fn run(cli: Cli) -> u8 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
