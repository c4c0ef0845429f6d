//! Command-line experiment runner for `latlist`.
//!
//! Every subcommand reads one TOML config, validates it completely, runs,
//! and writes its files into the output directory once all results are in.
//! Exit codes: 0 success, 1 I/O failure, 2 config error, 3 runtime
//! infeasibility.

pub mod commands;
pub mod config;
pub mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;
pub use plot::{emit_plot, PlotError, Region};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Runtime(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<latlist::Error> for CliError {
    fn from(e: latlist::Error) -> Self {
        use latlist::Error as E;
        match e {
            E::Infeasible(_) | E::EnumerationBudgetExceeded { .. } | E::RejectionBudgetExceeded { .. } => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "latlist", version, about = "Lattice list decoding experiments for relay channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Trials, runs or draws; overrides `trials` in the config.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Volumes, rates and nesting of a lattice chain.
    ChainInfo,
    /// Point-to-point list decoding Monte Carlo.
    P2pSim,
    /// Block-Markov decode-and-forward over the degraded relay channel.
    RelaySim,
    /// Two-way relay channel with sum decoding and binning.
    TwrcSim,
    /// Achievable and outer rate regions, optionally swept over one parameter.
    Regions,
    /// Gap between achievable and outer bounds over random channels.
    Gaps,
}

/// Files produced by one subcommand, in write order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

/// Loads `path` and applies the flag overrides.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_text(&text)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.trials.is_some() {
        cfg.trials = cli.trials;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    Ok(cfg)
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    match command {
        Command::ChainInfo => commands::chain_info(cfg),
        Command::P2pSim => commands::p2p_sim(cfg),
        Command::RelaySim => commands::relay_sim(cfg),
        Command::TwrcSim => commands::twrc_sim(cfg),
        Command::Regions => commands::regions(cfg),
        Command::Gaps => commands::gaps(cfg),
    }
}

pub fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, contents) in &outputs.files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
    }
    Ok(())
}

/// Entry point shared by the binary; parses `args`, runs, writes, reports.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = load_config(&cli).and_then(|cfg| {
        let outputs = run(cli.command, &cfg)?;
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        write_outputs(&dir, &outputs)?;
        Ok((dir, outputs))
    });
    match result {
        Ok((dir, outputs)) => {
            if !cli.quiet {
                print!("{}", outputs.summary);
                for (name, _) in &outputs.files {
                    println!("wrote {}", dir.join(name).display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("latlist: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
