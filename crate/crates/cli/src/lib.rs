//! Command-line pipeline around `surrogate-core`.
//!
//! Every subcommand reads one [`RunConfig`], resolved from an optional TOML
//! file plus flag overrides, and writes plot-ready CSV/JSON under `--out`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{GridSize, RunConfig};
use surrogate_core::dataset::Mode;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] surrogate_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
        }
    }

    /// One-line JSON for stderr.
    pub fn error_line(&self) -> String {
        error_line(self.kind(), &self.to_string())
    }
}

pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "status": "error", "kind": kind, "message": message }).to_string()
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(name = "surrogate", version, about = "GPR surrogates for variance swaps and American puts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Product: varswap or amput.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<Mode>,

    /// RNG seed for dataset draws (default 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// PDE grid as NxN (space x time). Repeat for several bench grids.
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Vec<GridSize>,

    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Disable the data-parallel paths.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Pricer outputs (K_var, or V, delta, gamma, theta) per factor.
    Target,
    /// Total variance w(k) per SVI factor.
    Surface,
    /// Value, delta, gamma and exercise boundary over the (S, t) grid.
    Pde,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train and test datasets plus a manifest.
    Gen {
        /// Rows for both splits; overrides the per-split counts.
        #[arg(long)]
        count: Option<usize>,
        /// Training rows.
        #[arg(long)]
        train_count: Option<usize>,
        /// Test rows.
        #[arg(long)]
        test_count: Option<usize>,
    },
    /// Fit one GPR per target and export the LML landscapes.
    Train,
    /// Score trained models on the test set.
    Eval,
    /// Time batch GPR prediction against the ground-truth pricer.
    Bench {
        /// Wall-clock budget per reference grid, in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// One-at-a-time sweeps with the ground-truth pricers.
    Sensitivity {
        /// Comma-separated factor names; an empty list sweeps nothing.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "target")]
        kind: SweepKind,
        /// Points per sweep.
        #[arg(long)]
        points: Option<usize>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: surrogate_core::Error| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<GridSize, String> {
    s.parse()
}

/// Resolves the configuration and dispatches. Returns the command's JSON summary.
pub fn run(cli: Cli) -> Result<serde_json::Value> {
    let mut cfg = RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Gen {
            count,
            train_count,
            test_count,
        } => {
            if let Some(n) = count {
                cfg.train_count = n;
                cfg.test_count = n;
            }
            cfg.train_count = train_count.unwrap_or(cfg.train_count);
            cfg.test_count = test_count.unwrap_or(cfg.test_count);
            cfg.validate()?;
            commands::gen::run(&cfg)
        }
        Command::Train => commands::train::run(&cfg),
        Command::Eval => commands::eval::run(&cfg),
        Command::Bench { budget } => {
            if let Some(b) = budget {
                cfg.bench.budget_seconds = b;
            }
            cfg.validate()?;
            commands::bench::run(&cfg)
        }
        Command::Sensitivity { factors, kind, points } => {
            if let Some(f) = factors {
                cfg.sensitivity.factors = Some(f.into_iter().filter(|s| !s.is_empty()).collect());
            }
            if let Some(p) = points {
                cfg.sensitivity.points = p;
            }
            cfg.validate()?;
            commands::sensitivity::run(&cfg, kind)
        }
    }
}
