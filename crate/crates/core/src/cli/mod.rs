//! Command-line front end: flag/config parsing, command dispatch, and report files.
//!
//! Exit status: 0 on completion, 2 on configuration errors, 3 on evaluation errors.

mod commands;
mod report;
mod resolve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

pub use report::{render_curves, Num, Report, ScoreRecord, TableRecord};
pub use resolve::{parse_c_grid, resolve_loss};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate S2(q-hat, q), S2(q, q) and their gap.
    Score,
    /// Propriety search, strictness and curve probes for a loss on a family.
    Audit,
    /// Run one of the constructive counterexamples (see --kind).
    Counterexample,
    /// Tabulate a sweep (see --kind).
    Sweep,
    /// Run the built-in invariant suite.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::Audit => "audit",
            Command::Counterexample => "counterexample",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }
}

/// Every option, as given on the command line or in a TOML config file.
/// Keys in the file are the long flag names.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Command to run (may also be given in the config file).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Loss: bayes-ce, bayes-brier, der, brier, ce, linear, sq-mean, or a full descriptor such as affine(3.7,0,0,1,der(1)).
    #[arg(long)]
    pub loss: Option<String>,
    /// Regulariser weight for bayes-ce, bayes-brier and der given by bare name.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Second-order family for audits: dirichlet, dirac-categorical, nig, dirac-gaussian.
    #[arg(long)]
    pub family: Option<String>,
    /// Number of classes for classification families.
    #[arg(long)]
    pub k: Option<usize>,
    /// Predicted second-order distribution, e.g. dirichlet(2,2).
    #[arg(long)]
    pub q_hat: Option<String>,
    /// Target second-order distribution.
    #[arg(long)]
    pub q: Option<String>,
    /// Starting point of a mixing path (order-sensitivity and concavity sweeps).
    #[arg(long)]
    pub q_prime: Option<String>,
    /// Alternative prediction for counterexample constructions.
    #[arg(long)]
    pub q_bar: Option<String>,
    /// First-order reference distribution for the neighbourhood counterexample.
    #[arg(long)]
    pub p_tilde: Option<String>,
    /// Evaluation path: auto, exact, quadrature, mc.
    #[arg(long)]
    pub method: Option<String>,
    /// Counterexample kind (classif-i, classif-ii, regress-i, regress-ii, der) or
    /// sweep kind (peakedness, order, concavity).
    #[arg(long)]
    pub kind: Option<String>,
    /// Base concentration vector for the peakedness sweep, e.g. 1,1.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Scale grid: a:b:N (linear), a:b:logN (doubling, N = b/a), a:b:geomN, or a list.
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Class index for the multi-class counterexample.
    #[arg(long)]
    pub y: Option<usize>,
    /// Location of the regression constructions (mu* or the DER centre)
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Spread of the regression constructions (target standard deviation)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Neighbourhood half-width for the neighbourhood counterexample.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Swap the two pieces of the two-sided regression construction.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mirrored: Option<bool>,
    /// Random seed; mandatory whenever Monte Carlo is used.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prefer Monte Carlo over exact/quadrature paths in probes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mc: Option<bool>,
    /// Monte Carlo draws per score estimate
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Random pairs per propriety search.
    #[arg(long)]
    pub n_pairs: Option<usize>,
    /// Points on lambda grids of curve probes.
    #[arg(long)]
    pub lambda_grid: Option<usize>,
    /// Absolute floor of the certification margin
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Multiple of the error estimate a gap must exceed to be certified (at least 3)
    #[arg(long)]
    pub margin_factor: Option<f64>,
    /// Gauss-Hermite node count (Gauss-Legendre uses twice as many).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Output path prefix for the report and table files.
    #[arg(long)]
    pub out: Option<String>,
    /// Overwrite existing report files.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub force: Option<bool>,
}

impl Settings {
    /// Values set in `over` replace those in `self`.
    pub fn overlay(self, over: Settings) -> Result<Settings, Error> {
        let mut base = serde_json::to_value(self).map_err(|e| Error::Parse(e.to_string()))?;
        let top = serde_json::to_value(over).map_err(|e| Error::Parse(e.to_string()))?;
        if let (Some(b), serde_json::Value::Object(t)) = (base.as_object_mut(), top) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k, v);
                }
            }
        }
        serde_json::from_value(base).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "scorelab", version, about = "Evaluate and audit first- and second-order scoring rules")]
pub struct Cli {
    /// Command to run.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML file whose keys mirror the long flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

/// A failure mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Eval(String),
}

impl CliError {
    pub fn status(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Eval(_) => EXIT_EVAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Eval(m) => write!(f, "evaluation error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Evaluation { .. } => CliError::Eval(e.to_string()),
            Error::Argument(_) | Error::Parse(_) => CliError::Config(e.to_string()),
        }
    }
}

fn load_settings(cli: Cli) -> Result<(Command, Settings), CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<Settings>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    let mut flags = cli.settings;
    flags.command = cli.command;
    let merged = file.overlay(flags)?;
    let command = merged.command.ok_or_else(|| CliError::Config("no command given (score, audit, counterexample, sweep, selftest)".into()))?;
    Ok((command, merged))
}

/// Parses `args` (including the program name), runs the command, and returns the exit status.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return status;
        }
    };
    match load_settings(cli).and_then(|(command, settings)| commands::execute(command, settings)) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("scorelab: {e}");
            e.status()
        }
    }
}
