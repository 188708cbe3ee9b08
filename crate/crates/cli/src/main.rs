use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod manifest;

/// Subset-choice modelling with determinantal point processes.
#[derive(Debug, Parser)]
#[command(name = "detchoice", version)]
struct Cli {
    /// Master seed for every random stream of the run.
    #[arg(long, global = true, env = "DETCHOICE_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit the determinantal model by MAP or adaptive Metropolis.
    Fit(FitArgs),
    /// Run the structural self-checks.
    Verify(VerifyArgs),
    /// Compare the determinantal model with logistic and MNL across radii.
    Sweep(SweepArgs),
    /// Sample predicted subsets from a fit.
    Predict(PredictArgs),
    /// Score a fit on labelled data by mean MCC.
    Evaluate(EvaluateArgs),
    /// Rerun a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Simulate(a) => &a.out,
            Command::Fit(a) => &a.out,
            Command::Verify(a) => &a.out,
            Command::Sweep(a) => &a.out,
            Command::Predict(a) => &a.out,
            Command::Evaluate(a) => &a.out,
            Command::Replay(a) => &a.out,
        }
    }

    pub fn with_out_dir(mut self, out: PathBuf) -> Self {
        match &mut self {
            Command::Simulate(a) => a.out = out,
            Command::Fit(a) => a.out = out,
            Command::Verify(a) => a.out = out,
            Command::Sweep(a) => a.out = out,
            Command::Predict(a) => a.out = out,
            Command::Evaluate(a) => a.out = out,
            Command::Replay(a) => a.out = out,
        }
        self
    }

    /// Makes input paths absolute so a manifest can be replayed from anywhere.
    fn absolutize_inputs(&mut self) {
        let fix = |p: &mut PathBuf| {
            if let Ok(abs) = std::fs::canonicalize(&*p) {
                *p = abs;
            }
        };
        match self {
            Command::Fit(a) => fix(&mut a.data),
            Command::Predict(a) => {
                fix(&mut a.fit);
                fix(&mut a.data);
            }
            Command::Evaluate(a) => {
                fix(&mut a.fit);
                fix(&mut a.data);
            }
            Command::Replay(a) => fix(&mut a.manifest),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    Spatial,
    Lora,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fixed,
    Varied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Map,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ci {
    Normal,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: Dgp,
    /// Hard-core radius for the spatial process.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 100)]
    pub n_obs: usize,
    /// LoRa: devices per assortment in the fixed scenario.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// LoRa: maximum transmission delay in milliseconds (fixed scenario).
    #[arg(long, default_value_t = 2000.0)]
    pub dmax: f64,
    #[arg(long, value_enum, default_value_t = Scenario::Fixed)]
    pub scenario: Scenario,
    /// LoRa: arrivals this many airtimes apart count as simultaneous.
    #[arg(long, default_value_t = 0.0)]
    pub tie_window: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 25)]
    pub chains: usize,
    #[arg(long, default_value_t = 2000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PriorArgs {
    /// Prior standard deviation of every quality coefficient.
    #[arg(long, default_value_t = 2.0)]
    pub beta_sd: f64,
    /// Prior standard deviation of every log-lengthscale.
    #[arg(long, default_value_t = 1.0)]
    pub loglen_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Map)]
    pub method: Method,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Fit on the raw features even if the schema marks continuous columns.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Instances per check; omit for the full-size suite.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5])]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 50)]
    pub n_eval: usize,
    #[arg(long, default_value_t = 200)]
    pub n_draws: usize,
    #[arg(long, value_enum, default_value_t = Method::Map)]
    pub method: Method,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long, value_enum, default_value_t = Ci::Normal)]
    pub ci: Ci,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    /// `fit.json` from a fit run.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_draws: usize,
    /// Predict from chains that failed the R-hat gate.
    #[arg(long)]
    pub allow_unconverged: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_draws: usize,
    #[arg(long, value_enum, default_value_t = Ci::Normal)]
    pub ci: Ci,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long)]
    pub allow_unconverged: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// `manifest.json` of the run to reproduce.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fresh directory for the rerun.
    #[arg(long)]
    pub out: PathBuf,
}

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const DATA: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VERIFY: u8 = 3;
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use detchoice::error::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Argument(_) | Error::Capacity { .. }) => exit::USAGE,
        _ => exit::DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut command = cli.command;
    command.absolutize_inputs();
    match commands::run(&command, cli.seed) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
