//! `faultnet`: synthesis, features, training, evaluation and streaming
//! detection for series-compensated line faults.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use faultnet::sweep::SweepAxis;
use faultnet::{Exec, FaultType};

#[derive(Debug, Parser)]
#[command(
    name = "faultnet",
    version,
    about = "Wavelet-ANN fault detection toolchain"
)]
struct Cli {
    /// Disable data parallelism (results are identical either way).
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Synthesize one fault scenario as a signal CSV.
    Synth(SynthArgs),
    /// Print the m, n, p, q wavelet coefficients of a signal CSV window.
    Features(FeaturesArgs),
    /// Generate the 5400-row labeled grid (K x Vw x R x class).
    Dataset(DatasetArgs),
    /// Train a classifier on a dataset CSV.
    Train(TrainArgs),
    /// Confusion matrix and per-class precision/recall on a dataset split.
    Eval(EvalArgs),
    /// Sliding-window detection over a signal CSV or stdin (`-`).
    Detect(DetectArgs),
    /// Feature coefficients versus one of K, R or Vw.
    Sweep(SweepArgs),
    /// Steady-state stability limit of the compensated line.
    Sssl(SsslArgs),
    /// Refit the surrogate amplitude law to the tabulated anchors.
    Calibrate(CalibrateArgs),
    /// Rerun the command recorded in a run manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Dataset(_) => "dataset",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Detect(_) => "detect",
            Command::Sweep(_) => "sweep",
            Command::Sssl(_) => "sssl",
            Command::Calibrate(_) => "calibrate",
            Command::Replay(_) => "replay",
        }
    }

    fn out_mut(&mut self) -> Option<&mut Option<PathBuf>> {
        match self {
            Command::Features(a) => Some(&mut a.out),
            Command::Eval(a) => Some(&mut a.out),
            Command::Detect(a) => Some(&mut a.out),
            Command::Calibrate(a) => Some(&mut a.out),
            _ => None,
        }
    }

    /// Redirects the primary output. Returns false for commands without one.
    pub fn set_out(&mut self, out: PathBuf) -> bool {
        match self {
            Command::Synth(a) => a.out = out,
            Command::Dataset(a) => a.out = out,
            Command::Train(a) => a.out = out,
            Command::Sweep(a) => a.out = out,
            other => match other.out_mut() {
                Some(slot) => *slot = Some(out),
                None => return false,
            },
        }
        true
    }
}

fn parse_fault(s: &str) -> Result<FaultType, String> {
    s.parse().map_err(|e: faultnet::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: faultnet::Error| e.to_string())
}

/// Scenario flags: K in percent, R in ohms, Vw in m/s.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScenarioArgs {
    /// AG, BG, CG, AB, BC, CA, ABG, BCG, CAG, ABC, ABCG or none.
    #[arg(long, default_value = "AG", value_parser = parse_fault)]
    pub fault: FaultType,
    /// Series compensation level in percent.
    #[arg(long, default_value_t = 20.0)]
    pub k: f64,
    /// Fault resistance in ohms.
    #[arg(long, default_value_t = 0.01)]
    pub r: f64,
    /// Wind speed in m/s.
    #[arg(long, default_value_t = 6.0)]
    pub vw: f64,
    /// Fault inception time in seconds.
    #[arg(long, default_value_t = faultnet::synth::DEFAULT_FAULT_ON_S)]
    pub fault_on: f64,
    /// Fault clearing time in seconds.
    #[arg(long, default_value_t = faultnet::synth::DEFAULT_FAULT_OFF_S)]
    pub fault_off: f64,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = faultnet::synth::DEFAULT_SAMPLE_RATE_HZ)]
    pub rate: f64,
    /// Record length in seconds [default: 4.7, or fault-off + 0.15 if later].
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative amplitude/phase noise (extension; 0 reproduces the grid).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FeaturesArgs {
    /// Signal CSV (`t,iA,iB,iC,iG`).
    pub input: PathBuf,
    /// Window start in seconds.
    #[arg(long, default_value_t = faultnet::synth::DEFAULT_FAULT_ON_S)]
    pub fault_on: f64,
    /// Window end in seconds.
    #[arg(long, default_value_t = faultnet::synth::DEFAULT_FAULT_OFF_S)]
    pub fault_off: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative amplitude/phase noise per sample (extension).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Hidden {
    #[value(name = "50x50")]
    #[serde(rename = "50x50")]
    Fifty,
    #[value(name = "25x25")]
    #[serde(rename = "25x25")]
    TwentyFive,
}

impl Hidden {
    pub fn widths(self) -> [usize; 2] {
        match self {
            Hidden::Fifty => [50, 50],
            Hidden::TwentyFive => [25, 25],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Random,
    Zero,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset CSV written by `dataset`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model file; the history goes to `<out>.history.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "50x50")]
    pub hidden: Hidden,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitArg,
    #[arg(long, default_value_t = 1e-7)]
    pub mse_goal: f64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    /// Seeds the weight initialization and the holdout split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of each class held out from training (0 trains on all rows).
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Fraction of the training rows used for early stopping.
    #[arg(long, default_value_t = 0.0)]
    pub validation: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Evaluate the holdout of this fraction (as in `train`); 0 uses all rows.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Split seed; must match the one used for training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    /// Signal CSV, or `-` for stdin.
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Window length in samples [default: one fundamental cycle].
    #[arg(long)]
    pub window: Option<usize>,
    /// Hop in samples [default: half a window].
    #[arg(long)]
    pub hop: Option<usize>,
    /// Consecutive agreeing windows needed to open or close an event.
    #[arg(long)]
    pub debounce: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Sample rate in Hz [default: inferred from the time column].
    #[arg(long)]
    pub rate: Option<f64>,
    /// Writes every window's raw outputs to this CSV.
    #[arg(long)]
    pub emit_windows: Option<PathBuf>,
    /// Also write the event lines to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// K, R or Vw.
    #[arg(value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated axis values in flag units [default: the grid points].
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SsslArgs {
    /// Sending-end voltage in volts.
    #[arg(long, default_value_t = 161e3)]
    pub v1: f64,
    /// Receiving-end voltage in volts.
    #[arg(long, default_value_t = 161e3)]
    pub v2: f64,
    /// Line reactance in ohms.
    #[arg(long, default_value_t = faultnet::synth::LINE_REACTANCE_OHMS)]
    pub xl: f64,
    /// Compensation level in percent.
    #[arg(long, default_value_t = 20.0)]
    pub k: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match commands::run(&cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
