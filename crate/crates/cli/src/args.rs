use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corridornav::dataset::{GridConfig, Split, Target};
use corridornav::estimator::TrainConfig;
use corridornav::flightsim::{SimConfig, StartSampling};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "corridornav",
    version,
    about = "Corridor-centering experiments for a monocular UAV"
)]
pub struct Cli {
    /// `key = value` file whose entries act as defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Render random corridors into a labeled dataset.
    GenDataset(GenDatasetArgs),
    /// Detect markers in bisector frames and print their labels as JSON lines.
    Label(LabelArgs),
    /// Train one regressor on the train split of a manifest.
    Train(TrainArgs),
    /// Evaluate a model on a manifest and print the report as JSON.
    Eval(EvalArgs),
    /// Fly one closed-loop episode and write its trace.
    Fly(FlyArgs),
    /// Run a seeded batch of episodes and write a summary.
    Sweep(SweepArgs),
}

impl Command {
    pub const NAMES: [&'static str; 6] = ["gen-dataset", "label", "train", "eval", "fly", "sweep"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::GenDataset(_) => "gen-dataset",
            Command::Label(_) => "label",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Fly(_) => "fly",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GenDatasetArgs {
    #[arg(long, default_value_t = 32)]
    pub corridors: usize,
    /// Distance between capture stations, metres.
    #[arg(long, default_value_t = GridConfig::default().station_spacing)]
    pub spacing: f64,
    #[arg(long, default_value_t = 15.0)]
    pub tilt_deg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct LabelArgs {
    /// Dataset directory (or its `frames/` directory) holding `*_bisector.ppm`.
    #[arg(long, value_name = "DIR")]
    pub input: PathBuf,
    /// JSON-lines output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub target: Target,
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file; the loss curve goes next to it as `<stem>.loss.csv`.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_iters)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Must match the model's target when given.
    #[arg(long)]
    pub target: Option<Target>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Directory for `predictions.csv` and the run manifest.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Oracle,
    Regressor,
}

#[derive(Debug, Args, Serialize)]
pub struct CorridorArgs {
    #[arg(long, default_value_t = 20.0)]
    pub corridor_length: f64,
    #[arg(long, default_value_t = 2.0)]
    pub corridor_width: f64,
    #[arg(long, default_value_t = 3.0)]
    pub corridor_height: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = EstimatorKind::Oracle)]
    pub estimator: EstimatorKind,
    #[arg(long, value_name = "FILE")]
    pub angle_model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub distance_model: Option<PathBuf>,
    /// Gaussian noise on oracle angle estimates, radians.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_angle: f64,
    /// Gaussian noise on oracle distance estimates.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_distance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimArgs {
    #[arg(long, default_value_t = SimConfig::default().forward_speed)]
    pub forward_speed: f64,
    #[arg(long, default_value_t = SimConfig::default().lateral_speed)]
    pub lateral_speed: f64,
    #[arg(long, default_value_t = SimConfig::default().yaw_rate)]
    pub yaw_rate: f64,
    #[arg(long, default_value_t = SimConfig::default().latency_transport)]
    pub latency_transport: f64,
    #[arg(long, default_value_t = SimConfig::default().latency_inference)]
    pub latency_inference: f64,
    #[arg(long, default_value_t = SimConfig::default().capture_period)]
    pub capture_period: f64,
    /// Standard deviation of lateral gusts, m/s.
    #[arg(long, default_value_t = 0.0)]
    pub wind_sigma: f64,
    #[arg(long, default_value_t = SimConfig::default().max_time)]
    pub max_time: f64,
}

impl SimArgs {
    pub fn sim_config(&self, wind_seed: u64) -> SimConfig {
        let mut sim = SimConfig {
            forward_speed: self.forward_speed,
            lateral_speed: self.lateral_speed,
            yaw_rate: self.yaw_rate,
            latency_transport: self.latency_transport,
            latency_inference: self.latency_inference,
            capture_period: self.capture_period,
            max_time: self.max_time,
            ..SimConfig::default()
        };
        sim.wind.sigma = self.wind_sigma;
        sim.wind.seed = wind_seed;
        sim
    }
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FlyArgs {
    #[command(flatten)]
    pub corridor: CorridorArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub start_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub start_yaw_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    pub start_h: f64,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `trace.jsonl`, `trace.csv` and the run manifest.
    #[arg(long, value_name = "DIR", default_value = "fly-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[command(flatten)]
    pub corridor: CorridorArgs,
    #[arg(long, default_value_t = StartSampling::default().max_abs_x)]
    pub max_start_x: f64,
    #[arg(long, default_value_t = 15.0)]
    pub max_start_yaw_deg: f64,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated gust levels to scan after the main sweep.
    #[arg(long, value_delimiter = ',', value_name = "SIGMAS")]
    pub wind_scan: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `summary.json`, `wind_scan.json` and the run manifest.
    #[arg(long, value_name = "DIR", default_value = "sweep-out")]
    pub out: PathBuf,
}
