mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::CONFIG_ENV;

/// Weather classification from multi-echo lidar point clouds.
#[derive(Debug, Parser)]
#[command(name = "lidar-weather", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Defaults file (TOML); flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// ROI forward limit in meters [default: 20].
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub roi_x_max: Option<f64>,
    /// ROI right limit in meters [default: -1.5].
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub roi_y_min: Option<f64>,
    /// ROI left limit in meters [default: 1.5].
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub roi_y_max: Option<f64>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled frame dataset.
    Synth(SynthArgs),
    /// Compute the feature table of a dataset.
    Extract(ExtractArgs),
    /// Train a classifier on a feature table.
    Train(TrainArgs),
    /// Score a model on a test set.
    Evaluate(EvaluateArgs),
    /// Stream per-frame labels to standard output.
    Classify(ClassifyArgs),
    /// Object point density per weather condition as boxplot CSV.
    Density(DensityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SensorArg {
    /// Three echoes ordered by range, echo pulse width.
    ThreeEcho,
    /// Strongest and last return, intensity.
    DualReturn,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset file.
    #[arg(long, short, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Simulator config (TOML) with scenes, profiles and channel constants.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Frames per (scene, profile) pair.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Overrides the sensor of the simulator config.
    #[arg(long)]
    pub sensor: Option<SensorArg>,
    /// Also write every point as CSV.
    #[arg(long)]
    pub points_csv: Option<PathBuf>,
    /// Print the built-in simulator config and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EigenArg {
    Joint,
    PerAxis,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Use the whole cloud instead of the ROI.
    #[arg(long)]
    pub no_roi: bool,
    /// Source of features 14 to 16.
    #[arg(long)]
    pub eigen: Option<EigenArg>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Feature table CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassifierArg {
    Knn,
    Svm,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature table CSV.
    #[arg(long)]
    pub table: PathBuf,
    /// Model file to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub classifier: Option<ClassifierArg>,
    /// Neighbours for kNN.
    #[arg(long)]
    pub k: Option<usize>,
    /// SVM soft-margin penalty.
    #[arg(long)]
    pub c: Option<f64>,
    /// RBF width; median heuristic when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Share of samples for training, split by scenario; 1 trains on all.
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Append the sixteen mask flags to the classifier input.
    #[arg(long)]
    pub append_mask: bool,
    /// Write the held-out rows here.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FprArg {
    /// FP / (FP + TN).
    OneVsRest,
    /// FN / (TP + FN).
    MissRate,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("test_set").required(true).args(["table", "input"])))]
pub struct EvaluateArgs {
    /// Model file.
    #[arg(long, short)]
    pub model: PathBuf,
    /// Test feature table CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Test dataset file; features are extracted on the fly.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Meaning of the FPR column.
    #[arg(long, value_enum, default_value = "one-vs-rest")]
    pub fpr: FprArg,
    /// Also write the report as CSV.
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Model file.
    #[arg(long, short)]
    pub model: PathBuf,
    /// Dataset file.
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Dataset file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Object id within the scenario.
    #[arg(long)]
    pub object: u32,
    /// Scenario to use; required when the dataset holds several.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Width of the fog visibility bins in meters.
    #[arg(long, default_value_t = 10.0)]
    pub fog_bin: f64,
    /// Boxplot CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
