use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::CliError;

#[derive(Parser)]
#[command(name = "sslsod", version, about = "Self-supervised RGB-D salient object detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic RGB-D dataset split with masks and a manifest.
    Synth(SynthArgs),
    /// Write depth-contour maps next to the depth maps of a split.
    ContourGt(ContourArgs),
    /// Train the two cross-modal autoencoders.
    Pretrain1(Pretrain1Args),
    /// Train the depth-contour network on frozen stage-1 encoders.
    Pretrain2(Pretrain2Args),
    /// Train the saliency network.
    Train(TrainArgs),
    /// Score saliency maps against masks and write a metric table.
    Eval(EvalArgs),
    /// Save channel-mean images of every CDA intermediate for one sample.
    DumpFeatures(DumpArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_shapes: usize,
    #[arg(long, default_value_t = 3)]
    max_shapes: usize,
    /// Gaussian noise added to the RGB image.
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ContourArgs {
    /// Split directory holding `depth/`.
    #[arg(long)]
    data: PathBuf,
    /// Odd side of the square structuring element.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Rescale each depth map to [0, 1] before taking contours.
    #[arg(long)]
    per_image_minmax: bool,
    #[arg(long)]
    force: bool,
}

/// Flags shared by every training command.
#[derive(Args)]
struct RunArgs {
    /// Training split directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML configuration file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct Pretrain1Args {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct Pretrain2Args {
    #[command(flatten)]
    run: RunArgs,
    /// Output directory of `pretrain1`.
    #[arg(long, required_unless_present = "from_scratch")]
    stage1: Option<PathBuf>,
    /// Train with random (still frozen) encoders instead of stage-1 weights.
    #[arg(long, conflicts_with = "stage1")]
    from_scratch: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    /// Random weights everywhere.
    None,
    /// Encoders from stage 1.
    P1,
    /// Encoders from stage 1 and everything else from stage 2.
    P2,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Held-out split; its MAE is reported and its maps are written to `pred/`.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    init: Init,
    #[arg(long)]
    stage1: Option<PathBuf>,
    #[arg(long)]
    stage2: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// `NAME=PRED_DIR,GT_DIR`; repeat for several datasets.
    #[arg(long = "dataset", value_name = "NAME=PRED,GT", required = true)]
    datasets: Vec<String>,
    /// CSV destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DumpArgs {
    /// A `pretrain2` or `train` checkpoint file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Split directory holding the sample.
    #[arg(long)]
    data: PathBuf,
    /// Sample stem.
    #[arg(long)]
    sample: String,
    /// Side the sample is resized to; a multiple of 16.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::ContourGt(a) => commands::contour_gt(a),
        Command::Pretrain1(a) => commands::pretrain1(a),
        Command::Pretrain2(a) => commands::pretrain2(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::DumpFeatures(a) => commands::dump_features(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
