use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "skelfreq", version, about = "Frequency-binned skeleton features and attention GCN classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Keypoint directory -> binned frequency features (CSV + sidecar)
    Extract(ExtractArgs),
    /// Train a classifier from a manifest or a fresh synthetic dataset
    Train(TrainArgs),
    /// Classify sequences or feature files with a trained model
    Predict(PredictArgs),
    /// Export attention weights and the joint-importance ranking
    Explain(ExplainArgs),
    /// Compare analytic gradients with central finite differences
    Gradcheck(GradcheckArgs),
    /// Generate a labelled synthetic dataset as keypoint files
    Synth(SynthCmdArgs),
    /// Write a topology as edge-list text
    Topology(TopologyArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Key-value (TOML) configuration file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Preset name (body25, coco18, toy5) or edge-list file
    #[arg(long, global = true)]
    topology: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct BinArgs {
    /// Frame rate of the keypoint sequences
    #[arg(long)]
    fps: Option<f64>,
    /// Bin growth factor (> 1)
    #[arg(long)]
    c: Option<f64>,
    /// Number of frequency bins
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bins: BinArgs,
    /// Directory of per-frame keypoint documents (or a JSON array file)
    #[arg(long)]
    input: PathBuf,
    /// Also write the normalized trajectories as `frame,joint,x,y`
    #[arg(long)]
    normalized: Option<PathBuf>,
}

/// Comma-separated pair, e.g. `3,4`.
#[derive(Debug, Clone, Copy)]
pub struct Band(f64, f64);

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected `low,high`")?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
        Ok(Band(parse(a)?, parse(b)?))
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct SynthArgs {
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Class-0 band in Hz, `low,high`
    #[arg(long)]
    band0: Option<Band>,
    /// Class-1 band in Hz, `low,high`
    #[arg(long)]
    band1: Option<Band>,
    #[arg(long, value_delimiter = ',')]
    signal_joints: Option<Vec<usize>>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Draw frequencies continuously instead of on DFT grid points
    #[arg(long)]
    off_grid: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bins: BinArgs,
    /// Manifest CSV (`sequence_id,label,split[,seed]`); each id resolves to
    /// `<id>.csv` features or an `<id>/` keypoint directory next to it
    #[arg(long, conflicts_with = "synthetic")]
    manifest: Option<PathBuf>,
    /// Train on a freshly generated synthetic dataset
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden layer widths, e.g. `16,16`
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// One update per example instead of one per epoch
    #[arg(long)]
    minibatch: bool,
    #[arg(long)]
    init_scale: Option<f64>,
    /// `identity` or `tanh`
    #[arg(long)]
    score_activation: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    fps: Option<f64>,
    /// Report wall-clock classification time on stderr
    #[arg(long)]
    timing: bool,
    /// Keypoint directories, JSON array files, or feature CSVs
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    fps: Option<f64>,
    /// Print a text bar chart of the ranking
    #[arg(long)]
    bars: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Number of random (model, input) draws
    #[arg(long, default_value_t = 1)]
    draws: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SynthCmdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    fps: Option<f64>,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct TopologyArgs {
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Explain(a) => commands::explain(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Synth(a) => commands::synth(a),
        Command::Topology(a) => commands::topology(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
