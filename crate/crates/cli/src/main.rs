//! `mdc`: prepare data, train, encode/decode, evaluate and simulate.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "mdc",
    version,
    about = "Multiple-description image coding with learned descriptions"
)]
struct Cli {
    /// Worker threads for data-parallel work (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a directory of synthetic grayscale test scenes.
    SynthCorpus(SynthArgs),
    /// Cut augmented training patches from a directory of images.
    PrepareData(PrepareArgs),
    /// Train a model bundle for one quality factor.
    Train(TrainArgs),
    /// Split an image into two JPEG descriptions.
    Encode(EncodeArgs),
    /// Reconstruct an image from one or both descriptions.
    Decode(DecodeArgs),
    /// Rate-distortion evaluation over a corpus and a QF grid.
    Evaluate(EvaluateArgs),
    /// Expected quality over two independent lossy channels.
    Simulate(SimulateArgs),
    /// Plot rate-distortion curves from an evaluation CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// Side length of the square scenes.
    #[arg(long, default_value_t = 192)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PrepareArgs {
    /// Directory of source images.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for patches and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 160)]
    patch: usize,
    #[arg(long, default_value_t = 3200)]
    total: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Take centered crops without flips or rotations.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    #[value(name = "1")]
    Alternating,
    #[value(name = "2")]
    Joint,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    #[arg(long)]
    qf: u32,
    /// Patch directory written by `prepare-data`.
    #[arg(long)]
    patches: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with training settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Outer iterations (alternating) or joint iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Epochs per phase.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    widths: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from an existing checkpoint instead of fresh initialization.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Training log (JSON lines); defaults to the checkpoint path with `.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CheckpointArg {
    /// Model checkpoint; relative paths are looked up in $MDC_CHECKPOINT_DIR when set.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Method {
    /// Learned descriptions and learned reconstruction.
    Ours,
    /// Poly-phase descriptions and learned reconstruction.
    OursBase,
    /// Poly-phase descriptions and bilinear reconstruction.
    Bilinear,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    model: CheckpointArg,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    qf: u32,
    /// Output directory for `a.jpg`, `b.jpg` and `descriptions.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "ours")]
    method: Method,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Mode {
    #[value(name = "sideA")]
    SideA,
    #[value(name = "sideB")]
    SideB,
    #[value(name = "central")]
    Central,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    model: CheckpointArg,
    /// Directory written by `encode`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: CheckpointArg,
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated quality factors; defaults depend on the method.
    #[arg(long, value_delimiter = ',')]
    qfs: Vec<u32>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ours")]
    methods: Vec<Method>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: CheckpointArg,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    qf: u32,
    #[arg(long = "ploss-a")]
    ploss_a: f64,
    #[arg(long = "ploss-b")]
    ploss_b: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate the four outcomes exactly instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Plot every row instead of only corpus means.
    #[arg(long)]
    all_rows: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::SynthCorpus(a) => commands::synth_corpus(a),
        Command::PrepareData(a) => commands::prepare_data(a),
        Command::Train(a) => commands::train(a),
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
