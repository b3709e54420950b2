mod bench;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvc_core::model::{AblationMode, ModelId};
use pvc_core::ErrorKind;

use config::ConfigFile;

#[derive(Parser)]
#[command(
    name = "pvc",
    version,
    about = "Octree point-cloud geometry codec with learned entropy models"
)]
struct Cli {
    /// Defaults file of `key = value` lines; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// Entropy model: uniform, adaptive or neural.
    #[arg(long)]
    pub model: Option<ModelId>,

    /// PVW weight file for the neural model (default: $PVC_WEIGHTS).
    #[arg(long, value_name = "PVW")]
    pub weights: Option<PathBuf>,

    /// Neural ablation: hybrid, voxel-only or point-only.
    #[arg(long)]
    pub ablation: Option<AblationMode>,
}

#[derive(Args, Clone, Default)]
pub struct GridArgs {
    /// Quantization precision N in bits (default 10).
    #[arg(short = 'n', long)]
    pub precision: Option<u8>,

    /// Octree depth D (default N, lossless).
    #[arg(short = 'd', long)]
    pub depth: Option<u8>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Shape {
    Sphere,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a .ply or .xyz point cloud into a container.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        model: ModelArgs,
    },

    /// Decompress a container into a .ply or .xyz point cloud.
    Decode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Write ASCII PLY instead of binary.
        #[arg(long)]
        ascii: bool,
    },

    /// Distortion between an original cloud and a reconstruction (point cloud or container).
    Eval {
        original: PathBuf,
        reconstructed: PathBuf,
        /// Grid precision for point-cloud reconstructions (default 10).
        #[arg(short = 'n', long)]
        precision: Option<u8>,
        /// PSNR peak value (default 2^N - 1).
        #[arg(long)]
        peak: Option<f64>,
        #[command(flatten)]
        model: ModelArgs,
    },

    /// Rate table over a directory of clouds for several models and depths.
    Bench {
        corpus: PathBuf,
        /// Comma-separated models (default uniform,adaptive).
        #[arg(long)]
        models: Option<String>,
        /// Comma-separated depths (default N).
        #[arg(long)]
        depths: Option<String>,
        /// Quantization precision N in bits (default 10).
        #[arg(short = 'n', long)]
        precision: Option<u8>,
        /// Worker threads; 0 uses every core.
        #[arg(short = 'j', long)]
        jobs: Option<usize>,
        /// Also write the table as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// PVW weight file for the neural model (default: $PVC_WEIGHTS).
        #[arg(long, value_name = "PVW")]
        weights: Option<PathBuf>,
        /// Neural ablation: hybrid, voxel-only or point-only.
        #[arg(long)]
        ablation: Option<AblationMode>,
    },

    /// Print a container header, or dump per-symbol training contexts of a cloud.
    Inspect {
        input: PathBuf,
        /// Write every coded context of INPUT (a point cloud) to this sample file.
        #[arg(long, value_name = "FILE")]
        dump_contexts: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        /// Point neighbors per sample (default 1024).
        #[arg(short = 'k', long)]
        k: Option<usize>,
    },

    /// Write a seeded synthetic point cloud.
    Synth {
        output: PathBuf,
        #[arg(long, value_enum, default_value = "sphere")]
        shape: Shape,
        /// Number of points to draw.
        #[arg(long, default_value_t = 20_000)]
        points: usize,
        /// Radial noise relative to the sphere radius.
        #[arg(long, default_value_t = 0.005)]
        noise: f64,
        /// Grid precision for the grid shape.
        #[arg(short = 'n', long, default_value_t = 8)]
        precision: u8,
        #[arg(long)]
        seed: Option<u64>,
        /// Write ASCII PLY instead of binary.
        #[arg(long)]
        ascii: bool,
    },
}

fn run(cli: Cli) -> pvc_core::Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Encode {
            input,
            output,
            grid,
            model,
        } => commands::encode(&cfg, &input, &output, &grid, &model),
        Command::Decode {
            input,
            output,
            model,
            ascii,
        } => commands::decode(&cfg, &input, &output, &model, ascii),
        Command::Eval {
            original,
            reconstructed,
            precision,
            peak,
            model,
        } => commands::eval(&cfg, &original, &reconstructed, precision, peak, &model),
        Command::Bench {
            corpus,
            models,
            depths,
            precision,
            jobs,
            csv,
            weights,
            ablation,
        } => {
            let opts = bench::BenchOptions::resolve(
                &cfg, models, depths, precision, jobs, weights, ablation,
            )?;
            bench::run(&corpus, &opts, csv.as_deref())
        }
        Command::Inspect {
            input,
            dump_contexts,
            grid,
            k,
        } => match dump_contexts {
            Some(out) => commands::dump_contexts(&cfg, &input, &out, &grid, k),
            None => commands::inspect(&input),
        },
        Command::Synth {
            output,
            shape,
            points,
            noise,
            precision,
            seed,
            ascii,
        } => commands::synth(&cfg, &output, shape, points, noise, precision, seed, ascii),
    }
}

fn fail(kind: ErrorKind, message: &str) -> ExitCode {
    eprintln!(
        "pvc: error[{}]: {}",
        kind.as_str(),
        message.replace('\n', " ")
    );
    ExitCode::from(kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let message = message.join(" ");
            let message = message.trim_start_matches("error: ");
            return fail(ErrorKind::Config, &format!("{message} (see pvc --help)"));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
