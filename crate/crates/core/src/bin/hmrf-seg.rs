use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use hmrf::edge::CannyParams;
use hmrf::{run_pipeline, EdgeMode, Error, KmeansInput, PipelineConfig, Schedule, SegmentConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Sequential,
    Synchronous,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KmeansOn {
    Blurred,
    Original,
}

/// Edge-preserving HMRF-EM segmentation of a grayscale image.
#[derive(Debug, Parser)]
#[command(name = "hmrf-seg", version)]
struct Args {
    /// Input image (P5 PGM or 8-bit PNG).
    #[arg(long)]
    input: PathBuf,

    /// Number of classes.
    #[arg(long, default_value_t = 2)]
    k: usize,

    #[arg(long, default_value_t = 10)]
    em_iters: usize,

    /// ICM sweeps per EM iteration.
    #[arg(long, default_value_t = 10)]
    map_iters: usize,

    #[arg(long, default_value_t = 3.0)]
    blur_sigma: f64,

    /// canny, none, or file:<path> (P5 PGM, >= 128 is an edge).
    #[arg(long, default_value = "canny")]
    edge: String,

    #[arg(long, default_value_t = 1.0)]
    canny_sigma: f64,

    /// Low hysteresis threshold as a fraction of the max gradient.
    #[arg(long, default_value_t = 0.1)]
    canny_low: f64,

    /// High hysteresis threshold as a fraction of the max gradient.
    #[arg(long, default_value_t = 0.3)]
    canny_high: f64,

    #[arg(long, value_enum, default_value_t = ScheduleArg::Sequential)]
    icm_schedule: ScheduleArg,

    /// Skip only edge neighbors when updating a pixel (one-sided rule).
    #[arg(long)]
    edge_literal: bool,

    /// Absolute total-energy change that ends an ICM run early.
    #[arg(long, default_value_t = 1e-6)]
    energy_tol: f64,

    #[arg(long, value_enum, default_value_t = KmeansOn::Blurred)]
    kmeans_on: KmeansOn,

    #[arg(long, default_value_t = 100)]
    kmeans_iters: usize,

    /// Extra k-means runs from random starts; the best is kept.
    #[arg(long, default_value_t = 0)]
    kmeans_restarts: usize,

    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::MalformedHeader(_)
        | Error::MalformedBody { .. }
        | Error::Unsupported(_)
        | Error::ZeroDimension { .. } => 4,
        Error::EdgeMapDimensionMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::ImageTooSmall { .. } => 5,
        _ => 2,
    }
}

fn build_config(args: Args) -> Result<PipelineConfig, Error> {
    Ok(PipelineConfig {
        input: args.input,
        out_dir: args.out_dir,
        segment: SegmentConfig {
            k: args.k,
            em_iters: args.em_iters,
            map_iters: args.map_iters,
            energy_tol: args.energy_tol,
            blur_sigma: args.blur_sigma,
            edges: args.edge.parse::<EdgeMode>()?,
            canny: CannyParams {
                sigma: args.canny_sigma,
                low: args.canny_low,
                high: args.canny_high,
            },
            schedule: match args.icm_schedule {
                ScheduleArg::Sequential => Schedule::Sequential,
                ScheduleArg::Synchronous => Schedule::Synchronous,
            },
            edge_literal: args.edge_literal,
            kmeans_input: match args.kmeans_on {
                KmeansOn::Blurred => KmeansInput::Blurred,
                KmeansOn::Original => KmeansInput::Original,
            },
            kmeans_iters: args.kmeans_iters,
            kmeans_restarts: args.kmeans_restarts,
            seed: args.seed,
        },
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_config(args).and_then(|cfg| run_pipeline(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
