//! Command-line pipeline: scene file in, traces, impulse responses, frames
//! and reports out.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod auralize;
pub mod error;
pub mod extract;
pub mod frames;
pub mod report;
pub mod simulate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::TraceFormat;
use crate::error::{CliResult, Context, FailureKind};

#[derive(Debug, Parser)]
#[command(
    name = "acoustic-fdtd",
    version,
    about = "2D FDTD room acoustics: simulate scenes, extract impulse responses, render pressure maps"
)]
pub struct Cli {
    /// Solver worker threads [default: all cores; bench defaults to 1].
    /// Results are bit-identical for any value.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scene and write traces, mask, snapshots and a manifest to a run directory.
    Simulate(SimulateArgs),
    /// Deconvolve a run's traces into one 4-channel WAV per listener under <RUN>/ir.
    ExtractIr(ExtractArgs),
    /// Render a run's pressure snapshots to PNG images.
    RenderFrames(RenderArgs),
    /// Compare the solver with the analytic free-field response and write a CSV.
    Validate(ValidateArgs),
    /// Time free-field runs over domain areas and frequency limits and write a CSV.
    Bench(BenchArgs),
    /// Convolve a dry recording with a 4-channel impulse response into stereo.
    Auralize(AuralizeArgs),
}

/// Solver settings that override the scene file.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverOverrides {
    /// Fraction of the CFL time-step bound, in (0, 1] [scene default: 0.99]
    #[arg(long, value_name = "FRACTION")]
    pub safety: Option<f64>,
    /// PML thickness in cells [scene default: 20]
    #[arg(long, value_name = "CELLS")]
    pub pml_cells: Option<usize>,
    /// Target PML reflection coefficient, in (0, 1) [scene default: 1e-4]
    #[arg(long, value_name = "R0")]
    pub pml_reflection: Option<f64>,
    /// Highest resolved frequency in Hz; sets the grid spacing
    #[arg(long, value_name = "HZ")]
    pub f_max: Option<f64>,
    /// Simulated time in seconds
    #[arg(long, value_name = "SECONDS")]
    pub sim_duration: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scene description (TOML)
    #[arg(long, value_name = "FILE")]
    pub scene: PathBuf,
    /// Run directory to create. An existing one is replaced only if it holds a manifest.json
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Save a pressure snapshot every N time steps [default: none]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub snapshot_every: Option<u64>,
    #[command(flatten)]
    pub overrides: SolverOverrides,
    /// Trace file format
    #[arg(long, value_enum, default_value_t = TraceFormat::Raw)]
    pub format: TraceFormat,
    /// Reserved; the pipeline is deterministic and draws no random numbers
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Run directory written by `simulate`
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Output sample rate in Hz
    #[arg(long, value_name = "HZ", default_value_t = 44_100.0)]
    pub fs_out: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Run directory written by `simulate --snapshot-every`
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Directory for the PNG files, named by simulated time (t0.898300s.png)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Ricker center frequencies in Hz
    #[arg(long, value_name = "HZ", value_delimiter = ',', default_values_t = vec![250.0, 500.0, 1000.0, 3000.0])]
    pub freqs: Vec<f64>,
    /// Output CSV
    #[arg(long, value_name = "FILE", default_value = "validation.csv")]
    pub out: PathBuf,
    /// Source-receiver distance in meters
    #[arg(long, value_name = "M", default_value_t = 5.0)]
    pub separation: f64,
    /// Receiver direction from the source in degrees counter-clockwise from +x
    #[arg(long, value_name = "DEG", default_value_t = 0.0, allow_hyphen_values = true)]
    pub bearing: f64,
    /// Grid points per wavelength at the center frequency
    #[arg(long, value_name = "N", default_value_t = 10.0)]
    pub ppw: f64,
    /// PML thickness in cells
    #[arg(long, value_name = "CELLS", default_value_t = 20)]
    pub pml_cells: usize,
    /// Fail when any NRMSE exceeds this (percent)
    #[arg(long, value_name = "PCT", default_value_t = 5.0)]
    pub max_nrmse: f64,
    /// Fail when any peak arrival difference exceeds this (ms)
    #[arg(long, value_name = "MS", default_value_t = 1.8)]
    pub max_arrival: f64,
    /// Also write the FDTD and analytic traces per frequency into this directory
    #[arg(long, value_name = "DIR")]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Domain areas in square meters
    #[arg(long, value_name = "M2", value_delimiter = ',', default_values_t = vec![20.0, 40.0, 60.0, 80.0])]
    pub areas: Vec<f64>,
    /// Frequency limits in Hz
    #[arg(long, value_name = "HZ", value_delimiter = ',', default_values_t = vec![1000.0])]
    pub f_max: Vec<f64>,
    /// Timed runs per (area, f_max) pair
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub repetitions: usize,
    /// Simulated time per run in seconds
    #[arg(long, value_name = "SECONDS", default_value_t = 0.1)]
    pub t_sim: f64,
    /// Output CSV with one row per run
    #[arg(long, value_name = "FILE", default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AuralizeArgs {
    /// Dry input WAV; multichannel input is averaged to mono
    #[arg(long, value_name = "FILE")]
    pub dry: PathBuf,
    /// 4-channel impulse response written by extract-ir
    #[arg(long, value_name = "FILE")]
    pub ir: PathBuf,
    /// Signed bearing from the listener to the source in degrees, positive toward the right ear
    #[arg(long, value_name = "DEG", default_value_t = 0.0, allow_hyphen_values = true)]
    pub yaw: f64,
    /// Stereo output WAV (32-bit float, at the IR sample rate)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = cli.threads.map(usize::from);
    let go = || match cli.command {
        Command::Simulate(a) => simulate::cmd_simulate(&a, threads).map(|_| ()),
        Command::ExtractIr(a) => extract::cmd_extract_ir(&a.run, a.fs_out).map(|_| ()),
        Command::RenderFrames(a) => frames::cmd_render_frames(&a.run, &a.out).map(|_| ()),
        Command::Validate(a) => report::cmd_validate(&a),
        Command::Bench(a) => report::cmd_bench(&a, threads.unwrap_or(1)),
        Command::Auralize(a) => auralize::cmd_auralize(&a),
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .kind(FailureKind::Config, "building thread pool")?
            .install(go),
        None => go(),
    }
}
