//! Staggered-grid leapfrog FDTD solver for the 2D linear acoustic equations.
//!
//! Pressure lives at cell centers and integer time steps; the velocity
//! components live on cell faces and half-integer steps. One step updates
//! velocity from the pressure gradient, applies PML decay, forces rigid
//! faces to zero, updates pressure from the velocity divergence and finally
//! adds the source over its footprint.

mod pml;
pub mod snapshot;
mod stepper;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pml::{build_pml, sigma_max, DampingProfile, PML_GRADING_ORDER};
pub use stepper::{FieldState, Stepper};

use crate::scene::{self, GridSpec, MediumParams, MicLabel, ObstacleMask, ProbeLayout, SceneConfig};
use crate::signals::Signal;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("simulation became unstable (non-finite field) at step {step}")]
    Unstable { step: u64 },
    #[error("PML of {n_pml} cells is too thick for a {nx}x{ny} grid")]
    PmlTooThick { n_pml: usize, nx: usize, ny: usize },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error("source signal rate {signal} Hz does not match the simulation rate {expected} Hz")]
    SourceRate { signal: f64, expected: f64 },
    #[error("source signal has {len} samples but the run only has {nt} steps")]
    SourceTooLong { len: usize, nt: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    pub dt: f64,
    pub nt: usize,
    /// Requested simulated time (s).
    pub t_sim: f64,
}

impl TimeSpec {
    /// A time axis with an explicit step, bypassing the stability bound.
    pub fn with_dt(dt: f64, t_sim: f64) -> Self {
        Self { dt, nt: steps_for(t_sim, dt), t_sim }
    }

    /// Sample rate of recorded traces.
    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }
}

fn steps_for(t_sim: f64, dt: f64) -> usize {
    ((t_sim / dt) * (1.0 - 1e-12)).ceil().max(0.0) as usize
}

/// Largest stable step for the 2D scheme, `ds / (c·√2)`.
pub fn cfl_limit(ds: f64, c: f64) -> f64 {
    ds / (c * std::f64::consts::SQRT_2)
}

pub fn compute_time_step(
    grid: &GridSpec,
    medium: &MediumParams,
    t_sim: f64,
    safety: f64,
) -> Result<TimeSpec, SolverError> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(SolverError::InvalidParameter(format!("safety factor must be in (0, 1], got {safety}")));
    }
    Ok(TimeSpec::with_dt(safety * cfl_limit(grid.ds, medium.c), t_sim))
}

/// Everything a run needs, derived from a scene.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub grid: GridSpec,
    pub medium: MediumParams,
    pub mask: ObstacleMask,
    pub probes: ProbeLayout,
    pub damping: DampingProfile,
    pub time: TimeSpec,
}

impl SimulationPlan {
    /// Grid, mask, probes, PML and time axis for a validated scene.
    ///
    /// Obstacle cells that fall inside the PML are cleared; the layer
    /// absorbs whatever reaches it and must stay homogeneous.
    pub fn from_scene(cfg: &SceneConfig) -> crate::Result<Self> {
        cfg.validate()?;
        let grid = scene::build_grid(cfg);
        let settings = &cfg.simulation;
        let mut mask = scene::rasterize_obstacles(cfg, &grid);
        let cleared = mask.clear_border(settings.pml_cells);
        if cleared > 0 {
            log::warn!("{cleared} obstacle cells inside the PML were cleared");
        }
        let damping = build_pml(&grid, settings.pml_cells, &cfg.medium, settings.pml_reflection)?;
        let probes = scene::place_probes(cfg, &grid, &mask)?;
        let time = compute_time_step(&grid, &cfg.medium, cfg.sim_duration, settings.safety)?;
        Ok(Self { grid, medium: cfg.medium, mask, probes, damping, time })
    }

    pub fn stepper(&self) -> Result<Stepper, SolverError> {
        Stepper::new(&self.grid, &self.medium, &self.time, &self.mask, &self.damping, &self.probes.source_footprint)
    }
}

/// Recorded pressure at the four microphones of one listener.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerTraces {
    pub id: String,
    /// In [`MicLabel::ALL`] order.
    pub traces: [Signal; 4],
}

impl ListenerTraces {
    pub fn trace(&self, label: MicLabel) -> &Signal {
        let k = MicLabel::ALL.iter().position(|&l| l == label).expect("known label");
        &self.traces[k]
    }
}

/// Pressure field captured after `step` updates (time `step · dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    /// x-major, `nx · ny` values.
    pub pressure: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub wall_seconds: f64,
    pub steps_per_second: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub mic_traces: Vec<ListenerTraces>,
    /// One trace per entry of [`ProbeLayout::points`].
    pub point_traces: Vec<Signal>,
    pub snapshots: Vec<Snapshot>,
    pub runtime_stats: RuntimeStats,
}

/// Runs all `nt` steps, recording pressure at every probe after each step.
///
/// Trace sample `n` holds the pressure at time `(n + 1)·dt`. The source is
/// zero-padded to `nt` samples. Results do not depend on the size of the
/// rayon pool the call runs in.
pub fn run_simulation(
    plan: &SimulationPlan,
    source: &Signal,
    snapshot_every: Option<usize>,
) -> Result<SimulationOutput, SolverError> {
    let nt = plan.time.nt;
    let fs = plan.time.fs();
    if ((source.fs() - fs) / fs).abs() > 1e-9 {
        return Err(SolverError::SourceRate { signal: source.fs(), expected: fs });
    }
    if source.len() > nt {
        return Err(SolverError::SourceTooLong { len: source.len(), nt });
    }
    let stepper = plan.stepper()?;
    let mut state = stepper.new_state();
    let ny = plan.grid.ny;

    let mics: Vec<usize> = plan
        .probes
        .listeners
        .iter()
        .flat_map(|l| l.mics.iter().map(|m| m.index.0 * ny + m.index.1))
        .chain(plan.probes.points.iter().map(|&(i, j)| i * ny + j))
        .collect();
    let mut recorded: Vec<Vec<f64>> = vec![Vec::with_capacity(nt); mics.len()];
    let mut snapshots = Vec::new();
    let every = snapshot_every.filter(|&k| k > 0);

    let started = Instant::now();
    let progress_every = (nt / 10).max(1);
    for n in 0..nt {
        let sample = source.samples().get(n).copied().unwrap_or(0.0);
        stepper.step(&mut state, sample)?;
        for (trace, &idx) in recorded.iter_mut().zip(&mics) {
            trace.push(state.p[idx]);
        }
        if let Some(k) = every {
            if state.step % k as u64 == 0 {
                snapshots.push(Snapshot { step: state.step, pressure: state.p.iter().map(|&v| v as f32).collect() });
            }
        }
        if (n + 1) % progress_every == 0 {
            log::info!("step {}/{nt}", n + 1);
        }
    }
    let wall = started.elapsed().as_secs_f64();

    let mut traces = recorded.into_iter().map(|v| Signal::new(v, fs).expect("solver fields are finite"));
    let mic_traces = plan
        .probes
        .listeners
        .iter()
        .map(|l| ListenerTraces {
            id: l.id.clone(),
            traces: std::array::from_fn(|_| traces.next().expect("four traces per listener")),
        })
        .collect();
    let point_traces = traces.collect();
    Ok(SimulationOutput {
        mic_traces,
        point_traces,
        snapshots,
        runtime_stats: RuntimeStats {
            wall_seconds: wall,
            steps_per_second: if wall > 0.0 { nt as f64 / wall } else { f64::INFINITY },
        },
    })
}
