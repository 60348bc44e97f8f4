use std::fs;
use std::io::BufWriter;
use std::path::Path;

use acoustic_fdtd::scene::{parse_scene, SceneConfig};
use acoustic_fdtd::signals::generate_ess;
use acoustic_fdtd::solver::snapshot::Frame;
use acoustic_fdtd::solver::{run_simulation, SimulationPlan};

use crate::artifacts::{
    self, rel, FrameRecord, ListenerRecord, MicRecord, RunInfo, RunManifest, RunOptions, Staging, FRAMES_DIR,
    FRAMES_INDEX, MANIFEST, MASK, RUN_INFO, TRACES_DIR,
};
use crate::error::{CliResult, Context, FailureContext, FailureKind};
use crate::{SimulateArgs, SolverOverrides};

/// Command-line values win over the scene file.
pub fn apply_overrides(cfg: &mut SceneConfig, o: &SolverOverrides) {
    let s = &mut cfg.simulation;
    if let Some(v) = o.safety {
        s.safety = v;
    }
    if let Some(v) = o.pml_cells {
        s.pml_cells = v;
    }
    if let Some(v) = o.pml_reflection {
        s.pml_reflection = v;
    }
    if let Some(v) = o.f_max {
        cfg.f_max = v;
    }
    if let Some(v) = o.sim_duration {
        cfg.sim_duration = v;
    }
}

pub fn load_scene(path: &Path, overrides: &SolverOverrides) -> CliResult<SceneConfig> {
    let text = fs::read_to_string(path).kind(FailureKind::Io, format!("reading scene {}", path.display()))?;
    let mut cfg = parse_scene(&text).kind(FailureKind::Config, format!("scene {}", path.display()))?;
    apply_overrides(&mut cfg, overrides);
    cfg.validate().kind(FailureKind::Config, "scene after command-line overrides")?;
    Ok(cfg)
}

pub fn cmd_simulate(args: &SimulateArgs, threads: Option<usize>) -> CliResult<RunManifest> {
    let cfg = load_scene(&args.scene, &args.overrides)?;
    let plan = SimulationPlan::from_scene(&cfg).context("preparing simulation")?;
    if cfg.listeners.is_empty() {
        log::warn!("scene has no listeners; no traces will be recorded");
    }
    let g = plan.grid;
    log::info!("grid {}x{} (ds {:.4} m), {} steps of {:.3e} s", g.nx, g.ny, g.ds, plan.time.nt, plan.time.dt);
    let sweep = generate_ess(&cfg.sweep, plan.time.fs()).kind(FailureKind::Config, "generating sweep")?;
    let every = args.snapshot_every.map(|k| k as usize);
    let out = run_simulation(&plan, &sweep, every).context("simulation failed")?;

    let staging = Staging::new(&args.out)?;
    let root = staging.path();
    let mut artifacts = Vec::new();

    fs::create_dir(root.join(TRACES_DIR))?;
    let mut listeners = Vec::new();
    for (probes, traces) in plan.probes.listeners.iter().zip(&out.mic_traces) {
        let spec = cfg.listeners.iter().find(|l| l.id == probes.id).expect("probes come from the scene");
        let mut mics = Vec::new();
        for (mic, trace) in probes.mics.iter().zip(&traces.traces) {
            let name = format!("{}_{}.{}", probes.id, mic.label.short(), args.format.extension());
            let path = rel(&[TRACES_DIR, &name]);
            artifacts::write_trace(&root.join(&path), trace, args.format)?;
            mics.push(MicRecord {
                label: mic.label.short().to_string(),
                index: [mic.index.0, mic.index.1],
                trace: path.clone(),
            });
            artifacts.push(path);
        }
        listeners.push(ListenerRecord {
            id: probes.id.clone(),
            position: spec.position,
            orientation: spec.orientation,
            mics,
        });
    }

    let mut mask_file = BufWriter::new(fs::File::create(root.join(MASK))?);
    plan.mask.write_pgm(&mut mask_file)?;
    mask_file.into_inner().map_err(|e| e.into_error())?;
    artifacts.push(MASK.to_string());

    if every.is_some() {
        fs::create_dir(root.join(FRAMES_DIR))?;
        let mut index = Vec::new();
        for snap in out.snapshots {
            let name = format!("step_{:08}.bin", snap.step);
            let path = rel(&[FRAMES_DIR, &name]);
            let frame =
                Frame { nx: g.nx, ny: g.ny, ds: g.ds, dt: plan.time.dt, step: snap.step, pressure: snap.pressure };
            let mut w = BufWriter::new(fs::File::create(root.join(&path))?);
            frame.write_to(&mut w)?;
            w.into_inner().map_err(|e| e.into_error())?;
            index.push(FrameRecord { file: path.clone(), step: frame.step, time: frame.time() });
            artifacts.push(path);
        }
        artifacts::write_json_atomic(&root.join(FRAMES_INDEX), &index)?;
        artifacts.push(FRAMES_INDEX.to_string());
    }

    let info = RunInfo {
        grid: g,
        medium: plan.medium,
        n_pml: cfg.simulation.pml_cells,
        dt: plan.time.dt,
        nt: plan.time.nt,
        fs: plan.time.fs(),
        sim_duration: cfg.sim_duration,
        sweep: cfg.sweep,
        ir_length: cfg.simulation.ir_length,
        source: cfg.source,
        source_index: [plan.probes.source_index.0, plan.probes.source_index.1],
        trace_format: args.format,
        listeners,
    };
    artifacts::write_json_atomic(&root.join(RUN_INFO), &info)?;
    artifacts.push(RUN_INFO.to_string());

    let mut manifest =
        RunManifest::new(cfg, RunOptions { snapshot_every: every, format: args.format, threads, seed: args.seed });
    manifest.artifacts = artifacts;
    manifest.runtime = Some(out.runtime_stats);
    artifacts::write_json_atomic(&root.join(MANIFEST), &manifest)?;

    staging.commit(|existing| existing.join(MANIFEST).is_file())?;
    log::info!(
        "wrote {} ({} traces, {:.1} s wall)",
        args.out.display(),
        info.listeners.len() * 4,
        out.runtime_stats.wall_seconds
    );
    Ok(manifest)
}
