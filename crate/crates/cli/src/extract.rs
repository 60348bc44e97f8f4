use std::path::Path;

use acoustic_fdtd::ir::{self, ChannelRole};
use acoustic_fdtd::scene::MicLabel;
use acoustic_fdtd::signals::generate_ess;
use serde::Serialize;

use crate::artifacts::{self, rel, RunInfo, RunManifest, Staging, IR_DIR, MANIFEST, RUN_INFO};
use crate::error::{CliResult, Context, Failure, FailureKind};

/// Sidecar written next to each IR WAV.
#[derive(Debug, Serialize)]
struct IrSidecar<'a> {
    listener: &'a str,
    position: [f64; 2],
    orientation: f64,
    source: [f64; 2],
    distance_m: f64,
    /// Direct-path travel time.
    expected_delay_s: f64,
    fs: f64,
    samples: usize,
    channels: Vec<&'static str>,
}

pub fn cmd_extract_ir(run_dir: &Path, fs_out: f64) -> CliResult<RunManifest> {
    if !(fs_out.is_finite() && fs_out >= 1.0) {
        return Err(Failure::config(format!("--fs-out must be a positive rate, got {fs_out}")));
    }
    let info: RunInfo = artifacts::read_json(&run_dir.join(RUN_INFO))
        .map_err(|f| Failure::new(f.kind, f.error.context("run provenance with sweep parameters")))?;
    let mut manifest: RunManifest = artifacts::read_json(&run_dir.join(MANIFEST))?;
    let sweep = generate_ess(&info.sweep, info.fs).kind(FailureKind::Io, "regenerating sweep from run.json")?;
    let ir_len = info.ir_samples();
    if info.listeners.is_empty() {
        log::warn!("run has no listeners; nothing to extract");
    }

    let staging = Staging::new(&run_dir.join(IR_DIR))?;
    let mut written = Vec::new();
    for l in &info.listeners {
        let mut irs = Vec::with_capacity(4);
        for mic in &l.mics {
            let label = MicLabel::from_short(&mic.label)
                .ok_or_else(|| Failure::io(format!("unknown microphone label {}", mic.label)))?;
            let trace = artifacts::read_trace(&run_dir.join(&mic.trace), info.trace_format, info.fs)?;
            let h = ir::extract_ir(&trace, &sweep, &info.sweep, ir_len)
                .kind(FailureKind::Io, format!("deconvolving {}", mic.trace))?;
            irs.push((label, h));
        }
        let irs: [_; 4] = irs
            .try_into()
            .map_err(|v: Vec<_>| Failure::io(format!("listener {} has {} traces, expected 4", l.id, v.len())))?;
        let quad = ir::assemble_quad(&l.id, irs).kind(FailureKind::Io, format!("assembling {}", l.id))?;

        let wav = format!("{}.wav", l.id);
        ir::write_wav(&quad, fs_out, staging.path().join(&wav)).kind(FailureKind::Io, format!("writing {wav}"))?;
        let samples = hound::WavReader::open(staging.path().join(&wav))
            .kind(FailureKind::Io, format!("reading back {wav}"))?
            .duration() as usize;
        let distance = (l.position[0] - info.source[0]).hypot(l.position[1] - info.source[1]);
        let sidecar = IrSidecar {
            listener: &l.id,
            position: l.position,
            orientation: l.orientation,
            source: info.source,
            distance_m: distance,
            expected_delay_s: distance / info.medium.c,
            fs: fs_out.round(),
            samples,
            channels: ChannelRole::ORDER.iter().map(|r| r.name()).collect(),
        };
        let json = format!("{}.json", l.id);
        artifacts::write_json_atomic(&staging.path().join(&json), &sidecar)?;
        written.push(rel(&[IR_DIR, &wav]));
        written.push(rel(&[IR_DIR, &json]));
        log::info!("{}: {} samples at {} Hz", l.id, samples, fs_out.round());
    }
    // The ir directory belongs to this command, so any previous one is replaced.
    staging.commit(|_| true)?;

    manifest.replace_artifacts(&format!("{IR_DIR}/"), written);
    artifacts::write_json_atomic(&run_dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
