use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use acoustic_fdtd::scene::ObstacleMask;
use acoustic_fdtd::solver::snapshot::{snapshot_to_image, Frame};

use crate::artifacts::{self, FrameRecord, Staging, FRAMES_INDEX, MASK};
use crate::error::{CliResult, Context, Failure, FailureKind};

/// Image file name for a frame at simulated time `t`, e.g. `t0.898300s.png`.
pub fn frame_file_name(t: f64) -> String {
    format!("t{t:.6}s.png")
}

/// Writes one PNG per snapshot into `out_dir` and returns their paths.
pub fn cmd_render_frames(run_dir: &Path, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let index_path = run_dir.join(FRAMES_INDEX);
    if !index_path.is_file() {
        return Err(Failure::io(format!(
            "no snapshots found in {} (run simulate with --snapshot-every)",
            run_dir.display()
        )));
    }
    let index: Vec<FrameRecord> = artifacts::read_json(&index_path)?;
    if index.is_empty() {
        return Err(Failure::io(format!("no snapshots found in {}", run_dir.display())));
    }
    let mask_path = run_dir.join(MASK);
    let mask = fs::File::open(&mask_path)
        .and_then(|f| ObstacleMask::read_pgm(BufReader::new(f)))
        .kind(FailureKind::Io, format!("reading {}", mask_path.display()))?;

    // Images are staged beside the output directory and moved in only once
    // every frame has rendered; the staging directory is never committed.
    let staging = Staging::new(out_dir)?;
    let mut names = Vec::with_capacity(index.len());
    for rec in &index {
        let path = run_dir.join(&rec.file);
        let frame = fs::File::open(&path)
            .and_then(|f| Frame::read_from(BufReader::new(f)))
            .kind(FailureKind::Io, format!("reading {}", path.display()))?;
        if mask.shape() != (frame.nx, frame.ny) {
            return Err(Failure::io(format!("{} does not match the mask size", rec.file)));
        }
        let name = frame_file_name(frame.time());
        snapshot_to_image(&frame, &mask)
            .save(staging.path().join(&name))
            .kind(FailureKind::Io, format!("writing {name}"))?;
        names.push(name);
    }

    fs::create_dir_all(out_dir).kind(FailureKind::Io, format!("creating {}", out_dir.display()))?;
    let mut written = Vec::with_capacity(names.len());
    for name in names {
        let dest = out_dir.join(&name);
        fs::rename(staging.path().join(&name), &dest)
            .kind(FailureKind::Io, format!("moving {name} into {}", out_dir.display()))?;
        written.push(dest);
    }
    log::info!("rendered {} frames into {}", written.len(), out_dir.display());
    Ok(written)
}
