//! On-disk layout of a run directory.
//!
//! ```text
//! manifest.json        artifact list, config echo, tool version, timestamp
//! run.json             grid, time axis, sweep and probe provenance
//! mask.pgm             obstacle map
//! traces/<id>_<mic>.*  one pressure trace per microphone
//! frames.json          snapshot index (when snapshots were requested)
//! frames/*.bin         pressure snapshots
//! ir/<id>.wav, .json   impulse responses written by extract-ir
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use acoustic_fdtd::ir;
use acoustic_fdtd::scene::{GridSpec, MediumParams, SceneConfig};
use acoustic_fdtd::signals::{Signal, SweepSpec};
use acoustic_fdtd::solver::RuntimeStats;
use clap::ValueEnum;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliResult, Context, Failure, FailureKind};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_INFO: &str = "run.json";
pub const MASK: &str = "mask.pgm";
pub const FRAMES_INDEX: &str = "frames.json";
pub const TRACES_DIR: &str = "traces";
pub const FRAMES_DIR: &str = "frames";
pub const IR_DIR: &str = "ir";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    /// Little-endian f64 samples with no header.
    Raw,
    /// Mono 32-bit float WAV. The header rate is rounded; run.json has the exact one.
    Wav,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Raw => "f64",
            TraceFormat::Wav => "wav",
        }
    }
}

/// Options of the `simulate` invocation that are not part of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub snapshot_every: Option<usize>,
    pub format: TraceFormat,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch of the last rewrite.
    pub created_unix: u64,
    /// Effective scene after command-line overrides.
    pub config: SceneConfig,
    pub options: RunOptions,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub runtime: Option<RuntimeStats>,
}

impl RunManifest {
    pub fn new(config: SceneConfig, options: RunOptions) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: now_unix(),
            config,
            options,
            artifacts: Vec::new(),
            runtime: None,
        }
    }

    /// Replaces every artifact under `prefix` with `paths`.
    pub fn replace_artifacts(&mut self, prefix: &str, paths: impl IntoIterator<Item = String>) {
        self.artifacts.retain(|a| !a.starts_with(prefix));
        self.artifacts.extend(paths);
        self.created_unix = now_unix();
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicRecord {
    pub label: String,
    pub index: [usize; 2],
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerRecord {
    pub id: String,
    pub position: [f64; 2],
    pub orientation: f64,
    pub mics: Vec<MicRecord>,
}

/// Everything extract-ir needs to turn traces into impulse responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub grid: GridSpec,
    pub medium: MediumParams,
    pub n_pml: usize,
    pub dt: f64,
    pub nt: usize,
    /// Exact trace sample rate, `1/dt`.
    pub fs: f64,
    pub sim_duration: f64,
    pub sweep: SweepSpec,
    pub ir_length: Option<f64>,
    pub source: [f64; 2],
    pub source_index: [usize; 2],
    pub trace_format: TraceFormat,
    pub listeners: Vec<ListenerRecord>,
}

impl RunInfo {
    /// Configured IR length, or twice the time left after the sweep ends.
    pub fn ir_samples(&self) -> Option<usize> {
        let seconds = self.ir_length.unwrap_or(2.0 * (self.sim_duration - self.sweep.duration));
        (seconds > 0.0).then(|| (seconds * self.fs).round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub file: String,
    pub step: u64,
    pub time: f64,
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).kind(FailureKind::Io, "serializing JSON")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.kind(FailureKind::Io, format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).kind(FailureKind::Io, format!("reading {}", path.display()))?;
    serde_json::from_str(&text).kind(FailureKind::Io, format!("parsing {}", path.display()))
}

/// A scratch directory next to `target` that is deleted unless committed.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> CliResult<Self> {
        let name = target
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Failure::config(format!("invalid output path {}", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).kind(FailureKind::Io, format!("creating {}", parent.display()))?;
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).kind(FailureKind::Io, format!("creating {}", dir.display()))?;
        Ok(Self { dir, target: target.to_path_buf(), committed: false })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Moves the staged directory to the target. An existing target is
    /// replaced only when it is empty or `replaceable` accepts it.
    pub fn commit(mut self, replaceable: impl Fn(&Path) -> bool) -> CliResult<()> {
        let target = &self.target;
        if target.exists() {
            let empty = fs::read_dir(target).map(|mut d| d.next().is_none()).unwrap_or(false);
            if !empty && !replaceable(target) {
                return Err(Failure::io(format!(
                    "refusing to replace {}: not an output of this tool",
                    target.display()
                )));
            }
            fs::remove_dir_all(target).kind(FailureKind::Io, format!("removing {}", target.display()))?;
        }
        fs::rename(&self.dir, target).kind(FailureKind::Io, format!("moving output to {}", target.display()))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

pub fn write_trace(path: &Path, trace: &Signal, format: TraceFormat) -> CliResult<()> {
    match format {
        TraceFormat::Raw => {
            let bytes: Vec<u8> = trace.samples().iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(path, bytes).kind(FailureKind::Io, format!("writing {}", path.display()))
        }
        TraceFormat::Wav => trace.write_wav(path).kind(FailureKind::Io, format!("writing {}", path.display())),
    }
}

pub fn read_trace(path: &Path, format: TraceFormat, fs_exact: f64) -> CliResult<Signal> {
    let what = || format!("reading trace {}", path.display());
    let samples = match format {
        TraceFormat::Raw => {
            let bytes = fs::read(path).kind(FailureKind::Io, what())?;
            if bytes.len() % 8 != 0 {
                return Err(Failure::io(format!("{} is not a whole number of f64 samples", path.display())));
            }
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
        }
        TraceFormat::Wav => {
            let mut channels = ir::read_wav_channels(path).kind(FailureKind::Io, what())?;
            if channels.len() != 1 {
                return Err(Failure::io(format!("{} is not mono", path.display())));
            }
            channels.remove(0).into_samples()
        }
    };
    Signal::new(samples, fs_exact).kind(FailureKind::Io, what())
}

/// Relative path as a forward-slash string.
pub fn rel(parts: &[&str]) -> String {
    parts.join("/")
}
