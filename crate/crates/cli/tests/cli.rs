use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acoustic_fdtd::solver::SolverError;
use acoustic_fdtd_cli::artifacts::{FrameRecord, RunInfo, RunManifest};
use acoustic_fdtd_cli::error::{Failure, FailureKind};

const SCENE: &str = r#"
domain = [6.0, 4.0]
source = [3.0, 2.0]
f_max = 500.0
sim_duration = 0.3
obstacles = [[4.2, 0.8, 4.6, 1.4]]
[sweep]
f0 = 50.0
f1 = 500.0
duration = 0.15
[simulation]
pml_cells = 8
[[listeners]]
position = [1.5, 2.5]
[[listeners]]
id = "far"
position = [4.8, 3.0]
orientation = 1.0
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_acoustic-fdtd"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup(scene: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.toml"), scene).unwrap();
    let p = dir.path().to_path_buf();
    (dir, p)
}

fn simulate(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--scene", "scene.toml", "--out", out];
    args.extend_from_slice(extra);
    run(&args, dir)
}

fn leftovers(dir: &Path) -> Vec<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with('.'))
        .collect()
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 6] = [
        (
            "simulate",
            &[
                "--scene",
                "--out",
                "--snapshot-every",
                "--safety",
                "--pml-cells",
                "--pml-reflection",
                "--f-max",
                "--sim-duration",
                "--format",
                "--seed",
                "--threads",
            ],
        ),
        ("extract-ir", &["--run", "--fs-out", "44100"]),
        ("render-frames", &["--run", "--out"]),
        ("validate", &["--freqs", "3000", "--out", "--max-nrmse", "--max-arrival"]),
        ("bench", &["--areas", "--f-max", "--repetitions", "--t-sim", "--out"]),
        ("auralize", &["--dry", "--ir", "--yaw", "--out"]),
    ];
    for (cmd, flags) in cases {
        let o = run(&[cmd, "--help"], dir.path());
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout);
        for f in flags {
            assert!(text.contains(f), "{cmd} help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["simulate", "--bogus"], dir.path())), 64);
    assert_eq!(code(&run(&["simulate"], dir.path())), 64);
    assert_eq!(code(&run(&["simulate", "--scene", "a", "--out", "b", "--format", "mp3"], dir.path())), 64);
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 64);
}

#[test]
fn instability_maps_to_exit_2() {
    let f = Failure::from(SolverError::Unstable { step: 7 });
    assert_eq!(f.kind, FailureKind::Unstable);
    assert_eq!(f.exit_code(), 2);
    let f = Failure::from(SolverError::InvalidParameter("x".into()));
    assert_eq!(f.exit_code(), 1);
}

#[test]
fn malformed_scene_leaves_nothing_behind() {
    let (_keep, dir) = setup("domain = [6.0, 4.0\nsource = [1, 1]");
    let o = simulate(&dir, "run", &[]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("error"));
    assert!(!dir.join("run").exists());
    assert!(leftovers(&dir).is_empty());

    // Valid syntax, invalid content.
    fs::write(dir.join("scene.toml"), SCENE.replace("source = [3.0, 2.0]", "source = [4.4, 1.0]")).unwrap();
    assert_eq!(code(&simulate(&dir, "run", &[])), 1);
    // Invalid after overrides.
    fs::write(dir.join("scene.toml"), SCENE).unwrap();
    assert_eq!(code(&simulate(&dir, "run", &["--safety", "1.5"])), 1);
    assert_eq!(code(&simulate(&dir, "run", &["--f-max", "100"])), 1);
    assert!(!dir.join("run").exists());
}

#[test]
fn missing_scene_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--scene", "nope.toml", "--out", "run"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_writes_a_complete_run() {
    let (_keep, dir) = setup(SCENE);
    let o = simulate(&dir, "run", &["--snapshot-every", "500", "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run_dir = dir.join("run");
    let manifest: RunManifest = serde_json::from_slice(&fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    for a in &manifest.artifacts {
        assert!(run_dir.join(a).is_file(), "{a} listed but missing");
    }
    let traces: Vec<_> = fs::read_dir(run_dir.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 8);
    assert_eq!(manifest.config.simulation.pml_cells, 8);
    assert_eq!(manifest.options.seed, Some(9));

    let info: RunInfo = serde_json::from_slice(&fs::read(run_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(info.listeners.len(), 2);
    assert_eq!(info.listeners[0].id, "L1");
    let bytes = fs::metadata(run_dir.join(&info.listeners[1].mics[0].trace)).unwrap().len();
    assert_eq!(bytes as usize, 8 * info.nt);
    assert!(leftovers(&dir).is_empty());
}

#[test]
fn flags_override_the_scene() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "run", &["--sim-duration", "0.2", "--pml-cells", "6", "--safety", "0.5"])), 0);
    let info: RunInfo = serde_json::from_slice(&fs::read(dir.join("run/run.json")).unwrap()).unwrap();
    assert_eq!(info.n_pml, 6);
    assert_eq!(info.sim_duration, 0.2);
    let bound = info.grid.ds / (info.medium.c * 2f64.sqrt());
    assert!((info.dt / bound - 0.5).abs() < 1e-12);
}

#[test]
fn zero_listeners_is_a_valid_run_with_a_warning() {
    let scene = SCENE.split("[[listeners]]").next().unwrap();
    let (_keep, dir) = setup(scene);
    let o = simulate(&dir, "run", &[]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).to_lowercase().contains("no listeners"));
    assert_eq!(fs::read_dir(dir.join("run/traces")).unwrap().count(), 0);
    assert_eq!(code(&run(&["extract-ir", "--run", "run"], &dir)), 0);
}

#[test]
fn existing_output_is_replaced_only_when_it_is_a_run() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    fs::write(dir.join("run/stale.txt"), "x").unwrap();
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    assert!(!dir.join("run/stale.txt").exists());

    fs::create_dir(dir.join("mine")).unwrap();
    fs::write(dir.join("mine/notes.txt"), "keep").unwrap();
    let o = simulate(&dir, "mine", &[]);
    assert_eq!(code(&o), 3);
    assert_eq!(fs::read_to_string(dir.join("mine/notes.txt")).unwrap(), "keep");
    assert!(leftovers(&dir).is_empty());
}

#[test]
fn extract_ir_is_idempotent_and_updates_the_manifest() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    let o = run(&["extract-ir", "--run", "run"], &dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read(dir.join("run/ir/far.wav")).unwrap();
    let reader = hound::WavReader::open(dir.join("run/ir/L1.wav")).unwrap();
    assert_eq!(reader.spec().channels, 4);
    assert_eq!(reader.spec().sample_rate, 44_100);

    assert_eq!(code(&run(&["extract-ir", "--run", "run"], &dir)), 0);
    assert_eq!(fs::read(dir.join("run/ir/far.wav")).unwrap(), first);

    let manifest: RunManifest = serde_json::from_slice(&fs::read(dir.join("run/manifest.json")).unwrap()).unwrap();
    let irs: Vec<_> = manifest.artifacts.iter().filter(|a| a.starts_with("ir/")).collect();
    assert_eq!(irs.len(), 4);
    for a in &manifest.artifacts {
        assert!(dir.join("run").join(a).is_file());
    }
    let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("run/ir/L1.json")).unwrap()).unwrap();
    assert_eq!(sidecar["channels"], serde_json::json!(["L->L", "L->R", "R->R", "R->L"]));
}

#[test]
fn wav_traces_round_trip_through_extraction() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "raw", &[])), 0);
    assert_eq!(code(&simulate(&dir, "wav", &["--format", "wav"])), 0);
    for r in ["raw", "wav"] {
        assert_eq!(code(&run(&["extract-ir", "--run", r, "--fs-out", "8000"], &dir)), 0);
    }
    let read = |r: &str| -> Vec<f32> {
        hound::WavReader::open(dir.join(r).join("ir/L1.wav")).unwrap().samples::<f32>().map(Result::unwrap).collect()
    };
    let (a, b) = (read("raw"), read("wav"));
    assert_eq!(a.len(), b.len());
    let err = a.iter().zip(&b).fold(0f32, |m, (x, y)| m.max((x - y).abs()));
    // f32 trace storage costs a little precision, nothing more.
    assert!(err < 1e-4, "{err}");
}

#[test]
fn extract_ir_needs_run_data() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&run(&["extract-ir", "--run", "nowhere"], &dir)), 3);
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    fs::remove_file(dir.join("run/traces/far_RR.f64")).unwrap();
    assert_eq!(code(&run(&["extract-ir", "--run", "run"], &dir)), 3);
    assert!(!dir.join("run/ir").exists());

    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    let info = fs::read_to_string(dir.join("run/run.json")).unwrap();
    let stripped = info.replacen("\"sweep\"", "\"removed\"", 1);
    fs::write(dir.join("run/run.json"), stripped).unwrap();
    let o = run(&["extract-ir", "--run", "run"], &dir);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("sweep"));
}

#[test]
fn render_frames_names_images_by_time() {
    let (_keep, dir) = setup(SCENE);
    let o = simulate(&dir, "run", &["--snapshot-every", "500"]);
    assert_eq!(code(&o), 0);
    let index: Vec<FrameRecord> = serde_json::from_slice(&fs::read(dir.join("run/frames.json")).unwrap()).unwrap();
    assert_eq!(index.len(), 4);
    let o = run(&["render-frames", "--run", "run", "--out", "png"], &dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let info: RunInfo = serde_json::from_slice(&fs::read(dir.join("run/run.json")).unwrap()).unwrap();
    let mut names: Vec<String> =
        fs::read_dir(dir.join("png")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let expected: Vec<String> = index.iter().map(|f| format!("t{:.6}s.png", f.step as f64 * info.dt)).collect();
    assert_eq!(names, expected);
    let img = image::open(dir.join("png").join(&names[0])).unwrap();
    assert_eq!((img.width() as usize, img.height() as usize), (info.grid.nx, info.grid.ny));
    assert!(leftovers(&dir).is_empty());
}

#[test]
fn render_frames_without_snapshots_fails() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    let o = run(&["render-frames", "--run", "run", "--out", "png"], &dir);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no snapshots"));
    assert!(!dir.join("png").exists());
}

#[test]
fn bench_writes_one_row_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["bench", "--areas", "4", "--f-max", "800", "--repetitions", "3", "--t-sim", "0.01", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "area_m2,f_max_hz,wall_minutes,cells,steps");
    assert_eq!(lines.len(), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("median"));
}

#[test]
fn validate_single_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--freqs", "250", "--out", "v.csv", "--traces", "tr"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("f0_hz,nrmse_pct,arrival_ms"));
    assert!(dir.path().join("tr/fdtd_250hz.csv").is_file());
    assert!(dir.path().join("tr/oracle_250hz.csv").is_file());

    // Bounds are enforced after the CSV is written.
    let o = run(&["validate", "--freqs", "250", "--out", "w.csv", "--max-nrmse", "0.5"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(dir.path().join("w.csv").is_file());
    assert_eq!(code(&run(&["validate", "--freqs=-5", "--out", "x.csv"], dir.path())), 1);
}

#[test]
fn auralize_makes_stereo() {
    let (_keep, dir) = setup(SCENE);
    assert_eq!(code(&simulate(&dir, "run", &[])), 0);
    assert_eq!(code(&run(&["extract-ir", "--run", "run", "--fs-out", "8000"], &dir)), 0);
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(dir.join("dry.wav"), spec).unwrap();
    for n in 0..1600 {
        w.write_sample(if n == 100 { 8000i16 } else { 0 }).unwrap();
    }
    w.finalize().unwrap();
    let o = run(&["auralize", "--dry", "dry.wav", "--ir", "run/ir/L1.wav", "--yaw", "-45", "--out", "wet.wav"], &dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = hound::WavReader::open(dir.join("wet.wav")).unwrap();
    assert_eq!(r.spec().channels, 2);
    assert_eq!(r.spec().sample_rate, 8000);
    assert_eq!(code(&run(&["auralize", "--dry", "dry.wav", "--ir", "missing.wav", "--out", "x.wav"], &dir)), 3);
}
