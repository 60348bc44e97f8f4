//! Free-field accuracy checks against the 2D Green's function, error
//! metrics and the runtime-scaling benchmark harness.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{self, GridSpec, MediumParams, ObstacleMask, ProbeLayout};
use crate::signals::{RickerSpec, Signal};
use crate::solver::{self, build_pml, SimulationPlan, TimeSpec};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("signals differ: {0}")]
    Mismatch(String),
    #[error("reference signal is constant")]
    ConstantReference,
    #[error("signal has no nonzero peak")]
    NoPeak,
    #[error("distance {distance} m is below two samples of travel (min {min} m)")]
    DistanceTooSmall { distance: f64, min: f64 },
    #[error("invalid validation input: {0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Sub-intervals per sample used to integrate the kernel.
pub const GREENS_SUBDIVISIONS: usize = 64;

/// Response at `distance` to a point source emitting `source`, i.e.
/// `y(t) = ∫ G(τ)·x(t − τ) dτ` with the 2D kernel
/// `G(τ) = H(τ − r/c) / (2π·√(τ² − r²/c²))`.
///
/// Output sample `n` is `y(n/fs)`. The source is read as a Catmull-Rom
/// interpolant that is zero before its first sample. Kernel masses over
/// each sub-interval come from the exact antiderivative `acosh(τ/τ₀)/2π`,
/// which absorbs the inverse-square-root singularity at the onset.
pub fn greens_response(distance: f64, source: &Signal, medium: &MediumParams) -> Result<Signal, ValidationError> {
    let fs = source.fs();
    let dt = 1.0 / fs;
    let tau0 = distance / medium.c;
    if !(distance.is_finite() && tau0 >= 2.0 * dt) {
        return Err(ValidationError::DistanceTooSmall { distance, min: 2.0 * dt * medium.c });
    }
    let x = source.samples();
    let n_out = x.len();
    let first_bin = (tau0 / dt).floor() as usize;
    if first_bin >= n_out {
        return Ok(Signal::zeros(n_out, fs).expect("valid rate"));
    }

    // Mass and first moment of the kernel below τ.
    let mass = |tau: f64| {
        if tau <= tau0 {
            0.0
        } else {
            (tau / tau0).acosh() / (2.0 * PI)
        }
    };
    let moment = |tau: f64| {
        if tau <= tau0 {
            0.0
        } else {
            (tau * tau - tau0 * tau0).sqrt() / (2.0 * PI)
        }
    };

    // Bin k covers lags [k·dt, (k+1)·dt]; its four weights act on samples
    // n−k−2 .. n−k+1.
    let bins: Vec<[f64; 4]> = (first_bin..n_out)
        .map(|k| {
            let mut w = [0.0; 4];
            let sub = dt / GREENS_SUBDIVISIONS as f64;
            for s in 0..GREENS_SUBDIVISIONS {
                let a = k as f64 * dt + s as f64 * sub;
                let b = a + sub;
                let m = mass(b) - mass(a);
                if m <= 0.0 {
                    continue;
                }
                let centroid = (moment(b) - moment(a)) / m;
                // x(t_n − τ) sits at fractional index (n−k−1) + u.
                let u = 1.0 - (centroid / dt - k as f64);
                let c = catmull_rom(u);
                for q in 0..4 {
                    w[q] += m * c[q];
                }
            }
            w
        })
        .collect();

    let at = |idx: isize| if idx >= 0 { x[idx as usize] } else { 0.0 };
    let mut y = vec![0.0; n_out];
    for (n, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (b, w) in bins.iter().enumerate() {
            let k = first_bin + b;
            if k >= n {
                break;
            }
            let base = (n - k - 1) as isize;
            acc += w[0] * at(base - 1) + w[1] * at(base) + w[2] * at(base + 1);
            if (base + 2) < n_out as isize {
                acc += w[3] * at(base + 2);
            }
        }
        *out = acc;
    }
    Ok(Signal::new(y, fs).expect("finite response"))
}

/// Catmull-Rom weights for samples `m−1, m, m+1, m+2` at `m + u`.
fn catmull_rom(u: f64) -> [f64; 4] {
    let (u2, u3) = (u * u, u * u * u);
    [0.5 * (-u3 + 2.0 * u2 - u), 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0), 0.5 * (-3.0 * u3 + 4.0 * u2 + u), 0.5 * (u3 - u2)]
}

fn check_pair(a: &Signal, b: &Signal) -> Result<(), ValidationError> {
    if a.len() != b.len() || a.fs() != b.fs() {
        return Err(ValidationError::Mismatch(format!(
            "{} samples at {} Hz vs {} samples at {} Hz",
            a.len(),
            a.fs(),
            b.len(),
            b.fs()
        )));
    }
    Ok(())
}

/// Root-mean-square error normalized by the reference range, in percent.
pub fn nrmse(reference: &Signal, test: &Signal) -> Result<f64, ValidationError> {
    check_pair(reference, test)?;
    let r = reference.samples();
    let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(ValidationError::ConstantReference);
    }
    let sq: f64 = r.iter().zip(test.samples()).map(|(a, b)| (b - a).powi(2)).sum();
    Ok(100.0 * (sq / r.len() as f64).sqrt() / range)
}

/// Difference between the global |peak| positions, in milliseconds.
pub fn peak_arrival_diff(reference: &Signal, test: &Signal) -> Result<f64, ValidationError> {
    if reference.fs() != test.fs() {
        return Err(ValidationError::Mismatch("sample rates differ".into()));
    }
    let (a, _) = reference.peak().ok_or(ValidationError::NoPeak)?;
    let (b, _) = test.peak().ok_or(ValidationError::NoPeak)?;
    Ok(a.abs_diff(b) as f64 / reference.fs() * 1e3)
}

/// Divides by the largest magnitude.
pub fn peak_normalized(s: &Signal) -> Result<Signal, ValidationError> {
    match s.peak() {
        Some((_, v)) if v != 0.0 => Ok(s.scaled(1.0 / v.abs())),
        _ => Err(ValidationError::NoPeak),
    }
}

/// Free-field layout shared by all validation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSetup {
    /// Source–receiver distance (m).
    pub separation: f64,
    /// Direction from source to receiver, radians counter-clockwise from
    /// +x. Grid dispersion is largest along the axes (0) and smallest on
    /// the diagonals.
    #[serde(default)]
    pub bearing: f64,
    pub medium: MediumParams,
    pub pml_cells: usize,
    pub pml_reflection: f64,
    pub safety: f64,
    /// Grid resolution at the center frequency.
    pub points_per_wavelength: f64,
    /// Ricker peak time in periods of the center frequency.
    pub delay_periods: f64,
    /// Simulated time after the direct arrival, in periods.
    pub tail_periods: f64,
}

impl Default for ValidationSetup {
    fn default() -> Self {
        Self {
            separation: 5.0,
            bearing: 0.0,
            medium: MediumParams::default(),
            pml_cells: 20,
            pml_reflection: 1e-4,
            safety: 0.99,
            points_per_wavelength: scene::POINTS_PER_WAVELENGTH,
            delay_periods: 1.5,
            tail_periods: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub f_center: f64,
    /// Percent.
    pub nrmse: f64,
    /// Milliseconds.
    pub arrival_diff: f64,
    pub nx: usize,
    pub ny: usize,
    pub ds: f64,
    pub dt: f64,
    pub steps: usize,
    /// Grid distance actually simulated (m).
    pub separation: f64,
    pub setup: ValidationSetup,
}

/// A report together with the two peak-normalized traces it compares.
#[derive(Debug, Clone)]
pub struct ValidationRun {
    pub report: ValidationReport,
    pub fdtd: Signal,
    pub oracle: Signal,
}

/// Runs one free-field comparison at center frequency `f0`.
///
/// The grid is built for `f_max = f0`. A single source cell and a single
/// receiver cell sit a whole number of cells apart along each axis, in the
/// direction of `setup.bearing`, with the PML plus a clearance of
/// `max(1 m, 2λ)` around them. The source
/// injects the running integral of the Ricker wavelet so that the pressure
/// itself follows the kernel convolved with the Ricker, and the analytic
/// trace is evaluated on the same time samples.
pub fn run_validation_case(f0: f64, setup: &ValidationSetup) -> crate::Result<ValidationRun> {
    if !(f0.is_finite() && f0 > 0.0) || !(setup.separation > 0.0) || !(setup.points_per_wavelength > 0.0) {
        return Err(ValidationError::InvalidInput(format!(
            "f0 {f0} Hz, separation {} m, {} points per wavelength",
            setup.separation, setup.points_per_wavelength
        ))
        .into());
    }
    let c = setup.medium.c;
    let lambda = c / f0;
    let ds = lambda / setup.points_per_wavelength;
    let offset = |v: f64| (setup.separation * v / ds).round() as isize;
    let (di, dj) = (offset(setup.bearing.cos()), offset(setup.bearing.sin()));
    if di == 0 && dj == 0 {
        return Err(ValidationError::InvalidInput("separation is below one cell".into()).into());
    }
    let clearance = (setup.pml_cells as f64 + (1.0f64.max(2.0 * lambda) / ds).ceil()) as usize;
    let grid = GridSpec {
        ds,
        nx: di.unsigned_abs() + 2 * clearance + 1,
        ny: dj.unsigned_abs() + 2 * clearance + 1,
        lambda_min: lambda,
    };
    let corner = |d: isize| clearance + if d < 0 { d.unsigned_abs() } else { 0 };
    let source_cell = (corner(di), corner(dj));
    let receiver = ((source_cell.0 as isize + di) as usize, (source_cell.1 as isize + dj) as usize);
    let distance = ds * ((di * di + dj * dj) as f64).sqrt();

    let delay = setup.delay_periods / f0;
    let t_sim = distance / c + delay + setup.tail_periods / f0;
    let time = solver::compute_time_step(&grid, &setup.medium, t_sim, setup.safety)?;
    let plan = SimulationPlan {
        damping: build_pml(&grid, setup.pml_cells, &setup.medium, setup.pml_reflection)?,
        mask: ObstacleMask::free(grid.nx, grid.ny),
        probes: ProbeLayout {
            source_index: source_cell,
            source_width_cells: 1,
            source_footprint: scene::point_footprint(source_cell),
            listeners: Vec::new(),
            points: vec![receiver],
        },
        grid,
        medium: setup.medium,
        time,
    };

    let ricker = RickerSpec::new(f0, delay)?;
    let dt = time.dt;
    let out = solver::run_simulation(&plan, &ricker_pressure_source(&ricker, &time), None)?;
    let fdtd = out.point_traces.into_iter().next().expect("one receiver");

    // Trace sample n holds time (n+1)·dt, so feed the oracle a source
    // advanced by one step.
    let advanced = RickerSpec::new(f0, delay - dt)?;
    let source: Vec<f64> = (0..time.nt).map(|n| advanced.value(n as f64 * dt)).collect();
    let oracle = greens_response(distance, &Signal::new(source, time.fs())?, &setup.medium)?;

    let fdtd = peak_normalized(&fdtd)?;
    let oracle = peak_normalized(&oracle)?;
    let report = ValidationReport {
        f_center: f0,
        nrmse: nrmse(&oracle, &fdtd)?,
        arrival_diff: peak_arrival_diff(&oracle, &fdtd)?,
        nx: grid.nx,
        ny: grid.ny,
        ds,
        dt,
        steps: time.nt,
        separation: distance,
        setup: *setup,
    };
    log::info!(
        "f0 {f0} Hz: NRMSE {:.2}%, arrival diff {:.3} ms on {}x{}",
        report.nrmse,
        report.arrival_diff,
        grid.nx,
        grid.ny
    );
    Ok(ValidationRun { report, fdtd, oracle })
}

/// Per-step source samples for a single-cell source whose radiated
/// pressure follows the Ricker wavelet `spec`: sample `n` is the Ricker
/// integrated over step `n`, evaluated at the midpoint of that step.
pub fn ricker_pressure_source(spec: &RickerSpec, time: &TimeSpec) -> Signal {
    let dt = time.dt;
    let samples = (0..time.nt).map(|n| dt * spec.integral((n as f64 + 0.5) * dt)).collect();
    Signal::new(samples, time.fs()).expect("finite wavelet")
}

/// One validation run per frequency, in input order.
pub fn run_validation_suite(frequencies: &[f64], setup: &ValidationSetup) -> crate::Result<Vec<ValidationReport>> {
    frequencies.par_iter().map(|&f| run_validation_case(f, setup).map(|r| r.report)).collect()
}

pub fn write_validation_csv<W: Write>(reports: &[ValidationReport], out: W) -> Result<(), ValidationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f0_hz", "nrmse_pct", "arrival_ms", "nx", "ny", "dt_s", "separation_m"])?;
    for r in reports {
        w.write_record([
            r.f_center.to_string(),
            format!("{:.4}", r.nrmse),
            format!("{:.4}", r.arrival_diff),
            r.nx.to_string(),
            r.ny.to_string(),
            format!("{:e}", r.dt),
            format!("{:.6}", r.separation),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Two-column `time_s,amplitude` overlay data.
pub fn write_trace_csv<W: Write>(trace: &Signal, time_offset: f64, out: W) -> Result<(), ValidationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "amplitude"])?;
    for (n, v) in trace.samples().iter().enumerate() {
        w.write_record([format!("{:.9}", time_offset + n as f64 / trace.fs()), format!("{v:e}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Smallest benchmarked domain area (m²).
pub const MIN_BENCH_AREA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub domain_area: f64,
    pub f_max: f64,
    pub wall_minutes: f64,
    pub cells: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSetup {
    /// Simulated time per run (s).
    pub t_sim: f64,
    /// Worker threads for timed runs; 1 avoids contention skew.
    pub threads: usize,
    pub pml_cells: usize,
    pub medium: MediumParams,
}

impl Default for BenchmarkSetup {
    fn default() -> Self {
        Self { t_sim: 0.1, threads: 1, pml_cells: 20, medium: MediumParams::default() }
    }
}

/// Square free-field domain of the given area with a centered Gaussian
/// source. The PML is thinned when the grid is too small for it.
pub fn benchmark_plan(area: f64, f_max: f64, setup: &BenchmarkSetup) -> crate::Result<SimulationPlan> {
    let side = area.max(MIN_BENCH_AREA).sqrt();
    let grid = GridSpec::for_domain(side, side, setup.medium.c, f_max);
    let n_pml = setup.pml_cells.min((grid.nx.min(grid.ny).saturating_sub(1)) / 2);
    let center = (grid.nx / 2, grid.ny / 2);
    let width = scene::source_width(&grid);
    Ok(SimulationPlan {
        damping: build_pml(&grid, n_pml, &setup.medium, 1e-4)?,
        mask: ObstacleMask::free(grid.nx, grid.ny),
        probes: ProbeLayout {
            source_index: center,
            source_width_cells: width,
            source_footprint: scene::gaussian_footprint(&grid, center, width),
            listeners: Vec::new(),
            points: vec![center],
        },
        time: solver::compute_time_step(&grid, &setup.medium, setup.t_sim, 0.99)?,
        grid,
        medium: setup.medium,
    })
}

/// Times `repetitions` runs for every `(area, f_max)` pair. Areas below
/// [`MIN_BENCH_AREA`] are clamped. Wall time covers the time loop only.
pub fn run_benchmarks(
    areas: &[f64],
    f_maxes: &[f64],
    repetitions: usize,
    setup: &BenchmarkSetup,
) -> crate::Result<Vec<BenchmarkRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(setup.threads.max(1))
        .build()
        .map_err(|e| ValidationError::InvalidInput(e.to_string()))?;
    let mut records = Vec::new();
    for &area in areas {
        for &f_max in f_maxes {
            let area = area.max(MIN_BENCH_AREA);
            let plan = benchmark_plan(area, f_max, setup)?;
            let TimeSpec { dt, nt, .. } = plan.time;
            let ricker = RickerSpec::new(f_max / 2.0, 1.0 / f_max)?;
            let n_src = nt.min((3.0 / f_max / dt).ceil() as usize);
            let src = Signal::new((0..n_src).map(|n| ricker.value(n as f64 * dt)).collect(), 1.0 / dt)?;
            for rep in 0..repetitions {
                let started = Instant::now();
                pool.install(|| solver::run_simulation(&plan, &src, None))?;
                let wall = started.elapsed().as_secs_f64();
                log::info!("area {area} m2, f_max {f_max} Hz, rep {rep}: {wall:.3} s");
                records.push(BenchmarkRecord {
                    domain_area: area,
                    f_max,
                    wall_minutes: wall / 60.0,
                    cells: plan.grid.cells(),
                    steps: nt,
                });
            }
        }
    }
    Ok(records)
}

/// Per-(area, f_max) median wall time, in first-seen order.
pub fn median_records(records: &[BenchmarkRecord]) -> Vec<BenchmarkRecord> {
    let mut groups: Vec<(BenchmarkRecord, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(g, _)| g.domain_area == r.domain_area && g.f_max == r.f_max) {
            Some((_, times)) => times.push(r.wall_minutes),
            None => groups.push((*r, vec![r.wall_minutes])),
        }
    }
    groups
        .into_iter()
        .map(|(mut g, mut times)| {
            times.sort_by(f64::total_cmp);
            let k = times.len();
            g.wall_minutes = if k % 2 == 1 { times[k / 2] } else { 0.5 * (times[k / 2 - 1] + times[k / 2]) };
            g
        })
        .collect()
}

pub fn write_benchmark_csv<W: Write>(records: &[BenchmarkRecord], out: W) -> Result<(), ValidationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["area_m2", "f_max_hz", "wall_minutes", "cells", "steps"])?;
    for r in records {
        w.write_record([
            r.domain_area.to_string(),
            r.f_max.to_string(),
            format!("{:e}", r.wall_minutes),
            r.cells.to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Least-squares fit `y = a + b·x`, returning `(a, b, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - slope * mx, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 20_000.0;

    fn ricker_signal(f0: f64, delay: f64, len: usize) -> Signal {
        let r = RickerSpec::new(f0, delay).unwrap();
        Signal::new((0..len).map(|n| r.value(n as f64 / FS)).collect(), FS).unwrap()
    }

    /// `∫ G(τ) x(t − τ) dτ` via `τ = τ₀·cosh(u)`, Simpson in `u`.
    fn brute_force(r: f64, c: f64, spec: &RickerSpec, t: f64) -> f64 {
        let tau0 = r / c;
        if t <= tau0 {
            return 0.0;
        }
        let upper = (t / tau0).acosh();
        let n = 20_000;
        let h = upper / n as f64;
        let f = |u: f64| {
            let s = t - tau0 * u.cosh();
            if s < 0.0 {
                0.0
            } else {
                spec.value(s)
            }
        };
        let mut acc = f(0.0) + f(upper);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        acc * h / 3.0 / (2.0 * PI)
    }

    #[test]
    fn oracle_matches_direct_integration() {
        let medium = MediumParams::default();
        let spec = RickerSpec::new(500.0, 0.004).unwrap();
        let x = ricker_signal(500.0, 0.004, 500);
        let r = 3.0;
        let y = greens_response(r, &x, &medium).unwrap();
        let reference: Vec<f64> = (0..500).map(|n| brute_force(r, medium.c, &spec, n as f64 / FS)).collect();
        let peak = reference.iter().fold(0f64, |m, v| m.max(v.abs()));
        let worst = y.samples().iter().zip(&reference).fold(0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 2e-3 * peak, "max error {} of peak {}", worst, peak);
    }

    #[test]
    fn oracle_is_causal() {
        let medium = MediumParams::default();
        let x = ricker_signal(800.0, 0.0, 400);
        let r = 2.0;
        let y = greens_response(r, &x, &medium).unwrap();
        let onset = r / medium.c;
        for (n, v) in y.samples().iter().enumerate() {
            if (n as f64) / FS < onset {
                assert_eq!(*v, 0.0, "sample {n}");
            }
        }
        assert!(y.energy() > 0.0);
    }

    #[test]
    fn oracle_spreading_ratio() {
        let medium = MediumParams::default();
        let x = ricker_signal(500.0, 0.004, 1200);
        let near = greens_response(5.0, &x, &medium).unwrap().peak().unwrap().1.abs();
        let far = greens_response(10.0, &x, &medium).unwrap().peak().unwrap().1.abs();
        let ratio = far / near;
        assert!((ratio - 1.0 / 2f64.sqrt()).abs() < 0.05 / 2f64.sqrt(), "ratio {ratio}");
    }

    #[test]
    fn oracle_rejects_unresolved_distance() {
        let x = ricker_signal(500.0, 0.004, 100);
        // 2 samples at 20 kHz travel 0.0343 m.
        assert!(matches!(
            greens_response(0.03, &x, &MediumParams::default()),
            Err(ValidationError::DistanceTooSmall { .. })
        ));
        assert!(greens_response(0.04, &x, &MediumParams::default()).is_ok());
    }

    #[test]
    fn nrmse_examples() {
        let r = ricker_signal(500.0, 0.004, 300);
        assert_eq!(nrmse(&r, &r).unwrap(), 0.0);
        let (lo, hi) = r.samples().iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let shifted = Signal::new(r.samples().iter().map(|v| v + 0.01 * (hi - lo)).collect(), FS).unwrap();
        assert!((nrmse(&r, &shifted).unwrap() - 1.0).abs() < 1e-9);
        let flat = Signal::new(vec![2.0; 300], FS).unwrap();
        assert!(matches!(nrmse(&flat, &r), Err(ValidationError::ConstantReference)));
        assert!(nrmse(&r, &r.resized(299)).is_err());
    }

    #[test]
    fn arrival_examples() {
        let fs = 42_857.0;
        let a = Signal::impulse(100, 20, fs).unwrap();
        let b = Signal::impulse(100, 30, fs).unwrap();
        assert_eq!(peak_arrival_diff(&a, &a).unwrap(), 0.0);
        let d = peak_arrival_diff(&a, &b).unwrap();
        assert!((d - 0.233).abs() < 1e-3, "{d}");
        assert_eq!(d, peak_arrival_diff(&b, &a).unwrap());
    }

    proptest! {
        #[test]
        fn metric_symmetry(v in proptest::collection::vec(-1.0f64..1.0, 2..60), k in 0usize..40) {
            let a = Signal::new(v.clone(), FS).unwrap();
            prop_assume!(a.peak().is_some_and(|p| p.1 != 0.0));
            let mut w = v;
            let shift = k % w.len();
            w.rotate_left(shift);
            let b = Signal::new(w, FS).unwrap();
            prop_assume!(b.peak().is_some_and(|p| p.1 != 0.0));
            prop_assert_eq!(peak_arrival_diff(&a, &b).unwrap(), peak_arrival_diff(&b, &a).unwrap());
            if let Ok(e) = nrmse(&a, &a) {
                prop_assert_eq!(e, 0.0);
            }
        }

        #[test]
        fn oracle_causal_for_any_input(v in proptest::collection::vec(-1.0f64..1.0, 10..80), r in 0.05f64..0.5) {
            let x = Signal::new(v, FS).unwrap();
            let y = greens_response(r, &x, &MediumParams::default()).unwrap();
            let onset = r / 343.0;
            for (n, s) in y.samples().iter().enumerate() {
                if (n as f64) / FS < onset {
                    prop_assert_eq!(*s, 0.0);
                }
            }
        }
    }

    #[test]
    fn medians_and_fit() {
        let rec = |area, w| BenchmarkRecord { domain_area: area, f_max: 100.0, wall_minutes: w, cells: 1, steps: 1 };
        let m = median_records(&[rec(1.0, 3.0), rec(1.0, 1.0), rec(2.0, 5.0), rec(1.0, 2.0), rec(2.0, 7.0)]);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].wall_minutes, 2.0);
        assert_eq!(m[1].wall_minutes, 6.0);
        let (a, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_plan_clamps_area() {
        let plan = benchmark_plan(0.0, 343.0, &BenchmarkSetup::default()).unwrap();
        // 1 m² at 0.1 m spacing.
        assert_eq!((plan.grid.nx, plan.grid.ny), (10, 10));
        assert!(2 * plan.damping.n_pml < 10);
    }
}
