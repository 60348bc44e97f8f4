use std::fs;

use acoustic_fdtd::validation::{
    self, linear_fit, median_records, run_validation_case, BenchmarkRecord, BenchmarkSetup, ValidationReport,
    ValidationSetup,
};
use rayon::prelude::*;

use crate::artifacts::write_atomic;
use crate::error::{CliResult, Context, Failure, FailureContext, FailureKind};
use crate::{BenchArgs, ValidateArgs};

pub fn validation_setup(args: &ValidateArgs) -> ValidationSetup {
    ValidationSetup {
        separation: args.separation,
        bearing: args.bearing.to_radians(),
        points_per_wavelength: args.ppw,
        pml_cells: args.pml_cells,
        ..ValidationSetup::default()
    }
}

/// Reports that miss either bound.
pub fn failing(reports: &[ValidationReport], max_nrmse: f64, max_arrival_ms: f64) -> Vec<&ValidationReport> {
    reports.iter().filter(|r| !(r.nrmse <= max_nrmse && r.arrival_diff <= max_arrival_ms)).collect()
}

pub fn cmd_validate(args: &ValidateArgs) -> CliResult<()> {
    if args.freqs.is_empty() {
        return Err(Failure::config("no frequencies given"));
    }
    let setup = validation_setup(args);
    let runs = args
        .freqs
        .par_iter()
        .map(|&f| run_validation_case(f, &setup).context(format!("validation at {f} Hz")))
        .collect::<CliResult<Vec<_>>>()?;
    let reports: Vec<ValidationReport> = runs.iter().map(|r| r.report.clone()).collect();

    let mut csv = Vec::new();
    validation::write_validation_csv(&reports, &mut csv).kind(FailureKind::Io, "formatting CSV")?;
    write_atomic(&args.out, &csv)?;

    if let Some(dir) = &args.traces {
        fs::create_dir_all(dir).kind(FailureKind::Io, format!("creating {}", dir.display()))?;
        for run in &runs {
            let r = &run.report;
            for (name, trace) in [("fdtd", &run.fdtd), ("oracle", &run.oracle)] {
                let mut buf = Vec::new();
                validation::write_trace_csv(trace, r.dt, &mut buf).kind(FailureKind::Io, "formatting CSV")?;
                write_atomic(&dir.join(format!("{name}_{}hz.csv", r.f_center)), &buf)?;
            }
        }
    }

    println!("{:>8}  {:>9}  {:>12}  grid", "f0 [Hz]", "NRMSE [%]", "arrival [ms]");
    for r in &reports {
        println!("{:>8}  {:>9.3}  {:>12.3}  {:>4}x{}", r.f_center, r.nrmse, r.arrival_diff, r.nx, r.ny);
    }
    let bad = failing(&reports, args.max_nrmse, args.max_arrival);
    if bad.is_empty() {
        return Ok(());
    }
    let list: Vec<String> =
        bad.iter().map(|r| format!("{} Hz ({:.2}%, {:.3} ms)", r.f_center, r.nrmse, r.arrival_diff)).collect();
    Err(Failure::new(
        FailureKind::Bound,
        anyhow::anyhow!(
            "outside bounds (NRMSE <= {}%, arrival <= {} ms): {}",
            args.max_nrmse,
            args.max_arrival,
            list.join(", ")
        ),
    ))
}

/// Wall-time fit against area for each f_max that has at least two areas.
pub fn area_fits(medians: &[BenchmarkRecord]) -> Vec<(f64, f64, f64, f64)> {
    let mut f_maxes: Vec<f64> = medians.iter().map(|r| r.f_max).collect();
    f_maxes.sort_by(f64::total_cmp);
    f_maxes.dedup();
    f_maxes
        .into_iter()
        .filter_map(|f| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                medians.iter().filter(|r| r.f_max == f).map(|r| (r.domain_area, r.wall_minutes)).unzip();
            (x.len() >= 2).then(|| {
                let (a, b, r2) = linear_fit(&x, &y);
                (f, a, b, r2)
            })
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs, threads: usize) -> CliResult<()> {
    if args.areas.is_empty() || args.f_max.is_empty() || args.repetitions == 0 {
        return Err(Failure::config("need at least one area, one f_max and one repetition"));
    }
    if args.areas.iter().chain(&args.f_max).any(|v| !(v.is_finite() && *v > 0.0)) || !(args.t_sim > 0.0) {
        return Err(Failure::config("areas, f_max and t-sim must be positive"));
    }
    let setup = BenchmarkSetup { t_sim: args.t_sim, threads, ..BenchmarkSetup::default() };
    let records =
        validation::run_benchmarks(&args.areas, &args.f_max, args.repetitions, &setup).context("benchmark run")?;
    let mut csv = Vec::new();
    validation::write_benchmark_csv(&records, &mut csv).kind(FailureKind::Io, "formatting CSV")?;
    write_atomic(&args.out, &csv)?;

    let medians = median_records(&records);
    println!("{:>10}  {:>10}  {:>12}  {:>10}  {:>7}", "area [m2]", "f_max [Hz]", "median [min]", "cells", "steps");
    for r in &medians {
        println!("{:>10}  {:>10}  {:>12.5}  {:>10}  {:>7}", r.domain_area, r.f_max, r.wall_minutes, r.cells, r.steps);
    }
    for (f, a, b, r2) in area_fits(&medians) {
        println!("f_max {f} Hz: minutes = {a:.3e} + {b:.3e} * area, R^2 = {r2:.4}");
    }
    Ok(())
}
