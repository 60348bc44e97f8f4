use acoustic_fdtd::ir::{self, read_wav};
use acoustic_fdtd::signals::{resample, Signal};

use crate::error::{CliResult, Context, Failure, FailureKind};
use crate::AuralizeArgs;

pub fn cmd_auralize(args: &AuralizeArgs) -> CliResult<()> {
    let quad = read_wav("ir", &args.ir).kind(FailureKind::Io, format!("reading {}", args.ir.display()))?;
    let channels = ir::read_wav_channels(&args.dry).kind(FailureKind::Io, format!("reading {}", args.dry.display()))?;
    if channels.is_empty() || channels[0].is_empty() {
        return Err(Failure::io(format!("{} has no samples", args.dry.display())));
    }
    let scale = 1.0 / channels.len() as f64;
    let mono: Vec<f64> =
        (0..channels[0].len()).map(|n| channels.iter().map(|c| c.samples()[n]).sum::<f64>() * scale).collect();
    let mut dry = Signal::new(mono, channels[0].fs()).kind(FailureKind::Io, "dry input")?;
    if dry.fs() != quad.fs() {
        log::info!("resampling dry input from {} Hz to {} Hz", dry.fs(), quad.fs());
        dry = resample(&dry, quad.fs()).kind(FailureKind::Config, "resampling dry input")?;
    }
    let out = ir::auralize(&dry, &quad, args.yaw.to_radians()).kind(FailureKind::Config, "auralizing")?;
    if out.clipped_samples > 0 {
        log::warn!("{} output samples exceed full scale", out.clipped_samples);
    }

    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: quad.fs().round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let what = || format!("writing {}", args.out.display());
    let mut w = hound::WavWriter::create(&args.out, spec).kind(FailureKind::Io, what())?;
    for (l, r) in out.left.samples().iter().zip(out.right.samples()) {
        w.write_sample(*l as f32).kind(FailureKind::Io, what())?;
        w.write_sample(*r as f32).kind(FailureKind::Io, what())?;
    }
    w.finalize().kind(FailureKind::Io, what())?;
    Ok(())
}
