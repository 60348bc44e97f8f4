//! Impulse response extraction and true-stereo assembly.
//!
//! Each listener cluster yields four mono impulse responses. They are stored
//! as one four-channel file whose channel order follows the true-stereo
//! convention `[L→L, L→R, R→R, R→L]`, fed by the front-left, rear-right,
//! front-right and rear-left microphones respectively.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::MicLabel;
use crate::signals::{self, Signal, SignalError, SweepSpec};

#[derive(Debug, Error)]
pub enum IrError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("channel mismatch: {0}")]
    Mismatch(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

/// Source-to-channel routing of one true-stereo channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelRole {
    #[serde(rename = "L->L")]
    LeftToLeft,
    #[serde(rename = "L->R")]
    LeftToRight,
    #[serde(rename = "R->R")]
    RightToRight,
    #[serde(rename = "R->L")]
    RightToLeft,
}

impl ChannelRole {
    /// File channel order.
    pub const ORDER: [ChannelRole; 4] =
        [ChannelRole::LeftToLeft, ChannelRole::LeftToRight, ChannelRole::RightToRight, ChannelRole::RightToLeft];

    /// Microphone feeding this channel.
    pub fn mic(&self) -> MicLabel {
        match self {
            ChannelRole::LeftToLeft => MicLabel::FrontLeft,
            ChannelRole::LeftToRight => MicLabel::RearRight,
            ChannelRole::RightToRight => MicLabel::FrontRight,
            ChannelRole::RightToLeft => MicLabel::RearLeft,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelRole::LeftToLeft => "L->L",
            ChannelRole::LeftToRight => "L->R",
            ChannelRole::RightToRight => "R->R",
            ChannelRole::RightToLeft => "R->L",
        }
    }
}

/// Peak level of assembled impulse responses.
pub const FULL_SCALE_PEAK: f64 = 0.9;

/// Four-channel impulse response in [`ChannelRole::ORDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadIR {
    pub listener_id: String,
    channels: [Signal; 4],
}

impl QuadIR {
    pub fn channels(&self) -> &[Signal; 4] {
        &self.channels
    }

    pub fn channel_roles(&self) -> [ChannelRole; 4] {
        ChannelRole::ORDER
    }

    pub fn channel(&self, role: ChannelRole) -> &Signal {
        let k = ChannelRole::ORDER.iter().position(|&r| r == role).expect("known role");
        &self.channels[k]
    }

    pub fn fs(&self) -> f64 {
        self.channels[0].fs()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deconvolves a recorded trace with the Farina inverse filter of `sweep`.
///
/// The linear convolution is cropped at its causal origin (index
/// `|sweep| − 1`) and truncated to `ir_len` samples (or to what remains).
pub fn extract_ir(trace: &Signal, sweep: &Signal, spec: &SweepSpec, ir_len: Option<usize>) -> Result<Signal, IrError> {
    if trace.fs() != sweep.fs() {
        return Err(SignalError::RateMismatch(trace.fs(), sweep.fs()).into());
    }
    let inverse = signals::inverse_filter(sweep, spec)?;
    let full = signals::convolve(trace, &inverse)?;
    let origin = sweep.len() - 1;
    let available = full.len().saturating_sub(origin);
    let len = ir_len.map_or(available, |l| l.min(available));
    Ok(full.window(origin, len))
}

/// Orders labelled microphone IRs into true-stereo channels and applies one
/// common gain so the loudest sample of any channel sits at
/// [`FULL_SCALE_PEAK`].
pub fn assemble_quad(listener_id: &str, irs: [(MicLabel, Signal); 4]) -> Result<QuadIR, IrError> {
    let find = |label: MicLabel| -> Result<&Signal, IrError> {
        let mut hits = irs.iter().filter(|(l, _)| *l == label);
        match (hits.next(), hits.next()) {
            (Some((_, s)), None) => Ok(s),
            _ => Err(IrError::Mismatch(format!("need exactly one {} response", label.short()))),
        }
    };
    let ordered: Vec<&Signal> = ChannelRole::ORDER.iter().map(|r| find(r.mic())).collect::<Result<_, _>>()?;
    let (fs, len) = (ordered[0].fs(), ordered[0].len());
    if ordered.iter().any(|s| s.fs() != fs || s.len() != len) {
        return Err(IrError::Mismatch("impulse responses differ in length or sample rate".into()));
    }
    let peak = ordered.iter().flat_map(|s| s.samples()).fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { FULL_SCALE_PEAK / peak } else { 1.0 };
    Ok(QuadIR { listener_id: listener_id.to_string(), channels: std::array::from_fn(|k| ordered[k].scaled(gain)) })
}

/// Writes a four-channel IEEE-float WAV at `fs_out`, resampling first when
/// the IR rate differs.
pub fn write_wav(ir: &QuadIR, fs_out: f64, path: impl AsRef<Path>) -> Result<(), IrError> {
    let rate = fs_out.round();
    let channels: Vec<Signal> = if (ir.fs() - rate).abs() < 1e-9 {
        ir.channels.to_vec()
    } else {
        ir.channels.iter().map(|c| signals::resample(c, rate)).collect::<Result<_, _>>()?
    };
    let spec = hound::WavSpec {
        channels: 4,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    let len = channels[0].len();
    for n in 0..len {
        for c in &channels {
            writer.write_sample(c.samples()[n] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads back a WAV written by [`write_wav`] as a [`QuadIR`].
pub fn read_wav(listener_id: &str, path: impl AsRef<Path>) -> Result<QuadIR, IrError> {
    let channels = read_wav_channels(path)?;
    let channels: [Signal; 4] = channels
        .try_into()
        .map_err(|v: Vec<Signal>| IrError::Mismatch(format!("expected 4 channels, found {}", v.len())))?;
    Ok(QuadIR { listener_id: listener_id.to_string(), channels })
}

/// De-interleaves any float or integer PCM WAV into per-channel signals.
pub fn read_wav_channels(path: impl AsRef<Path>) -> Result<Vec<Signal>, IrError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let full = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader.samples::<i32>().map(|s| s.map(|v| v as f64 / full)).collect::<Result<_, _>>()?
        }
    };
    let fs = spec.sample_rate as f64;
    (0..n_ch)
        .map(|c| Signal::new(interleaved.iter().skip(c).step_by(n_ch).copied().collect(), fs).map_err(IrError::from))
        .collect()
}

/// Per-channel weights for a listener whose signed bearing to the source is
/// `yaw_to_source` (positive toward the right ear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationGains {
    pub yaw: f64,
    /// Weight of the left input.
    pub left: f64,
    /// Weight of the right input.
    pub right: f64,
}

impl OrientationGains {
    /// Gains in [`ChannelRole::ORDER`].
    pub fn channel_gains(&self) -> [f64; 4] {
        [self.left, self.left, self.right, self.right]
    }
}

/// Equal-power split of a source between the left and right inputs of the
/// true-stereo reverb.
///
/// `yaw_to_source` is the signed bearing of the source relative to the
/// facing direction, positive toward the right ear. With the pan angle
/// `φ = θ + π/2` (0 = hard left, π/2 = straight ahead, π = hard right):
/// `wL = cos²(φ/2)`, `wR = sin²(φ/2)`.
pub fn orientation_gains(yaw_to_source: f64) -> OrientationGains {
    let theta = crate::scene::wrap_angle(yaw_to_source);
    let half_pan = (theta + PI / 2.0) / 2.0;
    OrientationGains { yaw: theta, left: half_pan.cos().powi(2), right: half_pan.sin().powi(2) }
}

/// Offline true-stereo convolution of a mono source.
#[derive(Debug, Clone, PartialEq)]
pub struct Auralization {
    pub left: Signal,
    pub right: Signal,
    /// Samples whose magnitude exceeds 1 across both outputs.
    pub clipped_samples: usize,
}

pub fn auralize(dry: &Signal, ir: &QuadIR, yaw_to_source: f64) -> Result<Auralization, IrError> {
    if dry.fs() != ir.fs() {
        return Err(SignalError::RateMismatch(dry.fs(), ir.fs()).into());
    }
    let g = orientation_gains(yaw_to_source);
    let wet = |role: ChannelRole| signals::convolve(dry, ir.channel(role));
    let mix = |a: Signal, wa: f64, b: Signal, wb: f64| -> Result<Signal, IrError> {
        let samples = a.samples().iter().zip(b.samples()).map(|(x, y)| wa * x + wb * y).collect();
        Ok(Signal::new(samples, a.fs())?)
    };
    let left = mix(wet(ChannelRole::LeftToLeft)?, g.left, wet(ChannelRole::RightToLeft)?, g.right)?;
    let right = mix(wet(ChannelRole::LeftToRight)?, g.left, wet(ChannelRole::RightToRight)?, g.right)?;
    let clipped_samples = left.samples().iter().chain(right.samples()).filter(|v| v.abs() > 1.0).count();
    Ok(Auralization { left, right, clipped_samples })
}

/// Index of the first sample whose magnitude reaches `fraction` of the peak.
pub fn onset_index(ir: &Signal, fraction: f64) -> Option<usize> {
    let (_, peak) = ir.peak()?;
    let threshold = fraction * peak.abs();
    if threshold == 0.0 {
        return None;
    }
    ir.samples().iter().position(|v| v.abs() >= threshold)
}

/// Default onset threshold relative to the channel peak.
pub const ONSET_FRACTION: f64 = 0.1;
