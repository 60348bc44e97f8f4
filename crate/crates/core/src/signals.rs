//! Sampled 1D signals: exponential sine sweeps, Ricker wavelets, the Farina
//! inverse filter, linear convolution and band-limited resampling.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid Ricker wavelet: {0}")]
    InvalidRicker(String),
    #[error("sample rate {fs} Hz does not exceed twice the sweep end frequency {f1} Hz")]
    Nyquist { fs: f64, f1: f64 },
    #[error("sweep has {actual} samples but its spec implies {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("wav i/o: {0}")]
    Wav(#[from] hound::Error),
}

/// A finite, uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self, SignalError> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(SignalError::InvalidSampleRate(fs));
        }
        if let Some(idx) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(idx));
        }
        Ok(Self { samples, fs })
    }

    pub fn zeros(len: usize, fs: f64) -> Result<Self, SignalError> {
        Self::new(vec![0.0; len], fs)
    }

    /// Unit impulse at sample `at` in a buffer of `len` samples.
    pub fn impulse(len: usize, at: usize, fs: f64) -> Result<Self, SignalError> {
        let mut samples = vec![0.0; len];
        if at < len {
            samples[at] = 1.0;
        }
        Self::new(samples, fs)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds, `len / fs`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn scaled(&self, gain: f64) -> Signal {
        Signal { samples: self.samples.iter().map(|v| v * gain).collect(), fs: self.fs }
    }

    /// Index and value of the sample with the largest magnitude.
    pub fn peak(&self) -> Option<(usize, f64)> {
        self.samples.iter().copied().enumerate().fold(None, |best, (i, v)| match best {
            Some((_, b)) if v.abs() <= f64::abs(b) => best,
            _ => Some((i, v)),
        })
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn resized(&self, len: usize) -> Signal {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Signal { samples, fs: self.fs }
    }

    /// Samples `[start, start+len)`, zero-padded past the end.
    pub fn window(&self, start: usize, len: usize) -> Signal {
        let samples = (start..start + len).map(|i| self.samples.get(i).copied().unwrap_or(0.0)).collect();
        Signal { samples, fs: self.fs }
    }

    /// Dumps the signal as a mono 32-bit float WAV.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<(), SignalError> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.fs.round() as u32,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &v in &self.samples {
            writer.write_sample(v as f32)?;
        }
        writer.finalize()?;
        Ok(())
    }
}

fn default_fade() -> f64 {
    0.01
}

/// Exponential sine sweep parameters. The exponential rate is derived, not
/// stored, so it can never disagree with the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Start frequency (Hz).
    pub f0: f64,
    /// End frequency (Hz).
    pub f1: f64,
    /// Sweep duration (s).
    pub duration: f64,
    /// Raised-cosine fade length applied at both ends (s).
    #[serde(default = "default_fade")]
    pub fade: f64,
}

impl SweepSpec {
    pub fn new(f0: f64, f1: f64, duration: f64) -> Result<Self, SignalError> {
        let spec = Self { f0, f1, duration, fade: default_fade() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_fade(mut self, fade: f64) -> Result<Self, SignalError> {
        self.fade = fade;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.f0.is_finite() && self.f1.is_finite() && self.f0 > 0.0 && self.f0 < self.f1) {
            return Err(SignalError::InvalidSweep(format!("need 0 < f0 < f1, got f0={} f1={}", self.f0, self.f1)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SignalError::InvalidSweep(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.fade.is_finite() && self.fade >= 0.0) {
            return Err(SignalError::InvalidSweep(format!("fade must be non-negative, got {}", self.fade)));
        }
        Ok(())
    }

    /// ln(f1/f0) / T, in 1/s.
    pub fn alpha(&self) -> f64 {
        (self.f1 / self.f0).ln() / self.duration
    }

    /// Sweep phase in radians at time `t`.
    pub fn phase(&self, t: f64) -> f64 {
        let alpha = self.alpha();
        2.0 * PI * self.f0 / alpha * ((alpha * t).exp() - 1.0)
    }

    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f0 * (self.alpha() * t).exp()
    }

    /// Number of samples the sweep occupies at rate `fs`.
    pub fn len_at(&self, fs: f64) -> usize {
        (self.duration * fs).round() as usize
    }
}

/// Samples `sin(2π f0/α (e^{αt} − 1))` on `[0, T)` with raised-cosine fades.
pub fn generate_ess(spec: &SweepSpec, fs: f64) -> Result<Signal, SignalError> {
    spec.validate()?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SignalError::InvalidSampleRate(fs));
    }
    if fs <= 2.0 * spec.f1 {
        return Err(SignalError::Nyquist { fs, f1: spec.f1 });
    }
    let n = spec.len_at(fs);
    let fade = ((spec.fade * fs).round() as usize).min(n / 2);
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            let s = spec.phase(t).sin();
            let edge = k.min(n - 1 - k);
            if edge < fade {
                s * 0.5 * (1.0 - (PI * edge as f64 / fade as f64).cos())
            } else {
                s
            }
        })
        .collect();
    Signal::new(samples, fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RickerSpec {
    pub f_center: f64,
    /// Time of the wavelet peak (s).
    pub delay: f64,
}

impl RickerSpec {
    pub fn new(f_center: f64, delay: f64) -> Result<Self, SignalError> {
        if !(f_center.is_finite() && f_center > 0.0) {
            return Err(SignalError::InvalidRicker(format!("center frequency must be positive, got {f_center}")));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(SignalError::InvalidRicker(format!("delay must be non-negative, got {delay}")));
        }
        Ok(Self { f_center, delay })
    }

    pub fn value(&self, t: f64) -> f64 {
        let a = (PI * self.f_center * (t - self.delay)).powi(2);
        (1.0 - 2.0 * a) * (-a).exp()
    }

    /// Antiderivative of [`value`](Self::value) that vanishes at `t = 0`.
    pub fn integral(&self, t: f64) -> f64 {
        let k = (PI * self.f_center).powi(2);
        let prim = |tau: f64| tau * (-k * tau * tau).exp();
        prim(t - self.delay) - prim(-self.delay)
    }
}

pub fn generate_ricker(spec: &RickerSpec, fs: f64, duration: f64) -> Result<Signal, SignalError> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SignalError::InvalidSampleRate(fs));
    }
    let n = (duration * fs).round().max(0.0) as usize;
    Signal::new((0..n).map(|k| spec.value(k as f64 / fs)).collect(), fs)
}

/// Farina inverse filter for an exponential sweep: the time-reversed sweep
/// with an `e^{−αt}` envelope, scaled so that `convolve(sweep, inverse)`
/// equals exactly 1 at its causal origin (index `len − 1`).
pub fn inverse_filter(sweep: &Signal, spec: &SweepSpec) -> Result<Signal, SignalError> {
    spec.validate()?;
    let n = sweep.len();
    let expected = spec.len_at(sweep.fs());
    if n != expected || n == 0 {
        return Err(SignalError::LengthMismatch { expected, actual: n });
    }
    let alpha = spec.alpha();
    let fs = sweep.fs();
    let s = sweep.samples();
    let envelope = |k: usize| (-alpha * k as f64 / fs).exp();
    let mut inverse: Vec<f64> = (0..n).map(|k| s[n - 1 - k] * envelope(k)).collect();
    let origin: f64 = (0..n).map(|k| s[k] * inverse[n - 1 - k]).sum();
    if origin.abs() < f64::MIN_POSITIVE {
        return Err(SignalError::InvalidSweep("sweep has no energy".into()));
    }
    inverse.iter_mut().for_each(|v| *v /= origin);
    Signal::new(inverse, fs)
}

const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 16;

/// Full linear convolution, `|a| + |b| − 1` samples.
pub fn convolve(a: &Signal, b: &Signal) -> Result<Signal, SignalError> {
    if a.fs() != b.fs() {
        return Err(SignalError::RateMismatch(a.fs(), b.fs()));
    }
    if a.is_empty() || b.is_empty() {
        return Signal::new(Vec::new(), a.fs());
    }
    let out = if a.len().min(b.len()) <= 64 || a.len() * b.len() <= DIRECT_CONVOLUTION_LIMIT {
        convolve_direct(a.samples(), b.samples())
    } else {
        convolve_fft(a.samples(), b.samples())
    };
    Signal::new(out, a.fs())
}

pub(crate) fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    // Both real inputs share one complex transform: a in re, b in im.
    let mut buf: Vec<Complex<f64>> =
        (0..size).map(|k| Complex::new(a.get(k).copied().unwrap_or(0.0), b.get(k).copied().unwrap_or(0.0))).collect();
    forward.process(&mut buf);
    let mut product = vec![Complex::new(0.0, 0.0); size];
    for k in 0..size {
        let z = buf[k];
        let zc = buf[(size - k) % size].conj();
        let fa = (z + zc) * 0.5;
        let fb = (z - zc) * Complex::new(0.0, -0.5);
        product[k] = fa * fb;
    }
    inverse.process(&mut product);
    let scale = 1.0 / size as f64;
    product[..len].iter().map(|c| c.re * scale).collect()
}

/// Kaiser-windowed sinc half-width, in zero crossings of the lower rate.
const RESAMPLE_HALF_WIDTH: usize = 48;
const RESAMPLE_BETA: f64 = 10.0;
/// Cutoff relative to the lower of the two Nyquist frequencies.
const RESAMPLE_CUTOFF: f64 = 0.94;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Band-limited resampling by direct windowed-sinc interpolation at the
/// exact output instants `m / fs_out`.
///
/// The caller guarantees both rates exceed twice the highest frequency
/// present; content above ~0.44 of the lower rate is attenuated. Output
/// length is `round(len · fs_out / fs)`. Equal rates return the input
/// unchanged.
pub fn resample(x: &Signal, fs_out: f64) -> Result<Signal, SignalError> {
    if !(fs_out.is_finite() && fs_out > 0.0) {
        return Err(SignalError::InvalidSampleRate(fs_out));
    }
    if fs_out == x.fs() {
        return Ok(x.clone());
    }
    let fs_in = x.fs();
    let out_len = (x.len() as f64 * fs_out / fs_in).round() as usize;
    let cutoff = 0.5 * RESAMPLE_CUTOFF * fs_in.min(fs_out);
    // Kernel in units of input samples.
    let norm_cut = cutoff / fs_in;
    let half = RESAMPLE_HALF_WIDTH as f64 * fs_in / fs_in.min(fs_out);
    let i0_beta = bessel_i0(RESAMPLE_BETA);
    let kernel = |d: f64| -> f64 {
        let r = d / half;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(RESAMPLE_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        let arg = 2.0 * norm_cut * d;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
        2.0 * norm_cut * sinc * window
    };
    let input = x.samples();
    let reach = half.ceil() as isize;
    let samples = (0..out_len)
        .map(|m| {
            let pos = m as f64 * fs_in / fs_out;
            let center = pos.floor() as isize;
            let lo = (center - reach).max(0);
            let hi = (center + reach + 1).min(input.len() as isize - 1);
            (lo..=hi).map(|k| input[k as usize] * kernel(pos - k as f64)).sum::<f64>()
        })
        .collect();
    Signal::new(samples, fs_out)
}
