//! ITU-R BS.1770-4 integrated loudness (mono) and gain-only normalization.
//!
//! K-weighting biquads are redesigned parametrically for the buffer's
//! sample rate from the analog prototype, so rates other than 48 kHz
//! (e.g. 44.1 kHz) are measured correctly.

use crate::audio::AudioBuffer;
use crate::error::{CodecError, Result};

/// Second-order section with `a0` normalized to 1.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(x.len());
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for &xn in x {
            let yn = self.b0 * xn + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = xn;
            y2 = y1;
            y1 = yn;
            y.push(yn);
        }
        y
    }

    /// Transfer-function magnitude at `freq` Hz for sample rate `fs`.
    pub fn magnitude_at(&self, freq: f64, fs: f64) -> f64 {
        use rustfft::num_complex::Complex64;
        let w = 2.0 * std::f64::consts::PI * freq / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = Complex64::new(self.b0, 0.0) + self.b1 * z1 + self.b2 * z2;
        let den = Complex64::new(1.0, 0.0) + self.a1 * z1 + self.a2 * z2;
        (num / den).norm()
    }
}

/// K-weighting as (stage 1 high shelf, stage 2 high pass) for rate `fs`.
pub fn k_weighting_coefficients(fs: f64) -> (Biquad, Biquad) {
    // Stage 1: spherical-head high shelf.
    let (fc, gain_db, q) = (1681.974450955533, 3.99984385397, 0.7071752369554196);
    let k = (std::f64::consts::PI * fc / fs).tan();
    let vh = 10f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let a0 = 1.0 + k / q + k * k;
    let shelf = Biquad {
        b0: (vh + vb * k / q + k * k) / a0,
        b1: 2.0 * (k * k - vh) / a0,
        b2: (vh - vb * k / q + k * k) / a0,
        a1: 2.0 * (k * k - 1.0) / a0,
        a2: (1.0 - k / q + k * k) / a0,
    };
    // Stage 2: RLB high pass.
    let (fc, q) = (38.13547087602444, 0.5003270373238773);
    let k = (std::f64::consts::PI * fc / fs).tan();
    let a0 = 1.0 + k / q + k * k;
    let highpass = Biquad {
        b0: 1.0,
        b1: -2.0,
        b2: 1.0,
        a1: 2.0 * (k * k - 1.0) / a0,
        a2: (1.0 - k / q + k * k) / a0,
    };
    (shelf, highpass)
}

/// Integrated loudness in LUFS, or `None` when unmeasurable (silence or
/// everything gated out).
///
/// Signals shorter than the 400 ms gating block are measured as a single
/// block covering the whole signal.
pub fn integrated_loudness(x: &AudioBuffer) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let fs = x.sample_rate() as f64;
    let (shelf, highpass) = k_weighting_coefficients(fs);
    let mono: Vec<f64> = x.samples().iter().map(|&s| s as f64).collect();
    let z = highpass.filter(&shelf.filter(&mono));

    let block = (0.4 * fs).round() as usize;
    let step = (0.1 * fs).round() as usize;
    let mut powers = Vec::new();
    if z.len() < block {
        let p = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        powers.push(p);
    } else {
        let mut start = 0;
        while start + block <= z.len() {
            let p = z[start..start + block].iter().map(|v| v * v).sum::<f64>() / block as f64;
            powers.push(p);
            start += step;
        }
    }

    let block_lufs = |p: f64| -0.691 + 10.0 * p.log10();
    // Absolute gate at -70 LUFS.
    let abs_gated: Vec<f64> = powers
        .iter()
        .copied()
        .filter(|&p| p > 0.0 && block_lufs(p) > -70.0)
        .collect();
    if abs_gated.is_empty() {
        return None;
    }
    // Relative gate 10 LU below the absolute-gated mean.
    let mean_abs = abs_gated.iter().sum::<f64>() / abs_gated.len() as f64;
    let rel_threshold = block_lufs(mean_abs) - 10.0;
    let rel_gated: Vec<f64> = abs_gated
        .into_iter()
        .filter(|&p| block_lufs(p) > rel_threshold)
        .collect();
    if rel_gated.is_empty() {
        return None;
    }
    let mean = rel_gated.iter().sum::<f64>() / rel_gated.len() as f64;
    Some(block_lufs(mean))
}

/// Result of [`loudness_normalize`]: gain-only scaling plus a silence flag.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub audio: AudioBuffer,
    pub gain: f32,
    pub silent: bool,
}

/// Scale `x` so its integrated loudness hits `target_lufs`. Silent input is
/// returned unchanged with `silent = true`.
pub fn loudness_normalize(x: &AudioBuffer, target_lufs: f64) -> Result<Normalized> {
    if x.is_empty() {
        return Err(CodecError::EmptySignal);
    }
    match integrated_loudness(x) {
        None => Ok(Normalized {
            audio: x.clone(),
            gain: 1.0,
            silent: true,
        }),
        Some(measured) => {
            let gain = 10f64.powf((target_lufs - measured) / 20.0) as f32;
            Ok(Normalized {
                audio: x.scaled(gain),
                gain,
                silent: false,
            })
        }
    }
}
