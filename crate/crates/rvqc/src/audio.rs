//! Mono PCM buffers and WAV file I/O.
//!
//! [`AudioBuffer`] is the signal currency of the whole crate: finite mono
//! samples in nominal [-1, 1] plus a sample rate. Loading downmixes
//! multichannel WAVs and resamples to a requested rate.

use std::io::{Read, Seek};
use std::path::Path;

use crate::error::{CodecError, Result};

/// Mono audio signal with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Build a buffer, validating the invariants: positive rate, finite samples.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(CodecError::InvalidConfig("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(CodecError::NonFiniteSignal);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scale every sample by `gain`.
    pub fn scaled(&self, gain: f32) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Right-pad with zeros so the length is a multiple of `m`.
    pub fn padded_to_multiple(&self, m: usize) -> Self {
        let len = self.samples.len().div_ceil(m) * m;
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Average channels into mono.
fn downmix(interleaved: &[f32], channels: usize) -> Vec<f32> {
    if channels <= 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect()
}

/// Kaiser-windowed sinc resampler. Deterministic, offline, mono.
pub fn resample(input: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(CodecError::InvalidConfig("target rate must be > 0".into()));
    }
    if target_rate == input.sample_rate || input.is_empty() {
        return Ok(AudioBuffer {
            samples: input.samples.clone(),
            sample_rate: target_rate,
        });
    }
    let ratio = target_rate as f64 / input.sample_rate as f64;
    // Anti-alias cutoff in cycles per *source* sample.
    let fc = 0.5 * ratio.min(1.0) * 0.95;
    let half = (16.0 / (2.0 * fc)).ceil() as isize;
    let beta = 10.0;
    let i0_beta = bessel_i0(beta);
    let n_out = (input.len() as f64 * ratio).ceil() as usize;
    let x = &input.samples;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let center = i as f64 / ratio;
        let j0 = (center - half as f64).ceil() as isize;
        let j1 = (center + half as f64).floor() as isize;
        let mut acc = 0.0f64;
        let mut norm = 0.0f64;
        for j in j0..=j1 {
            let u = j as f64 - center;
            let w = kaiser(u / half as f64, beta, i0_beta);
            let k = 2.0 * fc * sinc(2.0 * fc * u) * w;
            norm += k;
            if j >= 0 && (j as usize) < x.len() {
                acc += x[j as usize] as f64 * k;
            }
        }
        out.push(if norm.abs() > 1e-12 {
            (acc / norm) as f32
        } else {
            0.0
        });
    }
    Ok(AudioBuffer {
        samples: out,
        sample_rate: target_rate,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn kaiser(t: f64, beta: f64, i0_beta: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - t * t).sqrt()) / i0_beta
}

fn bessel_i0(x: f64) -> f64 {
    // Power-series evaluation; converges fast for the betas used here.
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..32 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// Load a WAV file, downmix to mono, optionally resample.
pub fn load_wav(path: impl AsRef<Path>, target_rate: Option<u32>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CodecError::from(e).for_file(path))?;
    load_wav_from_reader(std::io::BufReader::new(file), target_rate)
        .map_err(|e| e.for_file(path))
}

/// Load WAV data from any reader. Accepts 16/24/32-bit integer PCM and
/// 32-bit float; anything else is rejected.
pub fn load_wav_from_reader<R: Read + Seek>(
    reader: R,
    target_rate: Option<u32>,
) -> Result<AudioBuffer> {
    let mut wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.channels == 0 {
        return Err(CodecError::UnsupportedWav("zero channels".into()));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => wav.samples::<f32>().collect::<std::result::Result<
            Vec<_>,
            _,
        >>()?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f32;
            wav.samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<Vec<_>, _>>()?
        }
        (fmt, bits) => {
            return Err(CodecError::UnsupportedWav(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(CodecError::NonFiniteSignal);
    }
    let mono = downmix(&interleaved, spec.channels as usize);
    let buffer = AudioBuffer::new(mono, spec.sample_rate)?;
    match target_rate {
        Some(rate) if rate != spec.sample_rate => resample(&buffer, rate),
        _ => Ok(buffer),
    }
}

/// Write a buffer as 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn save_wav_i16(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in audio.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Write a buffer as 32-bit float WAV (lossless for our internal format).
pub fn save_wav_f32(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in audio.samples() {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}
