//! Deterministic signal-processing primitives: STFT, mel filterbanks,
//! log-mel spectrograms, loudness normalization, phase augmentation.
//!
//! Everything here is pure f64 DSP. The differentiable training losses
//! reuse the exact framing/padding arithmetic through [`PadPlan`] and
//! [`reflect_pad_indices`] so that both paths see identical spectra.

mod loudness;

pub use loudness::{integrated_loudness, k_weighting_coefficients, loudness_normalize, Normalized};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::error::{CodecError, Result};

/// Floor applied before log10 so silence maps to log10(1e-5) = -5.
pub const LOG_FLOOR: f64 = 1e-5;

/// One spectral analysis configuration: window, hop, optional mel projection.
///
/// `n_mels == 0` means linear magnitude (no mel projection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SpectralScale {
    pub window_length: usize,
    pub hop_length: usize,
    pub n_mels: usize,
}

impl SpectralScale {
    /// Paper-default scale: hop = window / 4.
    pub fn quarter_hop(window_length: usize, n_mels: usize) -> Self {
        Self {
            window_length,
            hop_length: window_length / 4,
            n_mels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 || !self.window_length.is_power_of_two() {
            return Err(CodecError::InvalidConfig(format!(
                "window_length {} must be a power of two >= 2",
                self.window_length
            )));
        }
        if self.hop_length == 0 {
            return Err(CodecError::InvalidConfig("hop_length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dense row-major f64 matrix used for spectrogram-shaped results.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Complex spectrogram, `bins x frames`, stored frame-major.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub bins: usize,
    pub frames: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn magnitudes(&self) -> Matrix {
        let mut m = Matrix::zeros(self.bins, self.frames);
        for f in 0..self.frames {
            for b in 0..self.bins {
                m.set(b, f, self.at(b, f).norm());
            }
        }
        m
    }
}

/// Periodic Hann window.
pub fn hann_window(length: usize) -> Vec<f64> {
    (0..length)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / length as f64).cos())
        .collect()
}

/// Centered framing plan: `frames = ceil(len / hop)`, reflect padding of
/// `window/2` on the left and just enough on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadPlan {
    pub pad_left: usize,
    pub pad_right: usize,
    pub frames: usize,
}

pub fn pad_plan(len: usize, window: usize, hop: usize) -> PadPlan {
    let frames = len.div_ceil(hop);
    let pad_left = window / 2;
    let needed = (frames - 1) * hop + window;
    let pad_right = needed.saturating_sub(pad_left + len);
    PadPlan {
        pad_left,
        pad_right,
        frames,
    }
}

/// Index of the reflected sample for position `i` in `[-pad, len + pad)`.
/// Mirrors without repeating the edge sample (period `2 (len - 1)`).
pub fn reflect_index(i: isize, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Source indices for a reflect-padded view of a signal of length `len`.
pub fn reflect_pad_indices(len: usize, pad_left: usize, pad_right: usize) -> Vec<usize> {
    (0..pad_left + len + pad_right)
        .map(|p| reflect_index(p as isize - pad_left as isize, len))
        .collect()
}

/// Short-time Fourier transform with Hann window and center-reflect padding.
///
/// Output is `window/2 + 1` bins by `ceil(len / hop)` frames.
pub fn stft(x: &AudioBuffer, window_length: usize, hop_length: usize) -> Result<ComplexSpectrogram> {
    if x.is_empty() {
        return Err(CodecError::EmptySignal);
    }
    if window_length < 2 {
        return Err(CodecError::InvalidConfig(
            "window_length must be >= 2".into(),
        ));
    }
    if hop_length == 0 {
        return Err(CodecError::InvalidConfig("hop_length must be >= 1".into()));
    }
    if x.samples().iter().any(|s| !s.is_finite()) {
        return Err(CodecError::NonFiniteSignal);
    }
    let plan = pad_plan(x.len(), window_length, hop_length);
    let idx = reflect_pad_indices(x.len(), plan.pad_left, plan.pad_right);
    let padded: Vec<f64> = idx.iter().map(|&j| x.samples()[j] as f64).collect();
    let window = hann_window(window_length);
    let bins = window_length / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(window_length);
    let mut buf = vec![Complex64::default(); window_length];
    let mut data = Vec::with_capacity(bins * plan.frames);
    for t in 0..plan.frames {
        let start = t * hop_length;
        for n in 0..window_length {
            buf[n] = Complex64::new(padded[start + n] * window[n], 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(ComplexSpectrogram {
        bins,
        frames: plan.frames,
        data,
    })
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels x (window/2 + 1)`, spanning 0 Hz to
/// Nyquist. Every row is guaranteed nonempty or construction fails.
pub fn mel_filterbank(sample_rate: u32, window_length: usize, n_mels: usize) -> Result<Matrix> {
    if n_mels == 0 {
        return Err(CodecError::InvalidConfig("n_mels must be >= 1".into()));
    }
    let bins = window_length / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    // n_mels + 2 boundary points, uniformly spaced on the mel scale.
    let freqs: Vec<f64> = (0..n_mels + 2)
        .map(|j| mel_to_hz(mel_max * j as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / window_length as f64;
    let mut fb = Matrix::zeros(n_mels, bins);
    for m in 0..n_mels {
        let (lo, center, hi) = (freqs[m], freqs[m + 1], freqs[m + 2]);
        let mut nonzero = false;
        for k in 0..bins {
            let f = k as f64 * bin_hz;
            let w = if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            if w > 0.0 {
                fb.set(m, k, w);
                nonzero = true;
            }
        }
        if !nonzero {
            return Err(CodecError::EmptyMelBand { n_mels, bins });
        }
    }
    Ok(fb)
}

/// Log10 mel spectrogram: `log10(max(fb * |STFT|, 1e-5))`, `n_mels x frames`.
pub fn log_mel(x: &AudioBuffer, scale: &SpectralScale) -> Result<Matrix> {
    if scale.n_mels == 0 {
        return Err(CodecError::InvalidConfig(
            "log_mel requires n_mels >= 1".into(),
        ));
    }
    let spec = stft(x, scale.window_length, scale.hop_length)?;
    let fb = mel_filterbank(x.sample_rate(), scale.window_length, scale.n_mels)?;
    let mag = spec.magnitudes();
    let mut out = Matrix::zeros(scale.n_mels, spec.frames);
    for m in 0..scale.n_mels {
        for t in 0..spec.frames {
            let mut acc = 0.0;
            for k in 0..spec.bins {
                let w = fb.at(m, k);
                if w != 0.0 {
                    acc += w * mag.at(k, t);
                }
            }
            out.set(m, t, acc.max(LOG_FLOOR).log10());
        }
    }
    Ok(out)
}

/// Log10 magnitude spectrogram with the shared floor, `bins x frames`.
pub fn log_magnitude(x: &AudioBuffer, window_length: usize, hop_length: usize) -> Result<Matrix> {
    let spec = stft(x, window_length, hop_length)?;
    let mut m = spec.magnitudes();
    for v in m.data.iter_mut() {
        *v = v.max(LOG_FLOOR).log10();
    }
    Ok(m)
}

/// All-pass phase rotation: every strictly-positive frequency bin is
/// multiplied by `e^{i theta}`; DC and Nyquist stay untouched, so the
/// magnitude spectrum is preserved bin-for-bin.
pub fn random_phase_shift(x: &AudioBuffer, theta: f64) -> Result<AudioBuffer> {
    if !(-std::f64::consts::PI..std::f64::consts::PI).contains(&theta) {
        return Err(CodecError::OutOfRange(format!(
            "theta {theta} outside [-pi, pi)"
        )));
    }
    if theta == 0.0 || x.len() < 2 {
        return Ok(x.clone());
    }
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|&s| Complex64::new(s as f64, 0.0))
        .collect();
    fft.process(&mut buf);
    let rot = Complex64::from_polar(1.0, theta);
    // Positive frequencies rotate; conjugate-symmetric negatives follow.
    let half = n.div_ceil(2);
    for k in 1..half {
        buf[k] *= rot;
        buf[n - k] = buf[k].conj();
    }
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    let samples: Vec<f32> = buf.iter().map(|c| (c.re * scale) as f32).collect();
    AudioBuffer::new(samples, x.sample_rate())
}

/// Circular time shift by `shift` samples (alternative augmentation,
/// selectable in the data config; not the default).
pub fn circular_time_shift(x: &AudioBuffer, shift: usize) -> AudioBuffer {
    if x.is_empty() {
        return x.clone();
    }
    let n = x.len();
    let s = shift % n;
    let mut samples = Vec::with_capacity(n);
    samples.extend_from_slice(&x.samples()[n - s..]);
    samples.extend_from_slice(&x.samples()[..n - s]);
    AudioBuffer::new(samples, x.sample_rate()).expect("rotation preserves finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, len: usize) -> AudioBuffer {
        let samples = (0..len)
            .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / rate as f64).sin() as f32)
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    /// Direct DFT of one centered, windowed frame; the independent oracle
    /// for the FFT path.
    fn naive_frame_dft(x: &AudioBuffer, window: usize, hop: usize, frame: usize) -> Vec<Complex64> {
        let plan = pad_plan(x.len(), window, hop);
        let idx = reflect_pad_indices(x.len(), plan.pad_left, plan.pad_right);
        let padded: Vec<f64> = idx.iter().map(|&j| x.samples()[j] as f64).collect();
        let w = hann_window(window);
        let start = frame * hop;
        (0..window / 2 + 1)
            .map(|k| {
                let mut acc = Complex64::default();
                for n in 0..window {
                    let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / window as f64;
                    acc += padded[start + n] * w[n] * Complex64::from_polar(1.0, ang);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let x = AudioBuffer::new(vec![0.0; 4096], 44100).unwrap();
        let s = stft(&x, 512, 128).unwrap();
        assert!(s.data.iter().all(|c| c.norm() == 0.0));
        assert_eq!(s.frames, 4096usize.div_ceil(128));
        assert_eq!(s.bins, 257);
    }

    #[test]
    fn empty_signal_errors() {
        let x = AudioBuffer::new(vec![], 44100).unwrap();
        assert!(matches!(
            stft(&x, 512, 128),
            Err(CodecError::EmptySignal)
        ));
    }

    #[test]
    fn tone_peak_bin_matches_analytic_and_oracle() {
        // 440 Hz at 44.1 kHz with a 2048 window peaks at round(440*2048/44100) = 20.
        let x = tone(440.0, 44100, 8192);
        let s = stft(&x, 2048, 512).unwrap();
        let frame = s.frames / 2;
        let peak_bin = (0..s.bins)
            .max_by(|&a, &b| {
                s.at(a, frame)
                    .norm()
                    .partial_cmp(&s.at(b, frame).norm())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(peak_bin, 20);
        // Whole frame agrees with the direct DFT oracle.
        let oracle = naive_frame_dft(&x, 2048, 512, frame);
        for (k, o) in oracle.iter().enumerate() {
            let got = s.at(k, frame);
            assert!(
                (got - o).norm() <= 1e-8 * (1.0 + o.norm()),
                "bin {k}: {got} vs {o}"
            );
        }
    }

    #[test]
    fn frame_energy_consistency() {
        // Parseval per frame: sum w^2 x^2 = (|X_0|^2 + 2 sum_mid + |X_nyq|^2) / W.
        let x = tone(997.0, 44100, 4096);
        let (window, hop) = (1024, 256);
        let s = stft(&x, window, hop).unwrap();
        let plan = pad_plan(x.len(), window, hop);
        let idx = reflect_pad_indices(x.len(), plan.pad_left, plan.pad_right);
        let padded: Vec<f64> = idx.iter().map(|&j| x.samples()[j] as f64).collect();
        let w = hann_window(window);
        for frame in [0, s.frames / 2, s.frames - 1] {
            let time_energy: f64 = (0..window)
                .map(|n| (padded[frame * hop + n] * w[n]).powi(2))
                .sum();
            let mut freq_energy = s.at(0, frame).norm_sqr() + s.at(s.bins - 1, frame).norm_sqr();
            for k in 1..s.bins - 1 {
                freq_energy += 2.0 * s.at(k, frame).norm_sqr();
            }
            freq_energy /= window as f64;
            let rel = (time_energy - freq_energy).abs() / time_energy.max(1e-12);
            assert!(rel < 1e-4, "frame {frame}: rel {rel}");
        }
    }

    #[test]
    fn stft_scaling_by_pow2_is_exact() {
        let x = tone(330.0, 16000, 2000);
        let scaled = x.scaled(4.0);
        let a = stft(&x, 256, 64).unwrap();
        let b = stft(&scaled, 256, 64).unwrap();
        for (u, v) in a.data.iter().zip(b.data.iter()) {
            assert_eq!(u.re * 4.0, v.re);
            assert_eq!(u.im * 4.0, v.im);
        }
    }

    #[test]
    fn mel_filterbank_shapes_and_positivity() {
        let fb = mel_filterbank(44100, 512, 80).unwrap();
        assert_eq!((fb.rows, fb.cols), (80, 257));
        for m in 0..80 {
            let row_sum: f64 = (0..257).map(|k| fb.at(m, k)).sum();
            assert!(row_sum > 0.0);
        }
        let fb = mel_filterbank(44100, 32, 5).unwrap();
        assert_eq!((fb.rows, fb.cols), (5, 17));
        for m in 0..5 {
            assert!((0..17).any(|k| fb.at(m, k) > 0.0));
        }
    }

    #[test]
    fn mel_filterbank_weights_nonnegative_and_input_independent() {
        let a = mel_filterbank(22050, 256, 20).unwrap();
        let b = mel_filterbank(22050, 256, 20).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn too_many_mels_is_an_error() {
        // 17 bins cannot support 40 triangles without holes.
        assert!(matches!(
            mel_filterbank(44100, 32, 40),
            Err(CodecError::EmptyMelBand { .. })
        ));
    }

    #[test]
    fn log_mel_zero_signal_hits_floor() {
        let x = AudioBuffer::new(vec![0.0; 2048], 44100).unwrap();
        let scale = SpectralScale::quarter_hop(512, 80);
        let m = log_mel(&x, &scale).unwrap();
        assert!(m.data.iter().all(|&v| v == -5.0));
    }

    #[test]
    fn log_mel_deterministic_bitwise() {
        let x = tone(523.25, 44100, 4000);
        let scale = SpectralScale::quarter_hop(1024, 80);
        let a = log_mel(&x, &scale).unwrap();
        let b = log_mel(&x, &scale).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_mel_decade_scaling_adds_one() {
        // A loud tone whose mel cells all clear the floor: scaling the signal
        // by 10 raises every cell by exactly 1.0 (log10 linearity).
        let x = tone(997.0, 44100, 4096);
        let scale = SpectralScale::quarter_hop(512, 20);
        let a = log_mel(&x, &scale).unwrap();
        let b = log_mel(&x.scaled(10.0), &scale).unwrap();
        let mut checked = 0;
        for (u, v) in a.data.iter().zip(b.data.iter()) {
            if *u > -4.0 {
                assert!((v - u - 1.0).abs() < 1e-6, "{u} -> {v}");
                checked += 1;
            }
        }
        assert!(checked > 50, "too few unfloored cells: {checked}");
    }

    #[test]
    fn log_mel_lower_bound() {
        let x = tone(100.0, 8000, 1600).scaled(1e-6);
        let m = log_mel(&x, &SpectralScale::quarter_hop(256, 10)).unwrap();
        assert!(m.data.iter().all(|&v| v >= -5.0));
    }

    #[test]
    fn phase_shift_zero_is_identity() {
        let x = tone(440.0, 8000, 1000);
        let y = random_phase_shift(&x, 0.0).unwrap();
        assert_eq!(x.samples(), y.samples());
    }

    #[test]
    fn phase_shift_pi_flips_a_sine() {
        // Use a bin-aligned sine so circular spectral rotation is exact.
        let n = 2048;
        let rate = 8000;
        let freq = 16.0 * rate as f64 / n as f64;
        let x = tone(freq, rate, n);
        let y = random_phase_shift(&x, -std::f64::consts::PI).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a + b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn phase_shift_preserves_magnitude_spectrum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f32> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = AudioBuffer::new(samples, 16000).unwrap();
        let y = random_phase_shift(&x, 1.234).unwrap();
        let sx = stft(&x, 1024, 1024).unwrap();
        let sy = stft(&y, 1024, 1024).unwrap();
        for (a, b) in sx.data.iter().zip(sy.data.iter()) {
            let rel = (a.norm() - b.norm()).abs() / (a.norm() + 1e-9);
            assert!(rel < 1e-4, "{} vs {}", a.norm(), b.norm());
        }
    }

    #[test]
    fn phase_shift_rejects_out_of_range_theta() {
        let x = tone(440.0, 8000, 100);
        assert!(random_phase_shift(&x, std::f64::consts::PI).is_err());
        assert!(random_phase_shift(&x, -4.0).is_err());
    }

    #[test]
    fn circular_shift_rotates() {
        let x = AudioBuffer::new(vec![1.0, 2.0, 3.0, 4.0], 8000).unwrap();
        let y = circular_time_shift(&x, 1);
        assert_eq!(y.samples(), &[4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn reflect_index_multi_bounce() {
        // len 4, period 6: positions -1..8 map to 1,0,1,2,3,2,1,0,1,2.
        let got: Vec<usize> = (-1..9).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![1, 0, 1, 2, 3, 2, 1, 0, 1, 2]);
        // Degenerate length-1 signal.
        assert_eq!(reflect_index(-3, 1), 0);
    }

    #[test]
    fn pad_plan_frame_counts() {
        assert_eq!(pad_plan(16896, 2048, 512).frames, 33);
        assert_eq!(pad_plan(512, 2048, 512).frames, 1);
        assert_eq!(pad_plan(1000, 512, 512).frames, 2);
    }
}
