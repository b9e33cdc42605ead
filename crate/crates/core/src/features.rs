//! Deterministic log-mel front end: 16 kHz mono PCM → `C_mel × T`
//! features.
//!
//! Per frame: a 25 ms Hamming window (400 samples, 10 ms shift),
//! 512-point magnitude-squared spectrum, an 80-band triangular mel
//! filterbank on the HTK scale between 20 Hz and 7.6 kHz, then
//! `ln(power + 1e-6)`. Per-utterance per-band mean subtraction is
//! applied last. No pre-emphasis, no dither, no center padding.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor2D;

pub const SAMPLE_RATE: u32 = 16_000;

/// 16 kHz mono audio in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioBuffer<F: Real = f32> {
    samples: Vec<F>,
}

impl<F: Real> AudioBuffer<F> {
    pub fn new(sample_rate: u32, samples: Vec<F>) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::Audio(format!(
                "sample rate must be {SAMPLE_RATE} Hz, got {sample_rate}"
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > F::one()) {
            return Err(Error::Audio(format!(
                "sample value {bad} outside [-1, 1]"
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Front-end configuration. Defaults follow the standard VoxCeleb
/// recipe and must match the model's `c_mel`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub n_fft: usize,
    /// Window length in samples (25 ms at 16 kHz).
    pub win_length: usize,
    /// Hop in samples (10 ms at 16 kHz).
    pub hop: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Subtract the per-band mean over the utterance.
    pub mean_normalize: bool,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            n_fft: 512,
            win_length: 400,
            hop: 160,
            f_min: 20.0,
            f_max: 7600.0,
            mean_normalize: true,
        }
    }
}

/// Log floor added to band power before the natural log.
pub const LOG_FLOOR: f64 = 1e-6;

/// Number of frames for `n_samples` of audio: windows fully inside the
/// signal, `T = (n - win) / hop + 1`.
pub fn frame_count(n_samples: usize, cfg: &MelConfig) -> Result<usize> {
    if n_samples < cfg.win_length {
        return Err(Error::InputTooShort {
            got: n_samples,
            need: cfg.win_length,
        });
    }
    Ok((n_samples - cfg.win_length) / cfg.hop + 1)
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filterbank, peak 1.0 per band, over `n_fft/2 + 1` bins.
/// Returns a dense `n_mels × bins` weight table.
pub fn mel_filterbank(cfg: &MelConfig) -> Vec<Vec<f64>> {
    let bins = cfg.n_fft / 2 + 1;
    let mel_lo = hz_to_mel(cfg.f_min);
    let mel_hi = hz_to_mel(cfg.f_max);
    let n_points = cfg.n_mels + 2;
    let points: Vec<f64> = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / cfg.n_fft as f64;
    let mut bank = vec![vec![0f64; bins]; cfg.n_mels];
    for (m, filt) in bank.iter_mut().enumerate() {
        let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
        for (k, w) in filt.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > left && f < center {
                *w = (f - left) / (center - left);
            } else if f >= center && f < right {
                *w = (right - f) / (right - center);
            }
        }
    }
    bank
}

/// Center frequencies of the mel bands, in Hz.
pub fn band_centers(cfg: &MelConfig) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.f_min);
    let mel_hi = hz_to_mel(cfg.f_max);
    let n_points = cfg.n_mels + 2;
    (1..=cfg.n_mels)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect()
}

fn hamming_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Magnitude-squared spectrum of one windowed frame (test hook: the FFT
/// path is checked against a naive DFT on this).
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    fft.process(&mut buf);
    buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Full front end: audio → `n_mels × T` log-mel features.
pub fn log_mel<F: Real>(audio: &AudioBuffer<F>, cfg: &MelConfig) -> Result<Tensor2D<F>> {
    let t_len = frame_count(audio.len(), cfg)?;
    let window = hamming_window(cfg.win_length);
    let bank = mel_filterbank(cfg);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.n_fft);

    let bins = cfg.n_fft / 2 + 1;
    let mut out = vec![0f64; cfg.n_mels * t_len];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let samples = audio.samples();
    for t in 0..t_len {
        let start = t * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < cfg.win_length {
                Complex::new(samples[start + i].into_f64() * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (m, filt) in bank.iter().enumerate() {
            let mut power = 0f64;
            for k in 0..bins {
                power += filt[k] * buf[k].norm_sqr();
            }
            out[m * t_len + t] = (power + LOG_FLOOR).ln();
        }
    }

    if cfg.mean_normalize {
        for m in 0..cfg.n_mels {
            let row = &mut out[m * t_len..(m + 1) * t_len];
            let mean = row.iter().sum::<f64>() / t_len as f64;
            for v in row.iter_mut() {
                *v -= mean;
            }
        }
    }

    Tensor2D::new(
        cfg.n_mels,
        t_len,
        out.into_iter().map(F::from_f64_lossy).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amplitude: f64, n: usize) -> AudioBuffer<f32> {
        let samples = (0..n)
            .map(|i| {
                (amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()) as f32
            })
            .collect();
        AudioBuffer::new(16000, samples).unwrap()
    }

    #[test]
    fn frame_count_reference_points() {
        let cfg = MelConfig::default();
        assert_eq!(frame_count(48000, &cfg).unwrap(), 298);
        assert_eq!(frame_count(400, &cfg).unwrap(), 1);
        assert_eq!(frame_count(559, &cfg).unwrap(), 1);
        assert_eq!(frame_count(560, &cfg).unwrap(), 2);
        assert!(matches!(
            frame_count(399, &cfg),
            Err(Error::InputTooShort { got: 399, need: 400 })
        ));
    }

    fn raw_config() -> MelConfig {
        MelConfig {
            mean_normalize: false,
            ..MelConfig::default()
        }
    }

    #[test]
    fn silence_hits_log_floor_then_zero_after_normalization() {
        let audio = AudioBuffer::new(16000, vec![0.0f32; 4000]).unwrap();
        let raw = log_mel(&audio, &raw_config()).unwrap();
        let want = (LOG_FLOOR).ln() as f32;
        assert!(raw.data().iter().all(|&v| (v - want).abs() < 1e-6));

        let normed = log_mel(&audio, &MelConfig::default()).unwrap();
        assert!(normed.data().iter().all(|&v| v.abs() < 1e-6));
    }

    #[test]
    fn pure_tone_peaks_in_nearest_band() {
        let cfg = raw_config();
        let audio = tone(1000.0, 0.9, 4000);
        let feats = log_mel(&audio, &cfg).unwrap();
        let centers = band_centers(&cfg);
        let expected_band = centers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - 1000.0).abs().partial_cmp(&(*b - 1000.0).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        for t in [0usize, 5, 10] {
            let argmax = (0..cfg.n_mels)
                .max_by(|&a, &b| feats.get(a, t).partial_cmp(&feats.get(b, t)).unwrap())
                .unwrap();
            assert_eq!(argmax, expected_band, "frame {t}");
        }
    }

    #[test]
    fn three_second_buffer_shape() {
        let audio = tone(440.0, 0.5, 48000);
        let feats = log_mel(&audio, &MelConfig::default()).unwrap();
        assert_eq!(feats.channels(), 80);
        assert_eq!(feats.frames(), 298);
    }

    #[test]
    fn gain_shifts_energetic_cells_by_log_gain_squared() {
        let cfg = raw_config();
        let quiet = tone(1000.0, 0.2, 2000);
        let loud = tone(1000.0, 0.4, 2000);
        let a = log_mel(&quiet, &cfg).unwrap();
        let b = log_mel(&loud, &cfg).unwrap();
        let shift = (4.0f64).ln() as f32; // g = 2 -> log(g²)
        let mut checked = 0;
        for c in 0..80 {
            for t in 0..a.frames() {
                // only where power dominates the log floor (≥ e⁹·floor)
                if a.get(c, t) > (LOG_FLOOR.ln() as f32) + 9.0 {
                    assert!((b.get(c, t) - a.get(c, t) - shift).abs() < 1e-3);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn normalized_output_has_zero_band_means() {
        let audio = tone(700.0, 0.8, 8000);
        let feats = log_mel(&audio, &MelConfig::default()).unwrap();
        for c in 0..80 {
            let mean: f64 = feats.row(c).iter().map(|&v| v as f64).sum::<f64>()
                / feats.frames() as f64;
            assert!(mean.abs() < 1e-5);
        }
    }

    #[test]
    fn fft_matches_naive_dft_oracle() {
        // one windowed frame vs an O(N²) DFT
        let audio = tone(1234.0, 0.7, 400);
        let window = hamming_window(400);
        let frame: Vec<f64> = audio
            .samples()
            .iter()
            .zip(&window)
            .map(|(&s, &w)| s as f64 * w)
            .collect();
        let got = power_spectrum(&frame, 512);

        let mut want = vec![0f64; 257];
        for (k, w) in want.iter_mut().enumerate() {
            let mut re = 0f64;
            let mut im = 0f64;
            for (n, &v) in frame.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * k as f64 * n as f64 / 512.0;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            *w = re * re + im * im;
        }
        let scale = want.iter().cloned().fold(0.0, f64::max);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() / scale.max(1e-12) < 1e-4);
        }
    }

    #[test]
    fn wrong_sample_rate_rejected() {
        let err = AudioBuffer::new(44100, vec![0.0f32; 4000]).unwrap_err();
        assert!(err.to_string().contains("16000"));
    }

    #[test]
    fn out_of_range_samples_rejected() {
        assert!(AudioBuffer::new(16000, vec![1.5f32]).is_err());
    }

    #[test]
    fn filterbank_covers_every_band() {
        let bank = mel_filterbank(&MelConfig::default());
        for (m, filt) in bank.iter().enumerate() {
            assert!(filt.iter().any(|&w| w > 0.0), "band {m} empty");
        }
    }
}
