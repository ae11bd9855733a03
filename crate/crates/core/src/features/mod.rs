//! Fbank40 front end: 25 ms frames every 10 ms, pre-emphasis, Hann window,
//! 512-point power spectrum, 40 HTK-mel triangular filters, natural log.
//!
//! Batch and streaming extraction share one per-frame routine and produce
//! bit-identical output. Frame `k` covers samples `[160k, 160k + 400)` and
//! trailing partial frames are dropped.

mod fbank;
mod fft;
mod mel;
mod normalize;

pub use fbank::{fbank40, frame_signal, num_frames, FbankExtractor, FbankStream};
pub use fft::{real_fft, RealFft};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use normalize::{fit_normalizer, normalize, FeatureNormalizer};

use std::io::{self, Write};

use thiserror::Error;

use crate::nn::Tensor2D;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Hamming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub preemph: f64,
    pub log_floor: f64,
    pub window: Window,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::SAMPLE_RATE_HZ,
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 40,
            fft_size: 512,
            f_min_hz: 0.0,
            f_max_hz: 8000.0,
            preemph: 0.97,
            log_floor: 1e-10,
            window: Window::Hann,
        }
    }
}

impl FeatureConfig {
    pub fn frame_len(&self) -> usize {
        (self.frame_len_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let err = |m: String| Err(FeatureError::Config(m));
        if self.frame_len() == 0 || self.hop() == 0 {
            return err("frame length and hop must be at least one sample".into());
        }
        if self.frame_len() > self.fft_size {
            return err(format!("frame of {} samples exceeds fft size {}", self.frame_len(), self.fft_size));
        }
        if self.hop() > self.frame_len() {
            return err(format!("hop {} exceeds frame length {}", self.hop(), self.frame_len()));
        }
        if self.f_max_hz > self.sample_rate_hz as f64 / 2.0 || self.f_min_hz < 0.0 || self.f_min_hz >= self.f_max_hz {
            return err(format!(
                "band [{}, {}] Hz must lie within [0, {}]",
                self.f_min_hz,
                self.f_max_hz,
                self.sample_rate_hz / 2
            ));
        }
        if self.n_mels == 0 {
            return err("n_mels must be >= 1".into());
        }
        if !(self.log_floor > 0.0) {
            return err("log floor must be positive".into());
        }
        Ok(())
    }
}

/// Log-mel features: `n_mels × T`, one column per 10 ms frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub data: Tensor2D<T>,
    pub hop_s: f64,
    /// Center time of the first frame.
    pub t0_s: f64,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn frames(&self) -> usize {
        self.data.time()
    }

    pub fn n_coeffs(&self) -> usize {
        self.data.channels()
    }

    /// Writes one CSV row per frame with 9 significant digits per value.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        for t in 0..self.frames() {
            let row: Vec<String> = self.data.column(t).iter().map(|v| format!("{:.8e}", v.as_f64())).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Slices frames `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.frames());
        let mut data = Tensor2D::zeros(self.n_coeffs(), end.saturating_sub(start));
        for c in 0..self.n_coeffs() {
            data.row_mut(c).copy_from_slice(&self.data.row(c)[start..end]);
        }
        Self {
            data,
            hop_s: self.hop_s,
            t0_s: self.t0_s + start as f64 * self.hop_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_frame_arithmetic() {
        let c = FeatureConfig::default();
        assert_eq!((c.frame_len(), c.hop(), c.n_bins()), (400, 160, 257));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = FeatureConfig { fft_size: 256, ..FeatureConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig { f_max_hz: 9000.0, ..FeatureConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_has_nine_significant_digits() {
        let data = Tensor2D::from_vec(2, 1, vec![1.0f64 / 3.0, -23.025850929940457]).unwrap();
        let f = FeatureMatrix { data, hop_s: 0.01, t0_s: 0.0125 };
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3.33333333e-1,-2.30258509e1\n");
    }
}
