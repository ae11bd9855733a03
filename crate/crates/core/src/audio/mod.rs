//! Audio containers, PCM16 WAV I/O, SNR mixing and synthetic labeled corpora.

mod corpus;
mod mix;
mod synth;
mod wav;

pub use corpus::{read_labels, read_manifest, write_corpus, write_labels, Condition, ManifestEntry};
pub use mix::{mix_at_snr, Mixed};
pub use synth::{synth_corpus, MixSpec, NoiseKind, SnrSpec, SynthClip};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use std::path::PathBuf;

use thiserror::Error;

use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV: chunk '{chunk}': {reason}")]
    Format { chunk: String, reason: String },
    #[error("unsupported WAV {field}: found {found}, required {required}")]
    Unsupported {
        field: &'static str,
        found: u32,
        required: u32,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("manifest {path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl AudioError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

/// Mono PCM audio with optional per-sample speech labels (`true` = speech).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
    labels: Option<Vec<bool>>,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
            labels: None,
        }
    }

    /// 16 kHz clip.
    pub fn mono16k(samples: Vec<f32>) -> Self {
        Self::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self, AudioError> {
        if labels.len() != self.samples.len() {
            return Err(AudioError::Argument(format!(
                "{} labels for {} samples",
                labels.len(),
                self.samples.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Fraction of samples labeled as speech, if labels are present.
    pub fn speech_fraction(&self) -> Option<f64> {
        let labels = self.labels.as_ref()?;
        if labels.is_empty() {
            return Some(0.0);
        }
        Some(labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64)
    }
}

/// Root mean square of a nonempty sequence.
pub fn rms(samples: &[f32]) -> Result<f64, AudioError> {
    if samples.is_empty() {
        return Err(AudioError::Argument("rms of an empty sequence".into()));
    }
    let ss: f64 = samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    Ok((ss / samples.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        assert!((rms(&[0.5; 10]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rms(&[0.0; 10]).unwrap(), 0.0);
        assert_eq!(rms(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(rms(&[]), Err(AudioError::Argument(_))));
    }

    #[test]
    fn labels_must_match_length() {
        assert!(AudioClip::mono16k(vec![0.0; 4]).with_labels(vec![true; 3]).is_err());
        let c = AudioClip::mono16k(vec![0.0; 4]).with_labels(vec![true, false, false, false]).unwrap();
        assert_eq!(c.speech_fraction(), Some(0.25));
    }
}
