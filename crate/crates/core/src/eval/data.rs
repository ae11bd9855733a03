use std::path::Path;

use super::EvalError;
use crate::audio::{read_manifest, AudioClip, Condition, SynthClip};
use crate::features::{fbank40, FeatureConfig, FeatureMatrix, FeatureNormalizer};
use crate::model::{frame_labels, step_labels};
use crate::nn::Tensor2D;
use crate::Real;

/// A clip with per-sample labels and, if known, its noise condition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip: AudioClip,
    pub condition: Option<Condition>,
}

impl From<SynthClip> for LabeledClip {
    fn from(s: SynthClip) -> Self {
        Self {
            clip: s.clip,
            condition: Some(Condition {
                noise: s.noise.name().to_string(),
                snr_db: s.snr_db,
            }),
        }
    }
}

/// Loads every clip of a manifest. Fails on an empty manifest.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<LabeledClip>, EvalError> {
    let path = path.as_ref();
    let entries = read_manifest(path)?;
    if entries.is_empty() {
        return Err(EvalError::Argument(format!("manifest {} lists no clips", path.display())));
    }
    entries
        .iter()
        .map(|e| {
            Ok(LabeledClip {
                clip: e.load()?,
                condition: e.condition.clone(),
            })
        })
        .collect()
}

/// Raw log-mel features of a clip with its per-step labels.
#[derive(Debug, Clone)]
pub struct PreparedClip<T> {
    pub features: FeatureMatrix<T>,
    /// Per-frame labels; group by the model's downsampling factor for steps.
    pub frame_labels: Vec<bool>,
    pub condition: Option<Condition>,
}

pub fn prepare_clip<T: Real>(clip: &LabeledClip, config: &FeatureConfig) -> Result<PreparedClip<T>, EvalError> {
    let labels = clip
        .clip
        .labels()
        .ok_or_else(|| EvalError::Argument("clip has no labels".into()))?;
    Ok(PreparedClip {
        features: fbank40(&clip.clip, config)?,
        frame_labels: frame_labels(labels, config),
        condition: clip.condition.clone(),
    })
}

/// A normalized training segment with one 0/1 target per output step.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub x: Tensor2D<T>,
    pub targets: Vec<T>,
}

/// Normalizes a prepared clip and cuts it into segments of `segment_frames`
/// frames (rounded down to a multiple of `factor`); the tail becomes a
/// shorter final segment.
pub fn segment<T: Real>(
    clip: &PreparedClip<T>,
    norm: &FeatureNormalizer<T>,
    segment_frames: usize,
    factor: usize,
) -> Result<Vec<Segment<T>>, EvalError> {
    let seg = (segment_frames / factor).max(1) * factor;
    let x = crate::features::normalize(&clip.features, norm)?;
    let frames = x.frames();
    let mut out = Vec::new();
    let mut start = 0;
    while start < frames {
        let end = (start + seg).min(frames);
        let targets = step_labels(&clip.frame_labels[start..end], factor)
            .into_iter()
            .map(|l| if l { T::one() } else { T::zero() })
            .collect();
        out.push(Segment {
            x: x.slice(start, end).data,
            targets,
        });
        start = end;
    }
    Ok(out)
}
