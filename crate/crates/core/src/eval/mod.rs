//! Training on labeled corpora and the evaluation suite: F1, ROC-AUC,
//! threshold selection and real-time factor.

mod data;
mod evaluate;
mod metrics;
mod rtf;
mod train;

pub use data::{load_manifest, prepare_clip, segment, LabeledClip, PreparedClip, Segment};
pub use evaluate::{evaluate, predict_clips, ClipScores, ConditionReport, EvalReport, ThresholdPolicy};
pub use metrics::{f1_score, roc_auc, threshold_sweep, Confusion, F1Result, SweepResult};
pub use rtf::{measure_rtf, RtfReport};
pub use train::{train, train_manifests, train_segments, validation_loss, EpochRecord, TrainConfig, TrainOutcome};

use thiserror::Error;

use crate::audio::AudioError;
use crate::features::FeatureError;
use crate::model::ModelError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {tensor} at epoch {epoch}, batch {batch}")]
    NonFinite { tensor: String, epoch: usize, batch: usize },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
