//! The MagicNet network: a causal depthwise-separable conv front end, two
//! inverted-bottleneck blocks, a GRU and a sigmoid head, with batch, training
//! and frame-by-frame streaming execution.

mod config;
mod forward;
mod io;
mod labels;
mod stream;
mod weights;

pub use config::{BlockConfig, MagicNetConfig, ReceptiveField, UnitConfig};
pub use forward::TrainCache;
pub use io::{load_weights, save_weights, weights_from_bytes, weights_from_bytes_with, weights_to_bytes, LoadError, FORMAT_VERSION, MAGIC};
pub use labels::{frame_labels, step_labels, step_time_s};
pub use stream::StreamState;
pub use weights::{ConvUnit, LayerParams, ModelGrads, ModelWeights, ParamReport, TensorInfo, TensorKind};

use thiserror::Error;

use crate::features::FeatureError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Load(#[from] LoadError),
}
