// SPDX-License-Identifier: Apache-2.0

//! Mean-aggregation graph neural network for register classification.
//!
//! Training and inference are implemented directly on dense `f64` arrays
//! with hand-written gradients. Class 0 is "state", class 1 is "data".

mod adam;
mod checkpoint;
mod forward;
mod message;
mod params;
mod train;

use thiserror::Error;

use crate::features::FeatureError;

pub use adam::Adam;
pub use checkpoint::{read_header, Checkpoint, CheckpointHeader, TensorInfo, CHECKPOINT_FORMAT_VERSION};
pub use forward::{
    backward, class_index, forward, forward_from, forward_with_masks, loss, loss_gradient, ClassWeights, LayerTrace,
    Mode, Trace, NORM_EPS,
};
pub use message::{MessageDirection, MessageGraph};
pub use params::{Dense, ModelDims, ModelParams, Norm, SageLayer};
pub use train::{decide, predict, targets, train, Batch, Example, LossTrace, RegisterPrediction, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum GnnError {
    #[error("feature width {found}, model expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{found} feature rows for {expected} graph nodes")]
    Rows { expected: usize, found: usize },
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("non-finite activation in layer {layer} at epoch {epoch}")]
    NonFiniteAt { layer: usize, epoch: usize },
    #[error("trace was recorded with different parameters")]
    StaleTrace,
    #[error("no labeled register rows")]
    NoTargets,
    #[error("register row {row} has no label")]
    MissingLabel { row: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("library fingerprint mismatch: model {expected}, input {found}")]
    Fingerprint { expected: String, found: String },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl GnnError {
    fn at_epoch(self, epoch: usize) -> Self {
        match self {
            Self::NonFinite { layer } => Self::NonFiniteAt { layer, epoch },
            e => e,
        }
    }

    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Divergence { .. } | Self::NonFinite { .. } | Self::NonFiniteAt { .. })
    }
}
