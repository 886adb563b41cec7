// SPDX-License-Identifier: Apache-2.0

//! Classification metrics and the leave-one-design-out fold protocol.

mod folds;
mod metrics;

pub use folds::{make_folds, FoldError, FoldPlan};
pub use metrics::{macro_average, mean_defined, metrics, ConfusionCounts, Metrics};
