//! Attention-gated graph convolutional classifier.
//!
//! Per example: bin attention per joint, gating `B·α·h`, `S` layers of
//! `ReLU(Â X W)` over the feature graph, mean pooling over all nodes, and an
//! affine head producing two logits. Gradients are derived by hand in
//! [`Model::backward`] and verified against central differences in
//! [`gradcheck`].

mod attention;
pub mod gradcheck;
mod model;
mod params;
mod persist;
mod report;
mod train;

pub use attention::{attention_aggregate, attention_weights, softmax_in_place, Aggregated, ScoreActivation};
pub use model::{gcn_forward, loss, one_hot, ForwardCache, Model, ModelSpec, Prediction, DEFAULT_HIDDEN};
pub use params::{AttentionParams, GcnLayerParams, HeadParams, Params};
pub use persist::{MODEL_FORMAT, MODEL_VERSION};
pub use report::AttentionReport;
pub use train::{evaluate, train, EpochStats, Example, TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use crate::error::Result;
use crate::frequency::FrequencyFeatures;

/// Attention weights of a model on one sequence, with the joint ranking.
pub fn attention_report(model: &Model, features: &FrequencyFeatures) -> Result<AttentionReport> {
    model.forward(features).map(|(_, report, _)| report)
}
