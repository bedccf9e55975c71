//! Skeleton sequence classification from binned joint-motion spectra.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`pose`] reads per-frame keypoint documents, fills detection gaps and
//!    normalizes each sequence to a root-centred, torso-scaled frame.
//! 2. [`frequency`] turns every joint trajectory into a magnitude spectrum with
//!    an arbitrary-length chirp-z FFT and compresses it into exponentially
//!    widening bins.
//! 3. [`graph`] builds the (bin, joint) feature graph and its
//!    symmetric-normalized adjacency.
//! 4. [`agcn`] gates the features with per-joint attention over bins, runs a
//!    stack of graph convolutions and emits a binary normal/abnormal label.
//!
//! [`synthetic`] produces labelled sequences with controlled frequency content
//! for training and verification.

pub mod agcn;
pub mod error;
pub mod frequency;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod pose;
pub mod synthetic;

pub use agcn::{AttentionReport, Model, ModelSpec, Prediction, TrainConfig};
pub use error::{Error, Result};
pub use frequency::{BinSpec, FrequencyFeatures};
pub use graph::{FeatureGraph, SkeletonTopology};
pub use linalg::Matrix;
pub use metrics::MetricsReport;
pub use pose::{Keypoint, PoseFrame, PoseSequence};
pub use synthetic::SynthConfig;
