//! Per-joint attention over frequency bins.
//!
//! For node feature `h` (one joint, one bin): `z = tanh(W_z h)`, score
//! `s = act(w_αᵀ z)`, and the weights are a softmax of the scores across the
//! bins of that joint.

use serde::{Deserialize, Serialize};

use super::params::AttentionParams;
use crate::error::{Error, Result};
use crate::frequency::FrequencyFeatures;
use crate::linalg::dot;

/// Activation applied to the raw score `w_αᵀ z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreActivation {
    #[default]
    Identity,
    Tanh,
}

impl ScoreActivation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScoreActivation::Identity => x,
            ScoreActivation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activated output.
    #[inline]
    pub(crate) fn grad_from_output(self, y: f64) -> f64 {
        match self {
            ScoreActivation::Identity => 1.0,
            ScoreActivation::Tanh => 1.0 - y * y,
        }
    }
}

impl std::str::FromStr for ScoreActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ScoreActivation::Identity),
            "tanh" => Ok(ScoreActivation::Tanh),
            _ => Err(Error::InvalidConfig(format!(
                "unknown score activation {s:?} (identity, tanh)"
            ))),
        }
    }
}

/// Intermediate values of the attention stage, all joint-major.
#[derive(Debug, Clone)]
pub(crate) struct AttentionState {
    /// `tanh(W_z h)`, `N x B x C`.
    pub z: Vec<f64>,
    /// Activated scores, `N x B`.
    pub scores: Vec<f64>,
    /// Softmax weights, `N x B`.
    pub alpha: Vec<f64>,
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::contract(format!("non-finite feature value at flat index {i}"))),
        None => Ok(()),
    }
}

/// Numerically stable softmax of one joint's scores in place.
pub fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    scores.iter_mut().for_each(|s| *s /= total);
}

pub(crate) fn attention_state(
    h: &[f64],
    num_joints: usize,
    num_bins: usize,
    params: &AttentionParams,
    activation: ScoreActivation,
) -> AttentionState {
    let c = params.w_alpha.len();
    let nodes = num_joints * num_bins;
    let mut z = vec![0.0; nodes * c];
    let mut scores = vec![0.0; nodes];
    for node in 0..nodes {
        let h_node = &h[node * c..(node + 1) * c];
        let z_node = &mut z[node * c..(node + 1) * c];
        for (r, zr) in z_node.iter_mut().enumerate() {
            *zr = dot(params.w_z.row(r), h_node).tanh();
        }
        scores[node] = activation.apply(dot(&params.w_alpha, z_node));
    }
    let mut alpha = scores.clone();
    for joint in alpha.chunks_mut(num_bins) {
        softmax_in_place(joint);
    }
    AttentionState { z, scores, alpha }
}

fn check_params(features: &FrequencyFeatures, params: &AttentionParams) -> Result<()> {
    let c = features.channels();
    if params.w_z.shape() != (c, c) || params.w_alpha.len() != c {
        return Err(Error::contract(format!(
            "attention parameters are {:?}/{} for {c} channels",
            params.w_z.shape(),
            params.w_alpha.len()
        )));
    }
    check_finite(features.as_slice())
}

/// Attention weights `α[i][b]`, flattened joint-major (`i * B + b`).
pub fn attention_weights(
    features: &FrequencyFeatures,
    params: &AttentionParams,
    activation: ScoreActivation,
) -> Result<Vec<f64>> {
    check_params(features, params)?;
    Ok(attention_state(
        features.as_slice(),
        features.num_joints(),
        features.num_bins(),
        params,
        activation,
    )
    .alpha)
}

/// Weighted aggregate and gated node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    /// `V_i = Σ_b α[i][b] h[i][b]`, `N x C`.
    pub per_joint: Vec<Vec<f64>>,
    /// `B · α[i][b] · h[i][b]`, joint-major `N x B x C`. Uniform attention
    /// leaves the features unchanged.
    pub gated: Vec<f64>,
}

/// Aggregates joint-major features `h` (`N x B x C`) with weights `alpha` (`N x B`).
pub fn attention_aggregate(
    h: &[f64],
    alpha: &[f64],
    num_joints: usize,
    num_bins: usize,
    channels: usize,
) -> Result<Aggregated> {
    if h.len() != num_joints * num_bins * channels || alpha.len() != num_joints * num_bins {
        return Err(Error::contract("attention_aggregate shape mismatch"));
    }
    let mut per_joint = vec![vec![0.0; channels]; num_joints];
    let mut gated = vec![0.0; h.len()];
    let scale = num_bins as f64;
    for (joint, v) in per_joint.iter_mut().enumerate() {
        for bin in 0..num_bins {
            let node = joint * num_bins + bin;
            let a = alpha[node];
            for c in 0..channels {
                let x = h[node * channels + c];
                v[c] += a * x;
                gated[node * channels + c] = gate(scale, a, x);
            }
        }
    }
    Ok(Aggregated { per_joint, gated })
}

/// `B·α·x`. A factor within rounding of one (uniform attention, where `α`
/// is `1/B` rounded) is snapped to exactly one so the gating is the identity.
#[inline]
pub(crate) fn gate(num_bins: f64, alpha: f64, x: f64) -> f64 {
    let g = num_bins * alpha;
    if (g - 1.0).abs() <= 4.0 * f64::EPSILON {
        x
    } else {
        g * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::BinSpec;
    use crate::linalg::Matrix;

    fn params(w_alpha: [f64; 2]) -> AttentionParams {
        AttentionParams {
            w_z: Matrix::from_rows(&[vec![0.3, -0.7], vec![1.1, 0.2]]).unwrap(),
            w_alpha: w_alpha.to_vec(),
        }
    }

    fn features(data: Vec<f64>, joints: usize, bins: usize) -> FrequencyFeatures {
        let spec = BinSpec::new(1.000001, bins).unwrap();
        FrequencyFeatures::from_data(joints, spec, data, 30.0, 100).unwrap()
    }

    #[test]
    fn identical_bins_give_uniform_weights() {
        let f = features(vec![0.4, 1.2, 0.4, 1.2, 0.4, 1.2, 2.0, 0.0, 0.1, 0.1, 0.0, 3.0], 2, 3);
        let alpha = attention_weights(&f, &params([0.8, -1.3]), ScoreActivation::Identity).unwrap();
        for b in 0..3 {
            assert!((alpha[b] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((alpha[3..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_scoring_vector_is_uniform() {
        let f = features((0..12).map(f64::from).collect(), 2, 3);
        let alpha = attention_weights(&f, &params([0.0, 0.0]), ScoreActivation::Identity).unwrap();
        assert!(alpha.iter().all(|&a| (a - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_of_log_three() {
        let mut s = [3f64.ln(), 0.0];
        softmax_in_place(&mut s);
        assert!((s[0] - 0.75).abs() < 1e-15 && (s[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_survives_huge_scores() {
        let mut s = [1000.0, 999.0, -1e6];
        softmax_in_place(&mut s);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        let h = [4.0, 0.0, 0.0, 4.0];
        let agg = attention_aggregate(&h, &[0.75, 0.25], 1, 2, 2).unwrap();
        assert_eq!(agg.per_joint, vec![vec![3.0, 1.0]]);

        let agg = attention_aggregate(&h, &[0.5, 0.5], 1, 2, 2).unwrap();
        assert_eq!(agg.gated, h.to_vec());
        assert_eq!(agg.per_joint, vec![vec![2.0, 2.0]]);

        let agg = attention_aggregate(&h, &[0.0, 1.0], 1, 2, 2).unwrap();
        assert_eq!(agg.per_joint, vec![vec![0.0, 4.0]]);
        assert_eq!(agg.gated, vec![0.0, 0.0, 0.0, 8.0]);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(check_finite(&[0.0, f64::NAN]).is_err());
        assert!(check_finite(&[0.0, 1.0]).is_ok());
    }

    #[test]
    fn uniform_gate_is_identity_for_awkward_bin_counts() {
        for bins in 1..200usize {
            let alpha = 1.0 / bins as f64;
            assert_eq!(gate(bins as f64, alpha, 0.123456789), 0.123456789);
        }
    }
}
