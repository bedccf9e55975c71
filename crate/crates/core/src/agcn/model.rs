use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{attention_state, check_finite, gate, softmax_in_place, ScoreActivation};
use super::params::Params;
use super::report::AttentionReport;
use crate::error::{Error, Result};
use crate::frequency::{BinSpec, FrequencyFeatures, CHANNELS};
use crate::graph::{FeatureGraph, SkeletonTopology};
use crate::linalg::Matrix;

pub const DEFAULT_HIDDEN: [usize; 2] = [16, 16];

/// Architecture of a model: everything except the learned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub topology: SkeletonTopology,
    pub bin_spec: BinSpec,
    /// Channel widths, input first: `[C, C_1, ..., C_S]`.
    pub channels: Vec<usize>,
    #[serde(default)]
    pub score_activation: ScoreActivation,
}

impl ModelSpec {
    pub fn new(topology: SkeletonTopology, bin_spec: BinSpec, hidden: &[usize]) -> Result<Self> {
        let mut channels = vec![CHANNELS];
        channels.extend_from_slice(hidden);
        let spec = ModelSpec {
            topology,
            bin_spec,
            channels,
            score_activation: ScoreActivation::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.bin_spec.validate()?;
        if self.channels.len() < 2 {
            return Err(Error::InvalidConfig("at least one graph convolution layer is required".into()));
        }
        if self.channels[0] != CHANNELS {
            return Err(Error::InvalidConfig(format!(
                "input width must be {CHANNELS}, got {}",
                self.channels[0]
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn num_joints(&self) -> usize {
        self.topology.num_joints
    }

    pub fn num_bins(&self) -> usize {
        self.bin_spec.num_bins
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logits: [f64; 2],
    pub probability: [f64; 2],
    /// 1 = abnormal.
    pub label: usize,
}

impl Prediction {
    fn from_logits(logits: [f64; 2]) -> Self {
        let mut probability = logits;
        softmax_in_place(&mut probability);
        let label = usize::from(logits[1] > logits[0]);
        Prediction {
            logits,
            probability,
            label,
        }
    }

    pub fn prob_abnormal(&self) -> f64 {
        self.probability[1]
    }
}

pub fn one_hot(label: usize) -> [f64; 2] {
    if label == 0 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

/// Softmax cross-entropy of two logits against a one-hot label.
pub fn loss(logits: [f64; 2], label: [f64; 2]) -> f64 {
    // -log softmax_k = log(1 + exp(l_other - l_k)), evaluated as a softplus
    // so that nearly-certain predictions keep their tiny losses.
    let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
    label[0] * softplus(logits[1] - logits[0]) + label[1] * softplus(logits[0] - logits[1])
}

/// `ReLU(Â H W)` with a dense normalized adjacency.
pub fn gcn_forward(a_hat: &Matrix, h: &Matrix, w: &Matrix) -> Result<Matrix> {
    if a_hat.rows() != a_hat.cols() || a_hat.cols() != h.rows() || h.cols() != w.rows() {
        return Err(Error::contract(format!(
            "gcn_forward shapes Â {:?}, H {:?}, W {:?}",
            a_hat.shape(),
            h.shape(),
            w.shape()
        )));
    }
    let mut out = a_hat.matmul(h)?.matmul(w)?;
    out.map_inplace(|v| v.max(0.0));
    Ok(out)
}

/// Intermediate values retained by [`Model::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    h: Vec<f64>,
    z: Vec<f64>,
    scores: Vec<f64>,
    alpha: Vec<f64>,
    /// Layer inputs `X_0 .. X_{S-1}`; `X_0` holds the gated features.
    inputs: Vec<Matrix>,
    /// `Â X_l`.
    propagated: Vec<Matrix>,
    /// `Â X_l W_l` before the ReLU.
    pre_activations: Vec<Matrix>,
    output: Matrix,
    pooled: Vec<f64>,
    probability: [f64; 2],
}

impl ForwardCache {
    /// ReLU on/off pattern of every layer.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre_activations
            .iter()
            .flat_map(|m| m.as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }

    /// Every post-activation value, for inspection.
    pub fn activations(&self) -> impl Iterator<Item = f64> + '_ {
        self.inputs[1..]
            .iter()
            .chain(std::iter::once(&self.output))
            .flat_map(|m| m.as_slice().iter().copied())
    }

    pub fn attention(&self) -> &[f64] {
        &self.alpha
    }
}

/// Attention-gated graph convolutional classifier.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Params,
    graph: FeatureGraph,
}

impl Model {
    pub fn new(spec: ModelSpec, params: Params) -> Result<Self> {
        spec.validate()?;
        check_param_shapes(&spec, &params)?;
        let graph = FeatureGraph::build(&spec.topology, spec.num_bins())?;
        Ok(Model {
            spec,
            params,
            graph,
        })
    }

    pub fn init(spec: ModelSpec, seed: u64, init_scale: f64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::init(&spec.channels, init_scale, &mut rng);
        Self::new(spec, params)
    }

    pub fn graph(&self) -> &FeatureGraph {
        &self.graph
    }

    fn check_features(&self, features: &FrequencyFeatures) -> Result<()> {
        let want = (self.spec.num_joints(), self.spec.num_bins(), self.spec.channels[0]);
        let got = (features.num_joints(), features.num_bins(), features.channels());
        if want != got {
            return Err(Error::contract(format!(
                "features are {}x{}x{} (joints x bins x channels), model expects {}x{}x{}",
                got.0, got.1, got.2, want.0, want.1, want.2
            )));
        }
        if features.bin_spec != self.spec.bin_spec {
            return Err(Error::contract(format!(
                "features were binned with c = {}, model expects c = {}",
                features.bin_spec.c, self.spec.bin_spec.c
            )));
        }
        Ok(())
    }

    /// Attention, gating, `S` graph convolutions, mean pooling and the head.
    pub fn forward(&self, features: &FrequencyFeatures) -> Result<(Prediction, AttentionReport, ForwardCache)> {
        self.check_features(features)?;
        let cache = self.forward_raw(features.as_slice())?;
        let prediction = Prediction::from_logits(self.logits_of(&cache));
        let report = AttentionReport::from_alpha(
            &cache.alpha,
            features.as_slice(),
            self.spec.num_joints(),
            self.spec.num_bins(),
            features.channels(),
        );
        Ok((prediction, report, cache))
    }

    pub fn predict(&self, features: &FrequencyFeatures) -> Result<Prediction> {
        self.forward(features).map(|(p, _, _)| p)
    }

    /// Loss of one labelled example; used by finite-difference checks.
    pub fn example_loss(&self, features: &FrequencyFeatures, label: usize) -> Result<f64> {
        Ok(loss(self.predict(features)?.logits, one_hot(label)))
    }

    fn logits_of(&self, cache: &ForwardCache) -> [f64; 2] {
        let head = &self.params.head;
        let mut logits = [head.bias[0], head.bias[1]];
        for (r, &p) in cache.pooled.iter().enumerate() {
            logits[0] += p * head.w[(r, 0)];
            logits[1] += p * head.w[(r, 1)];
        }
        logits
    }

    pub(crate) fn forward_raw(&self, h: &[f64]) -> Result<ForwardCache> {
        check_finite(h)?;
        let (n, b, c) = (self.spec.num_joints(), self.spec.num_bins(), self.spec.channels[0]);
        let state = attention_state(h, n, b, &self.params.attention, self.spec.score_activation);

        // Gated features in graph node order (bin-major).
        let mut x = Matrix::zeros(self.graph.num_nodes(), c);
        let bins = b as f64;
        for joint in 0..n {
            for bin in 0..b {
                let src = joint * b + bin;
                let row = x.row_mut(self.graph.node_index(bin, joint));
                for (ch, dst) in row.iter_mut().enumerate() {
                    *dst = gate(bins, state.alpha[src], h[src * c + ch]);
                }
            }
        }

        let layers = self.spec.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut propagated = Vec::with_capacity(layers);
        let mut pre_activations = Vec::with_capacity(layers);
        for layer in &self.params.layers {
            let p = self.graph.propagation().matmul(&x)?;
            let y = p.matmul(&layer.w)?;
            let mut next = y.clone();
            next.map_inplace(|v| v.max(0.0));
            inputs.push(std::mem::replace(&mut x, next));
            propagated.push(p);
            pre_activations.push(y);
        }
        let output = x;

        let nodes = output.rows() as f64;
        let mut pooled = vec![0.0; output.cols()];
        for r in 0..output.rows() {
            for (acc, v) in pooled.iter_mut().zip(output.row(r)) {
                *acc += v;
            }
        }
        pooled.iter_mut().for_each(|v| *v /= nodes);

        let mut cache = ForwardCache {
            fingerprint: self.params.fingerprint(),
            h: h.to_vec(),
            z: state.z,
            scores: state.scores,
            alpha: state.alpha,
            inputs,
            propagated,
            pre_activations,
            output,
            pooled,
            probability: [0.0; 2],
        };
        let mut probability = self.logits_of(&cache);
        softmax_in_place(&mut probability);
        cache.probability = probability;
        Ok(cache)
    }

    /// Exact gradients of the cross-entropy loss for the example cached by
    /// the matching forward pass.
    pub fn backward(&self, cache: &ForwardCache, label: usize) -> Result<Params> {
        if cache.fingerprint != self.params.fingerprint() {
            return Err(Error::contract("forward cache was produced by different parameters"));
        }
        let (n, b, c) = (self.spec.num_joints(), self.spec.num_bins(), self.spec.channels[0]);
        if cache.h.len() != n * b * c || cache.inputs.len() != self.spec.num_layers() {
            return Err(Error::contract("forward cache shape does not match the model"));
        }
        let mut grads = self.params.zeros_like();
        let target = one_hot(label);
        let d_logits = [cache.probability[0] - target[0], cache.probability[1] - target[1]];

        // head
        let head = &self.params.head;
        let mut d_pooled = vec![0.0; cache.pooled.len()];
        for (r, &p) in cache.pooled.iter().enumerate() {
            for k in 0..2 {
                grads.head.w[(r, k)] = p * d_logits[k];
                d_pooled[r] += head.w[(r, k)] * d_logits[k];
            }
        }
        grads.head.bias.copy_from_slice(&d_logits);

        // mean pooling
        let nodes = cache.output.rows();
        let mut d_x = Matrix::zeros(nodes, cache.output.cols());
        for r in 0..nodes {
            for (d, &g) in d_x.row_mut(r).iter_mut().zip(&d_pooled) {
                *d = g / nodes as f64;
            }
        }

        // graph convolutions
        for l in (0..self.spec.num_layers()).rev() {
            let mut d_y = d_x;
            for (d, &y) in d_y.as_mut_slice().iter_mut().zip(cache.pre_activations[l].as_slice()) {
                if y <= 0.0 {
                    *d = 0.0;
                }
            }
            grads.layers[l].w = cache.propagated[l].t_matmul(&d_y)?;
            let d_p = d_y.matmul_t(&self.params.layers[l].w)?;
            // Â is symmetric, so Âᵀ dP = Â dP.
            d_x = self.graph.propagation().matmul(&d_p)?;
        }

        // gating: X0[(b,i)] = B α[i][b] h[i][b]
        let bins = b as f64;
        let mut d_alpha = vec![0.0; n * b];
        for joint in 0..n {
            for bin in 0..b {
                let src = joint * b + bin;
                let row = d_x.row(self.graph.node_index(bin, joint));
                d_alpha[src] = bins * crate::linalg::dot(row, &cache.h[src * c..(src + 1) * c]);
            }
        }

        // softmax over bins, then score activation, then w_αᵀ z and tanh(W_z h)
        let attention = &self.params.attention;
        let activation = self.spec.score_activation;
        for joint in 0..n {
            let range = joint * b..(joint + 1) * b;
            let alpha = &cache.alpha[range.clone()];
            let weighted: f64 = alpha.iter().zip(&d_alpha[range.clone()]).map(|(a, d)| a * d).sum();
            for node in range {
                let d_score = cache.alpha[node] * (d_alpha[node] - weighted);
                let d_raw = d_score * activation.grad_from_output(cache.scores[node]);
                let z = &cache.z[node * c..(node + 1) * c];
                let h = &cache.h[node * c..(node + 1) * c];
                for r in 0..c {
                    grads.attention.w_alpha[r] += d_raw * z[r];
                    let d_pre = d_raw * attention.w_alpha[r] * (1.0 - z[r] * z[r]);
                    for (col, &hv) in h.iter().enumerate() {
                        grads.attention.w_z[(r, col)] += d_pre * hv;
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn check_param_shapes(spec: &ModelSpec, params: &Params) -> Result<()> {
    let c0 = spec.channels[0];
    let mismatch = |what: &str| Err(Error::ModelMismatch(format!("{what} has the wrong shape")));
    if params.attention.w_z.shape() != (c0, c0) {
        return mismatch("attention.w_z");
    }
    if params.attention.w_alpha.len() != c0 {
        return mismatch("attention.w_alpha");
    }
    if params.layers.len() != spec.num_layers() {
        return Err(Error::ModelMismatch(format!(
            "{} layers stored, architecture has {}",
            params.layers.len(),
            spec.num_layers()
        )));
    }
    for (l, (layer, w)) in params.layers.iter().zip(spec.channels.windows(2)).enumerate() {
        if layer.w.shape() != (w[0], w[1]) {
            return mismatch(&format!("layer{l}.w"));
        }
    }
    if params.head.w.shape() != (*spec.channels.last().unwrap(), 2) || params.head.bias.len() != 2 {
        return mismatch("head");
    }
    if !params.is_finite() {
        return Err(Error::ModelMismatch("non-finite parameter values".into()));
    }
    Ok(())
}
