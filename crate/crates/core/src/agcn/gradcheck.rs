//! Central-difference verification of [`Model::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{Model, ModelSpec};
use super::params::Params;
use crate::error::Result;
use crate::frequency::{BinSpec, FrequencyFeatures, CHANNELS};
use crate::graph::SkeletonTopology;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates whose ±ε probes flipped a ReLU, where the loss is not
    /// differentiable along that axis.
    pub kinks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.groups.iter().all(|g| g.max_relative_error < tolerance)
    }

    /// Combines reports group by group.
    pub fn merge(&mut self, other: &GradCheckReport) {
        if self.groups.is_empty() {
            self.groups = other.groups.clone();
            return;
        }
        for (mine, theirs) in self.groups.iter_mut().zip(&other.groups) {
            mine.max_relative_error = mine.max_relative_error.max(theirs.max_relative_error);
            mine.checked += theirs.checked;
            mine.kinks += theirs.kinks;
        }
    }
}

/// Compares every analytic partial derivative with `(L(θ+ε) - L(θ-ε)) / 2ε`.
pub fn check_gradients(model: &Model, features: &FrequencyFeatures, label: usize, eps: f64) -> Result<GradCheckReport> {
    let (_, _, cache) = model.forward(features)?;
    let base_pattern = cache.activation_pattern();
    let analytic = model.backward(&cache, label)?.groups().iter().map(|g| g.to_vec()).collect::<Vec<_>>();
    let names = model.params.group_names();

    let mut probe = model.clone();
    let mut groups = Vec::with_capacity(names.len());
    for (g, name) in names.into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        let mut kinks = 0;
        for k in 0..analytic[g].len() {
            let original = nth_value(&model.params, g, k);
            let mut eval = |delta: f64| -> Result<(f64, bool)> {
                set_nth_value(&mut probe.params, g, k, original + delta);
                let (prediction, _, c) = probe.forward(features)?;
                let same = c.activation_pattern() == base_pattern;
                Ok((super::model::loss(prediction.logits, super::model::one_hot(label)), same))
            };
            let (plus, same_plus) = eval(eps)?;
            let (minus, same_minus) = eval(-eps)?;
            set_nth_value(&mut probe.params, g, k, original);
            if !(same_plus && same_minus) {
                kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[g][k], numeric));
            checked += 1;
        }
        groups.push(GroupError {
            name,
            max_relative_error: worst,
            checked,
            kinks,
        });
    }
    Ok(GradCheckReport { groups })
}

fn nth_value(params: &Params, group: usize, k: usize) -> f64 {
    params.groups()[group][k]
}

fn set_nth_value(params: &mut Params, group: usize, k: usize, value: f64) {
    let mut g = 0;
    params.for_each_group_mut(|_, values| {
        if g == group {
            values[k] = value;
        }
        g += 1;
    });
}

/// A random toy5 model with three bins and its input, for gradient checks.
/// The scoring vector is drawn too, so the attention path carries gradient.
pub fn random_toy_problem(seed: u64, hidden: &[usize]) -> Result<(Model, FrequencyFeatures, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bin_spec = BinSpec::new(1.5, 3)?;
    let spec = ModelSpec::new(SkeletonTopology::builtin("toy5")?, bin_spec, hidden)?;
    let mut model = Model::init(spec, rng.random(), 1.0)?;
    for w in model.params.attention.w_alpha.iter_mut() {
        *w = rng.random_range(-1.5..1.5);
    }
    for b in model.params.head.bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let data = (0..5 * 3 * CHANNELS).map(|_| rng.random_range(0.0..2.0)).collect();
    let features = FrequencyFeatures::from_data(5, bin_spec, data, 30.0, 64)?;
    let label = rng.random_range(0..2);
    Ok((model, features, label))
}
