use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{loss, one_hot, Model, ModelSpec};
use super::params::Params;
use crate::error::{Error, Result};
use crate::frequency::FrequencyFeatures;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// One update per epoch on the mean gradient; otherwise one update per
    /// example in a seeded shuffled order.
    pub full_batch: bool,
    /// Multiplier on the Glorot bound.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-2,
            seed: 0,
            full_batch: true,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init scale must be positive".into()));
        }
        Ok(())
    }
}

/// Mean loss and accuracy over the training set, measured before that
/// epoch's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub type Example = (FrequencyFeatures, usize);

struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    fn new(params: &Params) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grads: &Params, lr: f64) {
        self.step += 1;
        let g = grads.flatten();
        let bias1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bias2 = 1.0 - ADAM_BETA2.powi(self.step);
        let mut m = self.m.flatten();
        let mut v = self.v.flatten();
        for ((m, v), g) in m.iter_mut().zip(v.iter_mut()).zip(&g) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        }
        let mut offset = 0;
        params.for_each_group_mut(|_, values| {
            for p in values.iter_mut() {
                let m_hat = m[offset] / bias1;
                let v_hat = v[offset] / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                offset += 1;
            }
        });
        write_flat(&mut self.m, &m);
        write_flat(&mut self.v, &v);
    }
}

fn write_flat(params: &mut Params, flat: &[f64]) {
    let mut offset = 0;
    params.for_each_group_mut(|_, values| {
        values.copy_from_slice(&flat[offset..offset + values.len()]);
        offset += values.len();
    });
}

fn check_dataset(dataset: &[Example]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::DegenerateDataset("no training examples".into()));
    }
    if let Some((_, bad)) = dataset.iter().find(|(_, l)| *l > 1) {
        return Err(Error::DegenerateDataset(format!("label {bad} is not 0 or 1")));
    }
    let positives = dataset.iter().filter(|(_, l)| *l == 1).count();
    if positives == 0 || positives == dataset.len() {
        return Err(Error::DegenerateDataset(format!(
            "all {} examples carry label {}",
            dataset.len(),
            dataset[0].1
        )));
    }
    Ok(())
}

/// Mean loss, accuracy and (optionally) mean gradient over a set of examples.
/// Summation runs in dataset order so results are reproducible.
pub fn evaluate(model: &Model, dataset: &[Example], with_grads: bool) -> Result<(f64, f64, Option<Params>)> {
    let mut total_loss = 0.0;
    let mut correct = 0;
    let mut grads = with_grads.then(|| model.params.zeros_like());
    let scale = 1.0 / dataset.len() as f64;
    for (features, label) in dataset {
        let (prediction, _, cache) = model.forward(features)?;
        total_loss += loss(prediction.logits, one_hot(*label));
        correct += usize::from(prediction.label == *label);
        if let Some(acc) = grads.as_mut() {
            acc.add_scaled(&model.backward(&cache, *label)?, scale);
        }
    }
    Ok((total_loss * scale, correct as f64 * scale, grads))
}

/// Trains a freshly initialized model with Adam on the cross-entropy loss.
pub fn train(spec: ModelSpec, dataset: &[Example], config: &TrainConfig) -> Result<(Model, Vec<EpochStats>)> {
    config.validate()?;
    check_dataset(dataset)?;
    let mut model = Model::init(spec, config.seed, config.init_scale)?;
    let mut adam = Adam::new(&model.params);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f0d_e5ce_47a1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.full_batch {
            let (loss, accuracy, grads) = evaluate(&model, dataset, true)?;
            history.push(EpochStats { epoch, loss, accuracy });
            adam.update(&mut model.params, &grads.expect("requested"), config.learning_rate);
        } else {
            let (loss, accuracy, _) = evaluate(&model, dataset, false)?;
            history.push(EpochStats { epoch, loss, accuracy });
            order.shuffle(&mut order_rng);
            for &i in &order {
                let (features, label) = &dataset[i];
                let (_, _, cache) = model.forward(features)?;
                let grads = model.backward(&cache, *label)?;
                adam.update(&mut model.params, &grads, config.learning_rate);
            }
        }
        if !model.params.is_finite() {
            return Err(Error::contract(format!("parameters diverged at epoch {epoch}")));
        }
    }
    Ok((model, history))
}
