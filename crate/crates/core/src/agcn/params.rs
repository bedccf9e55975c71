use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Feature transform and scoring vector of the bin attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// `C x C`
    pub w_z: Matrix,
    /// length `C`
    pub w_alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayerParams {
    /// `C_in x C_out`
    pub w: Matrix,
}

/// Affine map from pooled node features to two logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// `C_last x 2`
    pub w: Matrix,
    pub bias: Vec<f64>,
}

/// Every learnable value of a model. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub attention: AttentionParams,
    pub layers: Vec<GcnLayerParams>,
    pub head: HeadParams,
}

fn glorot(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    let bound = scale * (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches")
}

impl Params {
    /// Glorot-uniform weights scaled by `scale`; zero scoring vector and bias,
    /// so attention starts uniform.
    pub fn init(channels: &[usize], scale: f64, rng: &mut impl Rng) -> Self {
        let c0 = channels[0];
        let last = *channels.last().unwrap();
        Params {
            attention: AttentionParams {
                w_z: glorot(c0, c0, scale, rng),
                w_alpha: vec![0.0; c0],
            },
            layers: channels
                .windows(2)
                .map(|w| GcnLayerParams {
                    w: glorot(w[0], w[1], scale, rng),
                })
                .collect(),
            head: HeadParams {
                w: glorot(last, 2, scale, rng),
                bias: vec![0.0; 2],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_group_mut(|_, values| values.fill(0.0));
        out
    }

    pub fn group_names(&self) -> Vec<String> {
        let mut names = vec!["attention.w_z".to_string(), "attention.w_alpha".to_string()];
        names.extend((0..self.layers.len()).map(|l| format!("layer{l}.w")));
        names.push("head.w".into());
        names.push("head.bias".into());
        names
    }

    pub fn groups(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.attention.w_z.as_slice(), &self.attention.w_alpha];
        out.extend(self.layers.iter().map(|l| l.w.as_slice()));
        out.push(self.head.w.as_slice());
        out.push(&self.head.bias);
        out
    }

    /// Visits parameter groups in a fixed order with their names.
    pub fn for_each_group_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        f("attention.w_z", self.attention.w_z.as_mut_slice());
        f("attention.w_alpha", &mut self.attention.w_alpha);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{l}.w"), layer.w.as_mut_slice());
        }
        f("head.w", self.head.w.as_mut_slice());
        f("head.bias", &mut self.head.bias);
    }

    pub fn num_values(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.groups().concat()
    }

    pub fn l2_norm(&self) -> f64 {
        self.groups()
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        let src = other.flatten();
        let mut offset = 0;
        self.for_each_group_mut(|_, values| {
            for v in values.iter_mut() {
                *v += scale * src[offset];
                offset += 1;
            }
        });
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }

    /// Stable fingerprint of shapes and exact values.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for group in self.groups() {
            eat(group.len() as u64);
            for v in group {
                eat(v.to_bits());
            }
        }
        h
    }
}
