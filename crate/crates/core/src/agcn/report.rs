use std::io::Write;

use crate::error::{Error, Result};

/// Attention weights of one sequence and the joint ranking derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    /// `alpha[i][b]`; each row sums to one.
    pub alpha: Vec<Vec<f64>>,
    /// Attention-weighted feature aggregate per joint, `N x C`.
    pub aggregate: Vec<Vec<f64>>,
    /// Largest deviation from uniform attention, `max_b |α[i][b] - 1/B|`.
    pub joint_importance: Vec<f64>,
    /// Joint indices by descending importance; ties keep index order.
    pub ranking: Vec<usize>,
}

impl AttentionReport {
    pub(crate) fn from_alpha(alpha: &[f64], h: &[f64], joints: usize, bins: usize, channels: usize) -> Self {
        let uniform = 1.0 / bins as f64;
        let rows: Vec<Vec<f64>> = alpha.chunks(bins).map(<[f64]>::to_vec).collect();
        let aggregate = (0..joints)
            .map(|i| {
                let mut v = vec![0.0; channels];
                for b in 0..bins {
                    let node = i * bins + b;
                    for (c, acc) in v.iter_mut().enumerate() {
                        *acc += alpha[node] * h[node * channels + c];
                    }
                }
                v
            })
            .collect();
        let joint_importance: Vec<f64> = rows
            .iter()
            .map(|row| row.iter().map(|a| (a - uniform).abs()).fold(0.0, f64::max))
            .collect();
        Self {
            ranking: rank_descending(&joint_importance),
            alpha: rows,
            aggregate,
            joint_importance,
        }
    }

    pub fn num_joints(&self) -> usize {
        self.alpha.len()
    }

    /// `joint,bin,alpha`, one row per (joint, bin).
    pub fn write_alpha_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["joint", "bin", "alpha"])?;
        for (j, row) in self.alpha.iter().enumerate() {
            for (b, a) in row.iter().enumerate() {
                w.write_record([j.to_string(), b.to_string(), a.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// `joint,importance` in ranked order.
    pub fn write_ranking_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["joint", "importance"])?;
        for &j in &self.ranking {
            w.write_record([j.to_string(), self.joint_importance[j].to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Plain-text bar chart of the ranking.
    pub fn render_bars(&self, names: &[String], width: usize) -> String {
        let top = self.joint_importance.iter().copied().fold(0.0, f64::max);
        let label_width = names.iter().map(String::len).max().unwrap_or(0);
        let mut out = String::new();
        for &j in &self.ranking {
            let value = self.joint_importance[j];
            let len = if top > 0.0 {
                (value / top * width as f64).round() as usize
            } else {
                0
            };
            let name = names.get(j).map_or("", String::as_str);
            out.push_str(&format!(
                "{j:>3} {name:<label_width$} {:<width$} {value:.6}\n",
                "#".repeat(len)
            ));
        }
        out
    }
}

pub(crate) fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}
