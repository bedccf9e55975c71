//! Per-joint magnitude spectra compressed into exponentially widening bins.

mod binning;
mod fft;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use binning::{bin_spectrum, bin_widths, BinSpec, CEILING_SWITCH, DEFAULT_GROWTH, DEFAULT_NUM_BINS, FIRST_WIDTH};
pub use fft::{dft_naive, fft_bluestein, fft_real, magnitude_half_spectrum};

use crate::error::{Error, Result};
use crate::pose::PoseSequence;

/// x and y trajectories.
pub const CHANNELS: usize = 2;

/// Binned magnitudes for every (joint, bin, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFeatures {
    num_joints: usize,
    num_bins: usize,
    /// Joint-major: `(joint * B + bin) * C + channel`.
    data: Vec<f64>,
    pub bin_edges: Vec<usize>,
    pub bin_spec: BinSpec,
    pub fps: f64,
    pub num_frames: usize,
}

impl FrequencyFeatures {
    pub fn from_data(
        num_joints: usize,
        bin_spec: BinSpec,
        data: Vec<f64>,
        fps: f64,
        num_frames: usize,
    ) -> Result<Self> {
        bin_spec.validate()?;
        let num_bins = bin_spec.num_bins;
        if data.len() != num_joints * num_bins * CHANNELS {
            return Err(Error::contract(format!(
                "feature data has {} values, expected {num_joints}x{num_bins}x{CHANNELS}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Format(format!("feature value {v} is not a finite magnitude")));
        }
        Ok(FrequencyFeatures {
            num_joints,
            num_bins,
            data,
            bin_edges: bin_spec.edges(),
            bin_spec,
            fps,
            num_frames,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn channels(&self) -> usize {
        CHANNELS
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, joint: usize, bin: usize, channel: usize) -> f64 {
        self.data[(joint * self.num_bins + bin) * CHANNELS + channel]
    }

    /// Feature vector `h_{b,i}` across channels.
    #[inline]
    pub fn node(&self, joint: usize, bin: usize) -> &[f64] {
        let start = (joint * self.num_bins + bin) * CHANNELS;
        &self.data[start..start + CHANNELS]
    }

    /// Applies a joint relabeling: old joint `j` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        let block = self.num_bins * CHANNELS;
        for (j, &p) in perm.iter().enumerate() {
            out.data[p * block..(p + 1) * block].copy_from_slice(&self.data[j * block..(j + 1) * block]);
        }
        out
    }

    /// Writes `joint,bin,channel,value`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["joint", "bin", "channel", "value"])?;
        for j in 0..self.num_joints {
            for b in 0..self.num_bins {
                for c in 0..CHANNELS {
                    w.write_record([
                        j.to_string(),
                        b.to_string(),
                        c.to_string(),
                        self.get(j, b, c).to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes the CSV and its key-value sidecar (same stem, `.toml`).
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let file = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let sidecar = Sidecar {
            c: self.bin_spec.c,
            num_bins: self.num_bins,
            first_width: FIRST_WIDTH,
            ceiling_switch: CEILING_SWITCH,
            num_joints: self.num_joints,
            channels: CHANNELS,
            fps: self.fps,
            num_frames: self.num_frames,
            bin_edges: self.bin_edges.clone(),
        };
        let path = sidecar_path(csv_path);
        let text = toml::to_string(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        if !csv_path.exists() {
            return Err(Error::MissingInput(csv_path.to_path_buf()));
        }
        let path = sidecar_path(csv_path);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Sidecar =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if meta.channels != CHANNELS {
            return Err(Error::Format(format!("sidecar declares {} channels", meta.channels)));
        }
        if meta.first_width != FIRST_WIDTH || meta.ceiling_switch != CEILING_SWITCH {
            return Err(Error::Format("sidecar bin constants differ from this build".into()));
        }
        let spec = BinSpec::new(meta.c, meta.num_bins)?;
        if spec.edges() != meta.bin_edges {
            return Err(Error::Format("sidecar bin edges disagree with its bin spec".into()));
        }

        let n = meta.num_joints * meta.num_bins * CHANNELS;
        let mut data = vec![f64::NAN; n];
        let mut reader = csv::Reader::from_path(csv_path)?;
        let header = reader.headers()?.clone();
        if header != vec!["joint", "bin", "channel", "value"] {
            return Err(Error::Format(format!("unexpected feature header {header:?}")));
        }
        for record in reader.records() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let index = |i: usize| -> Result<usize> {
                field(i)
                    .parse()
                    .map_err(|_| Error::Format(format!("bad index {:?} in feature row", field(i))))
            };
            let (j, b, c) = (index(0)?, index(1)?, index(2)?);
            let value: f64 = field(3)
                .parse()
                .map_err(|_| Error::Format(format!("bad value {:?} in feature row", field(3))))?;
            if j >= meta.num_joints || b >= meta.num_bins || c >= CHANNELS {
                return Err(Error::Format(format!("feature row ({j}, {b}, {c}) out of range")));
            }
            data[(j * meta.num_bins + b) * CHANNELS + c] = value;
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("feature file is missing rows".into()));
        }
        Self::from_data(meta.num_joints, spec, data, meta.fps, meta.num_frames)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    c: f64,
    num_bins: usize,
    first_width: f64,
    ceiling_switch: f64,
    num_joints: usize,
    channels: usize,
    fps: f64,
    num_frames: usize,
    bin_edges: Vec<usize>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("toml")
}

/// Mean-removed magnitude spectrum of each joint's x and y trajectory, binned.
pub fn extract_features(seq: &PoseSequence, spec: &BinSpec) -> Result<FrequencyFeatures> {
    spec.validate()?;
    if !seq.is_gap_free() {
        return Err(Error::contract("feature extraction needs a gap-free sequence"));
    }
    let n = seq.num_joints();
    let mut data = Vec::with_capacity(n * spec.num_bins * CHANNELS);
    let mut per_channel = [Vec::new(), Vec::new()];
    for joint in 0..n {
        for (channel, slot) in per_channel.iter_mut().enumerate() {
            let mut traj = seq.trajectory(joint, channel);
            let mean = traj.iter().sum::<f64>() / traj.len() as f64;
            traj.iter_mut().for_each(|v| *v -= mean);
            let magnitudes = magnitude_half_spectrum(&fft_real(&traj));
            let (bins, _) = bin_spectrum(&magnitudes, spec).map_err(|e| match e {
                Error::InsufficientLength { available, required, min_frames, .. } => {
                    Error::InsufficientLength {
                        available,
                        required,
                        min_frames,
                        context: format!(" (joint {joint}, channel {})", ["x", "y"][channel]),
                    }
                }
                other => other,
            })?;
            *slot = bins;
        }
        for b in 0..spec.num_bins {
            data.extend(per_channel.iter().map(|bins| bins[b]));
        }
    }
    FrequencyFeatures::from_data(n, *spec, data, seq.fps, seq.num_frames())
}
