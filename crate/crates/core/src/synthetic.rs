//! Labelled skeleton sequences with controlled frequency content.
//!
//! Every joint sits at the topology's rest pose plus independent Gaussian
//! jitter. Each signal joint also oscillates on both axes at a frequency drawn
//! from the band of its class: class 0 uses the low band, class 1 the higher
//! one.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SkeletonTopology;
use crate::pose::{Keypoint, PoseFrame, PoseSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub topology: String,
    pub frames: usize,
    pub fps: f64,
    /// Oscillation band of class 0, in Hz.
    pub band0: (f64, f64),
    /// Oscillation band of class 1, in Hz.
    pub band1: (f64, f64),
    pub signal_joints: Vec<usize>,
    /// Oscillation amplitude in torso units.
    pub amplitude: f64,
    /// Standard deviation of the per-frame jitter, in torso units.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Snap drawn frequencies to multiples of `fps / frames`, which keeps
    /// all energy in a single DFT coefficient.
    pub on_grid: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topology: "body25".into(),
            frames: 1000,
            fps: 30.0,
            band0: (0.5, 1.5),
            band1: (3.0, 4.0),
            signal_joints: vec![1, 4],
            amplitude: 0.1,
            noise_sigma: 0.02,
            seed: 0,
            on_grid: true,
        }
    }
}

impl SynthConfig {
    pub fn band(&self, label: usize) -> (f64, f64) {
        if label == 0 {
            self.band0
        } else {
            self.band1
        }
    }

    pub fn validate(&self, topology: &SkeletonTopology) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidConfig("at least two frames are required".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidConfig(format!("fps must be positive, got {}", self.fps)));
        }
        let nyquist = self.fps / 2.0;
        for (lo, hi) in [self.band0, self.band1] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidConfig(format!("band [{lo}, {hi}] is not a positive interval")));
            }
            if hi >= nyquist {
                return Err(Error::Aliasing { edge: hi, nyquist });
            }
        }
        let (a, b) = (self.band0, self.band1);
        if a.0 <= b.1 && b.0 <= a.1 {
            return Err(Error::InvalidConfig(format!(
                "bands [{}, {}] and [{}, {}] overlap",
                a.0, a.1, b.0, b.1
            )));
        }
        if self.signal_joints.is_empty() {
            return Err(Error::InvalidConfig("no signal joints".into()));
        }
        if let Some(&j) = self.signal_joints.iter().find(|&&j| j >= topology.num_joints) {
            return Err(Error::InvalidConfig(format!(
                "signal joint {j} out of range for {} joints",
                topology.num_joints
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidConfig("amplitude must be nonnegative".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise sigma must be nonnegative".into()));
        }
        if self.on_grid {
            for label in 0..2 {
                grid_range(self, label)?;
            }
        }
        Ok(())
    }
}

/// DFT indices whose frequencies lie in the band of `label`.
fn grid_range(cfg: &SynthConfig, label: usize) -> Result<(usize, usize)> {
    let (lo, hi) = cfg.band(label);
    let resolution = cfg.fps / cfg.frames as f64;
    let first = ((lo / resolution).ceil() as usize).max(1);
    let last = (hi / resolution).floor() as usize;
    if first > last || 2 * last >= cfg.frames {
        return Err(Error::InvalidConfig(format!(
            "band [{lo}, {hi}] Hz holds no DFT frequency at {} frames / {} fps",
            cfg.frames, cfg.fps
        )));
    }
    Ok((first, last))
}

/// Frequency in Hz actually used for one oscillation.
fn draw_frequency(cfg: &SynthConfig, label: usize, rng: &mut impl Rng) -> Result<f64> {
    if cfg.on_grid {
        let (first, last) = grid_range(cfg, label)?;
        let k = rng.random_range(first..=last);
        Ok(k as f64 * cfg.fps / cfg.frames as f64)
    } else {
        let (lo, hi) = cfg.band(label);
        Ok(if lo == hi { lo } else { rng.random_range(lo..=hi) })
    }
}

pub fn generate_sequence(
    cfg: &SynthConfig,
    topology: &SkeletonTopology,
    label: usize,
    seed: u64,
    subject_id: impl Into<String>,
) -> Result<PoseSequence> {
    cfg.validate(topology)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = topology.rest_pose();

    struct Oscillation {
        joint: usize,
        omega: f64,
        phase: (f64, f64),
    }
    let mut oscillations = Vec::with_capacity(cfg.signal_joints.len());
    for &joint in &cfg.signal_joints {
        let freq = draw_frequency(cfg, label, &mut rng)?;
        oscillations.push(Oscillation {
            joint,
            omega: 2.0 * PI * freq / cfg.fps,
            phase: (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)),
        });
    }

    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let frames = (0..cfg.frames)
        .map(|t| {
            let mut joints: Vec<Keypoint> = rest
                .iter()
                .map(|&(x, y)| {
                    let (dx, dy) = if cfg.noise_sigma > 0.0 {
                        (noise.sample(&mut rng), noise.sample(&mut rng))
                    } else {
                        (0.0, 0.0)
                    };
                    Keypoint {
                        x: x + dx,
                        y: y + dy,
                        confidence: 1.0,
                    }
                })
                .collect();
            for osc in &oscillations {
                let angle = osc.omega * t as f64;
                let k = &mut joints[osc.joint];
                k.x += cfg.amplitude * (angle + osc.phase.0).sin();
                k.y += cfg.amplitude * (angle + osc.phase.1).sin();
            }
            PoseFrame {
                joints,
                frame_index: t,
            }
        })
        .collect();
    PoseSequence::new(frames, cfg.fps, subject_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One row of a dataset manifest: `sequence_id,label,split,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sequence_id: String,
    pub label: usize,
    pub split: Split,
    pub seed: u64,
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in entries {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let entries = r.deserialize().collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
    if let Some(bad) = entries.iter().find(|e| e.label > 1) {
        return Err(Error::Format(format!("{}: label {} is not 0 or 1", bad.sequence_id, bad.label)));
    }
    Ok(entries)
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub train: Vec<(PoseSequence, usize)>,
    pub test: Vec<(PoseSequence, usize)>,
    pub manifest: Vec<ManifestEntry>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Training examples per class for a 2:1 split.
pub fn train_count(n_per_class: usize) -> usize {
    ((2 * n_per_class + 1) / 3).clamp(1, n_per_class.saturating_sub(1).max(1))
}

/// `2 * n_per_class` balanced sequences split 2:1 into train and test per class.
pub fn generate_dataset(cfg: &SynthConfig, n_per_class: usize, seed: u64) -> Result<SynthDataset> {
    if n_per_class < 2 {
        return Err(Error::InvalidConfig("at least two sequences per class are required".into()));
    }
    let topology = SkeletonTopology::resolve(&cfg.topology)?;
    cfg.validate(&topology)?;
    let n_train = train_count(n_per_class);
    let mut used = HashSet::new();
    let mut state = seed;
    let mut dataset = SynthDataset {
        train: Vec::new(),
        test: Vec::new(),
        manifest: Vec::new(),
    };
    for label in 0..2 {
        for j in 0..n_per_class {
            let index = label * n_per_class + j;
            let seq_seed = loop {
                state = splitmix64(state);
                if used.insert(state) {
                    break state;
                }
            };
            let id = format!("seq_{index:04}");
            let seq = generate_sequence(cfg, &topology, label, seq_seed, id.clone())?;
            let split = if j < n_train { Split::Train } else { Split::Test };
            dataset.manifest.push(ManifestEntry {
                sequence_id: id,
                label,
                split,
                seed: seq_seed,
            });
            match split {
                Split::Train => dataset.train.push((seq, label)),
                Split::Test => dataset.test.push((seq, label)),
            }
        }
    }
    Ok(dataset)
}
