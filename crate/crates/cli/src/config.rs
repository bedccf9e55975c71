//! Key-value run configuration. Command-line flags take precedence.

use std::path::Path;

use serde::Deserialize;
use skelfreq::frequency::{DEFAULT_GROWTH, DEFAULT_NUM_BINS};
use skelfreq::{Error, Result, SynthConfig};

pub const DEFAULT_FPS: f64 = 30.0;
pub const DEFAULT_TOPOLOGY: &str = "body25";
pub const DEFAULT_N_PER_CLASS: usize = 30;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub topology: Option<String>,
    pub seed: Option<u64>,
    pub fps: Option<f64>,
    pub c: Option<f64>,
    pub bins: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub full_batch: Option<bool>,
    pub init_scale: Option<f64>,
    pub score_activation: Option<String>,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_per_class: Option<usize>,
    pub frames: Option<usize>,
    pub band0: Option<(f64, f64)>,
    pub band1: Option<(f64, f64)>,
    pub signal_joints: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub on_grid: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn topology(&self, flag: Option<&String>) -> String {
        flag.cloned()
            .or_else(|| self.topology.clone())
            .unwrap_or_else(|| DEFAULT_TOPOLOGY.into())
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn fps(&self, flag: Option<f64>) -> f64 {
        flag.or(self.fps).unwrap_or(DEFAULT_FPS)
    }

    pub fn bin_spec(&self, c: Option<f64>, bins: Option<usize>) -> Result<skelfreq::BinSpec> {
        skelfreq::BinSpec::new(
            c.or(self.c).unwrap_or(DEFAULT_GROWTH),
            bins.or(self.bins).unwrap_or(DEFAULT_NUM_BINS),
        )
    }

    /// Synthetic-data settings layered as defaults < file < flags.
    pub fn synth(&self, flags: &crate::SynthArgs, topology: String, fps: f64, seed: u64) -> (SynthConfig, usize) {
        let d = SynthConfig::default();
        let s = &self.synth;
        let cfg = SynthConfig {
            topology,
            frames: flags.frames.or(s.frames).unwrap_or(d.frames),
            fps,
            band0: flags.band0.map(|b| (b.0, b.1)).or(s.band0).unwrap_or(d.band0),
            band1: flags.band1.map(|b| (b.0, b.1)).or(s.band1).unwrap_or(d.band1),
            signal_joints: flags
                .signal_joints
                .clone()
                .or_else(|| s.signal_joints.clone())
                .unwrap_or(d.signal_joints),
            amplitude: flags.amplitude.or(s.amplitude).unwrap_or(d.amplitude),
            noise_sigma: flags.noise_sigma.or(s.noise_sigma).unwrap_or(d.noise_sigma),
            seed,
            on_grid: if flags.off_grid { false } else { s.on_grid.unwrap_or(d.on_grid) },
        };
        let n = flags.n_per_class.or(s.n_per_class).unwrap_or(DEFAULT_N_PER_CLASS);
        (cfg, n)
    }
}
