//! Exponentially widening frequency bins.
//!
//! Bin `n` spans `f0·cⁿ` spectrum indices, rounded while that width is below
//! the switch constant and rounded up from there on. Narrow bins therefore
//! keep full resolution at low frequencies, and the band above the last bin
//! is dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the first bin.
pub const FIRST_WIDTH: f64 = 1.0;
/// Widths at or above this use ceiling instead of rounding.
pub const CEILING_SWITCH: f64 = 3.0;
/// Largest single bin width accepted; keeps index arithmetic far from overflow.
const MAX_WIDTH: f64 = 1e9;

pub const DEFAULT_GROWTH: f64 = 1.15;
pub const DEFAULT_NUM_BINS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    /// Growth factor `c > 1`.
    pub c: f64,
    pub num_bins: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            c: DEFAULT_GROWTH,
            num_bins: DEFAULT_NUM_BINS,
        }
    }
}

impl BinSpec {
    pub fn new(c: f64, num_bins: usize) -> Result<Self> {
        let spec = BinSpec { c, num_bins };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 1.0) {
            return Err(Error::InvalidConfig(format!("bin growth c must be > 1, got {}", self.c)));
        }
        if self.num_bins == 0 {
            return Err(Error::InvalidConfig("at least one bin is required".into()));
        }
        let last = FIRST_WIDTH * self.c.powi(self.num_bins as i32 - 1);
        if last.is_nan() || last > MAX_WIDTH {
            return Err(Error::InvalidConfig(format!(
                "c = {} with {} bins gives a last bin width of {last:e}",
                self.c, self.num_bins
            )));
        }
        Ok(())
    }

    /// Widths in spectrum indices, one per bin.
    pub fn widths(&self) -> Vec<usize> {
        (0..self.num_bins)
            .map(|n| {
                let raw = FIRST_WIDTH * self.c.powi(n as i32);
                // f64::round is half-away-from-zero
                let w = if raw < CEILING_SWITCH { raw.round() } else { raw.ceil() };
                (w as usize).max(1)
            })
            .collect()
    }

    /// Bin boundaries in spectrum indices, starting at 1 (DC is excluded).
    pub fn edges(&self) -> Vec<usize> {
        let mut edges = Vec::with_capacity(self.num_bins + 1);
        edges.push(1);
        for w in self.widths() {
            edges.push(edges.last().unwrap() + w);
        }
        edges
    }

    /// Half-spectrum length needed to fill every bin.
    pub fn required_coefficients(&self) -> usize {
        *self.edges().last().unwrap()
    }

    /// Shortest real signal whose half spectrum fills every bin.
    pub fn min_frames(&self) -> usize {
        2 * (self.required_coefficients() - 1)
    }
}

pub fn bin_widths(spec: &BinSpec) -> Vec<usize> {
    spec.widths()
}

/// Mean magnitude per bin. Index 0 and everything past the last edge are
/// discarded.
pub fn bin_spectrum(magnitudes: &[f64], spec: &BinSpec) -> Result<(Vec<f64>, Vec<usize>)> {
    let edges = spec.edges();
    let required = *edges.last().unwrap();
    if magnitudes.len() < required {
        return Err(Error::InsufficientLength {
            available: magnitudes.len(),
            required,
            min_frames: spec.min_frames(),
            context: String::new(),
        });
    }
    let bins = edges
        .windows(2)
        .map(|e| {
            let range = &magnitudes[e[0]..e[1]];
            range.iter().sum::<f64>() / range.len() as f64
        })
        .collect();
    Ok((bins, edges))
}
