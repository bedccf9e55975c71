//! Pose sequence ingestion: keypoint files, gap filling and normalization.

mod openpose;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use openpose::{load_sequence, parse_keypoint_frame, serialize_keypoint_frame, write_sequence};

use crate::error::{Error, Result};
use crate::graph::SkeletonTopology;

/// Frame rates outside this range are accepted with a warning.
pub const NOMINAL_FPS: (f64, f64) = (24.0, 60.0);

const MIN_TORSO_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Zero marks a missing detection.
    pub confidence: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub fn new(x: f64, y: f64, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Format(format!("confidence {confidence} outside [0, 1]")));
        }
        if confidence > 0.0 && !(x.is_finite() && y.is_finite()) {
            return Err(Error::Format(format!("non-finite keypoint ({x}, {y})")));
        }
        Ok(Keypoint { x, y, confidence })
    }

    #[inline]
    pub fn is_missing(&self) -> bool {
        self.confidence == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub joints: Vec<Keypoint>,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
    pub subject_id: String,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: f64, subject_id: impl Into<String>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidConfig(format!("fps must be positive, got {fps}")));
        }
        if frames.len() < 2 {
            return Err(Error::InsufficientLength {
                available: frames.len(),
                required: 2,
                min_frames: 2,
                context: " (pose sequence)".into(),
            });
        }
        let n = frames[0].joints.len();
        if let Some(bad) = frames.iter().find(|f| f.joints.len() != n) {
            return Err(Error::TopologyMismatch {
                expected: n,
                found: bad.joints.len(),
            });
        }
        if fps < NOMINAL_FPS.0 || fps > NOMINAL_FPS.1 {
            log::warn!(
                "frame rate {fps} is outside the nominal {}-{} fps range",
                NOMINAL_FPS.0,
                NOMINAL_FPS.1
            );
        }
        Ok(PoseSequence {
            frames,
            fps,
            subject_id: subject_id.into(),
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_joints(&self) -> usize {
        self.frames[0].joints.len()
    }

    /// The x or y trajectory of one joint.
    pub fn trajectory(&self, joint: usize, channel: usize) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| {
                let k = f.joints[joint];
                if channel == 0 {
                    k.x
                } else {
                    k.y
                }
            })
            .collect()
    }

    pub fn is_gap_free(&self) -> bool {
        self.frames.iter().all(|f| f.joints.iter().all(|k| !k.is_missing()))
    }

    /// Writes `frame,joint,x,y`, one row per joint per frame.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame", "joint", "x", "y"])?;
        for frame in &self.frames {
            for (j, k) in frame.joints.iter().enumerate() {
                w.write_record([
                    frame.frame_index.to_string(),
                    j.to_string(),
                    k.x.to_string(),
                    k.y.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Fills interior gaps by per-coordinate linear interpolation and the ends by
/// constant extension. Observed keypoints are left untouched.
pub fn interpolate_missing(seq: &PoseSequence) -> Result<PoseSequence> {
    let mut out = seq.clone();
    let t_len = seq.num_frames();
    for joint in 0..seq.num_joints() {
        let observed: Vec<usize> = (0..t_len)
            .filter(|&t| !seq.frames[t].joints[joint].is_missing())
            .collect();
        let (&first, &last) = match (observed.first(), observed.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::UnrecoverableJoint { joint }),
        };
        let at = |t: usize| seq.frames[t].joints[joint];
        for t in 0..first {
            out.frames[t].joints[joint] = at(first);
        }
        for t in last + 1..t_len {
            out.frames[t].joints[joint] = at(last);
        }
        for pair in observed.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (ka, kb) = (at(a), at(b));
            for t in a + 1..b {
                let w = (t - a) as f64 / (b - a) as f64;
                out.frames[t].joints[joint] = Keypoint {
                    x: ka.x + w * (kb.x - ka.x),
                    y: ka.y + w * (kb.y - ka.y),
                    confidence: ka.confidence.min(kb.confidence),
                };
            }
        }
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Root-centres every frame and divides by the median root-to-neck distance.
pub fn normalize_sequence(seq: &PoseSequence, topology: &SkeletonTopology) -> Result<PoseSequence> {
    if seq.num_joints() != topology.num_joints {
        return Err(Error::TopologyMismatch {
            expected: topology.num_joints,
            found: seq.num_joints(),
        });
    }
    if !seq.is_gap_free() {
        return Err(Error::contract("normalize_sequence needs a gap-free sequence"));
    }
    let (root, neck) = (topology.root, topology.neck);
    let mut torso: Vec<f64> = seq
        .frames
        .iter()
        .map(|f| {
            let (r, k) = (f.joints[root], f.joints[neck]);
            (k.x - r.x).hypot(k.y - r.y)
        })
        .collect();
    let scale = median(&mut torso);
    if scale.is_nan() || scale <= MIN_TORSO_SCALE {
        return Err(Error::DegeneratePose { scale });
    }
    let mut out = seq.clone();
    for frame in &mut out.frames {
        let origin = frame.joints[root];
        for k in &mut frame.joints {
            k.x = (k.x - origin.x) / scale;
            k.y = (k.y - origin.y) / scale;
        }
    }
    Ok(out)
}

/// Gap filling followed by normalization.
pub fn prepare_sequence(seq: &PoseSequence, topology: &SkeletonTopology) -> Result<PoseSequence> {
    normalize_sequence(&interpolate_missing(seq)?, topology)
}
