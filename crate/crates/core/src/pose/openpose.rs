//! OpenPose per-frame keypoint documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Keypoint, PoseFrame, PoseSequence};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
struct Document {
    #[serde(default = "default_version")]
    version: f64,
    people: Vec<Person>,
}

fn default_version() -> f64 {
    1.3
}

#[derive(Debug, Deserialize, Serialize)]
struct Person {
    #[serde(default)]
    person_id: Vec<i64>,
    pose_keypoints_2d: Vec<f64>,
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = text
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses one frame document; the first person is used and an empty
/// `people` array yields an all-missing frame of `num_joints` keypoints.
pub fn parse_keypoint_frame(raw: &[u8], num_joints: usize, frame_index: usize) -> Result<PoseFrame> {
    let doc: Document = serde_json::from_slice(raw).map_err(|e| Error::Parse {
        offset: byte_offset(raw, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Some(person) = doc.people.first() else {
        return Ok(PoseFrame {
            joints: vec![Keypoint::MISSING; num_joints],
            frame_index,
        });
    };
    let flat = &person.pose_keypoints_2d;
    if flat.len() % 3 != 0 {
        return Err(Error::Format(format!(
            "pose_keypoints_2d has {} values, not a multiple of 3",
            flat.len()
        )));
    }
    if flat.len() / 3 != num_joints {
        return Err(Error::TopologyMismatch {
            expected: num_joints,
            found: flat.len() / 3,
        });
    }
    let joints = flat
        .chunks_exact(3)
        .map(|t| Keypoint::new(t[0], t[1], t[2]))
        .collect::<Result<Vec<_>>>()?;
    Ok(PoseFrame {
        joints,
        frame_index,
    })
}

/// Inverse of [`parse_keypoint_frame`] for a single-person frame.
pub fn serialize_keypoint_frame(frame: &PoseFrame) -> String {
    let doc = Document {
        version: default_version(),
        people: vec![Person {
            person_id: vec![-1],
            pose_keypoints_2d: frame
                .joints
                .iter()
                .flat_map(|k| [k.x, k.y, k.confidence])
                .collect(),
        }],
    };
    serde_json::to_string(&doc).expect("keypoint document serializes")
}

/// The last run of ASCII digits in the file stem, e.g. `12` for
/// `video_000000000012_keypoints.json`.
fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let bytes = stem.as_bytes();
    let end = bytes.iter().rposition(u8::is_ascii_digit)? + 1;
    let start = bytes[..end]
        .iter()
        .rposition(|b| !b.is_ascii_digit())
        .map_or(0, |p| p + 1);
    stem[start..end].parse().ok()
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(u64, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            frame_number(&p)
                .map(|n| (n, p.clone()))
                .ok_or_else(|| Error::Format(format!("no frame number in {}", p.display())))
        })
        .collect::<Result<_>>()?;
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Loads a sequence from a directory of per-frame documents, or from a single
/// file holding a JSON array of them.
pub fn load_sequence(path: &Path, fps: f64, num_joints: usize) -> Result<PoseSequence> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let frames = if path.is_dir() {
        frame_files(path)?
            .iter()
            .enumerate()
            .map(|(index, file)| {
                let raw = std::fs::read(file).map_err(|e| Error::io(file, e))?;
                parse_keypoint_frame(&raw, num_joints, index)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let docs: Vec<serde_json::Value> = serde_json::from_slice(&raw).map_err(|e| Error::Parse {
            offset: byte_offset(&raw, e.line(), e.column()),
            message: e.to_string(),
        })?;
        docs.iter()
            .enumerate()
            .map(|(index, doc)| {
                let bytes = serde_json::to_vec(doc).expect("value re-serializes");
                parse_keypoint_frame(&bytes, num_joints, index)
            })
            .collect::<Result<Vec<_>>>()?
    };
    if frames.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    PoseSequence::new(frames, fps, subject_id)
}

/// Writes one document per frame as `<id>_<index:012>_keypoints.json`.
pub fn write_sequence(seq: &PoseSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for frame in &seq.frames {
        let file = dir.join(format!("{}_{:012}_keypoints.json", seq.subject_id, frame.frame_index));
        std::fs::write(&file, serialize_keypoint_frame(frame)).map_err(|e| Error::io(&file, e))?;
    }
    Ok(())
}
