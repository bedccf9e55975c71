use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRESETS: [&str; 3] = ["body25", "coco18", "toy5"];

/// Joint set and natural connections of a skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTopology {
    pub name: String,
    pub num_joints: usize,
    pub edges: Vec<(usize, usize)>,
    /// Joint placed at the origin by normalization.
    pub root: usize,
    /// Together with `root`, defines the torso length used as the scale unit.
    pub neck: usize,
    pub names: Vec<String>,
}

const BODY25_NAMES: [&str; 25] = [
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist", "MidHip",
    "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle", "REye", "LEye", "REar", "LEar",
    "LBigToe", "LSmallToe", "LHeel", "RBigToe", "RSmallToe", "RHeel",
];

// OpenPose BODY_25 limb pairs.
const BODY25_EDGES: [(usize, usize); 24] = [
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9), (9, 10), (10, 11), (8, 12),
    (12, 13), (13, 14), (1, 0), (0, 15), (15, 17), (0, 16), (16, 18), (14, 19), (19, 20),
    (14, 21), (11, 22), (22, 23), (11, 24),
];

const BODY25_REST: [(f64, f64); 25] = [
    (0.0, -1.35), (0.0, -1.0), (-0.35, -1.0), (-0.6, -0.6), (-0.75, -0.2), (0.35, -1.0),
    (0.6, -0.6), (0.75, -0.2), (0.0, 0.0), (-0.2, 0.0), (-0.25, 0.55), (-0.25, 1.05),
    (0.2, 0.0), (0.25, 0.55), (0.25, 1.05), (-0.08, -1.45), (0.08, -1.45), (-0.15, -1.4),
    (0.15, -1.4), (0.35, 1.15), (0.4, 1.12), (0.22, 1.1), (-0.35, 1.15), (-0.4, 1.12),
    (-0.22, 1.1),
];

const COCO18_NAMES: [&str; 18] = [
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist", "RHip",
    "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle", "REye", "LEye", "REar", "LEar",
];

// OpenPose COCO limb pairs, without the two ear-shoulder pairs that close cycles.
const COCO18_EDGES: [(usize, usize); 17] = [
    (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (1, 8), (8, 9), (9, 10), (1, 11), (11, 12),
    (12, 13), (1, 0), (0, 14), (14, 16), (0, 15), (15, 17),
];

const COCO18_REST: [(f64, f64); 18] = [
    (0.0, -1.35), (0.0, -1.0), (-0.35, -1.0), (-0.6, -0.6), (-0.75, -0.2), (0.35, -1.0),
    (0.6, -0.6), (0.75, -0.2), (-0.2, 0.0), (-0.25, 0.55), (-0.25, 1.05), (0.2, 0.0),
    (0.25, 0.55), (0.25, 1.05), (-0.08, -1.45), (0.08, -1.45), (-0.15, -1.4), (0.15, -1.4),
];

const TOY5_NAMES: [&str; 5] = ["Pelvis", "Chest", "Head", "LeftHand", "RightHand"];
const TOY5_EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (1, 3), (1, 4)];
const TOY5_REST: [(f64, f64); 5] = [(0.0, 0.0), (0.0, -1.0), (0.0, -1.5), (-0.8, -0.8), (0.8, -0.8)];

impl SkeletonTopology {
    /// Validates and assembles a topology.
    pub fn new(
        name: impl Into<String>,
        num_joints: usize,
        edges: Vec<(usize, usize)>,
        root: usize,
        neck: usize,
        names: Vec<String>,
    ) -> Result<Self> {
        let topo = SkeletonTopology {
            name: name.into(),
            num_joints,
            edges,
            root,
            neck,
            names,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let owned = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        match name {
            "body25" => Self::new("body25", 25, BODY25_EDGES.to_vec(), 8, 1, owned(&BODY25_NAMES)),
            "coco18" => Self::new("coco18", 18, COCO18_EDGES.to_vec(), 8, 1, owned(&COCO18_NAMES)),
            "toy5" => Self::new("toy5", 5, TOY5_EDGES.to_vec(), 0, 1, owned(&TOY5_NAMES)),
            _ => Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESETS.join(", "),
            }),
        }
    }

    /// Resolves a preset name, or failing that, an edge-list file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            return Self::builtin(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            return Self::load(path);
        }
        Self::builtin(name_or_path)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_joints;
        if n == 0 {
            return Err(Error::InvalidTopology("no joints".into()));
        }
        if self.names.len() != n {
            return Err(Error::InvalidTopology(format!(
                "{} names for {n} joints",
                self.names.len()
            )));
        }
        if self.root >= n || self.neck >= n {
            return Err(Error::InvalidTopology(format!(
                "root {} / neck {} out of range for {n} joints",
                self.root, self.neck
            )));
        }
        if self.root == self.neck && n > 1 {
            return Err(Error::InvalidTopology("root and neck must differ".into()));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTopology(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidTopology(format!("self-loop on joint {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({a}, {b})")));
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidTopology("skeleton graph is not connected".into()));
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.num_joints;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Canonical rest pose in torso units: root at the origin, neck one unit away.
    pub fn rest_pose(&self) -> Vec<(f64, f64)> {
        let raw = match self.name.as_str() {
            "body25" if self.num_joints == 25 => BODY25_REST.to_vec(),
            "coco18" if self.num_joints == 18 => COCO18_REST.to_vec(),
            "toy5" if self.num_joints == 5 => TOY5_REST.to_vec(),
            _ => return self.generic_layout(),
        };
        let (rx, ry) = raw[self.root];
        let (nx, ny) = raw[self.neck];
        let scale = (nx - rx).hypot(ny - ry);
        raw.into_iter().map(|(x, y)| ((x - rx) / scale, (y - ry) / scale)).collect()
    }

    // Breadth-first rings around the root; the neck sits one unit straight up.
    fn generic_layout(&self) -> Vec<(f64, f64)> {
        let n = self.num_joints;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut depth = vec![usize::MAX; n];
        depth[self.root] = 0;
        let mut queue = std::collections::VecDeque::from([self.root]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if depth[u] == usize::MAX {
                    depth[u] = depth[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        (0..n)
            .map(|j| {
                if j == self.root {
                    (0.0, 0.0)
                } else if j == self.neck {
                    (0.0, -1.0)
                } else {
                    let r = depth[j].min(n) as f64;
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                    (r * theta.cos(), r * theta.sin())
                }
            })
            .collect()
    }

    /// Edge-list text: `# N=<n>` header, optional `# root=`/`# neck=` lines,
    /// then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# N={}\n# root={}\n# neck={}\n", self.num_joints, self.root, self.neck);
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn parse_edge_list(name: &str, text: &str) -> Result<Self> {
        let mut n = None;
        let mut root = None;
        let mut neck = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once('=') {
                    let value: usize = value.trim().parse().map_err(|_| {
                        Error::Format(format!("line {}: bad header value {value:?}", lineno + 1))
                    })?;
                    match key.trim() {
                        "N" => n = Some(value),
                        "root" => root = Some(value),
                        "neck" => neck = Some(value),
                        _ => {}
                    }
                }
                continue;
            }
            let mut parts = line.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => edges.push((a, b)),
                _ => {
                    return Err(Error::Format(format!(
                        "line {}: expected `i j`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let n = n.ok_or_else(|| Error::Format("missing `# N=<n>` header".into()))?;
        let root = root.unwrap_or(0);
        let neck = match neck {
            Some(k) => k,
            None => edges
                .iter()
                .find_map(|&(a, b)| match (a == root, b == root) {
                    (true, _) => Some(b),
                    (_, true) => Some(a),
                    _ => None,
                })
                .unwrap_or(root),
        };
        let names = (0..n).map(|j| format!("joint{j}")).collect();
        Self::new(name, n, edges, root, neck, names)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::parse_edge_list(&name, &text)
    }

    /// Relabels joints so that old joint `j` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_joints {
            return Err(Error::contract("permutation length differs from joint count"));
        }
        let mut names = vec![String::new(); self.num_joints];
        for (j, name) in self.names.iter().enumerate() {
            names[perm[j]] = name.clone();
        }
        Self::new(
            format!("{}-permuted", self.name),
            self.num_joints,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
            perm[self.root],
            perm[self.neck],
            names,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy5_preset() {
        let t = SkeletonTopology::builtin("toy5").unwrap();
        assert_eq!(t.num_joints, 5);
        assert_eq!(t.num_edges(), 4);
        assert_eq!(t.edges, vec![(0, 1), (1, 2), (1, 3), (1, 4)]);
    }

    #[test]
    fn body25_is_a_tree() {
        let t = SkeletonTopology::builtin("body25").unwrap();
        assert_eq!(t.num_joints, 25);
        assert_eq!(t.num_edges(), 24);
        assert_eq!(t.names[t.root], "MidHip");
        assert_eq!(t.names[t.neck], "Neck");
        let coco = SkeletonTopology::builtin("coco18").unwrap();
        assert_eq!(coco.num_edges(), 17);
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let err = SkeletonTopology::builtin("nope").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::UnknownPreset { .. }));
        for p in PRESETS {
            assert!(msg.contains(p), "{msg}");
        }
    }

    #[test]
    fn rejects_bad_edges() {
        let names = |n: usize| (0..n).map(|j| j.to_string()).collect::<Vec<_>>();
        assert!(SkeletonTopology::new("x", 3, vec![(0, 1), (1, 1)], 0, 1, names(3)).is_err());
        assert!(SkeletonTopology::new("x", 3, vec![(0, 1), (1, 0), (1, 2)], 0, 1, names(3)).is_err());
        assert!(SkeletonTopology::new("x", 3, vec![(0, 1), (1, 3)], 0, 1, names(3)).is_err());
        // disconnected
        assert!(SkeletonTopology::new("x", 4, vec![(0, 1), (2, 3)], 0, 1, names(4)).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        for preset in PRESETS {
            let t = SkeletonTopology::builtin(preset).unwrap();
            let parsed = SkeletonTopology::parse_edge_list(preset, &t.to_edge_list()).unwrap();
            assert_eq!(parsed.edges, t.edges);
            assert_eq!(parsed.root, t.root);
            assert_eq!(parsed.neck, t.neck);
        }
    }

    #[test]
    fn edge_list_defaults_root_and_neck() {
        let t = SkeletonTopology::parse_edge_list("chain", "# N=3\n0 1\n1 2\n").unwrap();
        assert_eq!((t.root, t.neck), (0, 1));
        assert!(SkeletonTopology::parse_edge_list("x", "0 1\n").is_err());
        assert!(SkeletonTopology::parse_edge_list("x", "# N=2\n0 1 2\n").is_err());
    }

    #[test]
    fn rest_pose_has_unit_torso() {
        for preset in PRESETS {
            let t = SkeletonTopology::builtin(preset).unwrap();
            let pose = t.rest_pose();
            assert_eq!(pose.len(), t.num_joints);
            assert_eq!(pose[t.root], (0.0, 0.0));
            let (nx, ny) = pose[t.neck];
            assert!(((nx * nx + ny * ny).sqrt() - 1.0).abs() < 1e-12);
        }
        let chain = SkeletonTopology::parse_edge_list("chain", "# N=4\n0 1\n1 2\n2 3\n").unwrap();
        assert_eq!(chain.rest_pose()[1], (0.0, -1.0));
    }
}
