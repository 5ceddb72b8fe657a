//! Skeleton topology, motion windows and the perturbation factor grid.
//!
//! The default 19-joint layout is a reconstruction: joint indices follow the
//! common infant pose-estimation keypoint order (head 0-4, right arm, thorax,
//! left arm, pelvis, right leg, left leg). Load a topology file to use a
//! different skeleton.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Typical,
    Atypical,
}

impl Label {
    /// Classifier output index; the atypical (CP) class is the positive class.
    pub fn class_index(self) -> usize {
        match self {
            Label::Typical => 0,
            Label::Atypical => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Typical => "typical",
            Label::Atypical => "atypical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub joints: Vec<usize>,
}

/// On-disk topology layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub joints: Vec<String>,
    pub parent: Vec<usize>,
    pub segments: BTreeMap<String, Vec<usize>>,
    pub root: usize,
    /// Joint whose distance from the root defines the trunk length.
    /// Defaults to the joint named `thorax`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunk_top: Option<usize>,
    /// Segments moved as one rigid body under angular perturbation.
    #[serde(default = "default_rigid", skip_serializing_if = "Vec::is_empty")]
    pub rigid: Vec<String>,
}

fn default_rigid() -> Vec<String> {
    vec!["head".to_string()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology {
    joint_names: Vec<String>,
    parent: Vec<usize>,
    segments: Vec<Segment>,
    root: usize,
    trunk_top: usize,
    rigid: Vec<usize>,
    order: Vec<usize>,
    segment_of: Vec<Option<usize>>,
}

pub const DEFAULT_JOINTS: [&str; 19] = [
    "head_top",
    "nose",
    "right_ear",
    "left_ear",
    "upper_neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "thorax",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "pelvis",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
];

const DEFAULT_PARENT: [usize; 19] = [
    1, 4, 1, 1, 8, // head: top and ears hang off the nose, nose off the neck
    8, 5, 6, // right arm
    12, // thorax
    8, 9, 10, // left arm
    12, // pelvis is the root
    12, 13, 14, // right leg
    12, 16, 17, // left leg
];

impl Default for SkeletonTopology {
    fn default() -> Self {
        let segments = [
            ("head", vec![0, 1, 2, 3, 4]),
            ("right_arm", vec![5, 6, 7]),
            ("left_arm", vec![9, 10, 11]),
            ("trunk", vec![8, 12]),
            ("right_leg", vec![13, 14, 15]),
            ("left_leg", vec![16, 17, 18]),
        ];
        let file = TopologyFile {
            joints: DEFAULT_JOINTS.iter().map(|s| s.to_string()).collect(),
            parent: DEFAULT_PARENT.to_vec(),
            segments: segments
                .into_iter()
                .map(|(n, j)| (n.to_string(), j))
                .collect(),
            root: 12,
            trunk_top: None,
            rigid: default_rigid(),
        };
        Self::from_file(file).expect("default topology is valid")
    }
}

impl SkeletonTopology {
    pub fn from_file(file: TopologyFile) -> Result<Self> {
        let n = file.joints.len();
        if n == 0 {
            return Err(Error::Topology("no joints".into()));
        }
        if file.parent.len() != n {
            return Err(Error::Topology(format!(
                "{} parents for {} joints",
                file.parent.len(),
                n
            )));
        }
        if file.root >= n || file.parent[file.root] != file.root {
            return Err(Error::Topology("root must map to itself".into()));
        }
        for (j, &p) in file.parent.iter().enumerate() {
            if p >= n {
                return Err(Error::Topology(format!("joint {j} has parent {p} out of range")));
            }
            if p == j && j != file.root {
                return Err(Error::Topology(format!("joint {j} is a second root")));
            }
        }
        // Every joint must reach the root within n parent hops.
        let mut depth = vec![0usize; n];
        for (j, d) in depth.iter_mut().enumerate() {
            let mut cur = j;
            let mut steps = 0;
            while cur != file.root {
                cur = file.parent[cur];
                steps += 1;
                if steps > n {
                    return Err(Error::Topology(format!("joint {j} is on a parent cycle")));
                }
            }
            *d = steps;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&j| (depth[j], j));

        let mut segment_of = vec![None; n];
        let mut segments = Vec::with_capacity(file.segments.len());
        for (si, (name, joints)) in file.segments.iter().enumerate() {
            for &j in joints {
                if j >= n {
                    return Err(Error::Topology(format!("segment {name} lists joint {j}")));
                }
                if let Some(other) = segment_of[j] {
                    let other: &Segment = &segments[other];
                    return Err(Error::Topology(format!(
                        "joint {j} in both {} and {name}",
                        other.name
                    )));
                }
                segment_of[j] = Some(si);
            }
            segments.push(Segment {
                name: name.clone(),
                joints: joints.clone(),
            });
        }

        let trunk_top = match file.trunk_top {
            Some(t) if t < n && t != file.root => t,
            Some(t) => return Err(Error::Topology(format!("invalid trunk_top {t}"))),
            None => file
                .joints
                .iter()
                .position(|name| name == "thorax")
                .ok_or_else(|| Error::Topology("no trunk_top and no joint named thorax".into()))?,
        };

        let mut rigid = Vec::new();
        for name in &file.rigid {
            match segments.iter().position(|s| &s.name == name) {
                Some(i) => rigid.push(i),
                None => return Err(Error::Topology(format!("rigid unit {name} is not a segment"))),
            }
        }

        Ok(Self {
            joint_names: file.joints,
            parent: file.parent,
            segments,
            root: file.root,
            trunk_top,
            rigid,
            order,
            segment_of,
        })
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            joints: self.joint_names.clone(),
            parent: self.parent.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| (s.name.clone(), s.joints.clone()))
                .collect(),
            root: self.root,
            trunk_top: (self.joint_names.get(self.trunk_top).map(String::as_str) != Some("thorax"))
                .then_some(self.trunk_top),
            rigid: self.rigid.iter().map(|&i| self.segments[i].name.clone()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TopologyFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the canonical JSON form; stored in model checkpoints.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("topology serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, joint: usize) -> usize {
        self.parent[joint]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn trunk_top(&self) -> usize {
        self.trunk_top
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_of(&self, joint: usize) -> Option<usize> {
        self.segment_of[joint]
    }

    /// Joints sorted so that every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn rigid_segments(&self) -> impl Iterator<Item = &Segment> {
        self.rigid.iter().map(|&i| &self.segments[i])
    }

    /// Undirected bone edges (child, parent), root excluded.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.joint_count())
            .filter(|&j| j != self.root)
            .map(|j| (j, self.parent[j]))
    }

    /// Expands a joint selection to every segment it touches. Joints outside
    /// any segment are kept as they are. Output is sorted.
    pub fn expand_to_segments(&self, joints: &[usize]) -> Vec<usize> {
        let mut selected = vec![false; self.joint_count()];
        for &j in joints {
            selected[j] = true;
            if let Some(s) = self.segment_of[j] {
                for &m in &self.segments[s].joints {
                    selected[m] = true;
                }
            }
        }
        (0..self.joint_count()).filter(|&j| selected[j]).collect()
    }
}

/// A fixed-rate 2D pose sequence. Also used for whole clips before windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionWindow {
    pub fps: f64,
    joints: usize,
    positions: Vec<Point>,
    pub subject_id: String,
    pub window_index: usize,
    pub true_label: Option<Label>,
}

impl MotionWindow {
    pub fn new(fps: f64, joints: usize, positions: Vec<Point>) -> Result<Self> {
        if joints == 0 || !positions.len().is_multiple_of(joints) {
            return Err(Error::Shape(format!(
                "{} points do not divide into {joints} joints",
                positions.len()
            )));
        }
        Ok(Self {
            fps,
            joints,
            positions,
            subject_id: String::new(),
            window_index: 0,
            true_label: None,
        })
    }

    pub fn from_frames(fps: f64, frames: Vec<Vec<Point>>) -> Result<Self> {
        let joints = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != joints) {
            return Err(Error::Shape("frames have differing joint counts".into()));
        }
        Self::new(fps, joints, frames.into_iter().flatten().collect())
    }

    pub fn with_meta(mut self, subject_id: impl Into<String>, window_index: usize, label: Option<Label>) -> Self {
        self.subject_id = subject_id.into();
        self.window_index = window_index;
        self.true_label = label;
        self
    }

    /// Same metadata, new positions.
    pub fn with_positions(&self, frames: usize, positions: Vec<Point>) -> Self {
        debug_assert_eq!(positions.len(), frames * self.joints);
        Self {
            fps: self.fps,
            joints: self.joints,
            positions,
            subject_id: self.subject_id.clone(),
            window_index: self.window_index,
            true_label: self.true_label,
        }
    }

    pub fn frames(&self) -> usize {
        self.positions.len() / self.joints
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.fps
    }

    #[inline]
    pub fn at(&self, frame: usize, joint: usize) -> Point {
        self.positions[frame * self.joints + joint]
    }

    #[inline]
    pub fn set(&mut self, frame: usize, joint: usize, p: Point) {
        self.positions[frame * self.joints + joint] = p;
    }

    pub fn frame(&self, frame: usize) -> &[Point] {
        &self.positions[frame * self.joints..(frame + 1) * self.joints]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [Point] {
        &mut self.positions
    }

    /// Copy of frames `start..start + len`.
    pub fn slice_frames(&self, start: usize, len: usize) -> Vec<Point> {
        self.positions[start * self.joints..(start + len) * self.joints].to_vec()
    }

    pub fn to_file(&self, topo: &SkeletonTopology) -> WindowFile {
        WindowFile {
            fps: self.fps,
            joints: topo.joint_names().to_vec(),
            frames: (0..self.frames()).map(|f| self.frame(f).to_vec()).collect(),
            subject_id: self.subject_id.clone(),
            label: self.true_label,
            window_index: self.window_index,
        }
    }

    pub fn from_file(file: WindowFile) -> Result<Self> {
        let joints = file.joints.len();
        if file.frames.iter().any(|f| f.len() != joints) {
            return Err(Error::Shape(format!(
                "window file declares {joints} joints but a frame differs"
            )));
        }
        let mut w = Self::new(file.fps, joints, file.frames.into_iter().flatten().collect())?;
        w.subject_id = file.subject_id;
        w.true_label = file.label;
        w.window_index = file.window_index;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: WindowFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_file(file)
    }

    pub fn save(&self, topo: &SkeletonTopology, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file(topo)).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk window / clip layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFile {
    pub fps: f64,
    pub joints: Vec<String>,
    pub frames: Vec<Vec<Point>>,
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub window_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGrid {
    pub slowdown: Vec<f64>,
    pub speedup: Vec<f64>,
}

impl Default for FactorGrid {
    fn default() -> Self {
        Self {
            slowdown: vec![0.20, 0.25, 0.33, 0.5, 1.0],
            speedup: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }
}

impl FactorGrid {
    pub fn new(slowdown: Vec<f64>, speedup: Vec<f64>) -> Result<Self> {
        let grid = Self { slowdown, speedup };
        grid.validate()?;
        Ok(grid)
    }

    pub fn identity() -> Self {
        Self {
            slowdown: vec![1.0],
            speedup: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if self.slowdown.is_empty() || self.speedup.is_empty() {
            return Err(Error::InvalidArgument("factor grid lists must be non-empty".into()));
        }
        if !self.slowdown.iter().all(|&f| f > 0.0 && f <= 1.0) || !sorted(&self.slowdown) {
            return Err(Error::InvalidArgument(
                "slowdown factors must be sorted and lie in (0, 1]".into(),
            ));
        }
        if !self.speedup.iter().all(|&f| f >= 1.0 && f.is_finite()) || !sorted(&self.speedup) {
            return Err(Error::InvalidArgument("speedup factors must be sorted and >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidFps(f64),
    FrameCount { expected: usize, actual: usize },
    JointCount { expected: usize, actual: usize },
    NonFinite { frame: usize, joint: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidFps(fps) => write!(f, "fps {fps} is not positive"),
            Violation::FrameCount { expected, actual } => {
                write!(f, "expected {expected} frames, found {actual}")
            }
            Violation::JointCount { expected, actual } => {
                write!(f, "expected {expected} joints, found {actual}")
            }
            Violation::NonFinite { frame, joint } => {
                write!(f, "non-finite coordinate at frame {frame}, joint {joint}")
            }
        }
    }
}

/// Frame count = round(duration * fps).
pub fn frames_for(duration_s: f64, fps: f64) -> usize {
    (duration_s * fps).round() as usize
}

/// Lists every violation; an empty report means the window is valid.
/// The frame-count rule is only checked when a duration is declared.
pub fn validate_window(
    window: &MotionWindow,
    topo: &SkeletonTopology,
    duration_s: Option<f64>,
) -> Vec<Violation> {
    let mut report = Vec::new();
    if !(window.fps > 0.0 && window.fps.is_finite()) {
        report.push(Violation::InvalidFps(window.fps));
    } else if let Some(d) = duration_s {
        let expected = frames_for(d, window.fps);
        if expected != window.frames() {
            report.push(Violation::FrameCount {
                expected,
                actual: window.frames(),
            });
        }
    }
    if window.joints() != topo.joint_count() {
        report.push(Violation::JointCount {
            expected: topo.joint_count(),
            actual: window.joints(),
        });
    }
    for (i, p) in window.positions().iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            report.push(Violation::NonFinite {
                frame: i / window.joints(),
                joint: i % window.joints(),
            });
        }
    }
    report
}

/// Cuts a sequence into fixed-length overlapping windows. The trailing
/// partial window is dropped; a sequence shorter than one window yields none.
pub fn split_into_windows(
    sequence: &MotionWindow,
    duration_s: f64,
    overlap_s: f64,
) -> Result<Vec<MotionWindow>> {
    if !(overlap_s >= 0.0 && duration_s > overlap_s) {
        return Err(Error::InvalidArgument(format!(
            "need duration > overlap >= 0, got {duration_s} / {overlap_s}"
        )));
    }
    let len = frames_for(duration_s, sequence.fps);
    let shared = frames_for(overlap_s, sequence.fps);
    if len == 0 || shared >= len {
        return Err(Error::InvalidArgument("window or stride rounds to zero frames".into()));
    }
    let total = sequence.frames();
    let mut windows = Vec::new();
    let stride = len - shared;
    let mut start = 0;
    while start + len <= total {
        let mut w = sequence.with_positions(len, sequence.slice_frames(start, len));
        w.window_index = windows.len();
        windows.push(w);
        start += stride;
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(frames: usize, joints: usize, fps: f64) -> MotionWindow {
        let pts = (0..frames * joints)
            .map(|i| [(i / joints) as f64, (i % joints) as f64])
            .collect();
        MotionWindow::new(fps, joints, pts).unwrap()
    }

    #[test]
    fn default_topology_shape() {
        let t = SkeletonTopology::default();
        assert_eq!(t.joint_count(), 19);
        assert_eq!(t.joint_names()[t.root()], "pelvis");
        assert_eq!(t.joint_names()[t.trunk_top()], "thorax");
        assert_eq!(t.segments().len(), 6);
        let head = t.segments().iter().find(|s| s.name == "head").unwrap();
        assert_eq!(head.joints, vec![0, 1, 2, 3, 4]);
        for &j in t.topological_order() {
            let p = t.parent(j);
            let pos = |x| t.topological_order().iter().position(|&y| y == x).unwrap();
            assert!(j == t.root() || pos(p) < pos(j));
        }
    }

    #[test]
    fn topology_rejects_cycles_and_overlaps() {
        let mut f = SkeletonTopology::default().to_file();
        f.parent[0] = 2;
        f.parent[2] = 0;
        assert!(SkeletonTopology::from_file(f).is_err());

        let mut f = SkeletonTopology::default().to_file();
        f.segments.get_mut("trunk").unwrap().push(5);
        assert!(SkeletonTopology::from_file(f).is_err());
    }

    #[test]
    fn topology_file_round_trip() {
        let t = SkeletonTopology::default();
        let text = serde_json::to_string(&t.to_file()).unwrap();
        let back = SkeletonTopology::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.hash(), t.hash());
    }

    #[test]
    fn expand_to_segments_covers_whole_limb() {
        let t = SkeletonTopology::default();
        assert_eq!(t.expand_to_segments(&[6]), vec![5, 6, 7]);
        assert_eq!(t.expand_to_segments(&[2, 17]), vec![0, 1, 2, 3, 4, 16, 17, 18]);
    }

    #[test]
    fn valid_window_has_empty_report() {
        let t = SkeletonTopology::default();
        assert!(validate_window(&ramp(150, 19, 30.0), &t, Some(5.0)).is_empty());
    }

    #[test]
    fn short_window_flags_frame_count() {
        let t = SkeletonTopology::default();
        let report = validate_window(&ramp(149, 19, 30.0), &t, Some(5.0));
        assert_eq!(
            report,
            vec![Violation::FrameCount {
                expected: 150,
                actual: 149
            }]
        );
    }

    #[test]
    fn nan_and_joint_count_flagged() {
        let t = SkeletonTopology::default();
        let mut w = ramp(150, 19, 30.0);
        w.set(10, 3, [f64::NAN, 0.0]);
        assert_eq!(
            validate_window(&w, &t, Some(5.0)),
            vec![Violation::NonFinite { frame: 10, joint: 3 }]
        );
        let r = validate_window(&ramp(150, 18, 30.0), &t, None);
        assert!(matches!(r[..], [Violation::JointCount { expected: 19, actual: 18 }]));
    }

    #[test]
    fn split_examples() {
        let starts = |frames| {
            split_into_windows(&ramp(frames, 19, 30.0), 5.0, 2.5)
                .unwrap()
                .iter()
                .map(|w| w.at(0, 0)[0] as usize)
                .collect::<Vec<_>>()
        };
        assert_eq!(starts(300), vec![0, 75, 150]);
        assert_eq!(starts(150), vec![0]);
        assert!(starts(149).is_empty());
        assert!(split_into_windows(&ramp(300, 19, 30.0), 2.0, 2.0).is_err());
    }

    #[test]
    fn grid_defaults_and_validation() {
        let g = FactorGrid::default();
        assert!(g.validate().is_ok());
        assert!(FactorGrid::new(vec![0.5, 0.2], vec![1.0]).is_err());
        assert!(FactorGrid::new(vec![0.5], vec![0.9]).is_err());
        assert!(FactorGrid::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn window_file_round_trip() {
        let t = SkeletonTopology::default();
        let w = ramp(4, 19, 30.0).with_meta("s1", 2, Some(Label::Atypical));
        let text = serde_json::to_string(&w.to_file(&t)).unwrap();
        let back = MotionWindow::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    proptest! {
        #[test]
        fn consecutive_windows_share_overlap(
            frames in 150usize..700,
            overlap_q in 0usize..4,
        ) {
            let t = SkeletonTopology::default();
            let overlap = overlap_q as f64 * 1.25;
            let seq = ramp(frames, 19, 30.0);
            let windows = split_into_windows(&seq, 5.0, overlap).unwrap();
            let shared = frames_for(overlap, 30.0);
            prop_assert!(!windows.is_empty());
            for w in &windows {
                prop_assert!(validate_window(w, &t, Some(5.0)).is_empty());
            }
            for pair in windows.windows(2) {
                let tail = pair[0].slice_frames(150 - shared, shared);
                let head = pair[1].slice_frames(0, shared);
                prop_assert_eq!(tail, head);
                let next_start = pair[1].at(0, 0)[0] as usize;
                let prev_start = pair[0].at(0, 0)[0] as usize;
                prop_assert_eq!(next_start - prev_start, 150 - shared);
            }
        }
    }
}
