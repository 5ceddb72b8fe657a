//! Raw pose sequences to model-ready windows and three-branch features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{split_into_windows, MotionWindow, Point, SkeletonTopology};
use crate::stats;

pub const DEFAULT_FPS: f64 = 30.0;

/// Position, velocity and bone branches, each `frames x joints x 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    frames: usize,
    joints: usize,
    pub position: Vec<Point>,
    pub velocity: Vec<Point>,
    pub bone: Vec<Point>,
}

/// Input channels per joint once the three branches are concatenated.
pub const INPUT_CHANNELS: usize = 6;

impl FeatureTensor {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    /// Branches concatenated channel-wise: `[pos.x, pos.y, vel.x, vel.y,
    /// bone.x, bone.y]` per (frame, joint), row-major over frames then joints.
    pub fn concat_channels(&self, branch_scale: [f64; 3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.position.len() * INPUT_CHANNELS);
        for i in 0..self.position.len() {
            for (b, branch) in [&self.position, &self.velocity, &self.bone].iter().enumerate() {
                out.push(branch[i][0] * branch_scale[b]);
                out.push(branch[i][1] * branch_scale[b]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub target_fps: f64,
    pub smooth_half_width: usize,
    pub window_s: f64,
    pub overlap_s: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_fps: DEFAULT_FPS,
            smooth_half_width: 2,
            window_s: 5.0,
            overlap_s: 2.5,
        }
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Samples `window` at fractional frame index `pos`, clamped to the
/// recorded range.
pub(crate) fn sample_joint(window: &MotionWindow, joint: usize, pos: f64) -> Point {
    let last = window.frames() - 1;
    let pos = pos.clamp(0.0, last as f64);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo >= last || frac == 0.0 {
        window.at(lo.min(last), joint)
    } else {
        lerp(window.at(lo, joint), window.at(lo + 1, joint), frac)
    }
}

/// Linear per-joint, per-axis resampling to `target_fps`. Output length is
/// `round(frames / source_fps * target_fps)`; samples past the last recorded
/// instant hold the final pose.
pub fn resample(sequence: &MotionWindow, target_fps: f64) -> Result<MotionWindow> {
    if !(sequence.fps > 0.0 && target_fps > 0.0) {
        return Err(Error::InvalidArgument("frame rates must be positive".into()));
    }
    let n = sequence.frames();
    if n < 2 {
        return Err(Error::InvalidArgument("cannot resample fewer than two frames".into()));
    }
    if sequence.fps == target_fps {
        return Ok(sequence.clone());
    }
    let out_frames = (n as f64 / sequence.fps * target_fps).round() as usize;
    let ratio = sequence.fps / target_fps;
    let joints = sequence.joints();
    let mut pts = Vec::with_capacity(out_frames * joints);
    for k in 0..out_frames {
        let pos = k as f64 * ratio;
        for j in 0..joints {
            pts.push(sample_joint(sequence, j, pos));
        }
    }
    let mut out = sequence.with_positions(out_frames, pts);
    out.fps = target_fps;
    Ok(out)
}

/// Centered moving average of width `2 * half_width + 1`, truncated at the
/// sequence edges.
pub fn smooth(sequence: &MotionWindow, half_width: usize) -> MotionWindow {
    if half_width == 0 {
        return sequence.clone();
    }
    let n = sequence.frames();
    let joints = sequence.joints();
    let mut pts = Vec::with_capacity(n * joints);
    for f in 0..n {
        let lo = f.saturating_sub(half_width);
        let hi = (f + half_width).min(n - 1);
        let count = (hi - lo + 1) as f64;
        for j in 0..joints {
            let mut acc = [0.0, 0.0];
            for g in lo..=hi {
                let p = sequence.at(g, j);
                acc[0] += p[0];
                acc[1] += p[1];
            }
            pts.push([acc[0] / count, acc[1] / count]);
        }
    }
    sequence.with_positions(n, pts)
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Median root-to-trunk-top distance over the frames of a window.
pub fn median_trunk_length(window: &MotionWindow, topo: &SkeletonTopology) -> Result<f64> {
    let (root, top) = (topo.root(), topo.trunk_top());
    let lengths: Vec<f64> = (0..window.frames())
        .map(|f| distance(window.at(f, root), window.at(f, top)))
        .collect();
    stats::quantile(&lengths, 0.5)
}

/// Subtracts the root (pelvis) per frame, then divides by the median trunk
/// length so that the trunk measures 1.
pub fn center_and_scale(window: &MotionWindow, topo: &SkeletonTopology) -> Result<MotionWindow> {
    if window.joints() != topo.joint_count() {
        return Err(Error::Shape(format!(
            "window has {} joints, topology {}",
            window.joints(),
            topo.joint_count()
        )));
    }
    let scale = median_trunk_length(window, topo)?;
    if !scale.is_finite() || scale <= 1e-12 {
        return Err(Error::Degenerate(format!("median trunk length {scale}")));
    }
    let root = topo.root();
    let mut out = window.clone();
    for f in 0..window.frames() {
        let origin = window.at(f, root);
        for j in 0..window.joints() {
            let p = window.at(f, j);
            out.set(f, j, [(p[0] - origin[0]) / scale, (p[1] - origin[1]) / scale]);
        }
    }
    Ok(out)
}

pub fn extract_features(window: &MotionWindow, topo: &SkeletonTopology) -> Result<FeatureTensor> {
    let (frames, joints) = (window.frames(), window.joints());
    if joints != topo.joint_count() {
        return Err(Error::Shape(format!(
            "window has {joints} joints, topology {}",
            topo.joint_count()
        )));
    }
    let position = window.positions().to_vec();
    let mut velocity = vec![[0.0, 0.0]; position.len()];
    let mut bone = vec![[0.0, 0.0]; position.len()];
    for f in 0..frames {
        for j in 0..joints {
            let p = window.at(f, j);
            if f > 0 {
                let q = window.at(f - 1, j);
                velocity[f * joints + j] = [p[0] - q[0], p[1] - q[1]];
            }
            let parent = window.at(f, topo.parent(j));
            bone[f * joints + j] = [p[0] - parent[0], p[1] - parent[1]];
        }
    }
    Ok(FeatureTensor {
        frames,
        joints,
        position,
        velocity,
        bone,
    })
}

/// Full clip preparation: resample, smooth, window, then center and scale
/// each window independently.
pub fn prepare_clip(
    clip: &MotionWindow,
    topo: &SkeletonTopology,
    cfg: &PreprocessConfig,
) -> Result<Vec<MotionWindow>> {
    let resampled = resample(clip, cfg.target_fps)?;
    let smoothed = smooth(&resampled, cfg.smooth_half_width);
    split_into_windows(&smoothed, cfg.window_s, cfg.overlap_s)?
        .iter()
        .map(|w| center_and_scale(w, topo))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq_from(fps: f64, frames: usize, joints: usize, f: impl Fn(usize, usize) -> Point) -> MotionWindow {
        let pts = (0..frames)
            .flat_map(|t| (0..joints).map(move |j| (t, j)))
            .map(|(t, j)| f(t, j))
            .collect();
        MotionWindow::new(fps, joints, pts).unwrap()
    }

    /// A wobbling default skeleton in pixel-like units.
    fn wobble(frames: usize, offset: Point, scale: f64) -> MotionWindow {
        let topo = SkeletonTopology::default();
        seq_from(30.0, frames, topo.joint_count(), |t, j| {
            let tt = t as f64 * 0.1;
            let base = [j as f64 * 3.0 + (tt + j as f64).sin(), (j % 5) as f64 * 7.0 + (0.7 * tt).cos()];
            let p = if j == topo.root() {
                [0.0, 0.0]
            } else if j == topo.trunk_top() {
                [0.0, 40.0 + tt.sin()]
            } else {
                base
            };
            [p[0] * scale + offset[0], p[1] * scale + offset[1]]
        })
    }

    #[test]
    fn resample_constant_pose() {
        let s = seq_from(25.0, 50, 3, |_, j| [j as f64, 2.0]);
        let r = resample(&s, 30.0).unwrap();
        assert_eq!(r.frames(), 60);
        assert!(r.positions().iter().enumerate().all(|(i, p)| *p == [(i % 3) as f64, 2.0]));
    }

    #[test]
    fn resample_linear_motion_is_exact() {
        let s = seq_from(15.0, 45, 1, |t, _| [t as f64 / 15.0, 0.0]);
        let r = resample(&s, 30.0).unwrap();
        assert_eq!(r.frames(), 90);
        let last_time = 44.0 / 15.0;
        for k in 0..r.frames() {
            let t = k as f64 / 30.0;
            if t <= last_time {
                assert!((r.at(k, 0)[0] - t).abs() < 1e-12, "frame {k}");
            }
        }
    }

    #[test]
    fn resample_same_rate_is_identity() {
        let s = wobble(40, [0.0, 0.0], 1.0);
        assert_eq!(resample(&s, 30.0).unwrap(), s);
        let single = seq_from(30.0, 1, 2, |_, _| [0.0, 0.0]);
        assert!(resample(&single, 25.0).is_err());
    }

    #[test]
    fn smooth_examples() {
        let s = wobble(20, [0.0, 0.0], 1.0);
        assert_eq!(smooth(&s, 0), s);
        let c = seq_from(30.0, 10, 2, |_, j| [j as f64, 1.5]);
        assert_eq!(smooth(&c, 3), c);
        let alt = seq_from(30.0, 9, 1, |t, _| [if t % 2 == 0 { 1.0 } else { -1.0 }, 0.0]);
        let out = smooth(&alt, 1);
        for t in 1..8 {
            let expect = if t % 2 == 0 { -1.0 / 3.0 } else { 1.0 / 3.0 };
            assert!((out.at(t, 0)[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn center_and_scale_contract() {
        let topo = SkeletonTopology::default();
        let w = wobble(60, [120.0, -30.0], 2.5);
        let out = center_and_scale(&w, &topo).unwrap();
        for f in 0..out.frames() {
            assert_eq!(out.at(f, topo.root()), [0.0, 0.0]);
        }
        assert!((median_trunk_length(&out, &topo).unwrap() - 1.0).abs() < 1e-9);

        let shifted = wobble(60, [125.0, -23.0], 2.5);
        let a = center_and_scale(&shifted, &topo).unwrap();
        for (p, q) in a.positions().iter().zip(out.positions()) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_trunk_rejected() {
        let topo = SkeletonTopology::default();
        let w = seq_from(30.0, 5, 19, |_, _| [1.0, 1.0]);
        assert!(matches!(center_and_scale(&w, &topo), Err(Error::Degenerate(_))));
    }

    #[test]
    fn feature_examples() {
        let topo = SkeletonTopology::default();
        let still = seq_from(30.0, 10, 19, |_, j| [j as f64, 0.5 * j as f64]);
        let f = extract_features(&still, &topo).unwrap();
        assert!(f.velocity.iter().all(|v| *v == [0.0, 0.0]));

        let d = 0.25;
        let moving = seq_from(30.0, 10, 19, |t, j| [j as f64 + d * t as f64, (j * j) as f64]);
        let f = extract_features(&moving, &topo).unwrap();
        for t in 0..10 {
            for j in 0..19 {
                let v = f.velocity[t * 19 + j];
                let expect = if t == 0 { [0.0, 0.0] } else { [d, 0.0] };
                assert!((v[0] - expect[0]).abs() < 1e-12 && v[1] == expect[1]);
                assert_eq!(f.bone[t * 19 + j], f.bone[j]);
            }
            assert_eq!(f.bone[t * 19 + topo.root()], [0.0, 0.0]);
        }
    }

    proptest! {
        #[test]
        fn smooth_commutes_with_translation(cx in -50.0f64..50.0, cy in -50.0f64..50.0, hw in 0usize..5) {
            let s = wobble(30, [0.0, 0.0], 1.0);
            let t = wobble(30, [cx, cy], 1.0);
            let a = smooth(&t, hw);
            let b = smooth(&s, hw);
            for (p, q) in a.positions().iter().zip(b.positions()) {
                prop_assert!((p[0] - q[0] - cx).abs() < 1e-9 && (p[1] - q[1] - cy).abs() < 1e-9);
            }
        }

        #[test]
        fn features_invariant_to_translation_and_scale(
            cx in -100.0f64..100.0, cy in -100.0f64..100.0, k in 0.1f64..10.0,
        ) {
            let topo = SkeletonTopology::default();
            let base = extract_features(&center_and_scale(&wobble(30, [0.0, 0.0], 1.0), &topo).unwrap(), &topo).unwrap();
            let moved = extract_features(&center_and_scale(&wobble(30, [cx, cy], k), &topo).unwrap(), &topo).unwrap();
            let close = |a: &[Point], b: &[Point]| a.iter().zip(b).all(|(p, q)| (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            prop_assert!(close(&base.position, &moved.position));
            prop_assert!(close(&base.velocity, &moved.velocity));
            prop_assert!(close(&base.bone, &moved.bone));
        }

        #[test]
        fn velocity_reconstructs_position(seed in 0u64..1000) {
            let topo = SkeletonTopology::default();
            let w = seq_from(30.0, 40, 19, |t, j| {
                let x = ((seed as f64 + 1.0) * (t * 19 + j) as f64).sin();
                [x, x * 0.5 - t as f64 * 0.01]
            });
            let f = extract_features(&w, &topo).unwrap();
            for j in 0..19 {
                let mut acc = f.position[j];
                for t in 1..40 {
                    let v = f.velocity[t * 19 + j];
                    acc = [acc[0] + v[0], acc[1] + v[1]];
                    let p = f.position[t * 19 + j];
                    prop_assert!((acc[0] - p[0]).abs() < 1e-12);
                    prop_assert!((acc[1] - p[1]).abs() < 1e-12);
                }
            }
        }
    }
}
