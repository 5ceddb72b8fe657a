use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{MotionWindow, SkeletonTopology};
use crate::stats;

/// Per-frame motion statistic used for percentile scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Displacement magnitude between consecutive frames.
    Speed,
    /// Absolute change of the bone angle against the horizontal axis
    /// between consecutive frames, in radians.
    AngleDelta,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Speed => "speed",
            Statistic::AngleDelta => "angle_delta",
        })
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

pub(crate) fn bone_angle(window: &MotionWindow, topo: &SkeletonTopology, frame: usize, joint: usize) -> Option<f64> {
    let p = window.at(frame, joint);
    let q = window.at(frame, topo.parent(joint));
    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
    (dx != 0.0 || dy != 0.0).then(|| dy.atan2(dx))
}

/// Statistic values of one joint over frames `1..n`.
pub fn joint_statistic(
    window: &MotionWindow,
    topo: &SkeletonTopology,
    statistic: Statistic,
    joint: usize,
) -> Vec<f64> {
    (1..window.frames())
        .map(|t| match statistic {
            Statistic::Speed => {
                let (a, b) = (window.at(t, joint), window.at(t - 1, joint));
                (a[0] - b[0]).hypot(a[1] - b[1])
            }
            Statistic::AngleDelta => {
                if joint == topo.root() {
                    return 0.0;
                }
                match (bone_angle(window, topo, t, joint), bone_angle(window, topo, t - 1, joint)) {
                    (Some(cur), Some(prev)) => wrap_angle(cur - prev).abs(),
                    _ => 0.0,
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePercentiles {
    pub statistic: Statistic,
    pub p5: Vec<f64>,
    pub p95: Vec<f64>,
}

fn percentiles_of(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (stats::quantile_sorted(&sorted, 0.05), stats::quantile_sorted(&sorted, 0.95))
}

/// Pooled per-joint 5th and 95th percentiles over all frames of all windows.
pub fn reference_percentiles(
    windows: &[&MotionWindow],
    statistic: Statistic,
    topo: &SkeletonTopology,
) -> Result<ReferencePercentiles> {
    if windows.is_empty() {
        return Err(Error::Empty("no reference windows"));
    }
    let joints = topo.joint_count();
    let mut p5 = Vec::with_capacity(joints);
    let mut p95 = Vec::with_capacity(joints);
    for j in 0..joints {
        let pooled: Vec<f64> = windows
            .iter()
            .flat_map(|w| joint_statistic(w, topo, statistic, j))
            .collect();
        let (lo, hi) = percentiles_of(&pooled);
        p5.push(lo);
        p95.push(hi);
    }
    Ok(ReferencePercentiles { statistic, p5, p95 })
}

/// Per-joint slowdown (`s_min`) and speedup (`s_max`) anchors for one
/// window. A factor whose ratio is undefined or zero falls back to 1 and is
/// flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactors {
    pub s_min: Vec<f64>,
    pub s_max: Vec<f64>,
    pub min_fallback: Vec<bool>,
    pub max_fallback: Vec<bool>,
}

fn ratio_or_one(reference: f64, sample: f64) -> (f64, bool) {
    let r = reference / sample;
    if sample > 0.0 && r > 0.0 && r.is_finite() {
        (r, false)
    } else {
        (1.0, true)
    }
}

pub fn sample_scaling(
    window: &MotionWindow,
    reference: &ReferencePercentiles,
    topo: &SkeletonTopology,
) -> ScalingFactors {
    let joints = topo.joint_count();
    let mut out = ScalingFactors {
        s_min: Vec::with_capacity(joints),
        s_max: Vec::with_capacity(joints),
        min_fallback: Vec::with_capacity(joints),
        max_fallback: Vec::with_capacity(joints),
    };
    for j in 0..joints {
        let (p5, p95) = percentiles_of(&joint_statistic(window, topo, reference.statistic, j));
        let (lo, lo_flag) = ratio_or_one(reference.p5[j], p5);
        let (hi, hi_flag) = ratio_or_one(reference.p95[j], p95);
        out.s_min.push(lo);
        out.s_max.push(hi);
        out.min_fallback.push(lo_flag);
        out.max_fallback.push(hi_flag);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Slowdown,
    Speedup,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Slowdown => "slowdown",
            Mode::Speedup => "speedup",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slowdown" => Ok(Mode::Slowdown),
            "speedup" => Ok(Mode::Speedup),
            other => Err(Error::InvalidArgument(format!("unknown mode {other}"))),
        }
    }
}

/// One factor for a group of linked joints: slowdown takes the largest
/// member factor `<= 1`, speedup the smallest `>= 1`; 1 when none qualifies.
pub fn segment_constrain(member_factors: &[f64], mode: Mode) -> f64 {
    match mode {
        Mode::Slowdown => member_factors
            .iter()
            .copied()
            .filter(|&f| f <= 1.0)
            .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))))
            .unwrap_or(1.0),
        Mode::Speedup => member_factors
            .iter()
            .copied()
            .filter(|&f| f >= 1.0)
            .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.min(f))))
            .unwrap_or(1.0),
    }
}

impl ScalingFactors {
    /// The anchor of one joint for `mode`, restricted to the eligible side
    /// of 1 so that slowdown never accelerates and speedup never slows.
    pub fn eligible(&self, joint: usize, mode: Mode) -> f64 {
        match mode {
            Mode::Slowdown => segment_constrain(&[self.s_min[joint]], mode),
            Mode::Speedup => segment_constrain(&[self.s_max[joint]], mode),
        }
    }

    pub fn anchors(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::Slowdown => &self.s_min,
            Mode::Speedup => &self.s_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn walker(frames: usize, step: f64) -> MotionWindow {
        let topo = SkeletonTopology::default();
        let pts = (0..frames * 19)
            .map(|i| {
                let (t, j) = (i / 19, i % 19);
                if j == topo.root() {
                    [0.0, 0.0]
                } else {
                    [j as f64 + step * t as f64, 1.0]
                }
            })
            .collect();
        MotionWindow::new(30.0, 19, pts).unwrap()
    }

    #[test]
    fn constant_speed_and_static_references() {
        let topo = SkeletonTopology::default();
        let w = walker(20, 0.3);
        let r = reference_percentiles(&[&w], Statistic::Speed, &topo).unwrap();
        for j in 0..19 {
            let v = if j == topo.root() { 0.0 } else { 0.3 };
            assert!((r.p5[j] - v).abs() < 1e-12 && (r.p95[j] - v).abs() < 1e-12);
        }
        let still = walker(20, 0.0);
        let r = reference_percentiles(&[&still], Statistic::Speed, &topo).unwrap();
        assert!(r.p5.iter().chain(&r.p95).all(|&v| v == 0.0));
        assert!(reference_percentiles(&[], Statistic::Speed, &topo).is_err());
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(ratio_or_one(0.02, 0.04), (0.5, false));
        assert_eq!(ratio_or_one(0.02, 0.0), (1.0, true));
        let topo = SkeletonTopology::default();
        let w = walker(30, 0.2);
        let r = reference_percentiles(&[&w], Statistic::Speed, &topo).unwrap();
        let s = sample_scaling(&w, &r, &topo);
        for j in 0..19 {
            assert_eq!(s.s_min[j], 1.0);
            assert_eq!(s.s_max[j], 1.0);
            assert_eq!(s.min_fallback[j], j == topo.root());
        }
    }

    #[test]
    fn constrain_examples() {
        assert_eq!(segment_constrain(&[0.5, 0.8], Mode::Slowdown), 0.8);
        assert_eq!(segment_constrain(&[2.0, 3.0], Mode::Speedup), 2.0);
        assert_eq!(segment_constrain(&[1.2, 1.5], Mode::Slowdown), 1.0);
        assert_eq!(segment_constrain(&[0.4, 0.9], Mode::Speedup), 1.0);
    }

    #[test]
    fn wrap_stays_in_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn percentiles_match_full_sort(values in prop::collection::vec(0.0f64..5.0, 2..60)) {
            // One moving joint whose successive displacements are `values`.
            let topo = SkeletonTopology::default();
            let mut x = 0.0;
            let mut frames = vec![vec![[0.0, 0.0]; 19]];
            for v in &values {
                x += v;
                let mut f = vec![[0.0, 0.0]; 19];
                f[7] = [x, 0.0];
                frames.push(f);
            }
            frames[0][7] = [0.0, 0.0];
            let w = MotionWindow::from_frames(30.0, frames).unwrap();
            let r = reference_percentiles(&[&w], Statistic::Speed, &topo).unwrap();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let oracle = |p: f64| {
                let rank = (sorted.len() - 1) as f64 * p;
                let lo = rank.floor() as usize;
                let hi = rank.ceil() as usize;
                sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
            };
            prop_assert!((r.p5[7] - oracle(0.05)).abs() < 1e-9);
            prop_assert!((r.p95[7] - oracle(0.95)).abs() < 1e-9);
        }
    }
}
