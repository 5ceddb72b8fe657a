use serde::{Deserialize, Serialize};

use crate::preprocess::sample_joint;
use crate::skeleton::{MotionWindow, SkeletonTopology};

/// What a reparameterized trajectory does once the source time index runs
/// past the last recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Hold the final pose.
    #[default]
    Clamp,
    /// Play the recording backwards from the end, back and forth, so the
    /// scaled speed is kept over the whole window.
    Reflect,
}

impl Boundary {
    /// Maps a source time index into `[0, last]`.
    pub fn fold(self, pos: f64, last: usize) -> f64 {
        let last = last as f64;
        match self {
            Boundary::Clamp => pos.clamp(0.0, last),
            Boundary::Reflect => {
                if last == 0.0 {
                    return 0.0;
                }
                let m = pos.abs() % (2.0 * last);
                if m > last {
                    2.0 * last - m
                } else {
                    m
                }
            }
        }
    }
}

/// Time-reparameterizes groups of joints: joint `j` of a group with scale
/// `s` takes its original position at fractional frame `f * s`, folded into
/// the recorded range by `boundary`. Joints not named in any group are
/// untouched.
pub fn perturb_velocity_groups(window: &MotionWindow, groups: &[(&[usize], f64)], boundary: Boundary) -> MotionWindow {
    let last = window.frames() - 1;
    let mut out = window.clone();
    for &(joints, scale) in groups {
        assert!(scale > 0.0, "velocity scale must be positive");
        if scale == 1.0 {
            continue;
        }
        for &j in joints {
            for f in 0..window.frames() {
                out.set(f, j, sample_joint(window, j, boundary.fold(f as f64 * scale, last)));
            }
        }
    }
    out
}

/// Applies one scale to `joints` expanded to their whole segments, holding
/// the final pose once the recording runs out.
pub fn perturb_velocity(window: &MotionWindow, joints: &[usize], scale: f64, topo: &SkeletonTopology) -> MotionWindow {
    let expanded = topo.expand_to_segments(joints);
    perturb_velocity_groups(window, &[(&expanded, scale)], Boundary::Clamp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(frames: usize) -> MotionWindow {
        let pts = (0..frames * 19).map(|i| [(i / 19) as f64, (i % 19) as f64]).collect();
        MotionWindow::new(30.0, 19, pts).unwrap()
    }

    #[test]
    fn unit_scale_is_identity() {
        let topo = SkeletonTopology::default();
        let w = line(40);
        assert_eq!(perturb_velocity(&w, &[6], 1.0, &topo), w);
    }

    #[test]
    fn half_speed_on_linear_motion() {
        let topo = SkeletonTopology::default();
        let w = line(40);
        let p = perturb_velocity(&w, &[6], 0.5, &topo);
        for f in 1..40 {
            for j in [5, 6, 7] {
                assert!(((p.at(f, j)[0] - p.at(f - 1, j)[0]) - 0.5).abs() < 1e-12);
            }
            // left arm untouched
            assert_eq!(p.at(f, 10), w.at(f, 10));
        }
        assert_eq!(p.frames(), 40);
    }

    #[test]
    fn fivefold_speedup_freezes_tail() {
        let topo = SkeletonTopology::default();
        let w = line(150);
        let p = perturb_velocity(&w, &[14], 5.0, &topo);
        assert!((p.at(29, 14)[0] - 145.0).abs() < 1e-12);
        for f in 30..150 {
            assert_eq!(p.at(f, 14), w.at(149, 14));
        }
    }

    #[test]
    fn reflection_keeps_speed_past_the_end() {
        let w = line(11);
        let p = perturb_velocity_groups(&w, &[(&[3], 3.0)], Boundary::Reflect);
        let xs: Vec<f64> = (0..11).map(|f| p.at(f, 3)[0]).collect();
        assert_eq!(xs, [0.0, 3.0, 6.0, 9.0, 8.0, 5.0, 2.0, 1.0, 4.0, 7.0, 10.0]);
        assert_eq!(Boundary::Reflect.fold(7.5, 0), 0.0);
        assert_eq!(Boundary::Clamp.fold(-1.0, 4), 0.0);
    }

    #[test]
    fn segment_members_share_reparameterization() {
        let topo = SkeletonTopology::default();
        let pts = (0..30 * 19)
            .map(|i| {
                let (t, j) = ((i / 19) as f64, (i % 19) as f64);
                [(0.2 * t).sin() + j, (0.1 * t * j).cos()]
            })
            .collect();
        let w = MotionWindow::new(30.0, 19, pts).unwrap();
        let s = 0.5;
        let p = perturb_velocity(&w, &[13], s, &topo);
        // Even frames land on original samples, so within-segment offsets
        // are reproduced exactly there.
        for f in (0..30).step_by(2) {
            let src = f / 2;
            for (a, b) in [(13, 14), (14, 15)] {
                let d = |win: &MotionWindow, t| {
                    let (pa, pb) = (win.at(t, a), win.at(t, b));
                    [pa[0] - pb[0], pa[1] - pb[1]]
                };
                assert_eq!(d(&p, f), d(&w, src));
            }
        }
    }
}
