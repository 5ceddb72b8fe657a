use crate::skeleton::{MotionWindow, Point, SkeletonTopology};

use super::reference::wrap_angle;

#[derive(Clone, Copy)]
enum Role {
    Free,
    Scaled(f64),
    /// Carried by the rotation of a rigid unit's anchor joint.
    Follower(usize),
}

fn roles(factors: &[Option<f64>], topo: &SkeletonTopology) -> Vec<Role> {
    let mut roles: Vec<Role> = factors
        .iter()
        .map(|f| match *f {
            Some(f) if f != 1.0 => Role::Scaled(f),
            _ => Role::Free,
        })
        .collect();
    for seg in topo.rigid_segments() {
        let Some(unit_factor) = seg.joints.iter().find_map(|&j| factors[j]) else {
            continue;
        };
        let inside = |j: usize| seg.joints.contains(&j);
        let is_anchor = |j: usize| j == topo.root() || !inside(topo.parent(j));
        // An anchor that carries its own factor keeps it.
        let anchor_factor = |a: usize| factors[a].unwrap_or(unit_factor);
        for &j in &seg.joints {
            roles[j] = if is_anchor(j) {
                let f = anchor_factor(j);
                if f == 1.0 { Role::Free } else { Role::Scaled(f) }
            } else {
                let mut a = topo.parent(j);
                while !is_anchor(a) {
                    a = topo.parent(a);
                }
                Role::Follower(a)
            };
        }
    }
    roles
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

/// Scales frame-to-frame bone-angle changes per joint while keeping every
/// per-frame bone length. `factors[j] = None` leaves joint `j`'s angle
/// alone; it still follows its parent. Members of rigid segments move with
/// their anchor (the member attached outside the unit) as one body.
pub fn perturb_angle_factors(window: &MotionWindow, factors: &[Option<f64>], topo: &SkeletonTopology) -> MotionWindow {
    let joints = topo.joint_count();
    assert_eq!(factors.len(), joints, "one factor slot per joint");
    let roles = roles(factors, topo);
    let mut out = window.clone();
    // Accumulated angle and last valid original angle per scaled joint.
    let mut acc: Vec<Option<(f64, f64)>> = vec![None; joints];
    // Rotation applied to each joint's bone at the current frame.
    let mut rot = vec![0.0f64; joints];
    let mut changed = vec![false; joints];
    for t in 0..window.frames() {
        changed.iter_mut().for_each(|c| *c = false);
        for &j in topo.topological_order() {
            if j == topo.root() {
                continue;
            }
            let orig = window.at(t, j);
            let p = topo.parent(j);
            let parent_new = out.at(t, p);
            let offset = sub(orig, window.at(t, p));
            match roles[j] {
                Role::Free => {
                    if changed[p] {
                        out.set(t, j, add(parent_new, offset));
                        changed[j] = true;
                    }
                }
                Role::Scaled(factor) => {
                    let len = offset[0].hypot(offset[1]);
                    if len == 0.0 {
                        if changed[p] {
                            out.set(t, j, parent_new);
                            changed[j] = true;
                        }
                        continue;
                    }
                    let theta = offset[1].atan2(offset[0]);
                    let new_theta = match acc[j] {
                        None => theta,
                        Some((prev_new, prev)) => prev_new + factor * wrap_angle(theta - prev),
                    };
                    acc[j] = Some((new_theta, theta));
                    rot[j] = new_theta - theta;
                    if new_theta == theta && !changed[p] {
                        continue;
                    }
                    let (s, c) = new_theta.sin_cos();
                    out.set(t, j, [parent_new[0] + len * c, parent_new[1] + len * s]);
                    changed[j] = true;
                }
                Role::Follower(a) => {
                    if rot[a] == 0.0 && !changed[a] {
                        continue;
                    }
                    let rel = sub(orig, window.at(t, a));
                    let (s, c) = rot[a].sin_cos();
                    out.set(t, j, add(out.at(t, a), [c * rel[0] - s * rel[1], s * rel[0] + c * rel[1]]));
                    changed[j] = true;
                }
            }
        }
    }
    out
}

/// Applies one angular factor to `joints`; a selected head joint brings its
/// whole rigid unit along.
pub fn perturb_angle(window: &MotionWindow, joints: &[usize], factor: f64, topo: &SkeletonTopology) -> MotionWindow {
    assert!(factor >= 0.0, "angle factor must be non-negative");
    let mut factors = vec![None; topo.joint_count()];
    for &j in joints {
        factors[j] = Some(factor);
    }
    perturb_angle_factors(window, &factors, topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wiggle(seed: u64, frames: usize) -> MotionWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases: Vec<f64> = (0..19 * 2).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let pts = (0..frames * 19)
            .map(|i| {
                let (t, j) = ((i / 19) as f64, i % 19);
                let r = 1.0 + j as f64 * 0.3;
                [r * (0.15 * t + phases[2 * j]).cos(), r * (0.11 * t + phases[2 * j + 1]).sin()]
            })
            .collect();
        MotionWindow::new(30.0, 19, pts).unwrap()
    }

    fn lengths(w: &MotionWindow, topo: &SkeletonTopology) -> Vec<f64> {
        let mut v = Vec::new();
        for t in 0..w.frames() {
            for (c, p) in topo.edges() {
                let d = sub(w.at(t, c), w.at(t, p));
                v.push(d[0].hypot(d[1]));
            }
        }
        v
    }

    fn assert_lengths_kept(a: &MotionWindow, b: &MotionWindow, topo: &SkeletonTopology) {
        for (x, y) in lengths(a, topo).iter().zip(lengths(b, topo)) {
            assert!((x - y).abs() <= 1e-9 * x.max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn unit_factor_is_identity() {
        let topo = SkeletonTopology::default();
        let w = wiggle(1, 50);
        let all: Vec<usize> = (0..19).collect();
        assert_eq!(perturb_angle(&w, &all, 1.0, &topo), w);
    }

    #[test]
    fn unit_factor_matches_when_parent_moves() {
        let topo = SkeletonTopology::default();
        let w = wiggle(2, 40);
        let mut factors = vec![None; 19];
        factors[5] = Some(0.5);
        factors[6] = Some(1.0 + 1e-15);
        let p = perturb_angle_factors(&w, &factors, &topo);
        for t in 0..40 {
            let rel = |win: &MotionWindow| sub(win.at(t, 6), win.at(t, 5));
            let (a, b) = (rel(&p), rel(&w));
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_factor_freezes_relative_angle() {
        let topo = SkeletonTopology::default();
        let w = wiggle(3, 40);
        let p = perturb_angle(&w, &[6, 14], 0.0, &topo);
        for j in [6, 14] {
            let parent = topo.parent(j);
            let a0 = {
                let d = sub(w.at(0, j), w.at(0, parent));
                d[1].atan2(d[0])
            };
            for t in 0..40 {
                let d = sub(p.at(t, j), p.at(t, parent));
                assert!(wrap_angle(d[1].atan2(d[0]) - a0).abs() < 1e-9);
            }
        }
        assert_lengths_kept(&w, &p, &topo);
    }

    #[test]
    fn children_follow_perturbed_parent() {
        let topo = SkeletonTopology::default();
        let w = wiggle(4, 30);
        let p = perturb_angle(&w, &[5], 3.0, &topo);
        for t in 0..30 {
            for (c, par) in [(6, 5), (7, 6)] {
                let (a, b) = (sub(p.at(t, c), p.at(t, par)), sub(w.at(t, c), w.at(t, par)));
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            }
            assert_eq!(p.at(t, 10), w.at(t, 10));
        }
    }

    #[test]
    fn head_moves_as_rigid_unit() {
        let topo = SkeletonTopology::default();
        let w = wiggle(5, 30);
        let p = perturb_angle(&w, &[0], 2.0, &topo);
        let dist = |win: &MotionWindow, t, a, b| {
            let d = sub(win.at(t, a), win.at(t, b));
            d[0].hypot(d[1])
        };
        for t in 0..30 {
            for a in 0..5 {
                for b in 0..5 {
                    assert!((dist(&p, t, a, b) - dist(&w, t, a, b)).abs() < 1e-9);
                }
            }
        }
        assert!((0..30).any(|t| p.at(t, 0) != w.at(t, 0)));
    }

    #[test]
    fn zero_length_bone_keeps_offset() {
        let topo = SkeletonTopology::default();
        let mut w = wiggle(6, 10);
        let at = w.at(4, 5);
        w.set(4, 6, at);
        let p = perturb_angle(&w, &[6], 0.5, &topo);
        assert_eq!(p.at(4, 6), p.at(4, 5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bone_lengths_preserved(seed in 0u64..10_000, factor in 0.0f64..6.0, mask in 0u32..(1 << 19)) {
            let topo = SkeletonTopology::default();
            let w = wiggle(seed, 25);
            let joints: Vec<usize> = (0..19).filter(|j| mask & (1 << j) != 0).collect();
            let p = perturb_angle(&w, &joints, factor, &topo);
            assert_lengths_kept(&w, &p, &topo);
        }
    }
}
