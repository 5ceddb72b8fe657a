//! Velocity, angular and combined perturbation of motion windows, and the
//! experiment runner that turns them into response curves.

mod angle;
mod experiment;
mod reference;
mod velocity;

pub use angle::{perturb_angle, perturb_angle_factors};
pub use experiment::{
    baseline, perturb_window, read_curves_csv, run_experiment, write_curves_csv, CurvePoint, Experiment, JointSet,
    Kind, References, ResponseCurve, Scaling, WindowScaling,
};
pub use reference::{
    joint_statistic, reference_percentiles, sample_scaling, segment_constrain, wrap_angle, Mode, ReferencePercentiles,
    ScalingFactors, Statistic,
};
pub use velocity::{perturb_velocity, perturb_velocity_groups, Boundary};

use crate::skeleton::{MotionWindow, SkeletonTopology};

/// Velocity perturbation followed by angular perturbation of its output.
pub fn perturb_combined(
    window: &MotionWindow,
    joints: &[usize],
    velocity_scale: f64,
    angle_factor: f64,
    topo: &SkeletonTopology,
) -> MotionWindow {
    let moved = perturb_velocity(window, joints, velocity_scale, topo);
    perturb_angle(&moved, joints, angle_factor, topo)
}
