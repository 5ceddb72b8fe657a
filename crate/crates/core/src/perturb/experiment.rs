use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::angle::perturb_angle_factors;
use super::reference::{reference_percentiles, sample_scaling, segment_constrain, Mode, ReferencePercentiles, ScalingFactors, Statistic};
use super::velocity::{perturb_velocity_groups, Boundary};
use crate::cohort::RiskGroup;
use crate::error::{Error, Result};
use crate::model::{ensemble_predict, GcnModel};
use crate::par::{self, Execution};
use crate::preprocess::extract_features;
use crate::skeleton::{FactorGrid, MotionWindow, SkeletonTopology};
use crate::stats::Spread;
use crate::xai::Method;

macro_rules! labelled_enum {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($name), " {}"),
                        other
                    ))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Velocity,
    Angle,
    Combined,
}

labelled_enum!(Kind { Velocity => "velocity", Angle => "angle", Combined => "combined" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointSet {
    Topk,
    NonTopk,
}

labelled_enum!(JointSet { Topk => "topk", NonTopk => "non_topk" });

/// How grid multipliers map to effective factors. `Sample` multiplies each
/// grid value by the window's percentile anchor (`s_min` for slowdown,
/// `s_max` for speedup); `None` uses the grid value directly, which makes
/// factor 1 an exact identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    None,
    #[default]
    Sample,
}

labelled_enum!(Scaling { None => "none", Sample => "sample" });

/// Reference percentiles of both motion statistics for one risk group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub speed: ReferencePercentiles,
    pub angle: ReferencePercentiles,
}

impl References {
    pub fn compute(windows: &[&MotionWindow], topo: &SkeletonTopology) -> Result<Self> {
        Ok(Self {
            speed: reference_percentiles(windows, Statistic::Speed, topo)?,
            angle: reference_percentiles(windows, Statistic::AngleDelta, topo)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScaling {
    pub speed: ScalingFactors,
    pub angle: ScalingFactors,
}

impl WindowScaling {
    pub fn of(window: &MotionWindow, refs: &References, topo: &SkeletonTopology) -> Self {
        Self {
            speed: sample_scaling(window, &refs.speed, topo),
            angle: sample_scaling(window, &refs.angle, topo),
        }
    }
}

fn velocity_groups(
    joints: &[usize],
    mode: Mode,
    factor: f64,
    scaling: Option<&ScalingFactors>,
    topo: &SkeletonTopology,
) -> Vec<(Vec<usize>, f64)> {
    let mut touched = vec![false; topo.segments().len()];
    let mut groups = Vec::new();
    for &j in joints {
        match topo.segment_of(j) {
            Some(s) => touched[s] = true,
            None => groups.push((vec![j], factor * scaling.map_or(1.0, |sc| sc.eligible(j, mode)))),
        }
    }
    for (s, seg) in topo.segments().iter().enumerate().filter(|(s, _)| touched[*s]) {
        let anchor = scaling.map_or(1.0, |sc| {
            let members: Vec<f64> = seg.joints.iter().map(|&j| sc.anchors(mode)[j]).collect();
            segment_constrain(&members, mode)
        });
        groups.push((topo.segments()[s].joints.clone(), factor * anchor));
    }
    groups
}

fn angle_factors(
    joints: &[usize],
    mode: Mode,
    factor: f64,
    scaling: Option<&ScalingFactors>,
    topo: &SkeletonTopology,
) -> Vec<Option<f64>> {
    let mut factors = vec![None; topo.joint_count()];
    for &j in joints {
        factors[j] = Some(factor * scaling.map_or(1.0, |sc| sc.eligible(j, mode)));
    }
    for seg in topo.rigid_segments() {
        if seg.joints.iter().any(|&j| factors[j].is_some()) {
            let anchor = scaling.map_or(1.0, |sc| {
                let members: Vec<f64> = seg.joints.iter().map(|&j| sc.anchors(mode)[j]).collect();
                segment_constrain(&members, mode)
            });
            for &j in &seg.joints {
                factors[j] = Some(factor * anchor);
            }
        }
    }
    factors
}

/// Perturbs one window at one grid point. With `scaling` absent the grid
/// multiplier is the effective factor.
#[allow(clippy::too_many_arguments)]
pub fn perturb_window(
    window: &MotionWindow,
    joints: &[usize],
    kind: Kind,
    mode: Mode,
    factor: f64,
    scaling: Option<&WindowScaling>,
    boundary: Boundary,
    topo: &SkeletonTopology,
) -> MotionWindow {
    let velocity = |w: &MotionWindow| {
        let groups = velocity_groups(joints, mode, factor, scaling.map(|s| &s.speed), topo);
        let refs: Vec<(&[usize], f64)> = groups.iter().map(|(j, s)| (j.as_slice(), *s)).collect();
        perturb_velocity_groups(w, &refs, boundary)
    };
    let angle = |w: &MotionWindow| {
        let factors = angle_factors(joints, mode, factor, scaling.map(|s| &s.angle), topo);
        perturb_angle_factors(w, &factors, topo)
    };
    match kind {
        Kind::Velocity => velocity(window),
        Kind::Angle => angle(window),
        Kind::Combined => angle(&velocity(window)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mode: Mode,
    pub factor: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub n_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub method: Method,
    pub group: RiskGroup,
    pub joint_set: JointSet,
    pub kind: Kind,
    pub points: Vec<CurvePoint>,
}

impl ResponseCurve {
    pub fn mode_points(&self, mode: Mode) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(move |p| p.mode == mode)
    }
}

pub struct Experiment<'a> {
    pub method: Method,
    pub group: RiskGroup,
    pub joint_set: JointSet,
    pub joints: &'a [usize],
    pub kind: Kind,
    pub grid: &'a FactorGrid,
    pub scaling: Scaling,
    pub boundary: Boundary,
    pub references: Option<&'a References>,
}

fn window_risk(models: &[GcnModel], window: &MotionWindow, topo: &SkeletonTopology) -> Result<f64> {
    Ok(ensemble_predict(models, &extract_features(window, topo)?)?.median)
}

/// Median and quartiles of the per-window ensemble median risk on the
/// unperturbed windows.
pub fn baseline(windows: &[MotionWindow], models: &[GcnModel], topo: &SkeletonTopology, exec: Execution) -> Result<Spread> {
    let risks = par::map(exec, windows, |w| window_risk(models, w, topo))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Spread::of(&risks)
}

/// Perturbs every window at every grid point and summarizes the ensemble
/// median risk across windows. Work is spread over (window, grid point)
/// pairs; the reduction runs in a fixed order.
pub fn run_experiment(
    exp: &Experiment<'_>,
    windows: &[MotionWindow],
    models: &[GcnModel],
    topo: &SkeletonTopology,
    exec: Execution,
) -> Result<ResponseCurve> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows to perturb"));
    }
    exp.grid.validate()?;
    let scalings: Option<Vec<WindowScaling>> = match exp.scaling {
        Scaling::None => None,
        Scaling::Sample => {
            let refs = exp
                .references
                .ok_or_else(|| Error::InvalidArgument("sample scaling needs reference percentiles".into()))?;
            Some(par::map(exec, windows, |w| WindowScaling::of(w, refs, topo)))
        }
    };
    let grid: Vec<(Mode, f64)> = exp
        .grid
        .slowdown
        .iter()
        .map(|&f| (Mode::Slowdown, f))
        .chain(exp.grid.speedup.iter().map(|&f| (Mode::Speedup, f)))
        .collect();
    let risks = par::map_indexed(exec, windows.len() * grid.len(), |i| {
        let (w, g) = (i / grid.len(), i % grid.len());
        let (mode, factor) = grid[g];
        let scaling = scalings.as_ref().map(|s| &s[w]);
        let perturbed = perturb_window(&windows[w], exp.joints, exp.kind, mode, factor, scaling, exp.boundary, topo);
        window_risk(models, &perturbed, topo)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(g, &(mode, factor))| {
            let column: Vec<f64> = (0..windows.len()).map(|w| risks[w * grid.len() + g]).collect();
            let s = Spread::of(&column)?;
            Ok(CurvePoint {
                mode,
                factor,
                median: s.median,
                p25: s.p25,
                p75: s.p75,
                n_windows: windows.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResponseCurve {
        method: exp.method,
        group: exp.group,
        joint_set: exp.joint_set,
        kind: exp.kind,
        points,
    })
}

const CSV_HEADER: [&str; 10] = [
    "method", "group", "joint_set", "kind", "mode", "factor", "median", "p25", "p75", "n_windows",
];

/// One row per curve point. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_curves_csv<W: Write>(curves: &[ResponseCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.method.as_str().to_string(),
                c.group.as_str().to_string(),
                c.joint_set.as_str().to_string(),
                c.kind.as_str().to_string(),
                p.mode.as_str().to_string(),
                p.factor.to_string(),
                p.median.to_string(),
                p.p25.to_string(),
                p.p75.to_string(),
                p.n_windows.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Inverse of [`write_curves_csv`]: consecutive rows sharing method, group,
/// joint set and kind form one curve.
pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<ResponseCurve>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidArgument("unexpected response-curve CSV header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")));
    let mut curves: Vec<ResponseCurve> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let method: Method = rec[0].parse()?;
        let group: RiskGroup = rec[1].parse()?;
        let joint_set: JointSet = rec[2].parse()?;
        let kind: Kind = rec[3].parse()?;
        let point = CurvePoint {
            mode: rec[4].parse()?,
            factor: num(&rec[5])?,
            median: num(&rec[6])?,
            p25: num(&rec[7])?,
            p75: num(&rec[8])?,
            n_windows: rec[9]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad window count: {e}")))?,
        };
        match curves.last_mut() {
            Some(c) if (c.method, c.group, c.joint_set, c.kind) == (method, group, joint_set, kind) => {
                c.points.push(point)
            }
            _ => curves.push(ResponseCurve {
                method,
                group,
                joint_set,
                kind,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn windows(n: usize) -> Vec<MotionWindow> {
        let topo = SkeletonTopology::default();
        (0..n)
            .map(|k| {
                let pts = (0..40 * 19)
                    .map(|i| {
                        let (t, j) = ((i / 19) as f64, i % 19);
                        if j == topo.root() {
                            return [0.0, 0.0];
                        }
                        let r = 0.3 + 0.05 * j as f64;
                        let w = 0.1 + 0.03 * k as f64;
                        [r * (w * t + j as f64).cos(), 1.0 + r * (w * t).sin()]
                    })
                    .collect();
                MotionWindow::new(30.0, 19, pts).unwrap()
            })
            .collect()
    }

    fn models(n: u64) -> Vec<GcnModel> {
        let topo = SkeletonTopology::default();
        let arch = Architecture {
            hidden: vec![4],
            ..Architecture::default()
        };
        (0..n)
            .map(|s| GcnModel::new(&topo, &arch, &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
            .collect()
    }

    fn experiment<'a>(grid: &'a FactorGrid, joints: &'a [usize], kind: Kind, refs: Option<&'a References>) -> Experiment<'a> {
        Experiment {
            method: Method::Cam,
            group: RiskGroup::VeryLow,
            joint_set: JointSet::Topk,
            joints,
            kind,
            grid,
            scaling: if refs.is_some() { Scaling::Sample } else { Scaling::None },
            boundary: Boundary::Clamp,
            references: refs,
        }
    }

    #[test]
    fn unit_factor_reproduces_baseline_exactly() {
        let topo = SkeletonTopology::default();
        let ws = windows(5);
        let ms = models(3);
        let base = baseline(&ws, &ms, &topo, Execution::Sequential).unwrap();
        let grid = FactorGrid::default();
        for kind in Kind::ALL {
            let curve = run_experiment(&experiment(&grid, &[0, 6, 14], *kind, None), &ws, &ms, &topo, Execution::Parallel).unwrap();
            assert_eq!(curve.points.len(), grid.slowdown.len() + grid.speedup.len());
            for p in curve.points.iter().filter(|p| p.factor == 1.0) {
                assert_eq!((p.median, p.p25, p.p75), (base.median, base.p25, base.p75));
            }
            assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&p.p25) && p.p25 <= p.median && p.median <= p.p75 && p.p75 <= 1.0));
        }
    }

    #[test]
    fn matches_serial_recomputation() {
        let topo = SkeletonTopology::default();
        let ws = windows(4);
        let ms = models(2);
        let grid = FactorGrid::default();
        let refs = References::compute(&ws.iter().collect::<Vec<_>>(), &topo).unwrap();
        let exp = experiment(&grid, &[6, 14, 2], Kind::Combined, Some(&refs));
        let curve = run_experiment(&exp, &ws, &ms, &topo, Execution::Parallel).unwrap();
        let mut k = 0;
        for (mode, factors) in [(Mode::Slowdown, &grid.slowdown), (Mode::Speedup, &grid.speedup)] {
            for &f in factors {
                let mut risks = Vec::new();
                for w in &ws {
                    let sc = WindowScaling::of(w, &refs, &topo);
                    let p = perturb_window(w, &[6, 14, 2], Kind::Combined, mode, f, Some(&sc), Boundary::Clamp, &topo);
                    let feats = extract_features(&p, &topo).unwrap();
                    let mut per: Vec<f64> = ms.iter().map(|m| m.predict(&feats).unwrap()[1]).collect();
                    per.sort_by(f64::total_cmp);
                    risks.push(crate::stats::quantile_sorted(&per, 0.5));
                }
                let s = Spread::of(&risks).unwrap();
                let got = &curve.points[k];
                assert_eq!((got.mode, got.factor), (mode, f));
                assert_eq!((got.median, got.p25, got.p75), (s.median, s.p25, s.p75));
                k += 1;
            }
        }
        let again = run_experiment(&exp, &ws, &ms, &topo, Execution::Sequential).unwrap();
        assert_eq!(again, curve);
    }

    #[test]
    fn empty_window_set_is_an_error() {
        let topo = SkeletonTopology::default();
        let grid = FactorGrid::default();
        let r = run_experiment(&experiment(&grid, &[6], Kind::Velocity, None), &[], &models(1), &topo, Execution::Sequential);
        assert!(r.is_err());
    }

    #[test]
    fn sample_scaling_respects_mode_direction() {
        let topo = SkeletonTopology::default();
        let ws = windows(3);
        let refs = References::compute(&ws.iter().collect::<Vec<_>>(), &topo).unwrap();
        for w in &ws {
            let sc = WindowScaling::of(w, &refs, &topo);
            for g in velocity_groups(&[6, 14, 3], Mode::Slowdown, 1.0, Some(&sc.speed), &topo) {
                assert!(g.1 <= 1.0);
            }
            for g in velocity_groups(&[6, 14, 3], Mode::Speedup, 1.0, Some(&sc.speed), &topo) {
                assert!(g.1 >= 1.0);
            }
            let f = angle_factors(&[0, 6], Mode::Speedup, 2.0, Some(&sc.angle), &topo);
            assert!(f.iter().flatten().all(|&x| x >= 2.0));
            assert_eq!(f[0], f[4]);
            assert!(f[8].is_none());
        }
    }

    fn curve_strategy() -> impl Strategy<Value = Vec<ResponseCurve>> {
        let point = (any::<bool>(), 0.01f64..10.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 1usize..500).prop_map(
            |(slow, factor, a, b, c, n)| {
                let mut v = [a, b, c];
                v.sort_by(f64::total_cmp);
                CurvePoint {
                    mode: if slow { Mode::Slowdown } else { Mode::Speedup },
                    factor,
                    median: v[1],
                    p25: v[0],
                    p75: v[2],
                    n_windows: n,
                }
            },
        );
        prop::collection::vec(point, 1..8).prop_flat_map(|points| {
            (0usize..24).prop_map(move |i| {
                vec![ResponseCurve {
                    method: Method::ALL[i % 2],
                    group: [RiskGroup::VeryLow, RiskGroup::VeryHigh][(i / 2) % 2],
                    joint_set: JointSet::ALL[(i / 4) % 2],
                    kind: Kind::ALL[i / 8],
                    points: points.clone(),
                }]
            })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(curves in curve_strategy()) {
            let mut buf = Vec::new();
            write_curves_csv(&curves, &mut buf).unwrap();
            prop_assert_eq!(read_curves_csv(buf.as_slice()).unwrap(), curves);
        }
    }
}
