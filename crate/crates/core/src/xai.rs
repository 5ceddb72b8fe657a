//! CAM and Grad-CAM attribution, ensemble aggregation, threshold
//! calibration and the four-colour rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureMapStack, GcnModel};
use crate::preprocess::FeatureTensor;
use crate::stats::{self, Spread};

/// Reference thresholds reported for the clinical ensemble. Used only as
/// documented defaults; runs normally calibrate their own.
pub const CAM_REFERENCE_THETA: f64 = 0.29;
pub const GRADCAM_REFERENCE_THETA: f64 = 0.17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cam,
    GradCam,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Cam, Method::GradCam];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cam => "cam",
            Method::GradCam => "gradcam",
        }
    }

    pub fn reference_theta(self) -> f64 {
        match self {
            Method::Cam => CAM_REFERENCE_THETA,
            Method::GradCam => GRADCAM_REFERENCE_THETA,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cam" => Ok(Method::Cam),
            "gradcam" => Ok(Method::GradCam),
            other => Err(Error::InvalidArgument(format!("unknown method {other}"))),
        }
    }
}

/// Per-(frame, joint) attribution in `[0, 1]` for one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    pub frames: usize,
    pub joints: usize,
    /// Row-major `frames x joints`.
    pub values: Vec<f64>,
    pub method: Method,
    pub target_class: usize,
}

impl AttributionMap {
    pub fn at(&self, frame: usize, joint: usize) -> f64 {
        self.values[frame * self.joints + joint]
    }

    /// Mean over frames for each joint.
    pub fn joint_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.joints];
        for row in self.values.chunks_exact(self.joints) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.frames as f64).collect()
    }
}

/// Rectify, then divide by the maximum. All-nonpositive maps become zero.
pub fn normalize_map(raw: &mut [f64]) {
    let mut max = 0.0f64;
    for v in raw.iter_mut() {
        *v = v.max(0.0);
        max = max.max(*v);
    }
    if max > 0.0 {
        raw.iter_mut().for_each(|v| *v /= max);
    }
}

/// `Σ_n weight_n F^n`, unnormalized, as a `frames x joints` buffer.
pub fn weighted_sum(maps: &FeatureMapStack, weights: &[f64]) -> Vec<f64> {
    let plane = maps.frames * maps.joints;
    let mut out = vec![0.0; plane];
    for (n, &w) in weights.iter().enumerate().take(maps.channels) {
        if w == 0.0 {
            continue;
        }
        for (o, f) in out.iter_mut().zip(maps.channel(n)) {
            *o += w * f;
        }
    }
    out
}

pub fn cam_from_maps(maps: &FeatureMapStack, class_weights: &[f64]) -> Vec<f64> {
    let mut raw = weighted_sum(maps, class_weights);
    normalize_map(&mut raw);
    raw
}

/// Channel weights are the spatio-temporal mean of the score gradient.
pub fn gradcam_from_maps(maps: &FeatureMapStack, gradients: &FeatureMapStack) -> Vec<f64> {
    let alphas: Vec<f64> = (0..gradients.channels)
        .map(|n| stats::mean(gradients.channel(n)))
        .collect();
    let mut raw = weighted_sum(maps, &alphas);
    normalize_map(&mut raw);
    raw
}

pub fn cam(model: &GcnModel, features: &FeatureTensor, target_class: usize) -> Result<AttributionMap> {
    if target_class >= model.classes() {
        return Err(Error::ClassIndex {
            index: target_class,
            classes: model.classes(),
        });
    }
    let fwd = model.forward(features)?;
    Ok(AttributionMap {
        frames: features.frames(),
        joints: features.joints(),
        values: cam_from_maps(&fwd.features, &model.class_weights(target_class)),
        method: Method::Cam,
        target_class,
    })
}

pub fn gradcam(model: &GcnModel, features: &FeatureTensor, target_class: usize) -> Result<AttributionMap> {
    let grads = model.grad_wrt_feature_maps(features, target_class)?;
    let fwd = model.forward(features)?;
    Ok(AttributionMap {
        frames: features.frames(),
        joints: features.joints(),
        values: gradcam_from_maps(&fwd.features, &grads),
        method: Method::GradCam,
        target_class,
    })
}

pub fn attribute(
    method: Method,
    model: &GcnModel,
    features: &FeatureTensor,
    target_class: usize,
) -> Result<AttributionMap> {
    match method {
        Method::Cam => cam(model, features, target_class),
        Method::GradCam => gradcam(model, features, target_class),
    }
}

/// Per joint: frame-mean score per instance, then median and quartiles
/// across instances.
pub fn aggregate_ensemble(maps: &[AttributionMap]) -> Result<Vec<Spread>> {
    let first = maps.first().ok_or(Error::Empty("no attribution maps"))?;
    if maps
        .iter()
        .any(|m| m.frames != first.frames || m.joints != first.joints)
    {
        return Err(Error::Shape("attribution maps differ in shape".into()));
    }
    let per_instance: Vec<Vec<f64>> = maps.iter().map(AttributionMap::joint_means).collect();
    (0..first.joints)
        .map(|j| {
            let scores: Vec<f64> = per_instance.iter().map(|s| s[j]).collect();
            Spread::of(&scores)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Green,
    Yellow,
    Orange,
    Red,
}

impl Color {
    pub fn hex(self) -> &'static str {
        match self {
            Color::Green => "#2ca02c",
            Color::Yellow => "#f2d600",
            Color::Orange => "#ff7f0e",
            Color::Red => "#d62728",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Orange => "orange",
            Color::Red => "red",
        }
    }
}

/// Interquartile range against `theta`. A quantile equal to `theta` counts
/// as "not below", so ties land on yellow/orange rather than green/red.
pub fn classify_color(stats: &Spread, theta: f64) -> Color {
    if stats.p75 < theta {
        Color::Green
    } else if stats.p25 > theta {
        Color::Red
    } else if stats.median < theta {
        Color::Yellow
    } else {
        Color::Orange
    }
}

pub fn classify_colors(stats: &[Spread], theta: f64) -> Vec<Color> {
    stats.iter().map(|s| classify_color(s, theta)).collect()
}

/// Largest `theta` such that at least `target_sensitivity` of the subjects
/// have a mean score `>= theta`.
pub fn calibrate_threshold(subject_means: &[f64], target_sensitivity: f64) -> Result<f64> {
    if subject_means.is_empty() {
        return Err(Error::Empty("no CP-labelled subjects to calibrate on"));
    }
    if !(target_sensitivity > 0.0 && target_sensitivity <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sensitivity {target_sensitivity} outside (0, 1]"
        )));
    }
    let mut desc = subject_means.to_vec();
    if desc.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN subject mean".into()));
    }
    desc.sort_by(|a, b| b.total_cmp(a));
    let n = desc.len();
    let needed = (1..=n)
        .find(|&k| k as f64 / n as f64 >= target_sensitivity - 1e-12)
        .unwrap_or(n);
    Ok(desc[needed - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAttribution {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub color: Color,
}

/// Per-joint attribution statistics of one window for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub method: Method,
    pub target_class: usize,
    pub theta: f64,
    pub joints: Vec<JointAttribution>,
}

impl AttributionResult {
    pub fn new(method: Method, target_class: usize, theta: f64, stats: &[Spread]) -> Self {
        Self {
            method,
            target_class,
            theta,
            joints: stats
                .iter()
                .map(|s| JointAttribution {
                    median: s.median,
                    p25: s.p25,
                    p75: s.p75,
                    color: classify_color(s, theta),
                })
                .collect(),
        }
    }

    pub fn colors(&self) -> Vec<Color> {
        self.joints.iter().map(|j| j.color).collect()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.median).collect()
    }
}

/// Ensemble joint statistics for one window.
pub fn joint_statistics(
    models: &[GcnModel],
    features: &FeatureTensor,
    method: Method,
    target_class: usize,
) -> Result<Vec<Spread>> {
    let maps = models
        .iter()
        .map(|m| attribute(method, m, features, target_class))
        .collect::<Result<Vec<_>>>()?;
    aggregate_ensemble(&maps)
}
