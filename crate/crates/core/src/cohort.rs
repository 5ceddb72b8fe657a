//! Risk grouping of windows and significant-joint selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Spread;
use crate::xai::{AttributionResult, Color, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskGroup {
    VeryLow,
    Low,
    High,
    VeryHigh,
}

impl RiskGroup {
    /// Windows whose ensemble interval straddles the threshold are left out
    /// of the analysis.
    pub fn excluded(self) -> bool {
        matches!(self, RiskGroup::Low | RiskGroup::High)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RiskGroup::VeryLow => "very_low",
            RiskGroup::Low => "low",
            RiskGroup::High => "high",
            RiskGroup::VeryHigh => "very_high",
        }
    }

    /// The attribution colour counted as "important" within this group.
    pub fn qualifying_color(self) -> Color {
        match self {
            RiskGroup::VeryLow | RiskGroup::Low => Color::Green,
            RiskGroup::High | RiskGroup::VeryHigh => Color::Red,
        }
    }
}

impl fmt::Display for RiskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "very_low" => Ok(RiskGroup::VeryLow),
            "low" => Ok(RiskGroup::Low),
            "high" => Ok(RiskGroup::High),
            "very_high" => Ok(RiskGroup::VeryHigh),
            other => Err(Error::InvalidArgument(format!("unknown risk group {other}"))),
        }
    }
}

pub fn group_window(pred: &Spread, threshold: f64) -> RiskGroup {
    if pred.p75 < threshold {
        RiskGroup::VeryLow
    } else if pred.p25 > threshold {
        RiskGroup::VeryHigh
    } else if pred.median < threshold {
        RiskGroup::Low
    } else {
        RiskGroup::High
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointImportance {
    pub method: Method,
    pub group: RiskGroup,
    pub windows: usize,
    pub frequencies: Vec<f64>,
}

/// Fraction of windows in which each joint receives the group's qualifying
/// colour (green for low risk, red for high risk).
pub fn importance_frequencies(
    results: &[&AttributionResult],
    group: RiskGroup,
    method: Method,
) -> Result<JointImportance> {
    let first = results.first().ok_or(Error::Empty("no windows in risk group"))?;
    let joints = first.joints.len();
    let wanted = group.qualifying_color();
    let mut counts = vec![0usize; joints];
    for r in results {
        if r.joints.len() != joints {
            return Err(Error::Shape("attribution results differ in joint count".into()));
        }
        if r.method != method {
            return Err(Error::InvalidArgument(format!(
                "expected {method} attributions, got {}",
                r.method
            )));
        }
        for (c, j) in counts.iter_mut().zip(&r.joints) {
            if j.color == wanted {
                *c += 1;
            }
        }
    }
    let n = results.len() as f64;
    Ok(JointImportance {
        method,
        group,
        windows: results.len(),
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneeStatus {
    Found,
    /// No point lies above the chord (linear or convex decline); the tie
    /// resolves to the first index.
    NoInteriorKnee,
    /// Every value is equal.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knee {
    pub k1: usize,
    pub status: KneeStatus,
}

const KNEE_TIE: f64 = 1e-12;

/// Simplified Kneedle on a descending curve: rescale to the unit square and
/// take the point furthest above the chord joining the end points.
pub fn kneedle(sorted_desc: &[f64]) -> Result<Knee> {
    let n = sorted_desc.len();
    if n < 3 {
        return Err(Error::InvalidArgument("kneedle needs at least three values".into()));
    }
    if sorted_desc.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_lt())) {
        return Err(Error::InvalidArgument("kneedle input must be sorted descending".into()));
    }
    let (max, min) = (sorted_desc[0], sorted_desc[n - 1]);
    if max == min {
        return Ok(Knee {
            k1: 0,
            status: KneeStatus::Flat,
        });
    }
    let span = max - min;
    let diff: Vec<f64> = sorted_desc
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = i as f64 / (n - 1) as f64;
            let y = (v - min) / span;
            y - (1.0 - x)
        })
        .collect();
    let best = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let index = diff
        .iter()
        .position(|&d| d >= best - KNEE_TIE)
        .expect("non-empty");
    let status = if best <= KNEE_TIE {
        KneeStatus::NoInteriorKnee
    } else {
        KneeStatus::Found
    };
    Ok(Knee {
        k1: index + 1,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoMeans {
    pub low_centroid: f64,
    pub high_centroid: f64,
    /// `true` for members of the higher-centroid cluster.
    pub significant: Vec<bool>,
    pub iterations: usize,
}

impl TwoMeans {
    pub fn significant_indices(&self) -> Vec<usize> {
        (0..self.significant.len()).filter(|&i| self.significant[i]).collect()
    }
}

fn lloyd(values: &[f64], mut c0: f64, mut c1: f64) -> (Vec<bool>, f64, f64, usize) {
    let mut assign: Vec<bool> = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next: Vec<bool> = values.iter().map(|&v| (v - c1).abs() < (v - c0).abs()).collect();
        let stable = next == assign;
        assign = next;
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for (&v, &hi) in values.iter().zip(&assign) {
            if hi {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        if n0 > 0 {
            c0 = s0 / n0 as f64;
        }
        if n1 > 0 {
            c1 = s1 / n1 as f64;
        }
        if stable || iterations > values.len() + 100 {
            return (assign, c0, c1, iterations);
        }
    }
}

fn within_sse(values: &[f64], assign: &[bool]) -> f64 {
    let mean_of = |hi: bool| {
        let (s, n) = values
            .iter()
            .zip(assign)
            .filter(|(_, &a)| a == hi)
            .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    };
    let (m0, m1) = (mean_of(false), mean_of(true));
    values
        .iter()
        .zip(assign)
        .map(|(&v, &a)| {
            let m = if a { m1 } else { m0 };
            (v - m) * (v - m)
        })
        .sum()
}

/// Two-cluster 1D k-means initialised at (min, max) and iterated until the
/// assignment stops changing. If Lloyd settles in a local optimum, it is
/// restarted from the best threshold split found by a prefix-sum scan.
pub fn kmeans2(values: &[f64]) -> Result<TwoMeans> {
    if values.len() < 2 {
        return Err(Error::NoSplit);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max || !min.is_finite() || !max.is_finite() {
        return Err(Error::NoSplit);
    }
    let (mut assign, mut c0, mut c1, mut iterations) = lloyd(values, min, max);

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |a: usize, b: usize| {
        let cnt = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a]) - s * s / cnt
    };
    let best = (1..n)
        .filter(|&s| sorted[s - 1] < sorted[s])
        .map(|s| (s, sse(0, s) + sse(s, n)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((split, best_sse)) = best {
        let current = within_sse(values, &assign);
        if best_sse < current - 1e-12 * current.abs().max(1.0) {
            let lo = (prefix[split]) / split as f64;
            let hi = (prefix[n] - prefix[split]) / (n - split) as f64;
            let (a, l, h, it) = lloyd(values, lo, hi);
            assign = a;
            c0 = l;
            c1 = h;
            iterations += it;
        }
    }
    Ok(TwoMeans {
        low_centroid: c0,
        high_centroid: c1,
        significant: assign,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkSelection {
    /// Joints ordered by descending importance (ties by index).
    pub ranking: Vec<usize>,
    pub k1: usize,
    pub knee_status: KneeStatus,
    pub kmeans_significant: Vec<usize>,
    pub topk: Vec<usize>,
    pub non_topk: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Joints picked by both the knee prefix and the high k-means cluster.
pub fn select_topk(importances: &[f64]) -> Result<TopkSelection> {
    let mut ranking: Vec<usize> = (0..importances.len()).collect();
    ranking.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = ranking.iter().map(|&j| importances[j]).collect();
    let knee = kneedle(&sorted)?;
    let mut diagnostic = Vec::new();
    let kmeans_significant = match kmeans2(importances) {
        Ok(km) => km.significant_indices(),
        Err(e) => {
            diagnostic.push(format!("k-means: {e}"));
            Vec::new()
        }
    };
    match knee.status {
        KneeStatus::Flat => diagnostic.push("kneedle: flat importance curve".into()),
        KneeStatus::NoInteriorKnee => diagnostic.push("kneedle: no point above the chord".into()),
        KneeStatus::Found => {}
    }
    let knee_set = &ranking[..knee.k1];
    let mut topk: Vec<usize> = kmeans_significant
        .iter()
        .copied()
        .filter(|j| knee_set.contains(j))
        .collect();
    topk.sort_unstable();
    if topk.is_empty() {
        diagnostic.push("no joint selected by both methods".into());
    }
    let non_topk = (0..importances.len()).filter(|j| !topk.contains(j)).collect();
    Ok(TopkSelection {
        ranking,
        k1: knee.k1,
        knee_status: knee.status,
        kmeans_significant,
        topk,
        non_topk,
        diagnostic: (!diagnostic.is_empty()).then(|| diagnostic.join("; ")),
    })
}
