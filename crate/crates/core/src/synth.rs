//! Seeded synthetic two-class motion data on the default skeleton.
//!
//! Every non-root joint hangs off its parent at a fixed per-subject bone
//! length; its absolute bone angle oscillates sinusoidally around a resting
//! pose. The typical class moves faster and through wider arcs than the
//! atypical one.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::skeleton::{frames_for, Label, MotionWindow, Point, SkeletonTopology};

/// Resting pose of the default skeleton, trunk length 1, y pointing up.
const REST_POSE: [Point; 19] = [
    [0.0, 1.72],   // head_top
    [0.0, 1.45],   // nose
    [-0.13, 1.5],  // right_ear
    [0.13, 1.5],   // left_ear
    [0.0, 1.2],    // upper_neck
    [-0.32, 1.0],  // right_shoulder
    [-0.58, 0.74], // right_elbow
    [-0.68, 0.42], // right_wrist
    [0.0, 1.0],    // thorax
    [0.32, 1.0],   // left_shoulder
    [0.58, 0.74],  // left_elbow
    [0.68, 0.42],  // left_wrist
    [0.0, 0.0],    // pelvis
    [-0.16, 0.0],  // right_hip
    [-0.26, -0.44],// right_knee
    [-0.3, -0.9],  // right_ankle
    [0.16, 0.0],   // left_hip
    [0.26, -0.44], // left_knee
    [0.3, -0.9],   // left_ankle
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentMotion {
    /// Peak angular excursion of each bone around its resting angle, radians.
    pub angular_range: [f64; 2],
    pub frequency_hz: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    /// Keyed by segment name of the default topology.
    pub segments: BTreeMap<String, SegmentMotion>,
    /// Whole-body translation amplitude in trunk lengths.
    pub sway: f64,
    /// Standard deviation of per-frame angular jitter, radians.
    pub noise: f64,
}

impl ClassSpec {
    fn with_limbs(limb: SegmentMotion, head: SegmentMotion, trunk: SegmentMotion, sway: f64, noise: f64) -> Self {
        let mut segments = BTreeMap::new();
        for name in ["right_arm", "left_arm", "right_leg", "left_leg"] {
            segments.insert(name.to_string(), limb.clone());
        }
        segments.insert("head".to_string(), head);
        segments.insert("trunk".to_string(), trunk);
        Self { segments, sway, noise }
    }

    pub fn typical() -> Self {
        Self::with_limbs(
            SegmentMotion { angular_range: [0.35, 0.6], frequency_hz: [0.8, 1.5] },
            SegmentMotion { angular_range: [0.1, 0.2], frequency_hz: [0.3, 0.6] },
            SegmentMotion { angular_range: [0.03, 0.06], frequency_hz: [0.2, 0.4] },
            0.05,
            0.01,
        )
    }

    pub fn atypical() -> Self {
        Self::with_limbs(
            SegmentMotion { angular_range: [0.12, 0.25], frequency_hz: [0.25, 0.6] },
            SegmentMotion { angular_range: [0.1, 0.2], frequency_hz: [0.3, 0.6] },
            SegmentMotion { angular_range: [0.03, 0.06], frequency_hz: [0.2, 0.4] },
            0.05,
            0.01,
        )
    }

    /// No motion at all.
    pub fn still() -> Self {
        let none = SegmentMotion { angular_range: [0.0, 0.0], frequency_hz: [0.5, 0.5] };
        Self::with_limbs(none.clone(), none.clone(), none, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub fps: f64,
    pub clip_duration_s: f64,
    pub subjects_per_class: usize,
    pub clips_per_subject: usize,
    pub test_fraction: f64,
    /// Image-space pixels per trunk length.
    pub pixel_scale: f64,
    pub typical: ClassSpec,
    pub atypical: ClassSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            fps: 30.0,
            clip_duration_s: 10.0,
            subjects_per_class: 16,
            clips_per_subject: 2,
            test_fraction: 0.25,
            pixel_scale: 120.0,
            typical: ClassSpec::typical(),
            atypical: ClassSpec::atypical(),
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

impl SynthConfig {
    pub fn validate(&self, topo: &SkeletonTopology) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !positive(self.fps) || !positive(self.clip_duration_s) || frames_for(self.clip_duration_s, self.fps) < 2 {
            return bad("fps and clip duration must give at least two frames".into());
        }
        if self.subjects_per_class == 0 || self.clips_per_subject == 0 {
            return bad("need at least one subject and clip per class".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1)".into());
        }
        if !positive(self.pixel_scale) {
            return bad("pixel_scale must be positive".into());
        }
        for (label, spec) in [("typical", &self.typical), ("atypical", &self.atypical)] {
            if !(spec.sway >= 0.0 && spec.noise >= 0.0) {
                return bad(format!("{label}: sway and noise must be >= 0"));
            }
            for seg in topo.segments() {
                let Some(m) = spec.segments.get(&seg.name) else {
                    return bad(format!("{label}: no motion for segment {}", seg.name));
                };
                let [a0, a1] = m.angular_range;
                let [f0, f1] = m.frequency_hz;
                if !(0.0 <= a0 && a0 <= a1) {
                    return bad(format!("{label}/{}: angular range must be ordered and >= 0", seg.name));
                }
                if !(0.0 < f0 && f0 <= f1 && f1 < self.fps / 2.0) {
                    return bad(format!("{label}/{}: frequencies must be ordered, positive and below fps/2", seg.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub label: Label,
    pub split: Split,
    pub clips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub file_name: String,
    pub split: Split,
    pub sequence: MotionWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub clips: Vec<SynthClip>,
    pub manifest: Vec<ManifestEntry>,
}

/// Seed of one subject, independent of generation order.
pub fn subject_seed(seed: u64, subject: usize) -> u64 {
    seed ^ (subject as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn generate_subject(cfg: &SynthConfig, topo: &SkeletonTopology, index: usize, label: Label) -> Vec<MotionWindow> {
    let spec = match label {
        Label::Typical => &cfg.typical,
        Label::Atypical => &cfg.atypical,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed(cfg.seed, index));
    let joints = topo.joint_count();
    let body = rng.gen_range(0.85..1.15) * cfg.pixel_scale;
    let mut length = vec![0.0; joints];
    let mut rest = vec![0.0; joints];
    for j in (0..joints).filter(|&j| j != topo.root()) {
        let p = topo.parent(j);
        let d = [REST_POSE[j][0] - REST_POSE[p][0], REST_POSE[j][1] - REST_POSE[p][1]];
        length[j] = d[0].hypot(d[1]) * rng.gen_range(0.92..1.08) * body;
        rest[j] = d[1].atan2(d[0]);
    }
    let frames = frames_for(cfg.clip_duration_s, cfg.fps);
    let noise = Normal::new(0.0, spec.noise).expect("validated noise");
    (0..cfg.clips_per_subject)
        .map(|_| {
            // Head joints share one oscillator so the head stays a rigid unit.
            let mut osc = vec![(0.0, 0.0, 0.0); joints];
            for seg in topo.segments() {
                let m = &spec.segments[&seg.name];
                let shared = (uniform(&mut rng, m.angular_range), uniform(&mut rng, m.frequency_hz), rng.gen_range(0.0..TAU));
                for &j in &seg.joints {
                    osc[j] = if seg.name == "head" {
                        shared
                    } else {
                        (uniform(&mut rng, m.angular_range), uniform(&mut rng, m.frequency_hz), rng.gen_range(0.0..TAU))
                    };
                }
            }
            let origin = [rng.gen_range(200.0..440.0), rng.gen_range(160.0..320.0)];
            let sway_phase = rng.gen_range(0.0..TAU);
            let sway = spec.sway * body;
            let mut pts = vec![[0.0, 0.0]; frames * joints];
            for t in 0..frames {
                let time = t as f64 / cfg.fps;
                let base = t * joints;
                pts[base + topo.root()] = [
                    origin[0] + sway * (0.4 * TAU * time + sway_phase).sin(),
                    origin[1] + sway * (0.3 * TAU * time + sway_phase).cos(),
                ];
                for &j in topo.topological_order().iter().filter(|&&j| j != topo.root()) {
                    let (amp, freq, phase) = osc[j];
                    let mut angle = rest[j] + amp * (TAU * freq * time + phase).sin();
                    if spec.noise > 0.0 {
                        angle += noise.sample(&mut rng);
                    }
                    let p = pts[base + topo.parent(j)];
                    pts[base + j] = [p[0] + length[j] * angle.cos(), p[1] + length[j] * angle.sin()];
                }
            }
            MotionWindow::new(cfg.fps, joints, pts).expect("consistent shape")
        })
        .collect()
}

/// Generates every clip and the subject manifest. Subjects are split into
/// train and test per class with a seeded shuffle.
pub fn generate(cfg: &SynthConfig, exec: Execution) -> Result<SynthDataset> {
    let topo = SkeletonTopology::default();
    cfg.validate(&topo)?;
    let n = cfg.subjects_per_class;
    let subject = |i: usize| {
        let label = if i < n { Label::Typical } else { Label::Atypical };
        (format!("{}_{:03}", label, i % n), label)
    };
    let sequences = par::map_indexed(exec, 2 * n, |i| generate_subject(cfg, &topo, i, subject(i).1));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let mut split = vec![Split::Train; 2 * n];
    for class in 0..2 {
        let mut ids: Vec<usize> = (class * n..(class + 1) * n).collect();
        ids.shuffle(&mut rng);
        for &i in &ids[..n_test] {
            split[i] = Split::Test;
        }
    }

    let mut clips = Vec::new();
    let mut manifest = Vec::new();
    for (i, seqs) in sequences.into_iter().enumerate() {
        let (id, label) = subject(i);
        let mut names = Vec::new();
        for (c, seq) in seqs.into_iter().enumerate() {
            let file_name = format!("{id}_clip{c}.json");
            names.push(file_name.clone());
            clips.push(SynthClip {
                file_name,
                split: split[i],
                sequence: seq.with_meta(id.clone(), 0, Some(label)),
            });
        }
        manifest.push(ManifestEntry {
            subject_id: id,
            label,
            split: split[i],
            clips: names,
        });
    }
    Ok(SynthDataset { clips, manifest })
}

/// Mean per-frame displacement over all limb joints.
pub fn mean_limb_speed(seq: &MotionWindow, topo: &SkeletonTopology) -> f64 {
    let limbs: Vec<usize> = topo
        .segments()
        .iter()
        .filter(|s| s.name.ends_with("_arm") || s.name.ends_with("_leg"))
        .flat_map(|s| s.joints.iter().copied())
        .collect();
    let mut total = 0.0;
    for t in 1..seq.frames() {
        for &j in &limbs {
            let (a, b) = (seq.at(t, j), seq.at(t - 1, j));
            total += (a[0] - b[0]).hypot(a[1] - b[1]);
        }
    }
    total / ((seq.frames() - 1) * limbs.len()) as f64
}
