//! End-to-end commands over an on-disk workspace.
//!
//! ```text
//! data/topology.json  data/manifest.json  data/clips/*.json     synth
//! models/ensemble.json                                          train
//! outputs/predictions.json  outputs/predictions.csv
//! outputs/metrics.json                                          predict
//! outputs/attributions_<method>.json                            explain
//! outputs/groups.json                                           group
//! outputs/topk.json                                             topk
//! outputs/curves.csv  outputs/baselines.json                    perturb
//! outputs/report/                                               report
//! ```
//! Every command reads only upstream artifacts and the config, and writes
//! deterministic file names and contents.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Paths, ReportConfig, RunConfig, Thresholds};

use crate::cohort::{group_window, importance_frequencies, select_topk, JointImportance, RiskGroup, TopkSelection};
use crate::error::{Error, Result};
use crate::model::{ensemble_predict_many, train_ensemble, Checkpoint, EnsemblePrediction, GcnModel, POSITIVE_CLASS};
use crate::par::{self, Execution};
use crate::perturb::{self, Experiment, JointSet, Kind, References, ResponseCurve};
use crate::preprocess::{extract_features, prepare_clip, FeatureTensor};
use crate::report;
use crate::skeleton::{validate_window, Label, MotionWindow, SkeletonTopology};
use crate::stats::{self, Spread};
use crate::synth::{self, ManifestEntry, Split};
use crate::xai::{calibrate_threshold, joint_statistics, AttributionResult, Method};

/// The two groups analysed downstream; the straddling ones are excluded.
pub const ANALYSED_GROUPS: [RiskGroup; 2] = [RiskGroup::VeryLow, RiskGroup::VeryHigh];

/// Subset of methods, groups and perturbation kinds a command works on.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub methods: Vec<Method>,
    pub groups: Vec<RiskGroup>,
    pub kinds: Vec<Kind>,
}

impl Selection {
    pub fn all(cfg: &RunConfig) -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            groups: ANALYSED_GROUPS.to_vec(),
            kinds: cfg.experiment.kinds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub id: String,
    pub subject_id: String,
    pub split: Split,
    pub label: Label,
    pub prediction: EnsemblePrediction,
    pub predicted: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threshold: f64,
    pub ensemble_size: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGroup {
    pub id: String,
    pub split: Split,
    pub group: RiskGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaSource {
    Config,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAttribution {
    pub id: String,
    pub split: Split,
    pub result: AttributionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionFile {
    pub method: Method,
    pub target_class: usize,
    pub theta: f64,
    pub theta_source: ThetaSource,
    pub windows: Vec<WindowAttribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkEntry {
    pub method: Method,
    pub group: RiskGroup,
    pub importance: Option<JointImportance>,
    pub selection: Option<TopkSelection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TopkEntry {
    pub fn joints(&self, set: JointSet) -> Option<&[usize]> {
        self.selection.as_ref().map(|s| match set {
            JointSet::Topk => s.topk.as_slice(),
            JointSet::NonTopk => s.non_topk.as_slice(),
        })
    }
}

/// Top-k selections computed on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkReport {
    pub joint_names: Vec<String>,
    pub entries: Vec<TopkEntry>,
}

impl TopkReport {
    pub fn entry(&self, method: Method, group: RiskGroup) -> Option<&TopkEntry> {
        self.entries.iter().find(|e| e.method == method && e.group == group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub group: RiskGroup,
    pub windows: usize,
    pub risk: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub baselines: Vec<Baseline>,
    pub skipped: Vec<String>,
}

/// A prepared window with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub id: String,
    pub subject_id: String,
    pub label: Label,
    pub split: Split,
    pub window: MotionWindow,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn require(path: PathBuf, command: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, command })
    }
}

fn accuracy<'a>(preds: impl Iterator<Item = &'a WindowPrediction>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for p in preds {
        n += 1;
        hit += usize::from(p.predicted == p.label);
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// A configured workspace. Commands are methods; each returns short
/// human-readable notes on what it did.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub exec: Execution,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        par::init_workers(cfg.jobs);
        let exec = Execution::from_jobs(cfg.jobs);
        Ok(Self { cfg, exec })
    }

    fn data(&self, name: &str) -> PathBuf {
        self.cfg.paths.data.join(name)
    }

    fn output(&self, name: &str) -> PathBuf {
        self.cfg.paths.outputs.join(name)
    }

    pub fn topology_path(&self) -> PathBuf {
        self.data("topology.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data("manifest.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.cfg.paths.models.join("ensemble.json")
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.output("predictions.json")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.output("metrics.json")
    }

    pub fn groups_path(&self) -> PathBuf {
        self.output("groups.json")
    }

    pub fn attributions_path(&self, method: Method) -> PathBuf {
        self.output(&format!("attributions_{method}.json"))
    }

    pub fn topk_path(&self) -> PathBuf {
        self.output("topk.json")
    }

    pub fn curves_path(&self) -> PathBuf {
        self.output("curves.csv")
    }

    pub fn baselines_path(&self) -> PathBuf {
        self.output("baselines.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output("report")
    }

    fn topology(&self) -> Result<SkeletonTopology> {
        SkeletonTopology::load(&require(self.topology_path(), "synth")?)
    }

    fn models(&self, topo: &SkeletonTopology) -> Result<Vec<GcnModel>> {
        Checkpoint::load(&require(self.checkpoint_path(), "train")?)?.models(topo)
    }

    /// Loads every clip listed in the manifest and cuts it into prepared
    /// windows, in manifest order.
    pub fn windows(&self, topo: &SkeletonTopology) -> Result<Vec<WindowRecord>> {
        let manifest: Vec<ManifestEntry> = read_json(&require(self.manifest_path(), "synth")?)?;
        let clips: Vec<(&ManifestEntry, &String)> =
            manifest.iter().flat_map(|e| e.clips.iter().map(move |c| (e, c))).collect();
        let prepared = par::map(self.exec, &clips, |(entry, name)| -> Result<Vec<WindowRecord>> {
            let path = self.data("clips").join(name);
            let clip = MotionWindow::load(&path)?;
            if let Some(v) = validate_window(&clip, topo, None).first() {
                return Err(Error::Shape(format!("{}: {v}", path.display())));
            }
            let stem = name.strip_suffix(".json").unwrap_or(name);
            Ok(prepare_clip(&clip, topo, &self.cfg.preprocess)?
                .into_iter()
                .map(|w| WindowRecord {
                    id: format!("{stem}_w{:02}", w.window_index),
                    subject_id: entry.subject_id.clone(),
                    label: entry.label,
                    split: entry.split,
                    window: w,
                })
                .collect())
        });
        let mut out = Vec::new();
        for p in prepared {
            out.extend(p?);
        }
        if out.is_empty() {
            return Err(Error::Empty("clips are shorter than one window"));
        }
        Ok(out)
    }

    fn features(&self, topo: &SkeletonTopology, windows: &[WindowRecord]) -> Result<Vec<FeatureTensor>> {
        par::map(self.exec, windows, |w| extract_features(&w.window, topo))
            .into_iter()
            .collect()
    }

    pub fn synth(&self) -> Result<Vec<String>> {
        let topo = SkeletonTopology::default();
        let data = synth::generate(&self.cfg.synth_config(), self.exec)?;
        let clip_dir = self.data("clips");
        fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;
        topo.save(&self.topology_path())?;
        for clip in &data.clips {
            clip.sequence.save(&topo, &clip_dir.join(&clip.file_name))?;
        }
        write_json(&self.manifest_path(), &data.manifest)?;
        Ok(vec![format!(
            "generated {} clips for {} subjects in {}",
            data.clips.len(),
            data.manifest.len(),
            self.cfg.paths.data.display()
        )])
    }

    pub fn train(&self) -> Result<Vec<String>> {
        let topo = self.topology()?;
        let train: Vec<WindowRecord> = self.windows(&topo)?.into_iter().filter(|w| w.split == Split::Train).collect();
        let features = self.features(&topo, &train)?;
        let dataset: Vec<(FeatureTensor, usize)> =
            features.into_iter().zip(&train).map(|(f, w)| (f, w.label.class_index())).collect();
        let members = train_ensemble(&topo, &dataset, &self.cfg.train, self.cfg.seed, self.exec)?;
        let path = self.checkpoint_path();
        ensure_parent(&path)?;
        Checkpoint::from_members(&topo, &members)?.save(&path)?;
        let final_loss: Vec<f64> = members.iter().filter_map(|m| m.loss_trace.last().copied()).collect();
        Ok(vec![format!(
            "trained {} members on {} windows, median final loss {:.4}",
            members.len(),
            dataset.len(),
            stats::quantile(&final_loss, 0.5)?
        )])
    }

    pub fn predict(&self) -> Result<Vec<String>> {
        let topo = self.topology()?;
        let models = self.models(&topo)?;
        let windows = self.windows(&topo)?;
        let features = self.features(&topo, &windows)?;
        let threshold = self.cfg.thresholds.prediction;
        let preds: Vec<WindowPrediction> = ensemble_predict_many(self.exec, &models, &features)?
            .into_iter()
            .zip(&windows)
            .map(|(p, w)| WindowPrediction {
                id: w.id.clone(),
                subject_id: w.subject_id.clone(),
                split: w.split,
                label: w.label,
                predicted: if p.median >= threshold { Label::Atypical } else { Label::Typical },
                prediction: p,
            })
            .collect();
        let metrics = Metrics {
            threshold,
            ensemble_size: models.len(),
            train_windows: preds.iter().filter(|p| p.split == Split::Train).count(),
            test_windows: preds.iter().filter(|p| p.split == Split::Test).count(),
            train_accuracy: accuracy(preds.iter().filter(|p| p.split == Split::Train)),
            test_accuracy: accuracy(preds.iter().filter(|p| p.split == Split::Test)),
        };
        write_json(&self.predictions_path(), &preds)?;
        report::write_predictions_csv(&preds, &self.output("predictions.csv"))?;
        write_json(&self.metrics_path(), &metrics)?;
        Ok(vec![format!(
            "test accuracy {:.3} on {} windows (train {:.3})",
            metrics.test_accuracy, metrics.test_windows, metrics.train_accuracy
        )])
    }

    pub fn group(&self) -> Result<Vec<String>> {
        let preds = self.predictions()?;
        let threshold = self.cfg.thresholds.prediction;
        let groups: Vec<WindowGroup> = preds
            .iter()
            .map(|p| WindowGroup {
                id: p.id.clone(),
                split: p.split,
                group: group_window(&p.prediction.spread(), threshold),
            })
            .collect();
        write_json(&self.groups_path(), &groups)?;
        let mut counts: BTreeMap<(Split, RiskGroup), usize> = BTreeMap::new();
        for g in &groups {
            *counts.entry((g.split, g.group)).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .map(|((split, group), n)| format!("{split:?} {group}: {n} windows").to_lowercase())
            .collect())
    }

    pub fn explain(&self, methods: &[Method]) -> Result<Vec<String>> {
        let topo = self.topology()?;
        let models = self.models(&topo)?;
        let windows = self.windows(&topo)?;
        let features = self.features(&topo, &windows)?;
        let mut notes = Vec::new();
        for &method in methods {
            let stats = par::map_indexed(self.exec, windows.len(), |i| {
                joint_statistics(&models, &features[i], method, POSITIVE_CLASS)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let configured = match method {
                Method::Cam => self.cfg.thresholds.cam,
                Method::GradCam => self.cfg.thresholds.gradcam,
            };
            let (theta, theta_source) = match configured {
                Some(t) => (t, ThetaSource::Config),
                None => (self.calibrate(&windows, &stats)?, ThetaSource::Calibrated),
            };
            let file = AttributionFile {
                method,
                target_class: POSITIVE_CLASS,
                theta,
                theta_source,
                windows: windows
                    .iter()
                    .zip(&stats)
                    .map(|(w, s)| WindowAttribution {
                        id: w.id.clone(),
                        split: w.split,
                        result: AttributionResult::new(method, POSITIVE_CLASS, theta, s),
                    })
                    .collect(),
            };
            write_json(&self.attributions_path(method), &file)?;
            notes.push(format!("{method}: theta {theta:.4} ({theta_source:?})").to_lowercase());
        }
        Ok(notes)
    }

    /// Threshold reached by the configured share of CP-labelled training
    /// subjects, using each subject's mean of per-joint median scores.
    fn calibrate(&self, windows: &[WindowRecord], stats: &[Vec<Spread>]) -> Result<f64> {
        let mut per_subject: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (w, s) in windows.iter().zip(stats) {
            if w.split == Split::Train && w.label == Label::Atypical {
                let medians: Vec<f64> = s.iter().map(|x| x.median).collect();
                per_subject.entry(&w.subject_id).or_default().push(stats::mean(&medians));
            }
        }
        let means: Vec<f64> = per_subject.values().map(|v| stats::mean(v)).collect();
        calibrate_threshold(&means, self.cfg.thresholds.target_sensitivity)
    }

    pub fn topk(&self, methods: &[Method], groups: &[RiskGroup]) -> Result<Vec<String>> {
        let topo = self.topology()?;
        let window_groups = self.groups()?;
        let mut entries = Vec::new();
        let mut notes = Vec::new();
        for &method in methods {
            let attributions = self.attributions(method)?;
            for &group in groups {
                let members: Vec<&AttributionResult> = attributions
                    .windows
                    .iter()
                    .filter(|a| a.split == Split::Train && window_groups.get(&a.id) == Some(&group))
                    .map(|a| &a.result)
                    .collect();
                let entry = match importance_frequencies(&members, group, method) {
                    Err(e) => TopkEntry { method, group, importance: None, selection: None, diagnostic: Some(e.to_string()) },
                    Ok(imp) => match select_topk(&imp.frequencies) {
                        Ok(sel) => TopkEntry { method, group, importance: Some(imp), selection: Some(sel), diagnostic: None },
                        Err(e) => TopkEntry { method, group, importance: Some(imp), selection: None, diagnostic: Some(e.to_string()) },
                    },
                };
                notes.push(match (&entry.selection, &entry.diagnostic) {
                    (Some(s), _) => format!("{method} {group}: top-k {:?}", s.topk.iter().map(|&j| &topo.joint_names()[j]).collect::<Vec<_>>()),
                    (None, d) => format!("{method} {group}: no selection ({})", d.as_deref().unwrap_or("unknown")),
                });
                entries.push(entry);
            }
        }
        write_json(&self.topk_path(), &TopkReport { joint_names: topo.joint_names().to_vec(), entries })?;
        Ok(notes)
    }

    pub fn perturb(&self, sel: &Selection) -> Result<Vec<String>> {
        let topk: TopkReport = read_json(&require(self.topk_path(), "topk")?)?;
        let window_groups = self.groups()?;
        let topo = self.topology()?;
        let models = self.models(&topo)?;
        let windows = self.windows(&topo)?;
        let in_group = |split: Split, group: RiskGroup| -> Vec<&WindowRecord> {
            windows
                .iter()
                .filter(|w| w.split == split && window_groups.get(&w.id) == Some(&group))
                .collect()
        };
        let mut summary = PerturbSummary { baselines: Vec::new(), skipped: Vec::new() };
        let mut per_group = BTreeMap::new();
        for &group in &sel.groups {
            let test: Vec<MotionWindow> = in_group(Split::Test, group).into_iter().map(|w| w.window.clone()).collect();
            if test.is_empty() {
                summary.skipped.push(format!("{group}: no test windows"));
                continue;
            }
            let train = in_group(Split::Train, group);
            let refs = if train.is_empty() {
                summary.skipped.push(format!("{group}: no training windows, references use all training windows"));
                let all: Vec<&MotionWindow> = windows.iter().filter(|w| w.split == Split::Train).map(|w| &w.window).collect();
                References::compute(&all, &topo)?
            } else {
                References::compute(&train.iter().map(|w| &w.window).collect::<Vec<_>>(), &topo)?
            };
            summary.baselines.push(Baseline {
                group,
                windows: test.len(),
                risk: perturb::baseline(&test, &models, &topo, self.exec)?,
            });
            per_group.insert(group, (test, refs));
        }
        let mut curves: Vec<ResponseCurve> = Vec::new();
        for &kind in &sel.kinds {
            for &method in &sel.methods {
                for (&group, (test, refs)) in &per_group {
                    let Some(entry) = topk.entry(method, group) else {
                        summary.skipped.push(format!("{method} {group}: not in topk report"));
                        continue;
                    };
                    for &joint_set in JointSet::ALL {
                        let Some(joints) = entry.joints(joint_set) else {
                            summary.skipped.push(format!("{kind} {method} {group} {joint_set}: no selection"));
                            continue;
                        };
                        let exp = Experiment {
                            method,
                            group,
                            joint_set,
                            joints,
                            kind,
                            grid: &self.cfg.experiment.grid,
                            scaling: self.cfg.experiment.scaling,
                            boundary: self.cfg.experiment.boundary,
                            references: Some(refs),
                        };
                        curves.push(perturb::run_experiment(&exp, test, &models, &topo, self.exec)?);
                    }
                }
            }
        }
        report::write_curves(&curves, &self.curves_path())?;
        write_json(&self.baselines_path(), &summary)?;
        let mut notes = vec![format!("{} response curves", curves.len())];
        notes.extend(summary.skipped.iter().map(|s| format!("skipped {s}")));
        Ok(notes)
    }

    pub fn report(&self, sel: &Selection) -> Result<Vec<String>> {
        let curves = report::read_curves(&require(self.curves_path(), "perturb")?)?;
        let summary: PerturbSummary = read_json(&require(self.baselines_path(), "perturb")?)?;
        let topo = self.topology()?;
        let dir = self.report_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let chosen: Vec<ResponseCurve> = curves
            .into_iter()
            .filter(|c| sel.methods.contains(&c.method) && sel.groups.contains(&c.group) && sel.kinds.contains(&c.kind))
            .collect();
        report::write_curves(&chosen, &dir.join("curves.csv"))?;
        let threshold = self.cfg.thresholds.prediction;
        for c in &chosen {
            let base = summary.baselines.iter().find(|b| b.group == c.group).map(|b| b.risk.median);
            let name = format!("curve_{}_{}_{}_{}.svg", c.kind, c.method, c.group, c.joint_set);
            write_text(&dir.join(name), &report::curve_svg(c, base, threshold))?;
        }
        let window_groups = self.groups()?;
        let windows = self.windows(&topo)?;
        let by_id: BTreeMap<&str, &WindowRecord> = windows.iter().map(|w| (w.id.as_str(), w)).collect();
        let mut skeletons = 0;
        for &method in &sel.methods {
            let attributions = self.attributions(method)?;
            let mut rows = Vec::new();
            for &group in &sel.groups {
                let test: Vec<&WindowAttribution> = attributions
                    .windows
                    .iter()
                    .filter(|a| a.split == Split::Test && window_groups.get(&a.id) == Some(&group))
                    .collect();
                for a in &test {
                    rows.push((a.id.as_str(), group, &a.result));
                }
                for a in test.iter().take(self.cfg.report.skeletons_per_group) {
                    let title = format!("{} | {} | {} | theta {:.3}", a.id, method, group, attributions.theta);
                    let svg = report::skeleton_svg(&topo, &by_id[a.id.as_str()].window, &a.result, &title);
                    write_text(&dir.join(format!("skeleton_{method}_{group}_{}.svg", a.id)), &svg)?;
                    skeletons += 1;
                }
            }
            report::write_scores_csv(&topo, &rows, &dir.join(format!("scores_{method}.csv")))?;
        }
        Ok(vec![format!(
            "{} curve plots and {skeletons} skeleton renderings in {}",
            chosen.len(),
            dir.display()
        )])
    }

    /// Runs every command in order.
    pub fn run_all(&self, sel: &Selection) -> Result<Vec<String>> {
        let mut notes = self.synth()?;
        notes.extend(self.train()?);
        notes.extend(self.predict()?);
        notes.extend(self.group()?);
        notes.extend(self.explain(&sel.methods)?);
        notes.extend(self.topk(&sel.methods, &ANALYSED_GROUPS)?);
        notes.extend(self.perturb(sel)?);
        notes.extend(self.report(sel)?);
        Ok(notes)
    }

    pub fn predictions(&self) -> Result<Vec<WindowPrediction>> {
        read_json(&require(self.predictions_path(), "predict")?)
    }

    pub fn metrics(&self) -> Result<Metrics> {
        read_json(&require(self.metrics_path(), "predict")?)
    }

    /// Window id to risk group.
    pub fn groups(&self) -> Result<BTreeMap<String, RiskGroup>> {
        let groups: Vec<WindowGroup> = read_json(&require(self.groups_path(), "group")?)?;
        Ok(groups.into_iter().map(|g| (g.id, g.group)).collect())
    }

    pub fn attributions(&self, method: Method) -> Result<AttributionFile> {
        read_json(&require(self.attributions_path(method), "explain")?)
    }

    pub fn topk_report(&self) -> Result<TopkReport> {
        read_json(&require(self.topk_path(), "topk")?)
    }

    pub fn baselines(&self) -> Result<PerturbSummary> {
        read_json(&require(self.baselines_path(), "perturb")?)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
