use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::perturb::{Boundary, Kind, Scaling};
use crate::preprocess::PreprocessConfig;
use crate::skeleton::FactorGrid;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub models: PathBuf,
    pub outputs: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self::under(Path::new("."))
    }
}

impl Paths {
    pub fn under(root: &Path) -> Self {
        Self {
            data: root.join("data"),
            models: root.join("models"),
            outputs: root.join("outputs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Risk threshold separating the two predicted classes.
    pub prediction: f64,
    /// Attribution thresholds. Absent values are calibrated on the
    /// training split.
    pub cam: Option<f64>,
    pub gradcam: Option<f64>,
    /// Share of CP-labelled training subjects whose mean attribution must
    /// reach the calibrated threshold.
    pub target_sensitivity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            prediction: 0.5,
            cam: None,
            gradcam: None,
            target_sensitivity: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: FactorGrid,
    pub scaling: Scaling,
    /// Boundary policy for velocity reparameterization inside experiments.
    pub boundary: Boundary,
    pub kinds: Vec<Kind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: FactorGrid::default(),
            scaling: Scaling::Sample,
            boundary: Boundary::Reflect,
            kinds: Kind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Skeleton renderings per method and risk group.
    pub skeletons_per_group: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { skeletons_per_group: 2 }
    }
}

/// Everything a run needs. The single `seed` feeds data generation and
/// training; the `synth.seed` field is overwritten with it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub jobs: usize,
    pub paths: Paths,
    pub thresholds: Thresholds,
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub train: TrainConfig,
    pub report: ReportConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("thresholds.prediction", self.thresholds.prediction)?;
        if let Some(t) = self.thresholds.cam {
            unit("thresholds.cam", t)?;
        }
        if let Some(t) = self.thresholds.gradcam {
            unit("thresholds.gradcam", t)?;
        }
        if !(self.thresholds.target_sensitivity > 0.0 && self.thresholds.target_sensitivity <= 1.0) {
            return Err(Error::Config("thresholds.target_sensitivity must lie in (0, 1]".into()));
        }
        self.experiment.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.experiment.kinds.is_empty() {
            return Err(Error::Config("experiment.kinds is empty".into()));
        }
        if self.train.ensemble_size == 0 || self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(Error::Config("train sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}
