use serde::{Deserialize, Serialize};

use super::GcnModel;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::preprocess::FeatureTensor;
use crate::stats::Spread;

/// Class-1 (atypical) probabilities of every ensemble member and their
/// median / interquartile bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub per_instance: Vec<f64>,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

impl EnsemblePrediction {
    pub fn from_instances(per_instance: Vec<f64>) -> Result<Self> {
        let s = Spread::of(&per_instance)?;
        Ok(Self {
            per_instance,
            median: s.median,
            p25: s.p25,
            p75: s.p75,
        })
    }

    pub fn spread(&self) -> Spread {
        Spread {
            median: self.median,
            p25: self.p25,
            p75: self.p75,
        }
    }
}

pub const POSITIVE_CLASS: usize = 1;

pub fn ensemble_predict(models: &[GcnModel], features: &FeatureTensor) -> Result<EnsemblePrediction> {
    if models.is_empty() {
        return Err(Error::Empty("ensemble has no models"));
    }
    let per_instance = models
        .iter()
        .map(|m| m.predict(features).map(|p| p[POSITIVE_CLASS]))
        .collect::<Result<Vec<_>>>()?;
    EnsemblePrediction::from_instances(per_instance)
}

/// Ensemble predictions for many windows, in input order.
pub fn ensemble_predict_many(
    exec: Execution,
    models: &[GcnModel],
    features: &[FeatureTensor],
) -> Result<Vec<EnsemblePrediction>> {
    par::map(exec, features, |f| ensemble_predict(models, f))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_examples() {
        let p = EnsemblePrediction::from_instances(vec![0.6, 0.2, 0.4]).unwrap();
        assert!((p.median - 0.4).abs() < 1e-15);
        let single = EnsemblePrediction::from_instances(vec![0.7]).unwrap();
        assert_eq!((single.median, single.p25, single.p75), (0.7, 0.7, 0.7));
        assert!(ensemble_predict(&[], &dummy()).is_err());
    }

    fn dummy() -> FeatureTensor {
        let topo = crate::skeleton::SkeletonTopology::default();
        let w = crate::skeleton::MotionWindow::new(30.0, 19, vec![[0.0, 1.0]; 19 * 2]).unwrap();
        crate::preprocess::extract_features(&w, &topo).unwrap()
    }
}
