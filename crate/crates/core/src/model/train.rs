//! Seeded mini-batch training of ensemble members on bootstrap resamples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, GcnModel, Gradients};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::preprocess::FeatureTensor;
use crate::skeleton::SkeletonTopology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ensemble_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub architecture: Architecture,
    /// Resample the training set with replacement per member.
    pub bootstrap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 10,
            epochs: 12,
            learning_rate: 0.01,
            batch_size: 16,
            architecture: Architecture::default(),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedMember {
    pub model: GcnModel,
    /// Mean training loss before the first epoch and after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Per-member seed derived from the run seed.
pub fn member_seed(seed: u64, member: usize) -> u64 {
    seed ^ (member as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &GcnModel, lr: f64) -> Self {
        let shapes: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            m: shapes.clone(),
            v: shapes,
            step: 0,
            lr,
        }
    }

    fn update(&mut self, model: &mut GcnModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn mean_loss(model: &GcnModel, data: &[(&FeatureTensor, usize)]) -> Result<f64> {
    let mut total = 0.0;
    for (f, y) in data {
        total += model.loss(f, *y)?;
    }
    Ok(total / data.len() as f64)
}

fn check_dataset(dataset: &[(FeatureTensor, usize)], classes: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut seen = vec![false; classes];
    for (_, y) in dataset {
        if *y >= classes {
            return Err(Error::ClassIndex {
                index: *y,
                classes,
            });
        }
        seen[*y] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::InvalidArgument("training set needs at least two classes".into()));
    }
    Ok(())
}

/// Trains one model in place with Adam on cross-entropy.
pub fn train_model(
    model: &mut GcnModel,
    dataset: &[(FeatureTensor, usize)],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    check_dataset(dataset, model.classes())?;
    let indices: Vec<usize> = if cfg.bootstrap {
        (0..dataset.len()).map(|_| rng.gen_range(0..dataset.len())).collect()
    } else {
        (0..dataset.len()).collect()
    };
    let sample: Vec<(&FeatureTensor, usize)> = indices.iter().map(|&i| (&dataset[i].0, dataset[i].1)).collect();
    let mut order: Vec<usize> = (0..sample.len()).collect();
    let mut adam = Adam::new(model, cfg.learning_rate);
    let batch = cfg.batch_size.max(1);
    let mut trace = vec![mean_loss(model, &sample)?];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let mut acc = Gradients::zeros_like(model);
            for &i in chunk {
                let (_, g) = model.loss_and_gradients(sample[i].0, sample[i].1)?;
                acc.add_assign(&g);
            }
            let scale = 1.0 / chunk.len() as f64;
            for s in acc.slices_mut() {
                s.iter_mut().for_each(|x| *x *= scale);
            }
            adam.update(model, &acc);
        }
        trace.push(mean_loss(model, &sample)?);
    }
    Ok(trace)
}

/// Freshly initializes and trains `cfg.ensemble_size` members. Each member
/// draws its initialization, bootstrap sample and batch order from its own
/// seeded stream, so results do not depend on the execution mode.
pub fn train_ensemble(
    topo: &SkeletonTopology,
    dataset: &[(FeatureTensor, usize)],
    cfg: &TrainConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrainedMember>> {
    if cfg.ensemble_size == 0 {
        return Err(Error::InvalidArgument("ensemble_size must be positive".into()));
    }
    check_dataset(dataset, cfg.architecture.classes)?;
    par::map_indexed(exec, cfg.ensemble_size, |member| {
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed(seed, member));
        let mut model = GcnModel::new(topo, &cfg.architecture, &mut rng)?;
        let loss_trace = train_model(&mut model, dataset, cfg, &mut rng)?;
        Ok(TrainedMember { model, loss_trace })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::MotionWindow;

    /// Two clusters: joints jitter slowly (class 0) or quickly (class 1).
    fn toy_set(n: usize, seed: u64) -> Vec<(FeatureTensor, usize)> {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let amp = if label == 0 { 0.02 } else { 0.2 };
                let pts = (0..10 * 19)
                    .map(|k| {
                        let j = k % 19;
                        [j as f64 * 0.1 + rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)]
                    })
                    .collect();
                let w = MotionWindow::new(30.0, 19, pts).unwrap();
                (crate::preprocess::extract_features(&w, &topo).unwrap(), label)
            })
            .collect()
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            ensemble_size: 2,
            epochs,
            learning_rate: 0.02,
            batch_size: 8,
            architecture: Architecture {
                hidden: vec![4],
                ..Architecture::default()
            },
            bootstrap: true,
        }
    }

    #[test]
    fn loss_decreases_on_separable_set() {
        let topo = SkeletonTopology::default();
        let data = toy_set(24, 7);
        let members = train_ensemble(&topo, &data, &small_cfg(15), 11, Execution::Sequential).unwrap();
        for m in &members {
            assert!(m.loss_trace.iter().all(|l| l.is_finite()));
            assert!(m.loss_trace.last().unwrap() <= m.loss_trace.first().unwrap());
        }
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let topo = SkeletonTopology::default();
        let data = toy_set(12, 3);
        let a = train_ensemble(&topo, &data, &small_cfg(3), 5, Execution::Sequential).unwrap();
        let b = train_ensemble(&topo, &data, &small_cfg(3), 5, Execution::Parallel).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.model, y.model);
            assert_eq!(x.loss_trace, y.loss_trace);
        }
    }

    #[test]
    fn zero_epochs_leave_weights_untouched() {
        let topo = SkeletonTopology::default();
        let data = toy_set(6, 1);
        let cfg = small_cfg(0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = GcnModel::new(&topo, &cfg.architecture, &mut rng).unwrap();
        let before = model.clone();
        let trace = train_model(&mut model, &data, &cfg, &mut rng).unwrap();
        assert_eq!(model, before);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn rejects_empty_and_single_class_sets() {
        let topo = SkeletonTopology::default();
        let cfg = small_cfg(1);
        assert!(train_ensemble(&topo, &[], &cfg, 0, Execution::Sequential).is_err());
        let one: Vec<_> = toy_set(6, 2).into_iter().filter(|(_, y)| *y == 0).collect();
        assert!(train_ensemble(&topo, &one, &cfg, 0, Execution::Sequential).is_err());
    }
}
