//! Graph convolutional classifier, ensemble wrapper, training and
//! checkpoints.

mod checkpoint;
mod ensemble;
mod gcn;
mod train;

pub use checkpoint::{Checkpoint, MemberRecord};
pub use ensemble::{ensemble_predict, ensemble_predict_many, EnsemblePrediction, POSITIVE_CLASS};
pub use gcn::{Adjacency, Architecture, FeatureMapStack, Forward, GcnModel, GraphConvLayer, Gradients};
pub use train::{member_seed, train_ensemble, train_model, TrainConfig, TrainedMember};
