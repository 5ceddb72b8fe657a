//! Attribution and perturbation analysis for skeleton-based motion
//! classifiers.

pub mod cohort;
pub mod error;
pub mod model;
pub mod par;
pub mod perturb;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod skeleton;
pub mod stats;
pub mod synth;
pub mod xai;

pub use error::{Error, Result};
