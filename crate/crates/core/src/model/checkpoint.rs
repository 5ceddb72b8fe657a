//! JSON checkpoint for a trained ensemble.
//!
//! Layout (version 1):
//! ```text
//! {
//!   "format": "kinexplain-ensemble",
//!   "version": 1,
//!   "topology_hash": "<sha256 hex of the topology file>",
//!   "temporal_kernel": 9,
//!   "branch_scale": [1.0, 10.0, 1.0],
//!   "members": [
//!     { "layers": [{"in_channels", "out_channels", "weights", "bias"}, ...],
//!       "classifier": [channels x classes, row-major],
//!       "classifier_bias": [classes],
//!       "loss_trace": [...] }
//!   ]
//! }
//! ```
//! The adjacency is not stored; it is rebuilt from the topology, whose hash
//! must match.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adjacency, GcnModel, GraphConvLayer, TrainedMember};
use crate::error::{Error, Result};
use crate::skeleton::SkeletonTopology;

pub const FORMAT: &str = "kinexplain-ensemble";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub layers: Vec<GraphConvLayer>,
    pub classifier: Vec<f64>,
    pub classifier_bias: Vec<f64>,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub topology_hash: String,
    pub temporal_kernel: usize,
    pub branch_scale: [f64; 3],
    pub members: Vec<MemberRecord>,
}

impl Checkpoint {
    pub fn from_members(topo: &SkeletonTopology, members: &[TrainedMember]) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("no ensemble members"))?;
        Ok(Self {
            format: FORMAT.into(),
            version: VERSION,
            topology_hash: topo.hash(),
            temporal_kernel: first.model.temporal_kernel,
            branch_scale: first.model.branch_scale,
            members: members
                .iter()
                .map(|m| MemberRecord {
                    layers: m.model.layers.clone(),
                    classifier: m.model.classifier.clone(),
                    classifier_bias: m.model.classifier_bias.clone(),
                    loss_trace: m.loss_trace.clone(),
                })
                .collect(),
        })
    }

    pub fn models(&self, topo: &SkeletonTopology) -> Result<Vec<GcnModel>> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        if self.topology_hash != topo.hash() {
            return Err(Error::Checkpoint("checkpoint was trained on a different topology".into()));
        }
        let adjacency = Adjacency::from_topology(topo);
        self.members
            .iter()
            .map(|m| {
                GcnModel::from_parts(
                    adjacency.clone(),
                    m.layers.clone(),
                    self.temporal_kernel,
                    self.branch_scale,
                    m.classifier.clone(),
                    m.classifier_bias.clone(),
                )
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
