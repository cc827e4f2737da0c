//! Run manifests and resumable checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, Velocity};
use crate::data::{Dataset, HASH_ALGORITHM};
use crate::error::{Error, Result};
use crate::models::{BoltzmannMachine, VisibleKind};
use crate::topology::TopologyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// Dense (RBM / GRBM).
    Rbm,
    /// Scale-free small-world mask (XBM / GXBM).
    Xbm,
    /// Fixed-probability random mask.
    Fixprob,
    /// Train-prune-retrain from a dense start.
    Trprtr,
}

impl ModelFamily {
    /// Conventional model name, e.g. `GXBM` or `RBM_FixProb`.
    pub fn display_name(self, kind: VisibleKind) -> String {
        let base = match kind {
            VisibleKind::Binary => "RBM",
            VisibleKind::Gaussian => "GRBM",
        };
        match self {
            ModelFamily::Rbm => base.to_string(),
            ModelFamily::Xbm => base.replace("RBM", "XBM"),
            ModelFamily::Fixprob => format!("{base}_FixProb"),
            ModelFamily::Trprtr => format!("{base}_TrPrTr"),
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelFamily::Rbm => "rbm",
            ModelFamily::Xbm => "xbm",
            ModelFamily::Fixprob => "fixprob",
            ModelFamily::Trprtr => "trprtr",
        })
    }
}

/// Everything needed to replay a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub family: ModelFamily,
    pub kind: VisibleKind,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub topology: Option<TopologyParams>,
    pub target_edges: Option<usize>,
    pub dataset_source: String,
    pub dataset_hash: String,
    pub hash_algorithm: String,
    pub n_samples: usize,
    pub edge_count: usize,
}

impl RunManifest {
    pub fn new(
        family: ModelFamily,
        model: &BoltzmannMachine,
        data: &Dataset,
        train: &TrainConfig,
        seed: u64,
    ) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            family,
            kind: model.kind(),
            n_visible: model.n_visible(),
            n_hidden: model.n_hidden(),
            seed,
            train: train.clone(),
            topology: None,
            target_edges: None,
            dataset_source: data.provenance.source.clone(),
            dataset_hash: data.content_hash().to_string(),
            hash_algorithm: HASH_ALGORITHM.to_string(),
            n_samples: data.n_samples(),
            edge_count: model.graph().n_edges(),
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "xbm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Model plus optimizer state, enough to continue training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub epoch: usize,
    pub model: BoltzmannMachine,
    pub velocity: Velocity,
}

impl Checkpoint {
    pub fn new(model: BoltzmannMachine, velocity: Velocity, epoch: usize) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            epoch,
            model,
            velocity,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        // re-validate the model shapes through the public constructor
        let m = &c.model;
        BoltzmannMachine::from_parts(
            m.kind(),
            m.graph().clone(),
            m.weights().to_vec(),
            m.visible_bias().to_vec(),
            m.hidden_bias().to_vec(),
            m.sigma().map(<[f64]>::to_vec),
        )?;
        crate::error::check_len("velocity weights", c.velocity.d_weights.len(), m.graph().n_edges())?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
