//! Experiment configuration: one TOML file per experiment. Every section is
//! optional and falls back to the defaults used in the reference
//! experiments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xbm_core::data::{self, Dataset};
use xbm_core::evaluation::AisSettings;
use xbm_core::models::VisibleKind;
use xbm_core::rng::{derive_seed, seeded};
use xbm_core::topology::TopologyParams;
use xbm_core::training::{ModelFamily, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream of the run derives from it.
    pub seed: u64,
    /// Output directory (overridden by `--out`).
    pub out: Option<PathBuf>,
    pub model: ModelSpec,
    pub data: DataSpec,
    pub topology: TopologyParams,
    pub train: TrainConfig,
    pub eval: EvalSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: None,
            model: ModelSpec::default(),
            data: DataSpec::default(),
            topology: TopologyParams::default(),
            train: TrainConfig::default(),
            eval: EvalSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub kind: VisibleKind,
    pub n_hidden: usize,
    /// Visible layer size when no dataset is configured (topology only).
    pub n_visible: Option<usize>,
    /// Edge budget for the fixprob and trprtr families. Defaults to the edge
    /// count of the XBM topology generated under the same seed.
    pub target_edges: Option<usize>,
    pub max_prune_iters: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            family: ModelFamily::Xbm,
            kind: VisibleKind::Binary,
            n_hidden: 100,
            n_visible: None,
            target_edges: None,
            max_prune_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// No dataset; only valid for `topology` with `model.n_visible` set.
    None,
    Synthetic,
    Idx,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub has_header: bool,
    /// Synthetic dataset size.
    pub n_samples: usize,
    pub n_features: usize,
    /// Keep only the first `limit` rows.
    pub limit: Option<usize>,
    /// Map entries `>= threshold` to 1, the rest to 0.
    pub binarize: Option<f64>,
    /// Z-score every column.
    pub normalize: bool,
    /// Contiguous train/test split (synthetic data is 70/30 by default).
    pub train_fraction: Option<f64>,
    pub folds: Option<usize>,
    /// Fold used as the test set when `folds` is set.
    pub fold: usize,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            source: DataSource::None,
            path: None,
            has_header: false,
            n_samples: 1000,
            n_features: 100,
            limit: None,
            binarize: None,
            normalize: false,
            train_fraction: None,
            folds: None,
            fold: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub exact_when_possible: bool,
    /// AIS settings; AIS runs only when present.
    pub ais: Option<AisSettings>,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            exact_when_possible: true,
            ais: None,
        }
    }
}

/// Stream indices derived from the master seed.
pub mod streams {
    pub const TOPOLOGY: u64 = 0;
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const DATA: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const MASK: u64 = 5;
}

/// Train and test parts of the configured dataset.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub full: Dataset,
    pub train: Dataset,
    pub test: Dataset,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative data paths are resolved against the config file
        if let (Some(p), Some(dir)) = (&cfg.data.path, path.parent()) {
            if p.is_relative() {
                cfg.data.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        xbm_core::data::sha256_hex(&json)
    }

    /// Applies a seed override and pins the per-module seeds to streams of
    /// the master seed, so the hash and manifest describe the exact run.
    pub fn resolved(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.topology.seed = self.derived_seed(streams::TOPOLOGY);
        self.train.seed = self.derived_seed(streams::TRAIN);
        self
    }

    pub fn derived_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.topology.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.model.n_hidden == 0 {
            return Err(CliError::Config("model.n_hidden must be positive".into()));
        }
        let d = &self.data;
        match d.source {
            DataSource::Idx | DataSource::Csv => match &d.path {
                None => return Err(CliError::Config("data.path is required for file sources".into())),
                Some(p) if !p.exists() => {
                    return Err(CliError::Config(format!("data file {} does not exist", p.display())))
                }
                _ => {}
            },
            DataSource::Synthetic if d.n_samples == 0 || d.n_features == 0 => {
                return Err(CliError::Config("synthetic data needs positive n_samples and n_features".into()))
            }
            _ => {}
        }
        if d.binarize.is_some() && d.normalize {
            return Err(CliError::Config("data.binarize and data.normalize are exclusive".into()));
        }
        if d.binarize.is_some() && self.model.kind == VisibleKind::Gaussian {
            return Err(CliError::Config("gaussian models take real-valued data; drop data.binarize".into()));
        }
        if d.folds.is_some() && d.train_fraction.is_some() {
            return Err(CliError::Config("data.folds and data.train_fraction are exclusive".into()));
        }
        if let Some(k) = d.folds {
            if d.fold >= k {
                return Err(CliError::Config(format!("data.fold {} out of {k} folds", d.fold)));
            }
        }
        if self.model.family == ModelFamily::Rbm && self.model.target_edges.is_some() {
            return Err(CliError::Config("model.target_edges applies to fixprob and trprtr only".into()));
        }
        Ok(())
    }

    /// Loads, transforms and splits the dataset.
    pub fn load_data(&self) -> Result<LoadedData, CliError> {
        let d = &self.data;
        let mut ds = match d.source {
            DataSource::None => return Err(CliError::Config("no dataset configured".into())),
            DataSource::Synthetic => data::synthetic_gaussian(
                d.n_samples,
                d.n_features,
                &mut seeded(self.derived_seed(streams::DATA)),
            )?,
            DataSource::Idx => data::load_idx(d.path.as_deref().expect("validated"))?,
            DataSource::Csv => data::load_csv(d.path.as_deref().expect("validated"), d.has_header)?,
        };
        if let Some(n) = d.limit {
            let split = ds.split.clone();
            ds = ds.head(n)?;
            if n >= ds.n_samples() {
                ds.split = split;
            }
        }
        if let Some(t) = d.binarize {
            ds = data::binarize(&ds, t)?;
        }
        if d.normalize {
            ds = data::normalize(&ds)?;
        }
        if let Some(k) = d.folds {
            ds = ds.with_folds(k, &mut seeded(self.derived_seed(streams::DATA)))?;
            let (train, test) = ds.fold(d.fold)?;
            return Ok(LoadedData { full: ds, train, test });
        }
        if let Some(f) = d.train_fraction {
            ds = ds.with_train_fraction(f)?;
        }
        let (train, test) = (ds.train()?, ds.test()?);
        Ok(LoadedData { full: ds, train, test })
    }
}
