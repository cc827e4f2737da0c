//! On-disk outputs. Every artifact carries the master seed and the config
//! hash, and an existing file is only replaced by identical bytes unless
//! the caller forces it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xbm_core::evaluation::EvalReport;
use xbm_core::training::{Checkpoint, EpochMetrics, ModelFamily, PruneStep, RunManifest};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const GRAPH_FILE: &str = "topology.txt";
pub const DIAGNOSTICS_FILE: &str = "topology.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const PRUNING_FILE: &str = "pruning.csv";
pub const REPORT_FILE: &str = "report.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path`, creating parent directories. An existing file
/// with different contents is a [`CliError::Conflict`] unless `force`.
pub fn write_artifact(path: &Path, bytes: &[u8], force: bool) -> Result<(), CliError> {
    if let Ok(existing) = std::fs::read(path) {
        if existing == bytes {
            return Ok(());
        }
        if !force {
            return Err(CliError::Conflict(path.to_path_buf()));
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write_artifact(path, &bytes, force)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Graph text format preceded by comment lines naming the run.
pub fn graph_text(graph: &xbm_core::topology::BipartiteGraph, seed: u64, config_hash: &str) -> String {
    format!("# seed {seed}\n# config_hash {config_hash}\n{}", graph.to_text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDiagnostics {
    pub seed: u64,
    pub config_hash: String,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub edges: usize,
    pub dense_edges: usize,
    /// Dense over sparse weight count.
    pub ratio: f64,
    pub avg_shortest_path: f64,
    pub diameter: usize,
    pub path_sampled: bool,
    pub disconnected: bool,
    pub threshold: f64,
    pub clustering_coefficient: f64,
    pub iterations: usize,
    pub resamples: usize,
    pub warning: bool,
    /// `(degree, node count)` over both layers.
    pub degree_histogram: Vec<(usize, usize)>,
    /// `(ln degree, ln count)` pairs for log-log plots.
    pub log_log_degrees: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub seed: u64,
    pub config_hash: String,
    pub model_name: String,
    pub family: ModelFamily,
    pub pruning_iterations: usize,
    /// Whether the edge target was met (train-prune-retrain only).
    pub target_reached: Option<bool>,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestArtifact {
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub run: RunManifest,
    pub topology_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub seed: u64,
    pub config_hash: String,
    pub model_name: String,
    pub dataset: String,
    /// CD steps during learning, e.g. `1` or `1-25`.
    pub cd_steps: String,
    pub report: EvalReport,
}

pub fn trace_csv(trace: &[EpochMetrics]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "cd_steps", "learning_rate", "train_rmse", "train_pcc", "monitor_rmse", "monitor_pcc"])
        .expect("in-memory write");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for e in trace {
        w.write_record([
            e.epoch.to_string(),
            e.cd_steps.to_string(),
            e.learning_rate.to_string(),
            e.train_rmse.to_string(),
            opt(e.train_pcc),
            opt(e.monitor_rmse),
            opt(e.monitor_pcc),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn pruning_csv(steps: &[PruneStep]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "edges", "train_rmse", "train_pcc"]).expect("in-memory write");
    for s in steps {
        let last = s.last_epoch.as_ref();
        w.write_record([
            s.iteration.to_string(),
            s.edges.to_string(),
            last.map(|e| e.train_rmse.to_string()).unwrap_or_default(),
            last.and_then(|e| e.train_pcc).map(|p| p.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Output directory for one seed of a multi-seed run.
pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}
