//! The four subcommands as library functions.

use std::path::{Path, PathBuf};

use xbm_core::evaluation::{evaluate, EvalOptions};
use xbm_core::models::BoltzmannMachine;
use xbm_core::rng::seeded;
use xbm_core::topology::{
    bipartite_clustering, degree_histogram, generate_fitted_topology, generate_topology, BipartiteGraph,
    GeneratedTopology,
};
use xbm_core::training::{self, Checkpoint, ModelFamily, RunManifest};

use crate::artifacts::{self, ManifestArtifact, ReportArtifact, TopologyDiagnostics, TrainArtifact};
use crate::config::{streams, DataSource, ExperimentConfig, LoadedData};
use crate::error::CliError;

fn generate(cfg: &ExperimentConfig, data: Option<&LoadedData>) -> Result<GeneratedTopology, CliError> {
    let mut rng = seeded(cfg.topology.seed);
    let n_h = cfg.model.n_hidden;
    Ok(match data {
        Some(d) => generate_fitted_topology(n_h, d.train.feature_std(), &cfg.topology, &mut rng)?,
        None => {
            let n_v = cfg
                .model
                .n_visible
                .ok_or_else(|| CliError::Config("set model.n_visible or configure a dataset".into()))?;
            generate_topology(n_v, n_h, &cfg.topology, &mut rng)?
        }
    })
}

fn diagnostics(cfg: &ExperimentConfig, t: &GeneratedTopology) -> TopologyDiagnostics {
    let g = &t.graph;
    let dense = g.n_visible() * g.n_hidden();
    let hist = degree_histogram(g);
    TopologyDiagnostics {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        n_visible: g.n_visible(),
        n_hidden: g.n_hidden(),
        edges: g.n_edges(),
        dense_edges: dense,
        ratio: dense as f64 / g.n_edges() as f64,
        avg_shortest_path: t.path.average,
        diameter: t.path.diameter,
        path_sampled: t.path.sampled,
        disconnected: t.path.disconnected,
        threshold: t.threshold,
        clustering_coefficient: bipartite_clustering(g).coefficient,
        iterations: t.iterations,
        resamples: t.resamples,
        warning: t.warning,
        log_log_degrees: hist
            .iter()
            .filter(|&&(k, c)| k > 0 && c > 0)
            .map(|&(k, c)| ((k as f64).ln(), (c as f64).ln()))
            .collect(),
        degree_histogram: hist,
    }
}

/// Generates a topology and writes the graph plus its diagnostics. A run
/// that misses the small-world threshold still writes its outputs, then
/// reports [`CliError::Warning`].
pub fn cmd_topology(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<TopologyDiagnostics, CliError> {
    cfg.validate()?;
    let data = match cfg.data.source {
        DataSource::None => None,
        _ => Some(cfg.load_data()?),
    };
    let t = generate(cfg, data.as_ref())?;
    let diag = diagnostics(cfg, &t);
    let text = artifacts::graph_text(&t.graph, cfg.seed, &diag.config_hash);
    artifacts::write_artifact(&out.join(artifacts::GRAPH_FILE), text.as_bytes(), force)?;
    artifacts::write_json(&out.join(artifacts::DIAGNOSTICS_FILE), &diag, force)?;
    if t.warning {
        return Err(CliError::Warning(format!(
            "average shortest path {:.3} above threshold {:.3}",
            t.path.average, t.threshold
        )));
    }
    Ok(diag)
}

/// Edge budget for the fixprob / trprtr families: explicit, or the XBM
/// counterpart's edge count under the same seed.
fn target_edges(cfg: &ExperimentConfig, data: &LoadedData) -> Result<usize, CliError> {
    match cfg.model.target_edges {
        Some(t) => Ok(t),
        None => Ok(generate(cfg, Some(data))?.graph.n_edges()),
    }
}

pub struct TrainSummary {
    pub artifact: TrainArtifact,
    pub manifest: ManifestArtifact,
}

/// Builds the configured model family, trains it and writes checkpoint,
/// manifest and traces.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let (n_v, n_h) = (data.train.n_features(), cfg.model.n_hidden);
    let kind = cfg.model.kind;
    let mut init_rng = seeded(cfg.derived_seed(streams::INIT));
    let mut train_rng = seeded(cfg.train.seed);
    let monitor = (data.test.n_samples() > 0).then_some(&data.test);

    let mut topology_warning = false;
    let mut target = None;
    let graph = match cfg.model.family {
        ModelFamily::Rbm | ModelFamily::Trprtr => BipartiteGraph::complete(n_v, n_h),
        ModelFamily::Xbm => {
            let t = generate(cfg, Some(&data))?;
            topology_warning = t.warning;
            t.graph
        }
        ModelFamily::Fixprob => {
            let t = target_edges(cfg, &data)?;
            target = Some(t);
            training::make_fixprob_mask(n_v, n_h, t, &mut seeded(cfg.derived_seed(streams::MASK)))?
        }
    };
    let model = BoltzmannMachine::initialized(kind, graph, &mut init_rng);

    let (model, velocity, trace, pruning) = if cfg.model.family == ModelFamily::Trprtr {
        let t = target_edges(cfg, &data)?;
        target = Some(t);
        let out = training::train_prune_train(model, &data.train, &cfg.train, t, cfg.model.max_prune_iters, &mut train_rng)?;
        let pruning = (out.pruning_iterations(), out.reached, out.steps);
        (out.model, out.velocity, out.final_trace, Some(pruning))
    } else {
        let out = training::train(model, &data.train, monitor, &cfg.train, &mut train_rng)?;
        (out.model, out.velocity, out.trace, None)
    };
    debug_assert_eq!(velocity.d_weights.len(), model.graph().n_edges());

    let config_hash = cfg.hash();
    let mut run = RunManifest::new(cfg.model.family, &model, &data.train, &cfg.train, cfg.seed);
    run.target_edges = target;
    if cfg.model.family == ModelFamily::Xbm {
        run.topology = Some(cfg.topology.clone());
    }
    let manifest = ManifestArtifact {
        seed: cfg.seed,
        config_hash: config_hash.clone(),
        config: cfg.clone(),
        run,
        topology_warning,
    };
    let artifact = TrainArtifact {
        seed: cfg.seed,
        config_hash,
        model_name: cfg.model.family.display_name(kind),
        family: cfg.model.family,
        pruning_iterations: pruning.as_ref().map_or(0, |p| p.0),
        target_reached: pruning.as_ref().map(|p| p.1),
        checkpoint: Checkpoint::new(model, velocity, trace.len()),
    };
    artifacts::write_json(&out.join(artifacts::CHECKPOINT_FILE), &artifact, force)?;
    artifacts::write_json(&out.join(artifacts::MANIFEST_FILE), &manifest, force)?;
    artifacts::write_artifact(&out.join(artifacts::TRACE_FILE), &artifacts::trace_csv(&trace), force)?;
    if let Some((_, _, steps)) = &pruning {
        artifacts::write_artifact(&out.join(artifacts::PRUNING_FILE), &artifacts::pruning_csv(steps), force)?;
    }
    if topology_warning {
        return Err(CliError::Warning("topology missed the small-world threshold".into()));
    }
    Ok(TrainSummary { artifact, manifest })
}

fn cd_steps_label(cfg: &ExperimentConfig) -> String {
    match cfg.train.cd_steps_max {
        Some(max) if max != cfg.train.cd_steps => format!("{}-{max}", cfg.train.cd_steps),
        _ => cfg.train.cd_steps.to_string(),
    }
}

/// Evaluates a trained checkpoint on the configured dataset.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path, force: bool) -> Result<ReportArtifact, CliError> {
    cfg.validate()?;
    let artifact: TrainArtifact = artifacts::read_json(checkpoint)?;
    let model = artifact.checkpoint.model;
    if model.kind() != cfg.model.kind {
        return Err(CliError::Config(format!(
            "checkpoint holds a {} model, config asks for {}",
            model.kind(),
            cfg.model.kind
        )));
    }
    let data = cfg.load_data()?;
    let opts = EvalOptions {
        exact_when_possible: cfg.eval.exact_when_possible,
        ais: cfg.eval.ais,
        seed: cfg.derived_seed(streams::EVAL),
        pruning_iterations: artifact.pruning_iterations,
    };
    let test = (data.test.n_samples() > 0).then_some(&data.test);
    let mut report = evaluate(&model, artifact.model_name.clone(), &data.train, test, &opts)?;
    report.seed = cfg.seed;
    report.config_hash = Some(cfg.hash());
    let out_artifact = ReportArtifact {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        model_name: artifact.model_name,
        dataset: data.full.provenance.source.clone(),
        cd_steps: cd_steps_label(cfg),
        report,
    };
    artifacts::write_json(&out.join(artifacts::REPORT_FILE), &out_artifact, force)?;
    Ok(out_artifact)
}

/// Column names of the results tables.
pub const TABLE_COLUMNS: [&str; 12] = [
    "Dataset",
    "No. of CD steps during learning",
    "No. of weights",
    "Model",
    "No. of hidden units",
    "Average shortest path",
    "Average cluster coefficient",
    "No. of pruning iterations",
    "Average train log-probabilities",
    "Average test log-probabilities",
    "RMSE",
    "PCC",
];

fn collect_reports(path: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                collect_reports(&p, found)?;
            } else if p.file_name().is_some_and(|n| n == artifacts::REPORT_FILE) {
                found.push(p);
            }
        }
    } else if path.is_file() {
        found.push(path.to_path_buf());
    } else {
        return Err(CliError::Data(format!("{} does not exist", path.display())));
    }
    Ok(())
}

/// Aggregates report files (or directories searched recursively for
/// `report.json`) into CSV, one row per report in path order.
pub fn cmd_table(inputs: &[PathBuf]) -> Result<String, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        collect_reports(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(CliError::Data("no reports found".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS).expect("in-memory write");
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    for f in &files {
        let r: ReportArtifact = artifacts::read_json(f)?;
        let e = &r.report;
        w.write_record([
            r.dataset.clone(),
            r.cd_steps.clone(),
            e.edge_count.to_string(),
            r.model_name.clone(),
            e.n_hidden.to_string(),
            format!("{:.4}", e.avg_shortest_path),
            format!("{:.4}", e.clustering_coefficient),
            e.pruning_iterations.to_string(),
            fmt(e.avg_train_logprob),
            fmt(e.avg_test_logprob),
            format!("{:.4}", e.rmse),
            fmt(e.pcc),
        ])
        .expect("in-memory write");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv"))
}

/// Seeds for `runs` independent runs: the master seed first, then derived
/// seeds.
pub fn run_seeds(master: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64)
        .map(|r| if r == 0 { master } else { xbm_core::rng::derive_seed(master, 1000 + r) })
        .collect()
}

