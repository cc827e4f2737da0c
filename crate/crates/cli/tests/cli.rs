use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xbm_cli::artifacts::{ReportArtifact, TrainArtifact};
use xbm_cli::commands::{cmd_table, TABLE_COLUMNS};
use xbm_cli::exit;
use xbm_core::models::{BoltzmannMachine, StateSample, VisibleKind};
use xbm_core::topology::BipartiteGraph;
use xbm_core::training::{Checkpoint, GradientSet, ModelFamily};

fn xbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOPOLOGY_10: &str = "seed = 3\n[model]\nn_visible = 10\nn_hidden = 10\n";

#[test]
fn smallest_grid_cell_runs_without_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", TOPOLOGY_10);
    let out = dir.path().join("out");
    let o = xbm(&["topology", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), exit::SUCCESS, "{}", String::from_utf8_lossy(&o.stderr));
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("topology.json")).unwrap()).unwrap();
    assert_eq!(diag["warning"], false);
    assert_eq!(diag["seed"], 3);
}

#[test]
fn same_seed_gives_identical_graph_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "[model]\nn_visible = 40\nn_hidden = 30\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&xbm(&["topology", "--config", s(&cfg), "--seed", "17", "--out", s(out)])), 0);
    }
    let ga = std::fs::read(a.join("topology.txt")).unwrap();
    assert_eq!(ga, std::fs::read(b.join("topology.txt")).unwrap());
    assert!(String::from_utf8(ga).unwrap().starts_with("# seed 17\n# config_hash "));
}

#[test]
fn differing_artifacts_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", TOPOLOGY_10);
    let out = dir.path().join("out");
    assert_eq!(code(&xbm(&["topology", "--config", s(&cfg), "--out", s(&out)])), 0);
    // identical rerun is fine
    assert_eq!(code(&xbm(&["topology", "--config", s(&cfg), "--out", s(&out)])), 0);
    let o = xbm(&["topology", "--config", s(&cfg), "--seed", "99", "--out", s(&out)]);
    assert_eq!(code(&o), exit::CONFLICT);
    let o = xbm(&["topology", "--config", s(&cfg), "--seed", "99", "--out", s(&out), "--force"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn multi_seed_runs_write_per_seed_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", TOPOLOGY_10);
    let out = dir.path().join("out");
    let o = xbm(&["topology", "--config", s(&cfg), "--out", s(&out), "--runs", "3", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dirs: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(dirs.len(), 3);
    assert!(out.join("seed-3/topology.txt").exists());
}

const GAUSSIAN_SMOKE: &str = r#"
seed = 5
[model]
family = "xbm"
kind = "gaussian"
n_hidden = 12
[data]
source = "synthetic"
n_samples = 60
n_features = 10
[train]
epochs = 0
"#;

#[test]
fn zero_epochs_write_an_untrained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", GAUSSIAN_SMOKE);
    let out = dir.path().join("out");
    let o = xbm(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let art: TrainArtifact = serde_json::from_str(&std::fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(art.checkpoint.epoch, 0);
    assert_eq!(art.model_name, "GXBM");
    assert!(art.checkpoint.velocity.d_weights.iter().all(|&v| v == 0.0));
    assert!(art.checkpoint.model.visible_bias().iter().all(|&a| a == 0.0));
}

#[test]
fn manifest_replays_to_identical_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", &GAUSSIAN_SMOKE.replace("epochs = 0", "epochs = 3\nlearning_rate = 0.01"));
    let first = dir.path().join("first");
    assert_eq!(code(&xbm(&["train", "--config", s(&cfg), "--out", s(&first)])), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    let replay_cfg: xbm_cli::ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    let replay_path = write(dir.path(), "replay.toml", &replay_cfg.to_toml());
    let second = dir.path().join("second");
    assert_eq!(code(&xbm(&["train", "--config", s(&replay_path), "--out", s(&second)])), 0);
    assert_eq!(
        std::fs::read(first.join("checkpoint.json")).unwrap(),
        std::fs::read(second.join("checkpoint.json")).unwrap()
    );
    assert_eq!(manifest["run"]["train"]["momentum"], 0.5);
}

#[test]
fn trprtr_emits_edge_counts_per_pruning_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[model]
family = "trprtr"
kind = "binary"
n_hidden = 6
target_edges = 20
[data]
source = "synthetic"
n_samples = 40
n_features = 8
binarize = 0.0
[train]
epochs = 1
learning_rate = 0.05
"#;
    let cfg = write(dir.path(), "p.toml", text);
    let out = dir.path().join("out");
    let o = xbm(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("pruning.csv")).unwrap();
    let edges: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(edges.first(), Some(&48));
    assert_eq!(edges.last(), Some(&20));
    assert!(edges.windows(2).all(|w| w[1] < w[0]));
    let art: TrainArtifact = serde_json::from_str(&std::fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(art.pruning_iterations, edges.len() - 1);
    assert_eq!(art.target_reached, Some(true));
}

fn ln_p_by_enumeration(m: &BoltzmannMachine, v: &[f64]) -> f64 {
    let (n_v, n_h) = (m.n_visible(), m.n_hidden());
    let bits = |c: u64, n: usize| -> Vec<f64> { (0..n).map(|k| ((c >> k) & 1) as f64).collect() };
    let neg_energy = |v: Vec<f64>, h: Vec<f64>| -m.energy(&StateSample { visible: v, hidden: h }).unwrap();
    let mut all = Vec::new();
    let mut clamped = Vec::new();
    for cv in 0..1u64 << n_v {
        for ch in 0..1u64 << n_h {
            let e = neg_energy(bits(cv, n_v), bits(ch, n_h));
            all.push(e);
            if bits(cv, n_v) == v {
                clamped.push(e);
            }
        }
    }
    xbm_core::evaluation::log_sum_exp(&clamped) - xbm_core::evaluation::log_sum_exp(&all)
}

#[test]
fn tiny_pipeline_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 11
[model]
family = "rbm"
kind = "binary"
n_hidden = 6
[data]
source = "synthetic"
n_samples = 64
n_features = 8
binarize = 0.0
[train]
epochs = 5
learning_rate = 0.05
batch_size = 8
"#;
    let cfg = write(dir.path(), "tiny.toml", text);
    let out = dir.path().join("out");
    assert_eq!(code(&xbm(&["train", "--config", s(&cfg), "--out", s(&out)])), 0);
    let ckpt = out.join("checkpoint.json");
    let o = xbm(&["eval", "--config", s(&cfg), "--model", s(&ckpt), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: ReportArtifact = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let art: TrainArtifact = serde_json::from_str(&std::fs::read_to_string(&ckpt).unwrap()).unwrap();
    let loaded = xbm_cli::ExperimentConfig::load(&cfg).unwrap().resolved(None).load_data().unwrap();
    let m = &art.checkpoint.model;
    let rows: Vec<&[f64]> = loaded.train.rows().collect();
    let oracle = rows.iter().map(|v| ln_p_by_enumeration(m, v)).sum::<f64>() / rows.len() as f64;
    let got = report.report.avg_train_logprob.unwrap();
    assert!((got - oracle).abs() <= 1e-6, "{got} vs {oracle}");
    assert_eq!(report.report.edge_count, 48);
}

#[test]
fn zero_binary_model_reports_uniform_log_prob() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nfamily = \"rbm\"\nn_hidden = 4\n[data]\nsource = \"synthetic\"\nn_samples = 20\nn_features = 6\nbinarize = 0.0\n";
    let cfg = write(dir.path(), "z.toml", text);
    let m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(6, 4));
    let vel = GradientSet::zeros_like(&m);
    let art = TrainArtifact {
        seed: 0,
        config_hash: String::new(),
        model_name: "RBM".into(),
        family: ModelFamily::Rbm,
        pruning_iterations: 0,
        target_reached: None,
        checkpoint: Checkpoint::new(m, vel, 0),
    };
    let ckpt = dir.path().join("zero.json");
    std::fs::write(&ckpt, serde_json::to_string(&art).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = xbm(&["eval", "--config", s(&cfg), "--model", s(&ckpt), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: ReportArtifact = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let expect = -6.0 * std::f64::consts::LN_2;
    assert!((r.report.avg_train_logprob.unwrap() - expect).abs() < 1e-12);
    assert!((r.report.avg_test_logprob.unwrap() - expect).abs() < 1e-12);
}

#[test]
fn ais_on_gaussian_model_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        &format!("{GAUSSIAN_SMOKE}\n[eval]\nexact_when_possible = false\n[eval.ais]\nn_temps = 10\nn_chains = 2\n"),
    );
    let out = dir.path().join("out");
    assert_eq!(code(&xbm(&["train", "--config", s(&cfg), "--out", s(&out)])), 0);
    let o = xbm(&["eval", "--config", s(&cfg), "--model", s(&out.join("checkpoint.json")), "--out", s(&out)]);
    assert_eq!(code(&o), exit::CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("AIS"));
}

#[test]
fn table_has_one_populated_row_per_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.toml",
        "[model]\nfamily = \"rbm\"\nn_hidden = 4\n[data]\nsource = \"synthetic\"\nn_samples = 30\nn_features = 6\nbinarize = 0.0\n[train]\nepochs = 2\nlearning_rate = 0.05\n",
    );
    for seed in ["1", "2", "3"] {
        let out = dir.path().join(format!("run{seed}"));
        assert_eq!(code(&xbm(&["train", "--config", s(&cfg), "--seed", seed, "--out", s(&out)])), 0);
        let ckpt = out.join("checkpoint.json");
        assert_eq!(code(&xbm(&["eval", "--config", s(&cfg), "--seed", seed, "--model", s(&ckpt), "--out", s(&out)])), 0);
    }
    let table = cmd_table(&[dir.path().to_path_buf()]).unwrap();
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, TABLE_COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r.iter().all(|c| !c.is_empty()), "{r:?}");
        assert_eq!(&r[3], "RBM");
        assert_eq!(&r[2], "24");
    }
    let file = dir.path().join("table.csv");
    assert_eq!(code(&xbm(&["table", s(dir.path()), "--out", s(&file)])), 0);
    assert_eq!(std::fs::read_to_string(file).unwrap(), table);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad = write(dir.path(), "bad.toml", "[model]\nnonsense = 1\n");
    assert_eq!(code(&xbm(&["train", "--config", s(&bad), "--out", s(&out)])), exit::CONFIG);

    let csv = write(dir.path(), "broken.csv", "1.0,2.0\n3.0,oops\n");
    let cfg = write(
        dir.path(),
        "d.toml",
        &format!("[model]\nkind = \"gaussian\"\nfamily = \"rbm\"\nn_hidden = 2\n[data]\nsource = \"csv\"\npath = \"{}\"\n", s(&csv)),
    );
    assert_eq!(code(&xbm(&["train", "--config", s(&cfg), "--out", s(&out)])), exit::DATA);

    let div = write(
        dir.path(),
        "div.toml",
        &GAUSSIAN_SMOKE.replace("epochs = 0", "epochs = 3\nlearning_rate = 1e200"),
    );
    assert_eq!(code(&xbm(&["train", "--config", s(&div), "--out", s(&out)])), exit::DIVERGENCE);
}
