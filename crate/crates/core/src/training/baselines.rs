//! The two sparse baselines: fixed-probability masks and
//! train-prune-retrain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{train, EpochMetrics, TrainConfig, Velocity};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::BoltzmannMachine;
use crate::topology::BipartiteGraph;

/// Share of the remaining weights removed at each pruning step.
pub const PRUNE_FRACTION: f64 = 0.2;

/// Random mask where every possible edge is kept independently with
/// probability `target_edges / (n_v * n_h)`. Units may end up isolated.
pub fn make_fixprob_mask<R: Rng + ?Sized>(
    n_visible: usize,
    n_hidden: usize,
    target_edges: usize,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    let total = n_visible * n_hidden;
    if total == 0 || target_edges == 0 || target_edges > total {
        return Err(Error::InvalidParameter(format!(
            "target of {target_edges} edges outside 1..={total}"
        )));
    }
    let p = target_edges as f64 / total as f64;
    let mut edges = Vec::with_capacity(target_edges + target_edges / 4);
    for i in 0..n_visible {
        for j in 0..n_hidden {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    BipartiteGraph::from_edges(n_visible, n_hidden, edges)
}

/// One pruning step, recorded so the choice can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub iteration: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    /// `(visible, hidden, weight)` of every removed edge, smallest first.
    pub removed: Vec<(usize, usize, f64)>,
    /// Smallest magnitude among the surviving weights at pruning time.
    pub min_kept_magnitude: f64,
}

/// Edge count and metrics after the training pass of one iteration
/// (iteration 0 is the initial dense pass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub iteration: usize,
    pub edges: usize,
    pub last_epoch: Option<EpochMetrics>,
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub model: BoltzmannMachine,
    /// Optimizer state and epoch trace of the final training pass.
    pub velocity: Velocity,
    pub final_trace: Vec<EpochMetrics>,
    pub steps: Vec<PruneStep>,
    pub events: Vec<PruneEvent>,
    pub reached: bool,
}

impl PruneOutcome {
    pub fn pruning_iterations(&self) -> usize {
        self.events.len()
    }
}

fn prune_smallest(m: &BoltzmannMachine, target_edges: usize, iteration: usize) -> (BoltzmannMachine, PruneEvent) {
    let n = m.graph().n_edges();
    let want = ((n as f64 * PRUNE_FRACTION).floor() as usize).max(1);
    let count = want.min(n - target_edges);
    let mut order: Vec<usize> = (0..n).collect();
    let w = m.weights();
    order.sort_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()).then(a.cmp(&b)));
    let mut drop = vec![false; n];
    let edges: Vec<(usize, usize)> = m.graph().edges().collect();
    let removed = order[..count]
        .iter()
        .map(|&id| {
            drop[id] = true;
            (edges[id].0, edges[id].1, w[id])
        })
        .collect();
    let min_kept_magnitude = order.get(count).map_or(f64::INFINITY, |&id| w[id].abs());
    let pruned = m.with_mask(|id| !drop[id]);
    let event = PruneEvent {
        iteration,
        edges_before: n,
        edges_after: n - count,
        removed,
        min_kept_magnitude,
    };
    (pruned, event)
}

/// Train, prune the smallest-magnitude weights, retrain, until at most
/// `target_edges` remain or `max_prune_iters` steps have run.
///
/// Each step removes [`PRUNE_FRACTION`] of the remaining weights (at least
/// one) without undershooting the target. Every training pass runs
/// `cfg.epochs` epochs with `cfg.weight_decay` acting as the L2 penalty.
pub fn train_prune_train<R: Rng + ?Sized>(
    dense: BoltzmannMachine,
    data: &Dataset,
    cfg: &TrainConfig,
    target_edges: usize,
    max_prune_iters: usize,
    rng: &mut R,
) -> Result<PruneOutcome> {
    if !dense.graph().is_complete() {
        return Err(Error::InvalidParameter("train-prune-retrain starts from a dense model".into()));
    }
    if target_edges == 0 || target_edges > dense.graph().n_edges() {
        return Err(Error::InvalidParameter(format!(
            "target of {target_edges} edges outside 1..={}",
            dense.graph().n_edges()
        )));
    }
    let first = train(dense, data, None, cfg, rng)?;
    let mut model = first.model;
    let mut velocity = first.velocity;
    let mut final_trace = first.trace.clone();
    let mut steps = vec![PruneStep {
        iteration: 0,
        edges: model.graph().n_edges(),
        last_epoch: first.trace.last().cloned(),
    }];
    let mut events = Vec::new();
    for iteration in 1..=max_prune_iters {
        if model.graph().n_edges() <= target_edges {
            break;
        }
        let (pruned, event) = prune_smallest(&model, target_edges, iteration);
        log::debug!("pruning step {iteration}: {} -> {} edges", event.edges_before, event.edges_after);
        events.push(event);
        let out = train(pruned, data, None, cfg, rng)?;
        model = out.model;
        velocity = out.velocity;
        final_trace = out.trace.clone();
        steps.push(PruneStep {
            iteration,
            edges: model.graph().n_edges(),
            last_epoch: out.trace.last().cloned(),
        });
    }
    let reached = model.graph().n_edges() <= target_edges;
    if !reached {
        log::warn!(
            "sparsity target {target_edges} not reached after {max_prune_iters} pruning steps ({} edges left)",
            model.graph().n_edges()
        );
    }
    Ok(PruneOutcome {
        model,
        velocity,
        final_trace,
        steps,
        events,
        reached,
    })
}
