//! Scale-free, small-world bipartite topologies.
//!
//! Generation runs in stages: a power-law degree sequence is split between
//! the layers and realized with a bipartite Havel–Hakimi construction, then
//! densified with Gaussian local neighbourhoods. The loop repeats until the
//! average shortest path drops below `ln(n_v + n_h)`. A final relabelling
//! maps high-degree visible nodes to high-variance data features.

mod construct;
mod degrees;
mod graph;
pub mod metrics;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub use construct::{add_neighborhood_edges, havel_hakimi_bipartite, NEIGHBORHOOD_TRIALS};
pub use degrees::{
    is_bigraphic, power_law_pmf, sample_power_law_degrees, sample_power_law_degrees_bounded,
    split_and_equalize, split_and_equalize_capped, DegreeSequence,
};
pub use graph::BipartiteGraph;
pub use metrics::{
    average_shortest_path, bipartite_clustering, degree_histogram, log_log_slope, path_stats,
    ClusteringStats, PathStats,
};

/// Attempts at drawing a realizable degree sequence per outer iteration.
const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyParams {
    /// Power-law exponent.
    pub gamma: f64,
    pub k_min: usize,
    /// Spread of the neighbourhood Gaussian, in node-index units.
    pub sigma_neigh: f64,
    /// Neighbourhood passes.
    pub phi: usize,
    /// Small-world threshold in hops; `None` means `ln(n_v + n_h)`.
    pub l_threshold: Option<f64>,
    pub max_outer_iterations: usize,
    pub seed: u64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            gamma: 2.0,
            k_min: 4,
            sigma_neigh: 5.0,
            phi: 5,
            l_threshold: None,
            max_outer_iterations: 20,
            seed: 0,
        }
    }
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if self.k_min < 1 {
            return Err(Error::InvalidParameter("k_min must be at least 1".into()));
        }
        if !(self.sigma_neigh > 0.0 && self.sigma_neigh.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_neigh must be positive, got {}",
                self.sigma_neigh
            )));
        }
        if self.max_outer_iterations < 1 {
            return Err(Error::InvalidParameter("max_outer_iterations must be at least 1".into()));
        }
        if let Some(l) = self.l_threshold {
            if !(l > 0.0) {
                return Err(Error::InvalidParameter(format!("l_threshold must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, n_visible: usize, n_hidden: usize) -> f64 {
        self.l_threshold
            .unwrap_or_else(|| ((n_visible + n_hidden) as f64).ln())
    }
}

/// Output of [`generate_topology`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTopology {
    pub graph: BipartiteGraph,
    /// Outer iterations run (1 when the first candidate was accepted).
    pub iterations: usize,
    pub path: PathStats,
    pub threshold: f64,
    /// The threshold was never met; `graph` is the best candidate seen.
    pub warning: bool,
    /// Degree sequences discarded because they could not be repaired.
    pub resamples: usize,
}

/// Builds one candidate graph: degrees, split, Havel–Hakimi, neighbourhoods.
pub fn build_candidate<R: Rng + ?Sized>(
    n_visible: usize,
    n_hidden: usize,
    params: &TopologyParams,
    rng: &mut R,
) -> Result<(BipartiteGraph, usize)> {
    let mut resamples = 0;
    let base = loop {
        let seq = sample_power_law_degrees(n_visible + n_hidden, params, rng)?;
        let (sv, sh) = split_and_equalize_capped(&seq, n_visible, n_hidden)?;
        if let Some(g) = construct::realize_degrees(sv, sh, params.k_min)? {
            break g;
        }
        resamples += 1;
        if resamples >= MAX_RESAMPLES {
            return Err(Error::Construction(format!(
                "no realizable degree sequence after {MAX_RESAMPLES} draws for {n_visible}x{n_hidden}"
            )));
        }
    };
    Ok((add_neighborhood_edges(&base, params, rng)?, resamples))
}

/// Generates a scale-free, small-world bipartite topology.
pub fn generate_topology<R: Rng + ?Sized>(
    n_visible: usize,
    n_hidden: usize,
    params: &TopologyParams,
    rng: &mut R,
) -> Result<GeneratedTopology> {
    params.validate()?;
    if n_visible <= 4 || n_hidden <= 4 {
        return Err(Error::UnsupportedSize(format!(
            "both layers need more than 4 nodes, got {n_visible}x{n_hidden}"
        )));
    }
    let threshold = params.threshold(n_visible, n_hidden);
    let mut best: Option<(BipartiteGraph, PathStats)> = None;
    let mut resamples = 0;
    for iteration in 1..=params.max_outer_iterations {
        let (g, r) = build_candidate(n_visible, n_hidden, params, rng)?;
        resamples += r;
        let path = path_stats(&g);
        if path.average <= threshold {
            return Ok(GeneratedTopology {
                graph: g,
                iterations: iteration,
                path,
                threshold,
                warning: false,
                resamples,
            });
        }
        if best.as_ref().is_none_or(|(_, p)| path.average < p.average) {
            best = Some((g, path));
        }
    }
    let (graph, path) = best.expect("at least one iteration ran");
    warn!(
        "small-world threshold {threshold:.3} not reached in {} iterations (best {:.3})",
        params.max_outer_iterations, path.average
    );
    Ok(GeneratedTopology {
        graph,
        iterations: params.max_outer_iterations,
        path,
        threshold,
        warning: true,
        resamples,
    })
}

/// [`generate_topology`] driven by `params.seed`.
pub fn generate_topology_seeded(
    n_visible: usize,
    n_hidden: usize,
    params: &TopologyParams,
) -> Result<GeneratedTopology> {
    generate_topology(n_visible, n_hidden, params, &mut seeded(params.seed))
}

/// Pairs visible nodes with data features by rank: the k-th highest-degree
/// node gets the k-th highest-std feature. Ties on either side fall back to
/// ascending index. Returns `perm` with `perm[node] = feature`, suitable for
/// [`BipartiteGraph::relabel_visible`].
pub fn fit_to_data(g: &BipartiteGraph, feature_std: &[f64]) -> Result<Vec<usize>> {
    crate::error::check_len("feature_std", feature_std.len(), g.n_visible())?;
    if feature_std.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidParameter("feature std-devs must be non-negative".into()));
    }
    let mut nodes: Vec<usize> = (0..g.n_visible()).collect();
    nodes.sort_by(|&a, &b| g.visible_degree(b).cmp(&g.visible_degree(a)).then(a.cmp(&b)));
    let mut features: Vec<usize> = (0..feature_std.len()).collect();
    features.sort_by(|&a, &b| {
        feature_std[b]
            .partial_cmp(&feature_std[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut perm = vec![0; g.n_visible()];
    for (node, feature) in nodes.into_iter().zip(features) {
        perm[node] = feature;
    }
    Ok(perm)
}

/// Generates a topology and relabels its visible layer to fit `feature_std`.
pub fn generate_fitted_topology<R: Rng + ?Sized>(
    n_hidden: usize,
    feature_std: &[f64],
    params: &TopologyParams,
    rng: &mut R,
) -> Result<GeneratedTopology> {
    let mut out = generate_topology(feature_std.len(), n_hidden, params, rng)?;
    let perm = fit_to_data(&out.graph, feature_std)?;
    out.graph = out.graph.relabel_visible(&perm)?;
    Ok(out)
}
