//! Graph diagnostics: shortest paths, bipartite clustering, degree statistics.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BipartiteGraph;
use crate::rng::seeded;

/// Above this many nodes, path statistics use sampled BFS sources.
pub const EXACT_PATH_NODE_LIMIT: usize = 2000;
/// Number of BFS sources when sampling.
pub const SAMPLED_SOURCES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Mean BFS distance over reachable pairs of distinct nodes.
    pub average: f64,
    /// Longest finite distance seen from the BFS sources.
    pub diameter: usize,
    /// Some pair of nodes is unreachable.
    pub disconnected: bool,
    /// Sources were sampled rather than exhaustive.
    pub sampled: bool,
}

/// Node ids: visible `0..n_v`, hidden `n_v..n_v + n_h`.
fn bfs(g: &BipartiteGraph, source: usize, dist: &mut [u32], queue: &mut Vec<usize>) -> (u64, u64, u32) {
    let n_v = g.n_visible();
    dist.fill(u32::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push(source);
    let (mut sum, mut count, mut far) = (0u64, 0u64, 0u32);
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        let du = dist[u];
        if u != source {
            sum += du as u64;
            count += 1;
            far = far.max(du);
        }
        let visit = |w: usize, dist: &mut [u32], queue: &mut Vec<usize>| {
            if dist[w] == u32::MAX {
                dist[w] = du + 1;
                queue.push(w);
            }
        };
        if u < n_v {
            for &j in g.visible_neighbors(u) {
                visit(n_v + j, dist, queue);
            }
        } else {
            for &i in g.hidden_neighbors(u - n_v) {
                visit(i, dist, queue);
            }
        }
    }
    (sum, count, far)
}

/// Average shortest path. Exact all-pairs BFS up to
/// [`EXACT_PATH_NODE_LIMIT`] nodes, otherwise BFS from
/// [`SAMPLED_SOURCES`] sources drawn with a fixed seed.
pub fn path_stats(g: &BipartiteGraph) -> PathStats {
    let n = g.n_visible() + g.n_hidden();
    let sampled = n > EXACT_PATH_NODE_LIMIT;
    let sources: Vec<usize> = if sampled {
        let mut rng = seeded(0x5041_5448 ^ n as u64);
        let mut s = index::sample(&mut rng, n, SAMPLED_SOURCES).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };
    let n_sources = sources.len() as u64;
    let (sum, count, far) = sources
        .par_iter()
        .map_init(
            || (vec![u32::MAX; n], Vec::with_capacity(n)),
            |(dist, queue), &s| bfs(g, s, dist, queue),
        )
        .reduce(
            || (0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)),
        );
    let expected = n_sources * (n as u64 - 1);
    PathStats {
        average: if count == 0 { 0.0 } else { sum as f64 / count as f64 },
        diameter: far as usize,
        disconnected: count < expected,
        sampled,
    }
}

/// Mean shortest path length (see [`path_stats`]).
pub fn average_shortest_path(g: &BipartiteGraph) -> f64 {
    path_stats(g).average
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringStats {
    pub coefficient: f64,
    /// Nodes with at least one same-side node at distance two.
    pub nodes_counted: usize,
    /// No distance-two pairs exist; `coefficient` is then 0.
    pub no_pairs: bool,
}

/// Latapy bipartite clustering coefficient.
///
/// For same-side nodes `u`, `w` sharing a neighbour, the pair coefficient is
/// `|N(u) ∩ N(w)| / |N(u) ∪ N(w)|`. A node's coefficient averages this over
/// its distance-two nodes; the graph value averages over nodes that have any.
pub fn bipartite_clustering(g: &BipartiteGraph) -> ClusteringStats {
    let side = |visible: bool| -> (f64, usize) {
        let n = if visible { g.n_visible() } else { g.n_hidden() };
        (0..n)
            .into_par_iter()
            .map_init(
                || (vec![0u32; n], Vec::new()),
                |(shared, touched), u| {
                    let (first, deg_u) = if visible {
                        (g.visible_neighbors(u), g.visible_degree(u))
                    } else {
                        (g.hidden_neighbors(u), g.hidden_degree(u))
                    };
                    for &x in first {
                        let second = if visible { g.hidden_neighbors(x) } else { g.visible_neighbors(x) };
                        for &w in second {
                            if w != u {
                                if shared[w] == 0 {
                                    touched.push(w);
                                }
                                shared[w] += 1;
                            }
                        }
                    }
                    if touched.is_empty() {
                        return (0.0, 0usize);
                    }
                    let mut acc = 0.0;
                    for &w in touched.iter() {
                        let deg_w = if visible { g.visible_degree(w) } else { g.hidden_degree(w) };
                        let c = shared[w] as f64;
                        acc += c / ((deg_u + deg_w) as f64 - c);
                        shared[w] = 0;
                    }
                    let k = touched.len();
                    touched.clear();
                    (acc / k as f64, 1usize)
                },
            )
            .collect::<Vec<_>>()
            .into_iter()
            // sequential sum keeps the float result independent of scheduling
            .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    let (sv, cv) = side(true);
    let (sh, ch) = side(false);
    let counted = cv + ch;
    ClusteringStats {
        coefficient: if counted == 0 { 0.0 } else { (sv + sh) / counted as f64 },
        nodes_counted: counted,
        no_pairs: counted == 0,
    }
}

/// Degree → number of nodes with that degree, over both layers, ascending.
pub fn degree_histogram(g: &BipartiteGraph) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for d in g.visible_degrees().into_iter().chain(g.hidden_degrees()) {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

/// Least-squares slope of log(frequency) against log(degree) over histogram
/// bins with degree in `lo..=hi`. `None` with fewer than two bins.
pub fn log_log_slope(hist: &[(usize, usize)], lo: usize, hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hist
        .iter()
        .filter(|(d, c)| *d >= lo && *d <= hi && *d > 0 && *c > 0)
        .map(|&(d, c)| ((d as f64).ln(), (c as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
