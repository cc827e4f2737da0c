use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::degrees::{is_bigraphic, repair_bigraphic, DegreeSequence};
use super::{BipartiteGraph, TopologyParams};

/// Trials per node and pass when the Gaussian draw falls outside the layer.
pub const NEIGHBORHOOD_TRIALS: usize = 10;

/// Havel–Hakimi construction for bipartite degree pairs.
///
/// `visible[i]` is the target degree of visible node `i` and `hidden[j]` of
/// hidden node `j`. Visible nodes are processed from the highest degree
/// down; each is wired to the hidden nodes with the most remaining stubs
/// (ties to the lower index). The result realizes the pair exactly whenever
/// it satisfies Gale–Ryser; otherwise an error describes the violation.
pub fn havel_hakimi_bipartite(
    visible: &DegreeSequence,
    hidden: &DegreeSequence,
) -> Result<BipartiteGraph> {
    let (n_v, n_h) = (visible.len(), hidden.len());
    if visible.sum() != hidden.sum() {
        return Err(Error::Construction(format!(
            "degree sums differ: visible {} vs hidden {}",
            visible.sum(),
            hidden.sum()
        )));
    }
    if visible.max() > n_h || hidden.max() > n_v {
        return Err(Error::Construction(format!(
            "degree exceeds opposite layer: max visible {} (n_h = {n_h}), max hidden {} (n_v = {n_v})",
            visible.max(),
            hidden.max()
        )));
    }
    if !is_bigraphic(visible.as_slice(), hidden.as_slice()) {
        return Err(Error::Construction(
            "degree pair violates the Gale-Ryser condition".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n_v).collect();
    order.sort_by(|&a, &b| visible.0[b].cmp(&visible.0[a]).then(a.cmp(&b)));
    // (remaining stubs, hidden index), kept sorted by stubs desc then index asc
    let mut stubs: Vec<(usize, usize)> = hidden.0.iter().copied().zip(0..n_h).collect();
    let by_stubs = |x: &(usize, usize), y: &(usize, usize)| y.0.cmp(&x.0).then(x.1.cmp(&y.1));
    stubs.sort_by(by_stubs);

    let mut edges = Vec::with_capacity(visible.sum());
    for i in order {
        let d = visible.0[i];
        if d == 0 {
            continue;
        }
        if d > n_h || stubs[d - 1].0 == 0 {
            return Err(Error::Construction(format!(
                "visible node {i} needs {d} partners but fewer hidden nodes have free stubs"
            )));
        }
        for s in stubs.iter_mut().take(d) {
            edges.push((i, s.1));
            s.0 -= 1;
        }
        // nearly sorted after decrementing a prefix; merge sort handles it in ~O(n)
        stubs.sort_by(by_stubs);
    }
    BipartiteGraph::from_edges(n_v, n_h, edges)
}

/// Repairs a pair that is not bigraphic (see [`repair_bigraphic`]) and builds
/// the graph. Returns `None` when repair would drop a degree below `k_min`.
pub(crate) fn realize_degrees(
    mut visible: DegreeSequence,
    mut hidden: DegreeSequence,
    k_min: usize,
) -> Result<Option<BipartiteGraph>> {
    if repair_bigraphic(&mut visible, &mut hidden, k_min).is_none() {
        return Ok(None);
    }
    havel_hakimi_bipartite(&visible, &hidden).map(Some)
}

/// Local-neighbourhood augmentation.
///
/// For each of `phi` passes, every visible node `i` (1-based) draws a hidden
/// index `ceil(N(i * n_h / n_v, sigma_neigh))`; the first draw that lands in
/// `1..=n_h` is connected (a no-op if the edge already exists). Draws outside
/// the layer are retried up to [`NEIGHBORHOOD_TRIALS`] times. Hidden nodes
/// then do the same towards the visible layer.
pub fn add_neighborhood_edges<R: Rng + ?Sized>(
    g: &BipartiteGraph,
    params: &TopologyParams,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    params.validate()?;
    if params.phi == 0 {
        return Ok(g.clone());
    }
    let (n_v, n_h) = (g.n_visible(), g.n_hidden());
    let mut present: HashSet<(usize, usize)> = g.edges().collect();
    let mut added: Vec<(usize, usize)> = Vec::new();
    let mut connect = |i: usize, j: usize, present: &mut HashSet<(usize, usize)>| {
        if present.insert((i, j)) {
            added.push((i, j));
        }
    };
    for _ in 0..params.phi {
        for i in 1..=n_v {
            let center = (i * n_h) as f64 / n_v as f64;
            if let Some(j) = draw_index(center, params.sigma_neigh, n_h, rng)? {
                connect(i - 1, j - 1, &mut present);
            }
        }
        for j in 1..=n_h {
            let center = (j * n_v) as f64 / n_h as f64;
            if let Some(i) = draw_index(center, params.sigma_neigh, n_v, rng)? {
                connect(i - 1, j - 1, &mut present);
            }
        }
    }
    BipartiteGraph::from_edges(n_v, n_h, g.edges().chain(added))
}

fn draw_index<R: Rng + ?Sized>(
    center: f64,
    sigma: f64,
    upper: usize,
    rng: &mut R,
) -> Result<Option<usize>> {
    let normal = Normal::new(center, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    for _ in 0..NEIGHBORHOOD_TRIALS {
        let x = normal.sample(rng).ceil();
        if x >= 1.0 && x <= upper as f64 {
            return Ok(Some(x as usize));
        }
    }
    Ok(None)
}
