use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TopologyParams;

/// Connection counts, one per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence(pub Vec<usize>);

impl DegreeSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    fn sort_descending(&mut self) {
        self.0.sort_unstable_by(|a, b| b.cmp(a));
    }
}

/// Normalized mass function of the truncated power law `P(k) ∝ k^-gamma`
/// on `k_min..=k_max`.
pub fn power_law_pmf(gamma: f64, k_min: usize, k_max: usize) -> Result<Vec<f64>> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidParameter(format!(
            "degree support [{k_min}, {k_max}] is empty or contains 0"
        )));
    }
    let w: Vec<f64> = (k_min..=k_max).map(|k| (k as f64).powf(-gamma)).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Draws `n` i.i.d. degrees from the power law on `k_min..=k_max`, sorted
/// descending.
pub fn sample_power_law_degrees_bounded<R: Rng + ?Sized>(
    n: usize,
    gamma: f64,
    k_min: usize,
    k_max: usize,
    rng: &mut R,
) -> Result<DegreeSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter("degree sequence length must be positive".into()));
    }
    let pmf = power_law_pmf(gamma, k_min, k_max)?;
    let dist = WeightedIndex::new(&pmf).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut seq = DegreeSequence((0..n).map(|_| k_min + dist.sample(rng)).collect());
    seq.sort_descending();
    Ok(seq)
}

/// Power-law degree sequence for `n` nodes with support `k_min..=n`.
pub fn sample_power_law_degrees<R: Rng + ?Sized>(
    n: usize,
    params: &TopologyParams,
    rng: &mut R,
) -> Result<DegreeSequence> {
    sample_power_law_degrees_bounded(n, params.gamma, params.k_min, n, rng)
}

/// Splits a descending sequence between the two layers by alternation
/// (highest to visible), appends the remainder to the larger layer and tops
/// up the layer with the smaller degree sum until both sums agree.
///
/// Extra degrees go to the lighter layer proportionally to its current
/// degrees, with largest-remainder rounding (ties to the lower index).
pub fn split_and_equalize(
    seq: &DegreeSequence,
    n_visible: usize,
    n_hidden: usize,
) -> Result<(DegreeSequence, DegreeSequence)> {
    split_impl(seq, n_visible, n_hidden, false)
}

/// As [`split_and_equalize`], but every visible degree is first clamped to
/// `n_hidden` and every hidden degree to `n_visible`; the top-up respects
/// the same caps.
pub fn split_and_equalize_capped(
    seq: &DegreeSequence,
    n_visible: usize,
    n_hidden: usize,
) -> Result<(DegreeSequence, DegreeSequence)> {
    split_impl(seq, n_visible, n_hidden, true)
}

fn split_impl(
    seq: &DegreeSequence,
    n_visible: usize,
    n_hidden: usize,
    capped: bool,
) -> Result<(DegreeSequence, DegreeSequence)> {
    if n_visible == 0 || n_hidden == 0 {
        return Err(Error::UnsupportedSize("both layers need at least one node".into()));
    }
    if seq.len() != n_visible + n_hidden {
        return Err(Error::ShapeMismatch {
            what: "degree sequence",
            got: seq.len(),
            expected: n_visible + n_hidden,
        });
    }
    if seq.0.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("degree sequence must be sorted descending".into()));
    }
    let m = n_visible.min(n_hidden);
    let mut sv = Vec::with_capacity(n_visible);
    let mut sh = Vec::with_capacity(n_hidden);
    for t in 0..m {
        sv.push(seq.0[2 * t]);
        sh.push(seq.0[2 * t + 1]);
    }
    let rest = &seq.0[2 * m..];
    if n_visible > n_hidden {
        sv.extend_from_slice(rest);
    } else {
        sh.extend_from_slice(rest);
    }

    let (cap_v, cap_h) = if capped {
        (n_hidden, n_visible)
    } else {
        (usize::MAX, usize::MAX)
    };
    for d in &mut sv {
        *d = (*d).min(cap_v);
    }
    for d in &mut sh {
        *d = (*d).min(cap_h);
    }

    let (sum_v, sum_h): (usize, usize) = (sv.iter().sum(), sh.iter().sum());
    if sum_v < sum_h {
        distribute_proportionally(&mut sv, sum_h - sum_v, cap_v)?;
    } else if sum_h < sum_v {
        distribute_proportionally(&mut sh, sum_v - sum_h, cap_h)?;
    }
    let mut sv = DegreeSequence(sv);
    let mut sh = DegreeSequence(sh);
    sv.sort_descending();
    sh.sort_descending();
    Ok((sv, sh))
}

/// Adds `extra` units across `degrees` proportionally to their current values,
/// never pushing an entry above `cap`. Largest-remainder rounding; leftover
/// from saturated entries is redistributed over the rest.
fn distribute_proportionally(degrees: &mut [usize], mut extra: usize, cap: usize) -> Result<()> {
    while extra > 0 {
        let open: Vec<usize> = (0..degrees.len()).filter(|&k| degrees[k] < cap).collect();
        if open.is_empty() {
            return Err(Error::Construction(
                "cannot equalize degree sums: every node is saturated".into(),
            ));
        }
        let base: usize = open.iter().map(|&k| degrees[k]).sum();
        let weight = |k: usize| -> f64 {
            if base == 0 {
                1.0
            } else {
                degrees[k] as f64
            }
        };
        let total_w: f64 = open.iter().map(|&k| weight(k)).sum();
        let mut shares: Vec<(usize, usize, f64)> = open
            .iter()
            .map(|&k| {
                let exact = extra as f64 * weight(k) / total_w;
                let whole = exact.floor() as usize;
                (k, whole, exact - whole as f64)
            })
            .collect();
        let assigned: usize = shares.iter().map(|s| s.1).sum();
        let mut leftover = extra.saturating_sub(assigned);
        // largest remainder first, lower index on ties
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| {
            shares[b]
                .2
                .partial_cmp(&shares[a].2)
                .unwrap()
                .then(shares[a].0.cmp(&shares[b].0))
        });
        for &o in &order {
            if leftover == 0 {
                break;
            }
            shares[o].1 += 1;
            leftover -= 1;
        }
        let mut placed = 0;
        for (k, add, _) in shares {
            let room = cap - degrees[k];
            let add = add.min(room);
            degrees[k] += add;
            placed += add;
        }
        extra -= placed;
    }
    Ok(())
}

/// Gale–Ryser test: is `(a, b)` the degree pair of some simple bipartite
/// graph?
pub fn is_bigraphic(a: &[usize], b: &[usize]) -> bool {
    if a.iter().sum::<usize>() != b.iter().sum::<usize>() {
        return false;
    }
    if a.iter().any(|&d| d > b.len()) || b.iter().any(|&d| d > a.len()) {
        return false;
    }
    let mut a = a.to_vec();
    a.sort_unstable_by(|x, y| y.cmp(x));
    // at_least[k] = #{j : b_j >= k}; sum_j min(b_j, k) grows by at_least[k]
    let mut at_least = vec![0usize; a.len() + 2];
    for &bj in b {
        at_least[bj.min(a.len() + 1)] += 1;
    }
    for k in (0..=a.len()).rev() {
        at_least[k] += at_least[k + 1];
    }
    let (mut lhs, mut rhs) = (0usize, 0usize);
    for (k, &d) in a.iter().enumerate() {
        lhs += d;
        rhs += at_least[k + 1];
        if lhs > rhs {
            return false;
        }
    }
    true
}

/// Makes a capped, sum-balanced pair bigraphic by repeatedly lowering the
/// largest degree on each side by one (keeping the sums equal), never going
/// below `k_min`. Returns `None` when that floor is hit first.
pub(crate) fn repair_bigraphic(
    sv: &mut DegreeSequence,
    sh: &mut DegreeSequence,
    k_min: usize,
) -> Option<usize> {
    let mut steps = 0;
    while !is_bigraphic(&sv.0, &sh.0) {
        // both sequences are kept sorted descending, so index 0 is the max
        if sv.0[0] <= k_min || sh.0[0] <= k_min {
            return None;
        }
        sv.0[0] -= 1;
        sh.0[0] -= 1;
        sv.sort_descending();
        sh.sort_descending();
        steps += 1;
    }
    Some(steps)
}
