//! Generative-quality evaluation: reconstruction metrics, partition
//! functions (exact for tiny models, AIS otherwise), log-probabilities and
//! clamped-Gibbs imputation.

mod metrics;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::models::{sigmoid, softplus, BoltzmannMachine, VisibleKind};
use crate::rng;
use crate::topology::{bipartite_clustering, path_stats};

pub use metrics::{haversine_km, pcc, reconstruct, reconstruct_rows, reconstruction_metrics, rmse};

/// Largest number of enumerated binary units for [`exact_log_z`].
pub const EXACT_ENUMERATION_LIMIT: usize = 24;

/// Clipping applied to data marginals before taking logits for the AIS
/// base-rate model.
pub const BASE_RATE_CLIP: f64 = 0.001;

/// `ln(sum exp(x))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn bits(code: u64, n: usize) -> Vec<f64> {
    (0..n).map(|k| ((code >> k) & 1) as f64).collect()
}

/// Exact `ln Z`.
///
/// Binary visibles: every joint state `(v, h)` is enumerated
/// (`n_v + n_h <= 24`). Gaussian visibles: hidden states are enumerated
/// (`n_h <= 24`) and the visible integral is taken in closed form.
pub fn exact_log_z(m: &BoltzmannMachine) -> Result<f64> {
    let (n_v, n_h) = (m.n_visible(), m.n_hidden());
    match m.kind() {
        VisibleKind::Binary => {
            if n_v + n_h > EXACT_ENUMERATION_LIMIT {
                return Err(Error::TooLarge(format!(
                    "{} binary units exceed the enumeration limit of {EXACT_ENUMERATION_LIMIT}",
                    n_v + n_h
                )));
            }
            let hidden_states: Vec<Vec<f64>> = (0..1u64 << n_h).map(|c| bits(c, n_h)).collect();
            let per_visible: Vec<f64> = (0..1u64 << n_v)
                .into_par_iter()
                .map(|c| {
                    let v = bits(c, n_v);
                    // -E(v, h) = a.v + sum_j h_j (b_j + sum_i v_i w_ij)
                    let x = m.hidden_input(&v).expect("shape checked");
                    let av: f64 = v.iter().zip(m.visible_bias()).map(|(v, a)| v * a).sum();
                    let terms: Vec<f64> = hidden_states
                        .iter()
                        .map(|h| av + h.iter().zip(&x).map(|(h, x)| h * x).sum::<f64>())
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect();
            Ok(log_sum_exp(&per_visible))
        }
        VisibleKind::Gaussian => {
            if n_h > EXACT_ENUMERATION_LIMIT {
                return Err(Error::TooLarge(format!(
                    "{n_h} hidden units exceed the enumeration limit of {EXACT_ENUMERATION_LIMIT}"
                )));
            }
            let sigma = m.sigma().expect("gaussian model has sigma");
            let log_norm: f64 = sigma
                .iter()
                .map(|s| 0.5 * (2.0 * std::f64::consts::PI).ln() + s.ln())
                .sum();
            let per_hidden: Vec<f64> = (0..1u64 << n_h)
                .into_par_iter()
                .map(|c| {
                    let h = bits(c, n_h);
                    let s = m.visible_interaction(&h).expect("shape checked");
                    let bh: f64 = h.iter().zip(m.hidden_bias()).map(|(h, b)| h * b).sum();
                    // integral of exp(-(v-a)^2/(2 sd^2) + v s/sd) dv
                    //   = sqrt(2 pi) sd exp(a s / sd + s^2 / 2)
                    let quad: f64 = s
                        .iter()
                        .zip(m.visible_bias())
                        .zip(sigma)
                        .map(|((s, a), sd)| a * s / sd + 0.5 * s * s)
                        .sum();
                    bh + quad
                })
                .collect();
            Ok(log_norm + log_sum_exp(&per_hidden))
        }
    }
}

/// `ln sum_v exp(-F(v))` over all binary visible states: the free-energy
/// route to the same partition function as [`exact_log_z`].
pub fn log_z_by_free_energy(m: &BoltzmannMachine) -> Result<f64> {
    if m.kind() != VisibleKind::Binary {
        return Err(Error::KindMismatch("visible enumeration needs binary visibles".into()));
    }
    if m.n_visible() > EXACT_ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("{} visible units", m.n_visible())));
    }
    let n_v = m.n_visible();
    let terms: Vec<f64> = (0..1u64 << n_v)
        .map(|c| m.free_energy(&bits(c, n_v)).map(|f| -f))
        .collect::<Result<_>>()?;
    Ok(log_sum_exp(&terms))
}

/// Mean over rows of `-F(v) - ln Z`. For Gaussian visibles this is a log
/// density.
pub fn avg_log_prob(m: &BoltzmannMachine, rows: &[f64], log_z: f64) -> Result<f64> {
    let n_v = m.n_visible();
    if rows.is_empty() || rows.len() % n_v != 0 {
        return Err(Error::ShapeMismatch {
            what: "sample matrix",
            got: rows.len(),
            expected: n_v,
        });
    }
    let mut total = 0.0;
    for v in rows.chunks_exact(n_v) {
        total += -m.free_energy(v)?;
    }
    Ok(total / (rows.len() / n_v) as f64 - log_z)
}

/// Visible biases of the base-rate model: `logit(clip(mean_i))` of the data
/// marginals.
pub fn base_rate_biases(data: &Dataset) -> Vec<f64> {
    data.feature_mean()
        .iter()
        .map(|&p| {
            let p = p.clamp(BASE_RATE_CLIP, 1.0 - BASE_RATE_CLIP);
            (p / (1.0 - p)).ln()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AisSettings {
    /// Number of inverse temperatures, uniformly spaced on `[0, 1]`.
    pub n_temps: usize,
    pub n_chains: usize,
}

impl Default for AisSettings {
    fn default() -> Self {
        AisSettings {
            n_temps: 1000,
            n_chains: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AisEstimate {
    pub log_z: f64,
    /// Standard error of `log_z` (delta method over chain weights).
    pub stderr: f64,
    /// `ln Z` of the base-rate model.
    pub base_log_z: f64,
    pub chains_used: usize,
    /// Chains discarded for a non-finite importance weight.
    pub chains_dropped: usize,
}

/// Annealed importance sampling estimate of `ln Z` for a binary model.
///
/// The path runs from a base-rate model (visible biases `base_biases`, zero
/// weights, hidden units uniform) to `m`, with intermediate unnormalized
/// marginals `a0.v + beta (a - a0).v + sum_j softplus(beta x_j(v))`.
/// Each chain draws from its own stream of `seed`.
pub fn ais_log_z(m: &BoltzmannMachine, base_biases: &[f64], settings: AisSettings, seed: u64) -> Result<AisEstimate> {
    if m.kind() != VisibleKind::Binary {
        return Err(Error::KindMismatch("AIS is implemented for binary visibles only".into()));
    }
    check_len("base biases", base_biases.len(), m.n_visible())?;
    if settings.n_temps < 2 || settings.n_chains < 1 {
        return Err(Error::InvalidParameter("AIS needs at least 2 temperatures and 1 chain".into()));
    }
    let n_h = m.n_hidden();
    let base_log_z: f64 = base_biases.iter().map(|&a| softplus(a)).sum::<f64>() + n_h as f64 * std::f64::consts::LN_2;
    let delta_a: Vec<f64> = m.visible_bias().iter().zip(base_biases).map(|(a, a0)| a - a0).collect();
    let betas: Vec<f64> = (0..settings.n_temps)
        .map(|k| k as f64 / (settings.n_temps - 1) as f64)
        .collect();

    let log_weights: Vec<f64> = (0..settings.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = rng::stream(seed, chain as u64);
            ais_chain(m, base_biases, &delta_a, &betas, &mut rng)
        })
        .collect::<Result<_>>()?;

    let finite: Vec<f64> = log_weights.iter().copied().filter(|w| w.is_finite()).collect();
    let dropped = log_weights.len() - finite.len();
    if finite.is_empty() {
        return Err(Error::Divergence("every AIS chain produced a non-finite weight".into()));
    }
    if dropped > 0 {
        log::warn!("AIS dropped {dropped} chains with non-finite weights");
    }
    let n = finite.len() as f64;
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r: Vec<f64> = finite.iter().map(|w| (w - max).exp()).collect();
    let mean = r.iter().sum::<f64>() / n;
    let stderr = if finite.len() > 1 {
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt() / (mean * n.sqrt())
    } else {
        f64::INFINITY
    };
    Ok(AisEstimate {
        log_z: base_log_z + max + mean.ln(),
        stderr,
        base_log_z,
        chains_used: finite.len(),
        chains_dropped: dropped,
    })
}

fn ais_chain<R: Rng + ?Sized>(
    m: &BoltzmannMachine,
    base_biases: &[f64],
    delta_a: &[f64],
    betas: &[f64],
    rng: &mut R,
) -> Result<f64> {
    let log_p = |v: &[f64], x: &[f64], beta: f64| -> f64 {
        let lin: f64 = v
            .iter()
            .zip(base_biases)
            .zip(delta_a)
            .map(|((v, a0), da)| v * (a0 + beta * da))
            .sum();
        lin + x.iter().map(|&x| softplus(beta * x)).sum::<f64>()
    };
    let mut v: Vec<f64> = base_biases
        .iter()
        .map(|&a| if rng.random::<f64>() < sigmoid(a) { 1.0 } else { 0.0 })
        .collect();
    let mut log_w = 0.0;
    let last = betas.len() - 1;
    for k in 1..=last {
        let x = m.hidden_input(&v)?;
        log_w += log_p(&v, &x, betas[k]) - log_p(&v, &x, betas[k - 1]);
        if k == last {
            break;
        }
        // Gibbs transition leaving the beta_k distribution invariant
        let beta = betas[k];
        let h: Vec<f64> = x
            .iter()
            .map(|&x| if rng.random::<f64>() < sigmoid(beta * x) { 1.0 } else { 0.0 })
            .collect();
        let inter = m.visible_interaction(&h)?;
        for (i, vi) in v.iter_mut().enumerate() {
            let field = (1.0 - beta) * base_biases[i] + beta * (m.visible_bias()[i] + inter[i]);
            *vi = if rng.random::<f64>() < sigmoid(field) { 1.0 } else { 0.0 };
        }
    }
    Ok(log_w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeSettings {
    pub gibbs_steps: usize,
    /// Number of final draws averaged into the estimate.
    pub average_last: usize,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        ImputeSettings {
            gibbs_steps: 200,
            average_last: 50,
        }
    }
}

/// Clamped Gibbs imputation. Observed coordinates stay fixed while the
/// hidden layer and the `missing` coordinates are resampled; the result is
/// the mean of the last `average_last` draws of each missing coordinate,
/// in coordinate order. Missing entries of `v_observed` are ignored.
pub fn impute_visible<R: Rng + ?Sized>(
    m: &BoltzmannMachine,
    v_observed: &[f64],
    missing: &[bool],
    settings: ImputeSettings,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len("observed vector", v_observed.len(), m.n_visible())?;
    check_len("missing mask", missing.len(), m.n_visible())?;
    let n_missing = missing.iter().filter(|&&b| b).count();
    if n_missing == 0 {
        return Err(Error::InvalidParameter("nothing to impute".into()));
    }
    if n_missing == missing.len() {
        return Err(Error::InvalidParameter("cannot impute with every coordinate missing".into()));
    }
    if settings.average_last == 0 || settings.average_last > settings.gibbs_steps {
        return Err(Error::InvalidParameter(format!(
            "average_last must lie in 1..={}",
            settings.gibbs_steps
        )));
    }
    let mut v = v_observed.to_vec();
    for (x, (&miss, a)) in v.iter_mut().zip(missing.iter().zip(m.visible_bias())) {
        if miss {
            *x = match m.kind() {
                VisibleKind::Binary => 0.0,
                VisibleKind::Gaussian => *a,
            };
        }
    }
    let mut sums = vec![0.0; m.n_visible()];
    let burn_in = settings.gibbs_steps - settings.average_last;
    for step in 0..settings.gibbs_steps {
        let h = m.sample_hidden(&v, rng)?;
        let draw = m.sample_visible(&h, rng)?;
        for i in 0..v.len() {
            if missing[i] {
                v[i] = draw[i];
                if step >= burn_in {
                    sums[i] += draw[i];
                }
            }
        }
    }
    Ok((0..v.len())
        .filter(|&i| missing[i])
        .map(|i| sums[i] / settings.average_last as f64)
        .collect())
}

/// How the partition function in a report was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogZMethod {
    Exact,
    Ais,
}

/// One model evaluated on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub kind: VisibleKind,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub dataset_hash: String,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub rmse: f64,
    pub pcc: Option<f64>,
    pub log_z_estimate: Option<f64>,
    pub log_z_stderr: Option<f64>,
    pub log_z_method: Option<LogZMethod>,
    pub avg_train_logprob: Option<f64>,
    pub avg_test_logprob: Option<f64>,
    pub edge_count: usize,
    pub avg_shortest_path: f64,
    pub clustering_coefficient: f64,
    pub pruning_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Use exact enumeration when the model is small enough.
    pub exact_when_possible: bool,
    /// Run AIS (binary models) when exact enumeration is not used.
    pub ais: Option<AisSettings>,
    pub seed: u64,
    pub pruning_iterations: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            exact_when_possible: true,
            ais: None,
            seed: 0,
            pruning_iterations: 0,
        }
    }
}

fn exact_feasible(m: &BoltzmannMachine) -> bool {
    match m.kind() {
        VisibleKind::Binary => m.n_visible() + m.n_hidden() <= EXACT_ENUMERATION_LIMIT,
        VisibleKind::Gaussian => m.n_hidden() <= EXACT_ENUMERATION_LIMIT,
    }
}

/// Builds the full report. Reconstruction metrics are computed on `test`
/// (or `train` when no test rows exist); log-probabilities need a partition
/// function, exact or AIS, and are omitted otherwise.
pub fn evaluate(
    m: &BoltzmannMachine,
    name: impl Into<String>,
    train: &Dataset,
    test: Option<&Dataset>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    crate::training::check_kind(m, train)?;
    let test = test.filter(|t| t.n_samples() > 0);
    if let Some(t) = test {
        crate::training::check_kind(m, t)?;
    }
    let recon_set = test.unwrap_or(train);
    let (rmse, pcc) = reconstruction_metrics(m, recon_set.samples())?;

    let log_z = if opts.exact_when_possible && exact_feasible(m) {
        Some((exact_log_z(m)?, 0.0, LogZMethod::Exact))
    } else if let Some(ais) = opts.ais {
        if m.kind() != VisibleKind::Binary {
            return Err(Error::KindMismatch("AIS requested for a gaussian-visible model".into()));
        }
        let est = ais_log_z(m, &base_rate_biases(train), ais, opts.seed)?;
        Some((est.log_z, est.stderr, LogZMethod::Ais))
    } else {
        None
    };
    let logprob = |d: &Dataset| -> Result<Option<f64>> {
        match log_z {
            Some((lz, _, _)) if d.n_samples() > 0 => Ok(Some(avg_log_prob(m, d.samples(), lz)?)),
            _ => Ok(None),
        }
    };
    let path = path_stats(m.graph());
    Ok(EvalReport {
        model: name.into(),
        kind: m.kind(),
        seed: opts.seed,
        config_hash: None,
        dataset_hash: train.content_hash().to_string(),
        n_visible: m.n_visible(),
        n_hidden: m.n_hidden(),
        rmse,
        pcc,
        log_z_estimate: log_z.map(|l| l.0),
        log_z_stderr: log_z.map(|l| l.1),
        log_z_method: log_z.map(|l| l.2),
        avg_train_logprob: logprob(train)?,
        avg_test_logprob: match test {
            Some(t) => logprob(t)?,
            None => None,
        },
        edge_count: m.graph().n_edges(),
        avg_shortest_path: path.average,
        clustering_coefficient: bipartite_clustering(m.graph()).coefficient,
        pruning_iterations: opts.pruning_iterations,
    })
}
