//! Boltzmann machines over an arbitrary sparse bipartite mask.
//!
//! One type covers the binary-visible family (dense RBM, sparse XBM) and the
//! Gaussian-visible family (GRBM, GXBM). A dense model is simply a complete
//! bipartite mask. Weights live per edge, in the graph's edge-id order, so
//! absent connections never enter any sum.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::topology::BipartiteGraph;

/// Standard deviation of the initial weights.
pub const INIT_WEIGHT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisibleKind {
    Binary,
    Gaussian,
}

impl std::fmt::Display for VisibleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VisibleKind::Binary => "binary",
            VisibleKind::Gaussian => "gaussian",
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannMachine {
    kind: VisibleKind,
    graph: BipartiteGraph,
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    /// Per-visible standard deviations; present iff `kind` is Gaussian.
    sigma: Option<Vec<f64>>,
}

/// A joint configuration `{v, h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    pub visible: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Parameters of `p(v | h)`: Bernoulli probabilities for binary units, or
/// Gaussian means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleDistribution {
    pub mean: Vec<f64>,
    pub variance: Option<Vec<f64>>,
}

impl BoltzmannMachine {
    /// Zero weights and biases; unit sigmas for the Gaussian kind.
    pub fn zeros(kind: VisibleKind, graph: BipartiteGraph) -> Self {
        let (n_v, n_h, n_e) = (graph.n_visible(), graph.n_hidden(), graph.n_edges());
        BoltzmannMachine {
            kind,
            graph,
            weights: vec![0.0; n_e],
            visible_bias: vec![0.0; n_v],
            hidden_bias: vec![0.0; n_h],
            sigma: (kind == VisibleKind::Gaussian).then(|| vec![1.0; n_v]),
        }
    }

    /// Weights drawn from `N(0, 0.01^2)`, biases zero.
    pub fn initialized<R: Rng + ?Sized>(kind: VisibleKind, graph: BipartiteGraph, rng: &mut R) -> Self {
        let mut m = Self::zeros(kind, graph);
        let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
        for w in &mut m.weights {
            *w = normal.sample(rng);
        }
        m
    }

    pub fn from_parts(
        kind: VisibleKind,
        graph: BipartiteGraph,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
        sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_len("weights", weights.len(), graph.n_edges())?;
        check_len("visible bias", visible_bias.len(), graph.n_visible())?;
        check_len("hidden bias", hidden_bias.len(), graph.n_hidden())?;
        match (kind, &sigma) {
            (VisibleKind::Binary, Some(_)) => {
                return Err(Error::InvalidParameter("binary visibles take no sigma".into()))
            }
            (VisibleKind::Gaussian, None) => {
                return Err(Error::InvalidParameter("gaussian visibles need sigma".into()))
            }
            (VisibleKind::Gaussian, Some(s)) => {
                check_len("sigma", s.len(), graph.n_visible())?;
                if s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidParameter("sigma entries must be positive".into()));
                }
            }
            (VisibleKind::Binary, None) => {}
        }
        Ok(BoltzmannMachine {
            kind,
            graph,
            weights,
            visible_bias,
            hidden_bias,
            sigma,
        })
    }

    /// Dense twin: a complete mask carrying this model's weights, with
    /// zeros on the absent edges.
    pub fn to_dense(&self) -> Self {
        let graph = BipartiteGraph::complete(self.n_visible(), self.n_hidden());
        let mut weights = vec![0.0; graph.n_edges()];
        for (id, (i, j)) in self.graph.edges().enumerate() {
            weights[i * self.n_hidden() + j] = self.weights[id];
        }
        BoltzmannMachine {
            kind: self.kind,
            graph,
            weights,
            visible_bias: self.visible_bias.clone(),
            hidden_bias: self.hidden_bias.clone(),
            sigma: self.sigma.clone(),
        }
    }

    /// Restricts the model to a sub-mask of its graph, keeping the weights of
    /// surviving edges.
    pub fn with_mask(&self, keep: impl FnMut(usize) -> bool) -> Self {
        let mut keep = keep;
        let mut kept = Vec::new();
        let graph = self.graph.retain_edges(|id| {
            let k = keep(id);
            if k {
                kept.push(id);
            }
            k
        });
        BoltzmannMachine {
            kind: self.kind,
            weights: kept.iter().map(|&id| self.weights[id]).collect(),
            graph,
            visible_bias: self.visible_bias.clone(),
            hidden_bias: self.hidden_bias.clone(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn kind(&self) -> VisibleKind {
        self.kind
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn n_visible(&self) -> usize {
        self.graph.n_visible()
    }

    pub fn n_hidden(&self) -> usize {
        self.graph.n_hidden()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    /// Weight of `(i, j)`, zero when the edge is absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.graph.edge_id(i, j).map_or(0.0, |id| self.weights[id])
    }

    fn sigma_of(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s[i])
    }

    /// Visible values as seen by the hidden layer (`v_i / sigma_i`).
    fn scaled_visible(&self, v: &[f64]) -> Vec<f64> {
        match &self.sigma {
            None => v.to_vec(),
            Some(s) => v.iter().zip(s).map(|(x, s)| x / s).collect(),
        }
    }

    /// `b_j + sum_{i in N(j)} (v_i / sigma_i) w_ij` for every hidden unit.
    pub fn hidden_input(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("visible state", v.len(), self.n_visible())?;
        let x = self.scaled_visible(v);
        Ok((0..self.n_hidden())
            .map(|j| {
                let g = &self.graph;
                g.hidden_neighbors(j)
                    .iter()
                    .zip(g.hidden_edge_ids(j))
                    .fold(self.hidden_bias[j], |acc, (&i, &id)| acc + x[i] * self.weights[id])
            })
            .collect())
    }

    /// `sum_{j in N(i)} h_j w_ij` for every visible unit.
    pub fn visible_interaction(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len("hidden state", h.len(), self.n_hidden())?;
        Ok((0..self.n_visible())
            .map(|i| {
                let range = self.graph.visible_edge_range(i);
                self.graph
                    .visible_neighbors(i)
                    .iter()
                    .zip(&self.weights[range])
                    .map(|(&j, &w)| h[j] * w)
                    .sum()
            })
            .collect())
    }

    /// `p(h_j = 1 | v)` for every hidden unit.
    pub fn hidden_conditional(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hidden_input(v)?.into_iter().map(sigmoid).collect())
    }

    /// Parameters of `p(v_i | h)`.
    ///
    /// Binary: `sigmoid(a_i + sum h_j w_ij)`. Gaussian: mean
    /// `a_i + sigma_i * sum h_j w_ij`, variance `sigma_i^2`, which is the
    /// conditional implied by the energy (and the familiar form at unit
    /// sigma).
    pub fn visible_conditional(&self, h: &[f64]) -> Result<VisibleDistribution> {
        let inter = self.visible_interaction(h)?;
        Ok(match &self.sigma {
            None => VisibleDistribution {
                mean: inter
                    .iter()
                    .zip(&self.visible_bias)
                    .map(|(s, a)| sigmoid(a + s))
                    .collect(),
                variance: None,
            },
            Some(sigma) => VisibleDistribution {
                mean: inter
                    .iter()
                    .zip(&self.visible_bias)
                    .zip(sigma)
                    .map(|((s, a), sd)| a + sd * s)
                    .collect(),
                variance: Some(sigma.iter().map(|s| s * s).collect()),
            },
        })
    }

    /// Bernoulli draw per hidden unit, in index order.
    pub fn sample_hidden<R: Rng + ?Sized>(&self, v: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        Ok(bernoulli(&self.hidden_conditional(v)?, rng))
    }

    /// Draw from `p(v | h)`, in index order.
    pub fn sample_visible<R: Rng + ?Sized>(&self, h: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let dist = self.visible_conditional(h)?;
        Ok(match &self.sigma {
            None => bernoulli(&dist.mean, rng),
            Some(sigma) => dist
                .mean
                .iter()
                .zip(sigma)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect(),
        })
    }

    pub fn energy(&self, state: &StateSample) -> Result<f64> {
        let (v, h) = (&state.visible, &state.hidden);
        check_len("visible state", v.len(), self.n_visible())?;
        check_len("hidden state", h.len(), self.n_hidden())?;
        let mut interaction = 0.0;
        for (id, (i, j)) in self.graph.edges().enumerate() {
            interaction += v[i] / self.sigma_of(i) * h[j] * self.weights[id];
        }
        let hidden_term: f64 = h.iter().zip(&self.hidden_bias).map(|(h, b)| h * b).sum();
        let visible_term = match &self.sigma {
            None => -v.iter().zip(&self.visible_bias).map(|(v, a)| v * a).sum::<f64>(),
            Some(sigma) => v
                .iter()
                .zip(&self.visible_bias)
                .zip(sigma)
                .map(|((v, a), s)| (v - a).powi(2) / (2.0 * s * s))
                .sum(),
        };
        Ok(-interaction + visible_term - hidden_term)
    }

    /// `F(v) = -ln sum_h exp(-E(v, h))`, so that `p(v) = exp(-F(v)) / Z`.
    pub fn free_energy(&self, v: &[f64]) -> Result<f64> {
        let input = self.hidden_input(v)?;
        let visible_term = match &self.sigma {
            None => -v.iter().zip(&self.visible_bias).map(|(v, a)| v * a).sum::<f64>(),
            Some(sigma) => v
                .iter()
                .zip(&self.visible_bias)
                .zip(sigma)
                .map(|((v, a), s)| (v - a).powi(2) / (2.0 * s * s))
                .sum(),
        };
        Ok(visible_term - input.into_iter().map(softplus).sum::<f64>())
    }

    pub fn save_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &ModelFile::from(self))?;
        Ok(())
    }

    pub fn load_json<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save_json(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn bernoulli<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Vec<f64> {
    p.iter()
        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        .collect()
}

pub const MODEL_FORMAT: &str = "xbm-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned on-disk container.
#[derive(Serialize, Deserialize)]
pub(crate) struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: BoltzmannMachine,
}

impl From<&BoltzmannMachine> for ModelFile {
    fn from(m: &BoltzmannMachine) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: m.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<BoltzmannMachine> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::Format {
                offset: 0,
                msg: format!("unsupported model container {} v{}", self.format, self.version),
            });
        }
        let m = self.model;
        BoltzmannMachine::from_parts(m.kind, m.graph, m.weights, m.visible_bias, m.hidden_bias, m.sigma)
    }
}
