//! Contrastive-divergence training and the sparse baselines.

mod baselines;
mod manifest;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, Dataset};
use crate::error::{check_len, Error, Result};
use crate::evaluation::reconstruction_metrics;
use crate::models::{BoltzmannMachine, VisibleKind};
use crate::rng;

pub use baselines::{make_fixprob_mask, train_prune_train, PruneEvent, PruneOutcome, PruneStep, PRUNE_FRACTION};
pub use manifest::{Checkpoint, ModelFamily, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// `lr / (1 + t / T)` with `T` half the total number of updates.
    InverseDecay,
}

/// How Gaussian visible units are reconstructed inside the CD chain.
/// Binary visibles are always sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianReconstruction {
    /// Conditional mean: bias plus top-down input, no added noise.
    NoiseFree,
    /// A draw from `N(mean, sigma^2)`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    /// Applied to weights only.
    pub weight_decay: f64,
    pub cd_steps: usize,
    /// When set, CD steps rise stepwise from `cd_steps` to this value over
    /// equal epoch intervals.
    pub cd_steps_max: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub gaussian_reconstruction: GaussianReconstruction,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            lr_schedule: LrSchedule::Constant,
            momentum: 0.5,
            weight_decay: 0.0002,
            cd_steps: 1,
            cd_steps_max: None,
            epochs: 100,
            batch_size: 10,
            gaussian_reconstruction: GaussianReconstruction::NoiseFree,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings used for the binary-visible experiments: fixed rate 0.05,
    /// CD-1, 259 epochs, mini-batches of 100.
    pub fn binary_defaults() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 259,
            batch_size: 100,
            ..Default::default()
        }
    }

    /// Rising CD schedule (1 to 25) with a decaying learning rate.
    pub fn binary_annealed() -> Self {
        TrainConfig {
            lr_schedule: LrSchedule::InverseDecay,
            cd_steps_max: Some(25),
            ..Self::binary_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.cd_steps == 0 {
            return Err(Error::InvalidParameter("cd_steps must be at least 1".into()));
        }
        if let Some(max) = self.cd_steps_max {
            if max < self.cd_steps {
                return Err(Error::InvalidParameter("cd_steps_max below cd_steps".into()));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// CD steps used during `epoch` (0-based).
    pub fn cd_steps_at(&self, epoch: usize) -> usize {
        match self.cd_steps_max {
            None => self.cd_steps,
            Some(max) => {
                let levels = max - self.cd_steps + 1;
                let level = epoch * levels / self.epochs.max(1);
                (self.cd_steps + level).min(max)
            }
        }
    }

    /// Learning rate for update number `t` (0-based) out of `total`.
    pub fn learning_rate_at(&self, t: usize, total: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::InverseDecay => {
                let half = (total as f64 / 2.0).max(1.0);
                self.learning_rate / (1.0 + t as f64 / half)
            }
        }
    }
}

/// Per-parameter quantities aligned with a model: one entry per edge, per
/// visible and per hidden unit. Used for gradients and for velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub d_weights: Vec<f64>,
    pub d_visible: Vec<f64>,
    pub d_hidden: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(m: &BoltzmannMachine) -> Self {
        GradientSet {
            d_weights: vec![0.0; m.graph().n_edges()],
            d_visible: vec![0.0; m.n_visible()],
            d_hidden: vec![0.0; m.n_hidden()],
        }
    }

    fn check_shape(&self, m: &BoltzmannMachine) -> Result<()> {
        check_len("weight gradient", self.d_weights.len(), m.graph().n_edges())?;
        check_len("visible gradient", self.d_visible.len(), m.n_visible())?;
        check_len("hidden gradient", self.d_hidden.len(), m.n_hidden())
    }
}

/// Momentum state carried between updates.
pub type Velocity = GradientSet;

/// Positive and negative phase statistics for one data vector.
struct PhaseStats {
    v0: Vec<f64>,
    h0: Vec<f64>,
    vn: Vec<f64>,
    hn: Vec<f64>,
}

fn run_chain<R: Rng + ?Sized>(
    m: &BoltzmannMachine,
    v0: &[f64],
    steps: usize,
    recon: GaussianReconstruction,
    rng: &mut R,
) -> Result<PhaseStats> {
    let noise_free = m.kind() == VisibleKind::Gaussian && recon == GaussianReconstruction::NoiseFree;
    let h0 = m.hidden_conditional(v0)?;
    let mut h: Vec<f64> = h0.iter().map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }).collect();
    let mut v = Vec::new();
    let mut hn = Vec::new();
    for step in 0..steps {
        v = if noise_free {
            m.visible_conditional(&h)?.mean
        } else {
            m.sample_visible(&h, rng)?
        };
        hn = m.hidden_conditional(&v)?;
        if step + 1 < steps {
            h = hn.iter().map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }).collect();
        }
    }
    Ok(PhaseStats {
        v0: v0.to_vec(),
        h0,
        vn: v,
        hn,
    })
}

/// CD-n gradient estimate, averaged over `batch`.
///
/// The chain starts at each data vector and alternates sampled hidden and
/// visible states for `steps` rounds. Hidden statistics use probabilities
/// in both phases. Gradients point uphill in log-likelihood; for Gaussian
/// visibles they follow the energy with `v_i / sigma_i` inputs.
///
/// Each sample gets its own random stream seeded from one draw of `rng`, so
/// the result does not depend on how samples are scheduled.
///
/// Gaussian reconstructions are noise-free; see [`cd_gradients_with`].
pub fn cd_gradients<R: Rng + ?Sized>(
    m: &BoltzmannMachine,
    batch: &[&[f64]],
    steps: usize,
    rng: &mut R,
) -> Result<GradientSet> {
    cd_gradients_with(m, batch, steps, GaussianReconstruction::NoiseFree, rng)
}

/// [`cd_gradients`] with an explicit Gaussian reconstruction mode.
pub fn cd_gradients_with<R: Rng + ?Sized>(
    m: &BoltzmannMachine,
    batch: &[&[f64]],
    steps: usize,
    recon: GaussianReconstruction,
    rng: &mut R,
) -> Result<GradientSet> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("CD needs at least one Gibbs step".into()));
    }
    for v in batch {
        check_len("visible sample", v.len(), m.n_visible())?;
    }
    let base_seed: u64 = rng.random();
    let stats: Vec<PhaseStats> = batch
        .par_iter()
        .enumerate()
        .map(|(k, v)| run_chain(m, v, steps, recon, &mut rng::stream(base_seed, k as u64)))
        .collect::<Result<_>>()?;
    Ok(gradients_from_stats(m, &stats))
}

fn gradients_from_stats(m: &BoltzmannMachine, stats: &[PhaseStats]) -> GradientSet {
    let g = m.graph();
    let scale = 1.0 / stats.len() as f64;
    let inv_sigma: Vec<f64> = match m.sigma() {
        Some(s) => s.iter().map(|x| 1.0 / x).collect(),
        None => vec![1.0; m.n_visible()],
    };
    let mut d_weights = vec![0.0; g.n_edges()];
    // each visible unit owns a contiguous block of edge ids
    let mut blocks: Vec<(usize, &mut [f64])> = Vec::with_capacity(m.n_visible());
    let mut rest: &mut [f64] = &mut d_weights;
    for i in 0..m.n_visible() {
        let (head, tail) = rest.split_at_mut(g.visible_degree(i));
        blocks.push((i, head));
        rest = tail;
    }
    blocks.into_par_iter().for_each(|(i, block)| {
        let nbrs = g.visible_neighbors(i);
        for s in stats {
            let (p, q) = (s.v0[i] * inv_sigma[i], s.vn[i] * inv_sigma[i]);
            if p == 0.0 && q == 0.0 {
                continue;
            }
            for (d, &j) in block.iter_mut().zip(nbrs) {
                *d += p * s.h0[j] - q * s.hn[j];
            }
        }
        block.iter_mut().for_each(|d| *d *= scale);
    });
    let mut d_visible = vec![0.0; m.n_visible()];
    let mut d_hidden = vec![0.0; m.n_hidden()];
    for s in stats {
        for i in 0..m.n_visible() {
            d_visible[i] += (s.v0[i] - s.vn[i]) * inv_sigma[i] * inv_sigma[i];
        }
        for j in 0..m.n_hidden() {
            d_hidden[j] += s.h0[j] - s.hn[j];
        }
    }
    d_visible.iter_mut().for_each(|d| *d *= scale);
    d_hidden.iter_mut().for_each(|d| *d *= scale);
    GradientSet {
        d_weights,
        d_visible,
        d_hidden,
    }
}

/// One momentum step: `velocity = momentum * velocity + lr * (grad - decay * param)`,
/// then `param += velocity`. Decay applies to weights only.
pub fn apply_update(
    m: &mut BoltzmannMachine,
    grads: &GradientSet,
    velocity: &mut Velocity,
    momentum: f64,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<()> {
    grads.check_shape(m)?;
    velocity.check_shape(m)?;
    let step = |param: &mut [f64], grad: &[f64], vel: &mut [f64], decay: f64| {
        for ((p, g), v) in param.iter_mut().zip(grad).zip(vel.iter_mut()) {
            *v = momentum * *v + learning_rate * (g - decay * *p);
            *p += *v;
        }
    };
    step(m.weights_mut(), &grads.d_weights, &mut velocity.d_weights, weight_decay);
    step(m.visible_bias_mut(), &grads.d_visible, &mut velocity.d_visible, 0.0);
    step(m.hidden_bias_mut(), &grads.d_hidden, &mut velocity.d_hidden, 0.0);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub cd_steps: usize,
    pub learning_rate: f64,
    pub train_rmse: f64,
    pub train_pcc: Option<f64>,
    pub monitor_rmse: Option<f64>,
    pub monitor_pcc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BoltzmannMachine,
    pub velocity: Velocity,
    pub trace: Vec<EpochMetrics>,
    pub updates: usize,
}

pub(crate) fn check_kind(m: &BoltzmannMachine, data: &Dataset) -> Result<()> {
    if m.kind() == VisibleKind::Binary && data.kind() != DataKind::Binary {
        return Err(Error::KindMismatch("binary-visible model needs binary data".into()));
    }
    check_len("dataset features", data.n_features(), m.n_visible())
}

/// Mini-batch CD training with momentum and weight decay.
///
/// Rows are reshuffled every epoch. After each epoch the mean-field
/// reconstruction error on the training rows (and on `monitor`, if given)
/// is recorded. Non-finite parameters abort with [`Error::Divergence`].
pub fn train<R: Rng + ?Sized>(
    mut model: BoltzmannMachine,
    data: &Dataset,
    monitor: Option<&Dataset>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_kind(&model, data)?;
    if let Some(mon) = monitor {
        check_kind(&model, mon)?;
    }
    let n = data.n_samples();
    if n == 0 && cfg.epochs > 0 {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total = batches_per_epoch * cfg.epochs;
    let mut velocity = GradientSet::zeros_like(&model);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0;
    for epoch in 0..cfg.epochs {
        let steps = cfg.cd_steps_at(epoch);
        order.shuffle(rng);
        let mut lr = cfg.learning_rate_at(t, total);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| data.row(i)).collect();
            let grads = cd_gradients_with(&model, &batch, steps, cfg.gaussian_reconstruction, rng)?;
            lr = cfg.learning_rate_at(t, total);
            apply_update(&mut model, &grads, &mut velocity, cfg.momentum, lr, cfg.weight_decay)?;
            t += 1;
        }
        if !all_finite(&model) {
            return Err(Error::Divergence(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        let (train_rmse, train_pcc) = reconstruction_metrics(&model, data.samples())?;
        let (monitor_rmse, monitor_pcc) = match monitor {
            Some(mon) if mon.n_samples() > 0 => {
                let (r, p) = reconstruction_metrics(&model, mon.samples())?;
                (Some(r), p)
            }
            _ => (None, None),
        };
        log::debug!("epoch {} rmse {train_rmse:.4}", epoch + 1);
        trace.push(EpochMetrics {
            epoch: epoch + 1,
            cd_steps: steps,
            learning_rate: lr,
            train_rmse,
            train_pcc,
            monitor_rmse,
            monitor_pcc,
        });
    }
    Ok(TrainOutcome {
        model,
        velocity,
        trace,
        updates: t,
    })
}

fn all_finite(m: &BoltzmannMachine) -> bool {
    m.weights()
        .iter()
        .chain(m.visible_bias())
        .chain(m.hidden_bias())
        .all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::topology::BipartiteGraph;

    fn zero_grad(m: &BoltzmannMachine, value: f64) -> GradientSet {
        GradientSet {
            d_weights: vec![value; m.graph().n_edges()],
            d_visible: vec![value; m.n_visible()],
            d_hidden: vec![value; m.n_hidden()],
        }
    }

    #[test]
    fn plain_step_is_lr_times_grad() {
        let mut m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(2, 2));
        m.weights_mut().copy_from_slice(&[0.5, -0.5, 1.0, 2.0]);
        let before = m.clone();
        let g = zero_grad(&m, 0.3);
        let mut vel = GradientSet::zeros_like(&m);
        apply_update(&mut m, &g, &mut vel, 0.0, 0.1, 0.0).unwrap();
        for (a, b) in m.weights().iter().zip(before.weights()) {
            assert_eq!(*a, b + 0.1 * 0.3);
        }
    }

    #[test]
    fn momentum_two_step_recursion() {
        let mut m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(1, 1));
        let g = zero_grad(&m, 2.0);
        let mut vel = GradientSet::zeros_like(&m);
        apply_update(&mut m, &g, &mut vel, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(m.weights()[0], 2.0);
        apply_update(&mut m, &g, &mut vel, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(m.weights()[0], 2.0 + 3.0);
    }

    #[test]
    fn decay_contracts_weights_but_not_biases() {
        let mut m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(1, 1));
        m.weights_mut()[0] = 1.0;
        m.visible_bias_mut()[0] = 1.0;
        let g = zero_grad(&m, 0.0);
        let mut vel = GradientSet::zeros_like(&m);
        let (lr, decay) = (0.01, 0.5);
        let mut expect = 1.0;
        for _ in 0..10 {
            apply_update(&mut m, &g, &mut vel, 0.0, lr, decay).unwrap();
            expect += lr * (0.0 - decay * expect);
            assert_eq!(m.weights()[0], expect);
        }
        assert_eq!(m.visible_bias()[0], 1.0);
    }

    #[test]
    fn velocity_reaches_its_fixed_point() {
        let mut m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(1, 1));
        let g = zero_grad(&m, 1.5);
        let mut vel = GradientSet::zeros_like(&m);
        let (rho, lr) = (0.5, 0.1);
        for _ in 0..200 {
            apply_update(&mut m, &g, &mut vel, rho, lr, 0.0).unwrap();
        }
        assert!((vel.d_weights[0] - lr * 1.5 / (1.0 - rho)).abs() < 1e-6);
    }

    #[test]
    fn gradients_cancel_when_chain_reproduces_data() {
        // saturated visible biases pin every reconstruction to the data vector
        let g = BipartiteGraph::complete(3, 2);
        let m = BoltzmannMachine::from_parts(
            VisibleKind::Binary,
            g,
            vec![0.0; 6],
            vec![800.0, -800.0, 800.0],
            vec![0.2, -0.1],
            None,
        )
        .unwrap();
        let v = [1.0, 0.0, 1.0];
        let grads = cd_gradients(&m, &[&v, &v], 3, &mut seeded(1)).unwrap();
        assert!(grads.d_weights.iter().chain(&grads.d_visible).chain(&grads.d_hidden).all(|&x| x == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(2, 2));
        assert!(cd_gradients(&m, &[], 1, &mut seeded(0)).is_err());
        assert!(cd_gradients(&m, &[&[1.0, 0.0]], 0, &mut seeded(0)).is_err());
    }

    #[test]
    fn schedules() {
        let cfg = TrainConfig {
            cd_steps: 1,
            cd_steps_max: Some(25),
            epochs: 50,
            lr_schedule: LrSchedule::InverseDecay,
            learning_rate: 0.05,
            ..Default::default()
        };
        assert_eq!(cfg.cd_steps_at(0), 1);
        assert_eq!(cfg.cd_steps_at(49), 25);
        assert!((1..50).all(|e| cfg.cd_steps_at(e) >= cfg.cd_steps_at(e - 1)));
        assert_eq!(cfg.learning_rate_at(0, 100), 0.05);
        assert!((cfg.learning_rate_at(50, 100) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { weight_decay: -1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { cd_steps: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let data = crate::data::synthetic_gaussian(20, 4, &mut seeded(1)).unwrap();
        let m = BoltzmannMachine::initialized(VisibleKind::Gaussian, BipartiteGraph::complete(4, 3), &mut seeded(2));
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let out = train(m.clone(), &data, None, &cfg, &mut seeded(3)).unwrap();
        assert_eq!(out.model, m);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn kind_mismatch_is_refused() {
        let data = crate::data::synthetic_gaussian(20, 4, &mut seeded(1)).unwrap();
        let m = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(4, 3));
        let err = train(m, &data, None, &TrainConfig::default(), &mut seeded(3)).unwrap_err();
        assert!(matches!(err, Error::KindMismatch(_)));
    }

    #[test]
    fn divergence_is_reported() {
        let data = crate::data::synthetic_gaussian(30, 4, &mut seeded(1)).unwrap();
        let m = BoltzmannMachine::initialized(VisibleKind::Gaussian, BipartiteGraph::complete(4, 3), &mut seeded(2));
        let cfg = TrainConfig { learning_rate: 1e200, epochs: 3, ..Default::default() };
        let err = train(m, &data, None, &cfg, &mut seeded(3)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn training_is_deterministic_and_keeps_the_mask() {
        let data = crate::data::synthetic_gaussian(40, 6, &mut seeded(1)).unwrap();
        let g = BipartiteGraph::from_edges(6, 5, [(0, 0), (1, 0), (2, 3), (5, 4), (3, 1)]).unwrap();
        let m = BoltzmannMachine::initialized(VisibleKind::Gaussian, g.clone(), &mut seeded(2));
        let cfg = TrainConfig { epochs: 3, batch_size: 7, learning_rate: 0.01, ..Default::default() };
        let a = train(m.clone(), &data, None, &cfg, &mut seeded(3)).unwrap();
        let b = train(m, &data, None, &cfg, &mut seeded(3)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model.graph(), &g);
        assert_eq!(a.trace.len(), 3);
        assert_eq!(a.updates, 3 * 6);
    }
}
