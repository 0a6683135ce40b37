//! Invariance and perturbation probes built on repeated flows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, DatasetSpec, Generator, LossFn};
use super::integrate::{integrate, FlowConfig, FlowStatus, DEFAULT_DT, DEFAULT_T};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::rng;
use crate::symmetry::SimDescriptor;

/// Distance below which an initial point counts as on the manifold,
/// relative to `max(1, ‖θ‖∞)`.
pub const ON_MANIFOLD_TOL: f64 = 1e-12;

pub const HOLD_TOL: f64 = 1e-6;
pub const ESCAPE_TOL: f64 = 1e-2;

fn check_on_manifold(model: &Model, sim: &SimDescriptor, theta: &[f64]) -> Result<()> {
    let distance = sim.distance(model, theta)?;
    let scale = theta.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if distance > ON_MANIFOLD_TOL * scale {
        return Err(Error::NotOnManifold { distance });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// `gaussian_iid`, or `teacher` for targets from a random teacher of the
    /// same architecture.
    #[serde(default = "default_generator")]
    pub generator: Generator,
    #[serde(default = "default_losses")]
    pub losses: Vec<LossFn>,
    #[serde(rename = "T", default = "default_t")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Leave blown-up trials out of `max_drift`.
    #[serde(default)]
    pub exclude_blown_up: bool,
}

fn default_trials() -> usize {
    20
}
fn default_samples() -> usize {
    25
}
fn default_generator() -> Generator {
    Generator::GaussianIid
}
fn default_losses() -> Vec<LossFn> {
    vec![LossFn::Square]
}
fn default_t() -> f64 {
    DEFAULT_T
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_trials: default_trials(),
            n_samples: default_samples(),
            generator: default_generator(),
            losses: default_losses(),
            t_end: DEFAULT_T,
            dt: DEFAULT_DT,
            seed: 0,
            exclude_blown_up: false,
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, n_trials: usize) -> Self {
        self.n_trials = n_trials;
        self
    }

    pub fn with_horizon(mut self, t_end: f64, dt: f64) -> Self {
        self.t_end = t_end;
        self.dt = dt;
        self
    }

    pub fn with_losses(mut self, losses: Vec<LossFn>) -> Self {
        self.losses = losses;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.n_samples == 0 {
            return Err(Error::invalid("probe needs at least one trial and one sample"));
        }
        if self.losses.is_empty() {
            return Err(Error::invalid("probe needs at least one loss"));
        }
        if self.generator == Generator::Explicit {
            return Err(Error::invalid("probe datasets are generated"));
        }
        FlowConfig::new(self.t_end, self.dt).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub loss: LossFn,
    pub max_drift: f64,
    pub status: FlowStatus,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub max_drift: f64,
    pub n_blown_up: usize,
    pub per_trial: Vec<TrialResult>,
}

fn trial_dataset(model: &Model, cfg: &ProbeConfig, seed: u64, loss: LossFn) -> Result<Dataset> {
    let spec = match cfg.generator {
        Generator::Teacher => {
            let mut rng = rng::seeded(rng::derive_seed(seed, u64::MAX));
            let teacher = ModelSpec::new(model.clone(), model.random_theta(&mut rng, 1.0))?;
            DatasetSpec::teacher(cfg.n_samples, seed, teacher)
        }
        _ => DatasetSpec::gaussian(cfg.n_samples, seed),
    };
    let data = Dataset::generate(&spec, model.input_dim())?;
    Ok(if loss == LossFn::Logistic {
        data.with_sign_targets()
    } else {
        data
    })
}

/// Flow from `theta0` under `n_trials` independent datasets and losses and
/// report the largest distance from `sim` seen along the way.
pub fn invariance_probe(model: &Model, sim: &SimDescriptor, theta0: &[f64], cfg: &ProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    check_on_manifold(model, sim, theta0)?;
    let per_trial: Vec<TrialResult> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| {
            let seed = rng::derive_seed(cfg.seed, trial as u64);
            let loss = cfg.losses[trial % cfg.losses.len()];
            let data = trial_dataset(model, cfg, seed, loss)?;
            let flow = FlowConfig::new(cfg.t_end, cfg.dt).with_monitors(vec![sim.clone()]);
            let traj = integrate(model, theta0, &data, loss, &flow)?;
            Ok(TrialResult {
                trial,
                seed,
                loss,
                max_drift: traj.max_drift(),
                status: traj.status,
                t_final: traj.final_time(),
            })
        })
        .collect::<Result<_>>()?;
    let max_drift = per_trial
        .iter()
        .filter(|r| !(cfg.exclude_blown_up && r.status == FlowStatus::BlewUp))
        .map(|r| r.max_drift)
        .fold(0.0, f64::max);
    Ok(ProbeReport {
        max_drift,
        n_blown_up: per_trial.iter().filter(|r| r.status == FlowStatus::BlewUp).count(),
        per_trial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub n_anchors: usize,
    pub horizon: f64,
    pub dt: f64,
    pub escape_tol: f64,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n_anchors: 50,
            horizon: 0.5,
            dt: 1e-3,
            escape_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub escaped: bool,
    pub max_constraint_motion: f64,
    pub escape_tol: f64,
    pub n_runs: usize,
    /// Escape is certified by a single run; confinement only for the
    /// sampled family of flows.
    pub confinement_scope: String,
}

/// Single-sample linear-loss flows (pure induced fields `+∇θF(θ)(x_k)`) from
/// `theta_star` at random anchors `x_k`; `escaped` when any of them leaves
/// `constraint` by more than `escape_tol`.
pub fn perturbation_probe(
    model: &Model,
    theta_star: &[f64],
    constraint: &SimDescriptor,
    cfg: &PerturbationConfig,
) -> Result<PerturbationReport> {
    if cfg.n_anchors == 0 {
        return Err(Error::invalid("perturbation probe needs at least one anchor"));
    }
    check_on_manifold(model, constraint, theta_star)?;
    let max_constraint_motion = anchor_flow_distance(model, theta_star, constraint, cfg)?;
    Ok(PerturbationReport {
        escaped: max_constraint_motion > cfg.escape_tol,
        max_constraint_motion,
        escape_tol: cfg.escape_tol,
        n_runs: cfg.n_anchors,
        confinement_scope: "sampled linear-loss flows".into(),
    })
}

/// Largest `distance(sim, θ(t))` over single-sample linear-loss flows from
/// `theta` at `cfg.n_anchors` standard-normal anchors. `theta` need not lie
/// on `sim`.
pub fn anchor_flow_distance(model: &Model, theta: &[f64], sim: &SimDescriptor, cfg: &PerturbationConfig) -> Result<f64> {
    let mut rng = rng::seeded(cfg.seed);
    let anchors: Vec<Vec<f64>> = (0..cfg.n_anchors)
        .map(|_| rng::normal_vec(&mut rng, model.input_dim()))
        .collect();
    let flow = FlowConfig::new(cfg.horizon, cfg.dt).with_monitors(vec![sim.clone()]);
    let distances: Vec<f64> = anchors
        .into_par_iter()
        .map(|x| {
            let data = Dataset::new(vec![x], vec![0.0])?;
            Ok(integrate(model, theta, &data, LossFn::Linear, &flow)?.max_drift())
        })
        .collect::<Result<_>>()?;
    Ok(distances.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, TwoLayer};

    #[test]
    fn full_space_never_drifts() {
        let model: Model = TwoLayer::new(Activation::Tanh, 2, 1).unwrap().into();
        let cfg = ProbeConfig::default().with_trials(2).with_horizon(0.2, 1e-2);
        let r = invariance_probe(&model, &SimDescriptor::FullSpace, &[0.1, 0.2, 0.3, 0.4], &cfg).unwrap();
        assert_eq!(r.max_drift, 0.0);
        assert_eq!(r.per_trial.len(), 2);
    }

    #[test]
    fn off_manifold_start_is_rejected() {
        let model: Model = TwoLayer::new(Activation::Tanh, 2, 1).unwrap().into();
        let sim = SimDescriptor::NeuronZero { i: 0 };
        let err = invariance_probe(&model, &sim, &[0.1, 0.2, 0.3, 0.4], &ProbeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotOnManifold { .. }));
    }

    #[test]
    fn zero_neuron_escapes_only_when_sigma_zero_is_nonzero() {
        let cfg = PerturbationConfig {
            n_anchors: 5,
            ..PerturbationConfig::default()
        };
        let sim = SimDescriptor::OutputZero { i: 0 };
        let theta = [0.0, 0.0, 0.8, -0.5];
        let tanh: Model = TwoLayer::new(Activation::Tanh, 2, 1).unwrap().into();
        assert!(!perturbation_probe(&tanh, &theta, &sim, &cfg).unwrap().escaped);
        let sigmoid: Model = TwoLayer::new(Activation::Sigmoid, 2, 1).unwrap().into();
        assert!(perturbation_probe(&sigmoid, &theta, &sim, &cfg).unwrap().escaped);
    }
}
