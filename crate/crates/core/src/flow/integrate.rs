//! Gradient-flow integration `dθ/dt = −∇L(θ)` with manifold monitors.

use serde::{Deserialize, Serialize};

use super::data::{loss_and_grad, Dataset, LossFn};
use crate::error::{check_len, Error, Result};
use crate::model::Model;
use crate::symmetry::SimDescriptor;

pub const DEFAULT_T: f64 = 5.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_BLOWUP_NORM: f64 = 1e6;
pub const DEFAULT_ADAPTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Rk4Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "T", default = "default_t")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub monitors: Vec<SimDescriptor>,
    #[serde(default = "default_blowup")]
    pub blowup_norm: f64,
    #[serde(default = "default_adaptive_tol")]
    pub adaptive_tol: f64,
}

fn default_t() -> f64 {
    DEFAULT_T
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_scheme() -> Scheme {
    Scheme::Rk4
}
fn default_stride() -> usize {
    1
}
fn default_blowup() -> f64 {
    DEFAULT_BLOWUP_NORM
}
fn default_adaptive_tol() -> f64 {
    DEFAULT_ADAPTIVE_TOL
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_end: DEFAULT_T,
            dt: DEFAULT_DT,
            scheme: Scheme::Rk4,
            snapshot_stride: 1,
            monitors: Vec::new(),
            blowup_norm: DEFAULT_BLOWUP_NORM,
            adaptive_tol: DEFAULT_ADAPTIVE_TOL,
        }
    }
}

impl FlowConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        FlowConfig {
            t_end,
            dt,
            ..FlowConfig::default()
        }
    }

    pub fn with_monitors(mut self, monitors: Vec<SimDescriptor>) -> Self {
        self.monitors = monitors;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("T must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride must be ≥ 1"));
        }
        if !(self.blowup_norm > 0.0) {
            return Err(Error::invalid("blowup_norm must be positive"));
        }
        if !(self.adaptive_tol > 0.0) {
            return Err(Error::invalid("adaptive_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    BlewUp,
    /// Adaptive step size underflowed before reaching `T`.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub loss_values: Vec<f64>,
    pub channels: Vec<Channel>,
    pub status: FlowStatus,
    pub steps: usize,
}

impl FlowTrajectory {
    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn final_theta(&self) -> &[f64] {
        self.thetas.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Largest value on each drift channel (`drift:` prefix).
    pub fn max_drift(&self) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.name.starts_with("drift:"))
            .map(Channel::max)
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            status: self.status,
            steps: self.steps,
            snapshots: self.times.len(),
            t_final: self.final_time(),
            initial_loss: self.loss_values.first().copied().unwrap_or(f64::NAN),
            final_loss: self.loss_values.last().copied().unwrap_or(f64::NAN),
            channel_max: self
                .channels
                .iter()
                .map(|c| ChannelMax {
                    name: c.name.clone(),
                    max: c.max(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMax {
    pub name: String,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub status: FlowStatus,
    pub steps: usize,
    pub snapshots: usize,
    pub t_final: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub channel_max: Vec<ChannelMax>,
}

enum Probe {
    Drift(SimDescriptor),
    Constant(usize),
}

struct Recorder<'a> {
    model: &'a Model,
    probes: Vec<Probe>,
    theta0: Vec<f64>,
    traj: FlowTrajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, theta: &[f64], loss: f64) -> Result<()> {
        self.traj.times.push(t);
        self.traj.thetas.push(theta.to_vec());
        self.traj.loss_values.push(loss);
        for (probe, ch) in self.probes.iter().zip(&mut self.traj.channels) {
            let v = match probe {
                Probe::Drift(sim) => sim.distance(self.model, theta)?,
                Probe::Constant(k) => (theta[*k] - self.theta0[*k]).abs(),
            };
            ch.values.push(v);
        }
        Ok(())
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Velocity `−∇L(θ)`; `None` on overflow.
fn velocity(model: &Model, theta: &[f64], data: &Dataset, loss: LossFn) -> Result<Option<Vec<f64>>> {
    if !all_finite(theta) {
        return Ok(None);
    }
    match loss_and_grad(model, theta, data, loss) {
        Ok((_, g)) if all_finite(&g) => Ok(Some(g.into_iter().map(|v| -v).collect())),
        Ok(_) | Err(Error::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One classical RK4 step; `None` on overflow.
fn rk4_step(model: &Model, theta: &[f64], h: f64, data: &Dataset, loss: LossFn) -> Result<Option<Vec<f64>>> {
    let Some(k1) = velocity(model, theta, data, loss)? else {
        return Ok(None);
    };
    let Some(k2) = velocity(model, &axpy(theta, h / 2.0, &k1), data, loss)? else {
        return Ok(None);
    };
    let Some(k3) = velocity(model, &axpy(theta, h / 2.0, &k2), data, loss)? else {
        return Ok(None);
    };
    let Some(k4) = velocity(model, &axpy(theta, h, &k3), data, loss)? else {
        return Ok(None);
    };
    let next: Vec<f64> = (0..theta.len())
        .map(|i| theta[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok(all_finite(&next).then_some(next))
}

/// Integrate the gradient flow from `theta0` to `cfg.t_end`.
///
/// Monitors record `distance(sim, θ)` in channels named `drift:<k>:<kind>`;
/// zero-pattern monitors also add `const:<index>` channels tracking
/// `|θ_k(t) − θ_k(0)|` for every free entry. The run stops with
/// [`FlowStatus::BlewUp`] once `‖θ‖∞` exceeds `blowup_norm` or the state
/// overflows.
pub fn integrate(model: &Model, theta0: &[f64], data: &Dataset, loss: LossFn, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    model.validate()?;
    check_len("theta", model.n_params(), theta0.len())?;
    if !all_finite(theta0) {
        return Err(Error::FlowNonFinite {
            t: 0.0,
            last_good: Vec::new(),
        });
    }

    let mut probes = Vec::new();
    let mut channels = Vec::new();
    for (k, sim) in cfg.monitors.iter().enumerate() {
        sim.validate(model)?;
        channels.push(Channel {
            name: format!("drift:{k}:{}", sim.kind()),
            values: Vec::new(),
        });
        probes.push(Probe::Drift(sim.clone()));
    }
    for sim in &cfg.monitors {
        for idx in sim.free_entries(model)? {
            if !probes.iter().any(|p| matches!(p, Probe::Constant(i) if *i == idx)) {
                channels.push(Channel {
                    name: format!("const:{idx}"),
                    values: Vec::new(),
                });
                probes.push(Probe::Constant(idx));
            }
        }
    }

    let loss_at = |theta: &[f64]| -> Result<f64> {
        match loss_and_grad(model, theta, data, loss) {
            Ok((l, _)) => Ok(l),
            Err(Error::NonFinite { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let initial_loss = match loss_and_grad(model, theta0, data, loss) {
        Ok((l, g)) if all_finite(&g) => l,
        _ => {
            return Err(Error::FlowNonFinite {
                t: 0.0,
                last_good: theta0.to_vec(),
            })
        }
    };

    let mut rec = Recorder {
        model,
        probes,
        theta0: theta0.to_vec(),
        traj: FlowTrajectory {
            times: Vec::new(),
            thetas: Vec::new(),
            loss_values: Vec::new(),
            channels,
            status: FlowStatus::Completed,
            steps: 0,
        },
    };
    rec.record(0.0, theta0, initial_loss)?;

    let mut theta = theta0.to_vec();
    let mut t = 0.0;
    let mut since_snapshot = 0;
    let blown = |th: &[f64]| inf_norm(th) > cfg.blowup_norm;

    match cfg.scheme {
        Scheme::Rk4 => {
            let n = ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = cfg.t_end / n as f64;
            for step in 1..=n {
                let Some(next) = rk4_step(model, &theta, h, data, loss)? else {
                    rec.traj.status = FlowStatus::BlewUp;
                    break;
                };
                theta = next;
                t = if step == n { cfg.t_end } else { step as f64 * h };
                rec.traj.steps = step;
                since_snapshot += 1;
                let stop = blown(&theta);
                if stop || step == n || since_snapshot == cfg.snapshot_stride {
                    rec.record(t, &theta, loss_at(&theta)?)?;
                    since_snapshot = 0;
                }
                if stop {
                    rec.traj.status = FlowStatus::BlewUp;
                    break;
                }
            }
        }
        Scheme::Rk4Adaptive => {
            let mut h = cfg.dt.min(cfg.t_end);
            while t < cfg.t_end {
                let h_try = h.min(cfg.t_end - t);
                if h_try <= 1e-14 * t.abs().max(1.0) {
                    rec.traj.status = FlowStatus::Ambiguous;
                    break;
                }
                let full = rk4_step(model, &theta, h_try, data, loss)?;
                let half = match rk4_step(model, &theta, h_try / 2.0, data, loss)? {
                    Some(mid) => rk4_step(model, &mid, h_try / 2.0, data, loss)?,
                    None => None,
                };
                let (Some(full), Some(two_half)) = (full, half) else {
                    h = h_try / 4.0;
                    if h <= 1e-14 * t.abs().max(1.0) {
                        rec.traj.status = FlowStatus::BlewUp;
                        break;
                    }
                    continue;
                };
                let err = full.iter().zip(&two_half).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 15.0;
                let factor = if err == 0.0 {
                    4.0
                } else {
                    (0.9 * (cfg.adaptive_tol / err).powf(0.2)).clamp(0.1, 4.0)
                };
                if err > cfg.adaptive_tol {
                    h = h_try * factor;
                    continue;
                }
                theta = two_half;
                let reached_end = h_try >= cfg.t_end - t;
                t = if reached_end { cfg.t_end } else { t + h_try };
                h = h_try * factor;
                rec.traj.steps += 1;
                since_snapshot += 1;
                let stop = blown(&theta);
                if stop || reached_end || since_snapshot == cfg.snapshot_stride {
                    rec.record(t, &theta, loss_at(&theta)?)?;
                    since_snapshot = 0;
                }
                if stop {
                    rec.traj.status = FlowStatus::BlewUp;
                    break;
                }
            }
        }
    }
    Ok(rec.traj)
}
