//! Non-degeneracy of two-layer parameters and independence of neuron
//! functions.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::{Activation, TwoLayer};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `a_k = 0`.
    ZeroA,
    /// `w_k = 0`.
    ZeroW,
    /// `w_i = w_j`.
    TiedWPlus,
    /// `w_i = −w_j`.
    TiedWMinus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based neuron indices.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub non_degenerate: bool,
    pub violations: Vec<Violation>,
}

fn inf_dist(u: &[f64], v: &[f64], sign: f64) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max)
}

/// Flags `|a_k| ≤ tol`, `‖w_k‖∞ ≤ tol`, `‖w_i ∓ w_j‖∞ ≤ tol`.
pub fn degeneracy_report(net: &TwoLayer, theta: &[f64], tol: f64) -> Result<DegeneracyReport> {
    check_len("theta", net.n_params(), theta.len())?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be ≥ 0"));
    }
    let neurons: Vec<&[f64]> = theta.chunks(net.d + 1).collect();
    let mut violations = Vec::new();
    for (k, n) in neurons.iter().enumerate() {
        if n[0].abs() <= tol {
            violations.push(Violation {
                kind: ViolationKind::ZeroA,
                indices: vec![k + 1],
            });
        }
        if n[1..].iter().all(|w| w.abs() <= tol) {
            violations.push(Violation {
                kind: ViolationKind::ZeroW,
                indices: vec![k + 1],
            });
        }
    }
    for i in 0..neurons.len() {
        for j in i + 1..neurons.len() {
            let (wi, wj) = (&neurons[i][1..], &neurons[j][1..]);
            for (sign, kind) in [(1.0, ViolationKind::TiedWPlus), (-1.0, ViolationKind::TiedWMinus)] {
                if inf_dist(wi, wj, sign) <= tol {
                    violations.push(Violation {
                        kind,
                        indices: vec![i + 1, j + 1],
                    });
                }
            }
        }
    }
    Ok(DegeneracyReport {
        non_degenerate: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub rank_tol: f64,
}

impl Default for GramConfig {
    fn default() -> Self {
        GramConfig {
            n_samples: 200,
            seed: 0,
            rank_tol: crate::liegeom::DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub rank: usize,
    /// `(d+1)m`.
    pub n_functions: usize,
    pub singular_values: Vec<f64>,
    #[serde(with = "crate::json::inf_as_null")]
    pub gap_ratio: f64,
}

/// Rank of `{σ(w_iᵀx), σ′(w_iᵀx)x_1, …, σ′(w_iᵀx)x_d}` sampled at Gaussian
/// inputs.
pub fn gram_independence(activation: Activation, w: &[Vec<f64>], cfg: &GramConfig) -> Result<GramReport> {
    let m = w.len();
    let d = w.first().map_or(0, Vec::len);
    if m == 0 || d == 0 {
        return Err(Error::invalid("need at least one neuron of positive input dimension"));
    }
    for wi in w {
        check_len("weight row", d, wi.len())?;
    }
    let n_functions = (d + 1) * m;
    if cfg.n_samples < n_functions {
        return Err(Error::invalid(format!(
            "need at least {n_functions} samples, got {}",
            cfg.n_samples
        )));
    }
    let mut rng = rng::seeded(cfg.seed);
    let rows: Vec<Vec<f64>> = (0..cfg.n_samples)
        .map(|_| {
            let x = rng::normal_vec(&mut rng, d);
            let mut row = Vec::with_capacity(n_functions);
            for wi in w {
                let z: f64 = wi.iter().zip(&x).map(|(a, b)| a * b).sum();
                let ds = activation.d1(z);
                row.push(activation.eval(z));
                row.extend(x.iter().map(|xk| ds * xk));
            }
            row
        })
        .collect();
    let sv = linalg::singular_values(&rows, n_functions);
    let rank = linalg::numerical_rank(&sv, cfg.rank_tol);
    Ok(GramReport {
        rank,
        n_functions,
        gap_ratio: linalg::gap_ratio(&sv, rank),
        singular_values: sv,
    })
}
