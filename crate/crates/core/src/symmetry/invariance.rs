//! Infinitesimal invariance of the gradient under a group element.

use serde::{Deserialize, Serialize};

use super::group::GroupElement;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng;

/// Displacement `‖gθ − θ‖∞` above which `θ` is not a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub max_violation: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Max over `n_samples` standard-normal inputs of
/// `‖g(∇θF(θ)(x)) − ∇θF(θ)(x)‖∞`. Requires `g θ = θ`.
pub fn check_infinitesimal_invariance(
    model: &Model,
    g: &GroupElement,
    theta: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let moved = g.apply(model, theta)?;
    let displacement = moved.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(displacement <= FIXED_POINT_TOL) {
        return Err(Error::NotFixed { displacement });
    }
    let mut rng = rng::seeded(seed);
    let d = model.input_dim();
    let mut max_violation = 0.0_f64;
    for _ in 0..n_samples {
        let x = rng::normal_vec(&mut rng, d);
        let grad = model.grad_theta(theta, &x)?;
        let image = g.apply(model, &grad)?;
        max_violation = image.iter().zip(&grad).map(|(a, b)| (a - b).abs()).fold(max_violation, f64::max);
    }
    Ok(InvarianceReport {
        max_violation,
        n_samples,
        seed,
    })
}
