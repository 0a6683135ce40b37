//! Condensation metrics: how many distinct input-weight directions remain.

use serde::{Deserialize, Serialize};

use super::integrate::FlowTrajectory;
use crate::error::{check_len, Result};
use crate::model::TwoLayer;

/// Norm below which an input weight counts as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationChannels {
    pub effective_neurons: Vec<f64>,
    pub max_pair_alignment: Vec<f64>,
}

/// `(effective_neurons, max_pair_alignment)` of a single parameter vector.
pub fn condensation_at(net: &TwoLayer, theta: &[f64], tol_angle: f64) -> Result<(usize, f64)> {
    check_len("theta", net.n_params(), theta.len())?;
    let dirs: Vec<Option<Vec<f64>>> = theta
        .chunks(net.d + 1)
        .map(|n| {
            let w = &n[1..];
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > ZERO_NORM).then(|| w.iter().map(|v| v / norm).collect())
        })
        .collect();
    let m = dirs.len();
    let mut cluster: Vec<usize> = (0..m).collect();
    let mut alignment = 0.0_f64;
    for i in 0..m {
        for j in i + 1..m {
            let (Some(u), Some(v)) = (&dirs[i], &dirs[j]) else {
                continue;
            };
            let cos = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs().min(1.0);
            alignment = alignment.max(cos);
            if cos >= 1.0 - tol_angle {
                let (a, b) = (root(&mut cluster, i), root(&mut cluster, j));
                cluster[a.max(b)] = a.min(b);
            }
        }
    }
    let mut count = (0..m)
        .filter(|&i| dirs[i].is_some() && root(&mut cluster, i) == i)
        .count();
    if dirs.iter().any(Option::is_none) {
        count += 1;
    }
    Ok((count, alignment))
}

fn root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Per-snapshot condensation channels of a two-layer trajectory.
pub fn condensation_metrics(net: &TwoLayer, traj: &FlowTrajectory, tol_angle: f64) -> Result<CondensationChannels> {
    let mut out = CondensationChannels {
        effective_neurons: Vec::with_capacity(traj.thetas.len()),
        max_pair_alignment: Vec::with_capacity(traj.thetas.len()),
    };
    for theta in &traj.thetas {
        let (n, a) = condensation_at(net, theta, tol_angle)?;
        out.effective_neurons.push(n as f64);
        out.max_pair_alignment.push(a);
    }
    Ok(out)
}
