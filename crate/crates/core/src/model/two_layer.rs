use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{check_len, Error, Result};

/// Bias-free two-layer network `F(θ)(x) = Σ_i a_i σ(w_iᵀx)`.
///
/// Flattening is neuron-major: `θ = (a_1, w_1, …, a_m, w_m)`, so neuron `i`
/// occupies `θ[i(d+1) .. (i+1)(d+1)]` with its output weight first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLayer {
    pub activation: Activation,
    pub m: usize,
    pub d: usize,
}

/// Structured view of two-layer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerParams {
    pub a: Vec<f64>,
    /// Inner weights, one row per neuron.
    pub w: Vec<Vec<f64>>,
}

impl TwoLayerParams {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m() * (self.d() + 1));
        for (a, w) in self.a.iter().zip(&self.w) {
            out.push(*a);
            out.extend_from_slice(w);
        }
        out
    }

    pub fn unflatten(theta: &[f64], m: usize, d: usize) -> Result<Self> {
        check_len("two-layer theta", m * (d + 1), theta.len())?;
        let (a, w) = theta
            .chunks_exact(d + 1)
            .map(|block| (block[0], block[1..].to_vec()))
            .unzip();
        Ok(TwoLayerParams { a, w })
    }

    /// Neuron `i` as the vector `(a_i, w_i)`.
    pub fn neuron(&self, i: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.d() + 1);
        v.push(self.a[i]);
        v.extend_from_slice(&self.w[i]);
        v
    }
}

impl TwoLayer {
    pub fn new(activation: Activation, m: usize, d: usize) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::invalid("two-layer width and input dimension must be positive"));
        }
        Ok(TwoLayer { activation, m, d })
    }

    pub fn n_params(&self) -> usize {
        (self.d + 1) * self.m
    }

    pub fn block(&self) -> usize {
        self.d + 1
    }

    fn check(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        check_len("theta", self.n_params(), theta.len())?;
        check_len("input", self.d, x.len())
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.check(theta, x)?;
        Ok(theta
            .chunks_exact(self.block())
            .map(|n| n[0] * self.activation.eval(dot(&n[1..], x)))
            .sum())
    }

    pub fn grad_theta(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        let mut g = vec![0.0; theta.len()];
        for (n, gn) in theta.chunks_exact(self.block()).zip(g.chunks_exact_mut(self.block())) {
            let z = dot(&n[1..], x);
            gn[0] = self.activation.eval(z);
            let s = n[0] * self.activation.d1(z);
            for (gj, xj) in gn[1..].iter_mut().zip(x) {
                *gj = s * xj;
            }
        }
        Ok(g)
    }

    /// Closed-form `∇²_θ F(θ)(x) · v`; the Hessian is block diagonal over neurons.
    pub fn hess_theta_vec(&self, theta: &[f64], x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        check_len("direction", self.n_params(), v.len())?;
        let mut out = vec![0.0; theta.len()];
        let b = self.block();
        for ((n, vn), on) in theta
            .chunks_exact(b)
            .zip(v.chunks_exact(b))
            .zip(out.chunks_exact_mut(b))
        {
            let z = dot(&n[1..], x);
            let s1 = self.activation.d1(z);
            let s2 = self.activation.d2(z);
            let xv = dot(&vn[1..], x);
            on[0] = s1 * xv;
            let coef = s1 * vn[0] + n[0] * s2 * xv;
            for (o, xj) in on[1..].iter_mut().zip(x) {
                *o = coef * xj;
            }
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
