use serde::{Deserialize, Serialize};

use super::two_layer::dot;
use super::Activation;
use crate::error::{check_len, Error, Result};

/// Fully-connected network with widths `n_0, …, n_L` (`n_L = 1`) and biases.
///
/// By default σ is applied on every layer, including the scalar readout.
/// `linear_readout` switches the last layer to the identity.
///
/// Flattening: for each layer in order, `W^(l)` row-major, then `b^(l)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub activation: Activation,
    pub widths: Vec<usize>,
    #[serde(default)]
    pub linear_readout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `n_l × n_{l-1}`, one row per output unit.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepParams {
    pub widths: Vec<usize>,
    pub layers: Vec<DenseLayer>,
}

impl DeepParams {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for row in &layer.w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn unflatten(theta: &[f64], widths: &[usize]) -> Result<Self> {
        let net = Mlp::new(Activation::Tanh, widths.to_vec())?;
        check_len("mlp theta", net.n_params(), theta.len())?;
        let mut rest = theta;
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let (wpart, tail) = rest.split_at(fan_in * fan_out);
            let (bpart, tail) = tail.split_at(fan_out);
            layers.push(DenseLayer {
                w: wpart.chunks_exact(fan_in).map(<[f64]>::to_vec).collect(),
                b: bpart.to_vec(),
            });
            rest = tail;
        }
        Ok(DeepParams {
            widths: widths.to_vec(),
            layers,
        })
    }
}

struct Tape {
    /// Post-activations `a^(0) = x, …, a^(L)`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations `z^(1), …, z^(L)`.
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(activation: Activation, widths: Vec<usize>) -> Result<Self> {
        let net = Mlp {
            activation,
            widths,
            linear_readout: false,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_linear_readout(mut self, on: bool) -> Self {
        self.linear_readout = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::invalid("mlp needs at least an input and an output width"));
        }
        if self.widths.iter().any(|&n| n == 0) {
            return Err(Error::invalid("mlp widths must be positive"));
        }
        if *self.widths.last().unwrap() != 1 {
            return Err(Error::invalid("mlp output width must be 1"));
        }
        Ok(())
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|p| p[1] * (p[0] + 1)).sum()
    }

    /// Offset of `W^(l)` for `l = 1..=L`; `b^(l)` follows immediately.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.widths[..l]
            .windows(2)
            .map(|p| p[1] * (p[0] + 1))
            .sum()
    }

    fn is_linear_layer(&self, l: usize) -> bool {
        self.linear_readout && l == self.depth()
    }

    fn run(&self, theta: &[f64], x: &[f64]) -> Result<Tape> {
        check_len("theta", self.n_params(), theta.len())?;
        check_len("input", self.input_dim(), x.len())?;
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.depth());
        let mut off = 0;
        for l in 1..=self.depth() {
            let (fan_in, fan_out) = (self.widths[l - 1], self.widths[l]);
            let w = &theta[off..off + fan_in * fan_out];
            let b = &theta[off + fan_in * fan_out..off + fan_out * (fan_in + 1)];
            let prev = acts.last().unwrap();
            let z: Vec<f64> = w
                .chunks_exact(fan_in)
                .zip(b)
                .map(|(row, bi)| dot(row, prev) + bi)
                .collect();
            let a = if self.is_linear_layer(l) {
                z.clone()
            } else {
                z.iter().map(|&zi| self.activation.eval(zi)).collect()
            };
            pre.push(z);
            acts.push(a);
            off += fan_out * (fan_in + 1);
        }
        Ok(Tape { acts, pre })
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        Ok(self.run(theta, x)?.acts.last().unwrap()[0])
    }

    /// Backpropagation with `δ^(l) = ∂F/∂z^(l)`.
    pub fn grad_theta(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let tape = self.run(theta, x)?;
        let depth = self.depth();
        let mut grad = vec![0.0; theta.len()];
        let slope = |l: usize, z: f64| {
            if self.is_linear_layer(l) {
                1.0
            } else {
                self.activation.d1(z)
            }
        };
        let mut delta: Vec<f64> = tape.pre[depth - 1].iter().map(|&z| slope(depth, z)).collect();
        for l in (1..=depth).rev() {
            let (fan_in, fan_out) = (self.widths[l - 1], self.widths[l]);
            let off = self.layer_offset(l);
            let prev = &tape.acts[l - 1];
            for i in 0..fan_out {
                for j in 0..fan_in {
                    grad[off + i * fan_in + j] = delta[i] * prev[j];
                }
                grad[off + fan_in * fan_out + i] = delta[i];
            }
            if l > 1 {
                let w = &theta[off..off + fan_in * fan_out];
                delta = (0..fan_in)
                    .map(|j| {
                        let back: f64 = (0..fan_out).map(|i| w[i * fan_in + j] * delta[i]).sum();
                        slope(l - 1, tape.pre[l - 2][j]) * back
                    })
                    .collect();
            }
        }
        Ok(grad)
    }

    /// Central difference of the gradient along `v`, step
    /// `cbrt(ε)·max(1,‖θ‖∞)/max(1,‖v‖∞)`.
    pub fn hess_theta_vec(&self, theta: &[f64], x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len("direction", self.n_params(), v.len())?;
        let vmax = inf_norm(v);
        if vmax == 0.0 {
            check_len("theta", self.n_params(), theta.len())?;
            check_len("input", self.input_dim(), x.len())?;
            return Ok(vec![0.0; v.len()]);
        }
        let h = f64::EPSILON.cbrt() * inf_norm(theta).max(1.0) / vmax.max(1.0);
        let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + h * d).collect();
        let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - h * d).collect();
        let gp = self.grad_theta(&plus, x)?;
        let gm = self.grad_theta(&minus, x)?;
        Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_and_offsets() {
        let net = Mlp::new(Activation::Tanh, vec![2, 3, 1]).unwrap();
        assert_eq!(net.n_params(), 3 * 3 + 1 * 4);
        assert_eq!(net.layer_offset(1), 0);
        assert_eq!(net.layer_offset(2), 9);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(Mlp::new(Activation::Tanh, vec![2]).is_err());
        assert!(Mlp::new(Activation::Tanh, vec![2, 0, 1]).is_err());
        assert!(Mlp::new(Activation::Tanh, vec![2, 3, 2]).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let theta: Vec<f64> = (0..13).map(|k| k as f64 * 0.5 - 2.0).collect();
        let p = DeepParams::unflatten(&theta, &[2, 3, 1]).unwrap();
        assert_eq!(p.layers[0].w[1], vec![-1.0, -0.5]);
        assert_eq!(p.layers[0].b, vec![1.0, 1.5, 2.0]);
        assert_eq!(p.flatten(), theta);
    }

    #[test]
    fn literal_form_applies_sigma_on_readout() {
        let net = Mlp::new(Activation::Tanh, vec![1, 1]).unwrap();
        let y = net.forward(&[2.0, 0.5], &[1.0]).unwrap();
        assert_eq!(y, 2.5_f64.tanh());
        let lin = net.clone().with_linear_readout(true);
        assert_eq!(lin.forward(&[2.0, 0.5], &[1.0]).unwrap(), 2.5);
    }

    #[test]
    fn zero_direction_gives_zero_hessian_product() {
        let net = Mlp::new(Activation::Sigmoid, vec![2, 2, 1]).unwrap();
        let theta = vec![0.3; net.n_params()];
        let hv = net.hess_theta_vec(&theta, &[1.0, -1.0], &vec![0.0; net.n_params()]).unwrap();
        assert!(hv.iter().all(|&h| h == 0.0));
    }
}
