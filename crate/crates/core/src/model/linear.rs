use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::rng;

/// Model linear in its parameters: `F(θ)(x) = Σ_i θ_i ψ_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub d: usize,
    pub basis: Basis,
}

/// Declarative feature basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Basis {
    /// All monomials of total degree `≤ degree`, graded lexicographic order.
    Monomials { degree: u32 },
    /// `1, sin x, cos x, …, sin(kx), cos(kx)`; scalar inputs only.
    Fourier { order: u32 },
    /// Explicit scaled monomials `coeff · Π_j x_j^{powers_j}`.
    Terms { terms: Vec<Term> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Monomial { coeff: f64, powers: Vec<u32> },
    Sin(u32),
    Cos(u32),
}

impl Feature {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Feature::Monomial { coeff, powers } => {
                coeff * powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>()
            }
            Feature::Sin(k) => (*k as f64 * x[0]).sin(),
            Feature::Cos(k) => (*k as f64 * x[0]).cos(),
        }
    }
}

fn multi_indices(d: usize, total: u32) -> Vec<Vec<u32>> {
    if d == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut tail in multi_indices(d - 1, total - first) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

impl LinearModel {
    pub fn new(d: usize, basis: Basis) -> Result<Self> {
        let model = LinearModel { d, basis };
        model.validate()?;
        Ok(model)
    }

    pub fn monomials(d: usize, degree: u32) -> Self {
        LinearModel {
            d,
            basis: Basis::Monomials { degree },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("linear model input dimension must be positive"));
        }
        match &self.basis {
            Basis::Fourier { .. } if self.d != 1 => {
                Err(Error::invalid("fourier basis requires scalar input (d = 1)"))
            }
            Basis::Terms { terms } if terms.is_empty() => Err(Error::invalid("empty basis")),
            Basis::Terms { terms } => {
                for t in terms {
                    check_len("term powers", self.d, t.powers.len())?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn features(&self) -> Vec<Feature> {
        match &self.basis {
            Basis::Monomials { degree } => (0..=*degree)
                .flat_map(|k| multi_indices(self.d, k))
                .map(|powers| Feature::Monomial { coeff: 1.0, powers })
                .collect(),
            Basis::Fourier { order } => {
                let mut f = vec![Feature::Monomial {
                    coeff: 1.0,
                    powers: vec![0],
                }];
                for k in 1..=*order {
                    f.push(Feature::Sin(k));
                    f.push(Feature::Cos(k));
                }
                f
            }
            Basis::Terms { terms } => terms
                .iter()
                .map(|t| Feature::Monomial {
                    coeff: t.coeff,
                    powers: t.powers.clone(),
                })
                .collect(),
        }
    }

    pub fn n_params(&self) -> usize {
        match &self.basis {
            Basis::Terms { terms } => terms.len(),
            Basis::Fourier { order } => 2 * *order as usize + 1,
            Basis::Monomials { .. } => self.features().len(),
        }
    }

    pub fn feature_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("input", self.d, x.len())?;
        Ok(self.features().iter().map(|f| f.eval(x)).collect())
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        check_len("theta", self.n_params(), theta.len())?;
        let psi = self.feature_vector(x)?;
        Ok(theta.iter().zip(&psi).map(|(t, p)| t * p).sum())
    }

    pub fn grad_theta(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len("theta", self.n_params(), theta.len())?;
        self.feature_vector(x)
    }

    pub fn hess_theta_vec(&self, theta: &[f64], x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len("theta", self.n_params(), theta.len())?;
        check_len("input", self.d, x.len())?;
        check_len("direction", self.n_params(), v.len())?;
        Ok(vec![0.0; v.len()])
    }

    /// Numerical rank of the sampled Gram (design) matrix of the basis on
    /// `max(n_samples, 4M)` standard-normal inputs.
    pub fn gram_rank(&self, n_samples: usize, seed: u64, rank_tol: f64) -> usize {
        let m = self.n_params();
        let n = n_samples.max(4 * m);
        let mut r = rng::seeded(seed);
        let feats = self.features();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let x = rng::normal_vec(&mut r, self.d);
                feats.iter().map(|f| f.eval(&x)).collect()
            })
            .collect();
        let sv = linalg::singular_values(&rows, m);
        linalg::numerical_rank(&sv, rank_tol)
    }

    pub fn is_independent(&self, seed: u64) -> bool {
        self.gram_rank(0, seed, 1e-10) == self.n_params()
    }
}
