//! Datasets and loss functions.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{Model, ModelSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Inputs and targets i.i.d. standard normal.
    GaussianIid,
    /// Standard-normal inputs, targets from a teacher model.
    Teacher,
    /// Supplied by the caller.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: Generator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher: Option<ModelSpec>,
}

/// Recipe for a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_generator")]
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<ModelSpec>,
}

fn default_generator() -> Generator {
    Generator::GaussianIid
}

impl DatasetSpec {
    pub fn gaussian(n: usize, seed: u64) -> Self {
        DatasetSpec {
            n,
            seed,
            generator: Generator::GaussianIid,
            teacher: None,
        }
    }

    pub fn teacher(n: usize, seed: u64, teacher: ModelSpec) -> Self {
        DatasetSpec {
            n,
            seed,
            generator: Generator::Teacher,
            teacher: Some(teacher),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let ds = Dataset {
            x,
            y,
            provenance: Provenance {
                seed: None,
                generator: Generator::Explicit,
                teacher: None,
            },
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::invalid("dataset must have at least one sample"));
        }
        check_len("targets", self.x.len(), self.y.len())?;
        let d = self.x[0].len();
        for row in &self.x {
            check_len("input row", d, row.len())?;
        }
        if self.x.iter().flatten().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::non_finite("dataset"));
        }
        Ok(())
    }

    /// Generate `spec.n` samples of dimension `d`.
    pub fn generate(spec: &DatasetSpec, d: usize) -> Result<Self> {
        if spec.n == 0 {
            return Err(Error::invalid("dataset must have at least one sample"));
        }
        let mut rng = rng::seeded(spec.seed);
        let x: Vec<Vec<f64>> = (0..spec.n).map(|_| rng::normal_vec(&mut rng, d)).collect();
        let y = match spec.generator {
            Generator::GaussianIid => rng::normal_vec(&mut rng, spec.n),
            Generator::Teacher => {
                let teacher = spec
                    .teacher
                    .as_ref()
                    .ok_or_else(|| Error::invalid("teacher generator needs a teacher model"))?;
                teacher.validate()?;
                check_len("teacher input dimension", d, teacher.model.input_dim())?;
                x.iter()
                    .map(|xi| teacher.model.forward(&teacher.theta, xi))
                    .collect::<Result<_>>()?
            }
            Generator::Explicit => return Err(Error::invalid("explicit datasets are not generated")),
        };
        let ds = Dataset {
            x,
            y,
            provenance: Provenance {
                seed: Some(spec.seed),
                generator: spec.generator,
                teacher: spec.teacher.clone(),
            },
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Targets replaced by their signs (±1), for the logistic loss.
    pub fn with_sign_targets(mut self) -> Self {
        for y in &mut self.y {
            *y = if *y < 0.0 { -1.0 } else { 1.0 };
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFn {
    /// `½(s − t)²`.
    Square,
    /// `−s`; the flow follows `+∇θF`.
    Linear,
    /// `ln(1 + e^{−ts})`.
    Logistic,
}

impl LossFn {
    pub const ALL: [LossFn; 3] = [LossFn::Square, LossFn::Linear, LossFn::Logistic];

    pub fn eval(self, s: f64, t: f64) -> f64 {
        match self {
            LossFn::Square => 0.5 * (s - t) * (s - t),
            LossFn::Linear => -s,
            LossFn::Logistic => softplus(-t * s),
        }
    }

    /// `∂ℓ/∂s`.
    pub fn dloss(self, s: f64, t: f64) -> f64 {
        match self {
            LossFn::Square => s - t,
            LossFn::Linear => -1.0,
            LossFn::Logistic => -t * sigmoid(-t * s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossFn::Square => "square",
            LossFn::Linear => "linear",
            LossFn::Logistic => "logistic",
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(L(θ), ∇θL(θ))` with `L = Σ_i ℓ(F(θ)(x_i), y_i)`, summed in dataset order.
pub fn loss_and_grad(model: &Model, theta: &[f64], data: &Dataset, loss: LossFn) -> Result<(f64, Vec<f64>)> {
    check_len("theta", model.n_params(), theta.len())?;
    check_len("input dimension", model.input_dim(), data.dim())?;
    let mut total = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let s = model.forward(theta, x)?;
        total += loss.eval(s, y);
        let g = loss.dloss(s, y);
        for (acc, gi) in grad.iter_mut().zip(model.grad_theta(theta, x)?) {
            *acc += g * gi;
        }
    }
    if !total.is_finite() {
        return Err(Error::non_finite("loss"));
    }
    Ok((total, grad))
}
