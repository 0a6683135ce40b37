//! Analytic parametric models `F(θ)(x)` with exact forward values, parameter
//! gradients and Hessian-vector products.

mod activation;
mod layout;
mod linear;
mod mlp;
mod two_layer;

use serde::{Deserialize, Serialize};

pub use activation::{
    classify as classify_activation, Activation, ActivationClass, ActivationDescriptor,
    ActivationInfo, Parity,
};
pub use layout::NetworkLayout;
pub use linear::{Basis, Feature, LinearModel, Term};
pub use mlp::{DeepParams, DenseLayer, Mlp};
pub use two_layer::{TwoLayer, TwoLayerParams};

pub(crate) use mlp::inf_norm;

use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

/// Model architecture. Serialized with a `"type"` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    TwoLayer(TwoLayer),
    Mlp(Mlp),
    Linear(LinearModel),
}

impl From<TwoLayer> for Model {
    fn from(m: TwoLayer) -> Self {
        Model::TwoLayer(m)
    }
}

impl From<Mlp> for Model {
    fn from(m: Mlp) -> Self {
        Model::Mlp(m)
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::TwoLayer(n) => TwoLayer::new(n.activation, n.m, n.d).map(|_| ()),
            Model::Mlp(n) => n.validate(),
            Model::Linear(n) => n.validate(),
        }
    }

    /// `M`, the length of the flat parameter vector.
    pub fn n_params(&self) -> usize {
        match self {
            Model::TwoLayer(n) => n.n_params(),
            Model::Mlp(n) => n.n_params(),
            Model::Linear(n) => n.n_params(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::TwoLayer(n) => n.d,
            Model::Mlp(n) => n.input_dim(),
            Model::Linear(n) => n.d,
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match self {
            Model::TwoLayer(n) => Some(n.activation),
            Model::Mlp(n) => Some(n.activation),
            Model::Linear(_) => None,
        }
    }

    pub fn as_two_layer(&self) -> Option<&TwoLayer> {
        match self {
            Model::TwoLayer(n) => Some(n),
            _ => None,
        }
    }

    /// Layer view for group actions; linear models have none.
    pub fn layout(&self) -> Option<NetworkLayout> {
        match self {
            Model::TwoLayer(n) => Some(NetworkLayout::two_layer(n)),
            Model::Mlp(n) => Some(NetworkLayout::mlp(n)),
            Model::Linear(_) => None,
        }
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        match self {
            Model::TwoLayer(n) => n.forward(theta, x),
            Model::Mlp(n) => n.forward(theta, x),
            Model::Linear(n) => n.forward(theta, x),
        }
    }

    /// `∇_θ F(θ)(x)` in flattening order.
    pub fn grad_theta(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::TwoLayer(n) => n.grad_theta(theta, x),
            Model::Mlp(n) => n.grad_theta(theta, x),
            Model::Linear(n) => n.grad_theta(theta, x),
        }
    }

    /// `∇²_θ F(θ)(x) · v`.
    pub fn hess_theta_vec(&self, theta: &[f64], x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let hv = match self {
            Model::TwoLayer(n) => n.hess_theta_vec(theta, x, v),
            Model::Mlp(n) => n.hess_theta_vec(theta, x, v),
            Model::Linear(n) => n.hess_theta_vec(theta, x, v),
        }?;
        if hv.iter().all(|h| h.is_finite()) {
            Ok(hv)
        } else {
            Err(Error::non_finite("hessian-vector product"))
        }
    }

    /// Standard-normal parameters scaled by `scale`.
    pub fn random_theta(&self, rng: &mut SeededRng, scale: f64) -> Vec<f64> {
        rng::normal_vec(rng, self.n_params())
            .into_iter()
            .map(|t| t * scale)
            .collect()
    }
}

/// A model together with a concrete parameter vector; the JSON exchange
/// format `{"type": …, …architecture fields…, "theta": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub model: Model,
    pub theta: Vec<f64>,
}

impl ModelSpec {
    pub fn new(model: impl Into<Model>, theta: Vec<f64>) -> Result<Self> {
        let spec = ModelSpec {
            model: model.into(),
            theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        crate::error::check_len("theta", self.model.n_params(), self.theta.len())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ModelSpec =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("model spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let spec = ModelSpec::new(
            TwoLayer::new(Activation::Exp, 2, 1).unwrap(),
            vec![1.0, 0.7, 1.0, 0.7],
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(v["type"], "two_layer");
        assert_eq!(v["activation"], "exp");
        assert_eq!(v["m"], 2);
        assert_eq!(v["theta"].as_array().unwrap().len(), 4);
        assert_eq!(ModelSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn spec_rejects_wrong_theta_length() {
        let bad = r#"{"type":"mlp","activation":"tanh","widths":[2,3,1],"theta":[1,2,3]}"#;
        assert!(matches!(ModelSpec::from_json(bad), Err(Error::Shape { .. })));
        let linear = r#"{"type":"linear","d":1,"basis":{"kind":"monomials","degree":2},"theta":[1,2,3]}"#;
        assert!(ModelSpec::from_json(linear).is_ok());
    }
}
