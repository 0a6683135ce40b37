//! Scalar analytic activations with hand-coded first and second derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Softplus,
    Exp,
    /// `cosh(x) - 1`: even, vanishing value and slope at the origin.
    CoshMinusOne,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationClass {
    /// Non-polynomial, no parity, `σ(0) ≠ 0` and `σ'(0) ≠ 0`.
    Generic,
    /// Non-polynomial, odd, `σ'(0) ≠ 0`.
    GenericOdd,
    Other,
}

/// Registry entry for an activation: evaluation routines plus the flags the
/// symmetry results branch on.
#[derive(Clone, Copy)]
pub struct ActivationDescriptor {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
    pub d1: fn(f64) -> f64,
    pub d2: fn(f64) -> f64,
    pub value_at_zero: f64,
    pub deriv_at_zero: f64,
    pub parity: Parity,
    pub is_polynomial: bool,
    pub classification: ActivationClass,
}

impl fmt::Debug for ActivationDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActivationDescriptor")
            .field("name", &self.name)
            .field("value_at_zero", &self.value_at_zero)
            .field("deriv_at_zero", &self.deriv_at_zero)
            .field("parity", &self.parity)
            .field("is_polynomial", &self.is_polynomial)
            .field("classification", &self.classification)
            .finish()
    }
}

/// Summary row used by `list-activations` and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationInfo {
    pub name: String,
    pub value_at_zero: f64,
    pub deriv_at_zero: f64,
    pub parity: Parity,
    pub is_polynomial: bool,
    pub classification: ActivationClass,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn tanh_d1(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

fn tanh_d2(x: f64) -> f64 {
    let t = x.tanh();
    -2.0 * t * (1.0 - t * t)
}

fn sigmoid_d1(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

fn sigmoid_d2(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn cosh_minus_one(x: f64) -> f64 {
    // 2 sinh^2(x/2) avoids cancellation near the origin.
    let s = (0.5 * x).sinh();
    2.0 * s * s
}

/// Classification rule shared by the registry and its tests.
pub fn classify(parity: Parity, value_at_zero: f64, deriv_at_zero: f64, is_polynomial: bool) -> ActivationClass {
    if is_polynomial || deriv_at_zero == 0.0 {
        return ActivationClass::Other;
    }
    match parity {
        Parity::Neither if value_at_zero != 0.0 => ActivationClass::Generic,
        Parity::Odd => ActivationClass::GenericOdd,
        _ => ActivationClass::Other,
    }
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softplus,
        Activation::Exp,
        Activation::CoshMinusOne,
        Activation::Sin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softplus => "softplus",
            Activation::Exp => "exp",
            Activation::CoshMinusOne => "cosh_minus_one",
            Activation::Sin => "sin",
        }
    }

    #[allow(clippy::type_complexity)]
    fn table(self) -> (fn(f64) -> f64, fn(f64) -> f64, fn(f64) -> f64, Parity) {
        match self {
            Activation::Tanh => (f64::tanh, tanh_d1, tanh_d2, Parity::Odd),
            Activation::Sigmoid => (sigmoid, sigmoid_d1, sigmoid_d2, Parity::Neither),
            Activation::Softplus => (softplus, sigmoid, sigmoid_d1, Parity::Neither),
            Activation::Exp => (f64::exp, f64::exp, f64::exp, Parity::Neither),
            Activation::CoshMinusOne => (cosh_minus_one, f64::sinh, f64::cosh, Parity::Even),
            Activation::Sin => (f64::sin, f64::cos, |x: f64| -x.sin(), Parity::Odd),
        }
    }

    pub fn descriptor(self) -> ActivationDescriptor {
        let (eval, d1, d2, parity) = self.table();
        let value_at_zero = eval(0.0);
        let deriv_at_zero = d1(0.0);
        ActivationDescriptor {
            name: self.name(),
            eval,
            d1,
            d2,
            value_at_zero,
            deriv_at_zero,
            parity,
            is_polynomial: false,
            classification: classify(parity, value_at_zero, deriv_at_zero, false),
        }
    }

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        (self.table().0)(x)
    }

    #[inline]
    pub fn d1(self, x: f64) -> f64 {
        (self.table().1)(x)
    }

    #[inline]
    pub fn d2(self, x: f64) -> f64 {
        (self.table().2)(x)
    }

    pub fn parity(self) -> Parity {
        self.table().3
    }

    pub fn classification(self) -> ActivationClass {
        self.descriptor().classification
    }

    pub fn is_odd(self) -> bool {
        self.parity() == Parity::Odd
    }

    pub fn is_even(self) -> bool {
        self.parity() == Parity::Even
    }

    pub fn vanishes_at_zero(self) -> bool {
        self.eval(0.0) == 0.0
    }

    pub fn slope_vanishes_at_zero(self) -> bool {
        self.d1(0.0) == 0.0
    }

    pub fn info(self) -> ActivationInfo {
        let d = self.descriptor();
        ActivationInfo {
            name: d.name.to_string(),
            value_at_zero: d.value_at_zero,
            deriv_at_zero: d.deriv_at_zero,
            parity: d.parity,
            is_polynomial: d.is_polynomial,
            classification: d.classification,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown activation `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample_points() -> Vec<f64> {
        let mut r = rng::seeded(11);
        rng::uniform_vec(&mut r, 64, -3.0, 3.0)
    }

    #[test]
    fn registry_classes() {
        assert_eq!(Activation::Tanh.classification(), ActivationClass::GenericOdd);
        assert_eq!(Activation::Sin.classification(), ActivationClass::GenericOdd);
        for a in [Activation::Softplus, Activation::Sigmoid, Activation::Exp] {
            assert_eq!(a.classification(), ActivationClass::Generic, "{a}");
        }
        let c = Activation::CoshMinusOne.descriptor();
        assert_eq!(c.classification, ActivationClass::Other);
        assert_eq!(c.parity, Parity::Even);
        assert_eq!(c.value_at_zero, 0.0);
        assert_eq!(c.deriv_at_zero, 0.0);
    }

    #[test]
    fn parity_flags_match_samples() {
        let xs = sample_points();
        for a in Activation::ALL {
            let d = a.descriptor();
            let even = xs.iter().all(|&x| ((d.eval)(-x) - (d.eval)(x)).abs() < 1e-12);
            let odd = xs.iter().all(|&x| ((d.eval)(-x) + (d.eval)(x)).abs() < 1e-12);
            match d.parity {
                Parity::Even => assert!(even && !odd, "{a}"),
                Parity::Odd => assert!(odd && !even, "{a}"),
                Parity::Neither => assert!(!odd && !even, "{a}"),
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-4;
        for a in Activation::ALL {
            let d = a.descriptor();
            for &x in &sample_points() {
                let fd1 = ((d.eval)(x + h) - (d.eval)(x - h)) / (2.0 * h);
                let fd2 = ((d.eval)(x + h) - 2.0 * (d.eval)(x) + (d.eval)(x - h)) / (h * h);
                let e1 = ((d.d1)(x) - fd1).abs() / fd1.abs().max(1.0);
                let e2 = ((d.d2)(x) - fd2).abs() / fd2.abs().max(1.0);
                assert!(e1 < 1e-6, "{a} d1 at {x}: {e1:e}");
                assert!(e2 < 1e-6, "{a} d2 at {x}: {e2:e}");
            }
        }
    }

    #[test]
    fn classification_rule_table() {
        assert_eq!(classify(Parity::Neither, 1.0, 1.0, false), ActivationClass::Generic);
        assert_eq!(classify(Parity::Neither, 0.0, 1.0, false), ActivationClass::Other);
        assert_eq!(classify(Parity::Neither, 1.0, 1.0, true), ActivationClass::Other);
        assert_eq!(classify(Parity::Odd, 0.0, 1.0, false), ActivationClass::GenericOdd);
        assert_eq!(classify(Parity::Odd, 0.0, 0.0, false), ActivationClass::Other);
        assert_eq!(classify(Parity::Even, 1.0, 1.0, false), ActivationClass::Other);
    }

    #[test]
    fn names_round_trip() {
        for a in Activation::ALL {
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
        assert!("relu".parse::<Activation>().is_err());
    }
}
