//! Named checks with measured values and thresholds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured ≤ threshold`.
    AtMost,
    /// `measured < threshold`.
    Below,
    /// `measured ≥ threshold`.
    AtLeast,
    /// `measured > threshold`.
    Above,
    /// `measured = threshold`.
    Equals,
}

impl Relation {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => measured <= threshold,
            Relation::Below => measured < threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Above => measured > threshold,
            Relation::Equals => measured == threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub relations: BTreeMap<String, Relation>,
    /// Checks that did not hold.
    pub failures: Vec<String>,
    /// Existence checks that found no witness; these do not fail the result.
    pub inconclusive: Vec<String>,
}

impl ScenarioResult {
    pub fn new(name: impl Into<String>) -> Self {
        ScenarioResult {
            name: name.into(),
            passed: true,
            measured: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            relations: BTreeMap::new(),
            failures: Vec::new(),
            inconclusive: Vec::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> bool {
        let name = name.into();
        let ok = relation.holds(measured, threshold);
        if !ok {
            self.failures.push(name.clone());
            self.passed = false;
        }
        self.measured.insert(name.clone(), measured);
        self.thresholds.insert(name.clone(), threshold);
        self.relations.insert(name, relation);
        ok
    }

    pub fn check_true(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.check(name, f64::from(u8::from(ok)), Relation::Equals, 1.0)
    }

    pub fn inconclusive(&mut self, name: impl Into<String>) {
        self.inconclusive.push(name.into());
    }

    /// Append another result's checks with `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: ScenarioResult) {
        for (k, v) in other.measured {
            let t = other.thresholds[&k];
            let r = other.relations[&k];
            self.check(format!("{prefix}{k}"), v, r, t);
        }
        self.inconclusive
            .extend(other.inconclusive.into_iter().map(|k| format!("{prefix}{k}")));
    }

    pub fn measured(&self, name: &str) -> Option<f64> {
        self.measured.get(name).copied()
    }
}
