//! Run configuration: JSON-schema validated, then parsed strictly.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use simlab::flow::{DatasetSpec, FlowConfig, LossFn, Scheme, DEFAULT_ADAPTIVE_TOL, DEFAULT_BLOWUP_NORM, DEFAULT_DT, DEFAULT_T};
use simlab::liegeom::LieSpanConfig;
use simlab::model::{Model, Parity};
use simlab::rng;
use simlab::symmetry::{NeuronPartition, PartitionMode, SimDescriptor, DEFAULT_CLASSIFY_TOL};
use simlab::verify::SuiteConfig;

use crate::CliError;

const SCHEMA: &str = include_str!("../schemas/run_config.schema.json");

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

/// Explicit values, a seeded random draw, or an exact leaf member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSource {
    Values(Vec<f64>),
    Random { random: RandomTheta },
    Leaf { leaf: LeafRecipe },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTheta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafRecipe {
    pub partition: NeuronPartition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_anchors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fields: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PartitionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBlock {
    #[serde(rename = "T", default = "default_t")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub monitors: Vec<SimDescriptor>,
    #[serde(default = "default_blowup")]
    pub blowup_norm: f64,
    #[serde(default = "default_adaptive_tol")]
    pub adaptive_tol: f64,
    pub dataset: DatasetSpec,
    #[serde(default = "default_loss")]
    pub loss: LossFn,
    #[serde(default = "default_tol_angle")]
    pub tol_angle: f64,
}

fn default_t() -> f64 {
    DEFAULT_T
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_scheme() -> Scheme {
    Scheme::Rk4
}
fn default_stride() -> usize {
    1
}
fn default_blowup() -> f64 {
    DEFAULT_BLOWUP_NORM
}
fn default_adaptive_tol() -> f64 {
    DEFAULT_ADAPTIVE_TOL
}
fn default_loss() -> LossFn {
    LossFn::Square
}
fn default_tol_angle() -> f64 {
    1e-6
}

impl FlowBlock {
    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            t_end: self.t_end,
            dt: self.dt,
            scheme: self.scheme,
            snapshot_stride: self.snapshot_stride,
            monitors: self.monitors.clone(),
            blowup_norm: self.blowup_norm,
            adaptive_tol: self.adaptive_tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default)]
    pub params: SuiteConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCommand {
    Analyze,
    Verify,
    Leaves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size {
    pub m: usize,
    #[serde(default = "one_usize")]
    pub d: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub command: SweepCommand,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sizes: Vec<Size>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PartitionMode>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let errors: Vec<String> = validator()
            .iter_errors(&value)
            .map(|e| format!("{} at '{}'", e, e.instance_path))
            .collect();
        if !errors.is_empty() {
            return Err(CliError::Config(format!("schema violation: {}", errors.join("; "))));
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn require_model(&self) -> Result<&Model, CliError> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a model".into()))?;
        model.validate()?;
        Ok(model)
    }

    /// Concrete parameter vector; random draws default to the global seed.
    pub fn resolve_theta(&self, model: &Model) -> Result<Vec<f64>, CliError> {
        let theta = match self.theta.as_ref() {
            None => return Err(CliError::Config("config needs theta".into())),
            Some(ThetaSource::Values(v)) => v.clone(),
            Some(ThetaSource::Random { random }) => {
                let mut r = rng::seeded(random.seed.unwrap_or(self.seed));
                model.random_theta(&mut r, random.scale)
            }
            Some(ThetaSource::Leaf { leaf }) => {
                simlab::verify::leaf_member(model, &leaf.partition, leaf.seed.unwrap_or(self.seed))?
            }
        };
        if theta.len() != model.n_params() {
            return Err(CliError::Config(format!(
                "theta has {} entries, model needs {}",
                theta.len(),
                model.n_params()
            )));
        }
        Ok(theta)
    }

    pub fn lie_config(&self, model: &Model) -> LieSpanConfig {
        let a = self.analysis.clone().unwrap_or_default();
        let base = LieSpanConfig::default_for(model).with_seed(self.seed);
        LieSpanConfig {
            n_anchors: a.n_anchors.unwrap_or(base.n_anchors),
            bracket_depth: a.bracket_depth.unwrap_or(base.bracket_depth),
            rank_tol: a.rank_tol.unwrap_or(base.rank_tol),
            seed: base.seed,
            max_fields: a.max_fields.unwrap_or(base.max_fields),
            bracket_candidates: a.bracket_candidates.unwrap_or(base.bracket_candidates),
        }
    }

    /// Sign mode for odd activations, equality mode otherwise.
    pub fn partition_mode(&self, model: &Model) -> PartitionMode {
        self.analysis.as_ref().and_then(|a| a.mode).unwrap_or_else(|| {
            if model.activation().is_some_and(|a| a.parity() == Parity::Odd) {
                PartitionMode::Sign
            } else {
                PartitionMode::Equality
            }
        })
    }

    /// Copy with analysis defaults and `theta` materialized.
    pub fn resolved_for_analysis(&self, model: &Model, theta: &[f64]) -> RunConfig {
        let lie = self.lie_config(model);
        let mut c = self.clone();
        c.theta = Some(ThetaSource::Values(theta.to_vec()));
        let prev = self.analysis.clone().unwrap_or_default();
        c.analysis = Some(AnalysisBlock {
            n_anchors: Some(lie.n_anchors),
            bracket_depth: Some(lie.bracket_depth),
            rank_tol: Some(lie.rank_tol),
            max_fields: Some(lie.max_fields),
            bracket_candidates: Some(lie.bracket_candidates),
            mode: model.as_two_layer().map(|_| self.partition_mode(model)),
            classify_tol: Some(prev.classify_tol.unwrap_or(DEFAULT_CLASSIFY_TOL)),
            degeneracy_tol: Some(prev.degeneracy_tol.unwrap_or(DEFAULT_CLASSIFY_TOL)),
        });
        c
    }
}
