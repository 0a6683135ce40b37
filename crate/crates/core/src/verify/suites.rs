//! Theorem-level scenario suites.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Relation, ScenarioResult};
use crate::error::{Error, Result};
use crate::flow::{
    anchor_flow_distance, integrate, invariance_probe, Dataset, DatasetSpec, FlowConfig, LossFn, PerturbationConfig,
    ProbeConfig, ESCAPE_TOL, HOLD_TOL,
};
use crate::liegeom::{eval_field, lie_span_rank, FieldExpr, LieSpanConfig, CONFIDENT_GAP};
use crate::model::{Activation, Basis, LinearModel, Mlp, Model, Term, TwoLayer};
use crate::rng;
use crate::symmetry::{
    check_infinitesimal_invariance, classify_partition, enumerate_leaves, predicted_leaf_dim, GroupElement,
    NeuronPartition, PartitionMode, Permutation, SimDescriptor, DEFAULT_CLASSIFY_TOL,
};

/// Drift bound for the constancy of zero-pattern free entries.
pub const CONSTANCY_TOL: f64 = 1e-8;
/// Infinitesimal-invariance bound.
pub const INFINITESIMAL_TOL: f64 = 1e-10;

/// Parameter scale for deep nets; nested `cosh − 1` layers overflow at unit scale.
const DEEP_INIT_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    OrbitLeafMatch,
    AllSimsSymmetryInduced,
    DeepSymmetry,
    InvariantMapGate,
}

impl SuiteName {
    pub const ALL: [SuiteName; 4] = [
        SuiteName::OrbitLeafMatch,
        SuiteName::AllSimsSymmetryInduced,
        SuiteName::DeepSymmetry,
        SuiteName::InvariantMapGate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::OrbitLeafMatch => "orbit_leaf_match",
            SuiteName::AllSimsSymmetryInduced => "all_sims_symmetry_induced",
            SuiteName::DeepSymmetry => "deep_symmetry",
            SuiteName::InvariantMapGate => "invariant_map_gate",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite '{s}'")))
    }
}

/// Suite knobs. Unset fields fall back to per-suite defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    /// Replaces the activation of every hypothesis-dependent item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PartitionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl SuiteConfig {
    /// Copy with every default filled in for `suite`.
    pub fn resolved(&self, suite: SuiteName) -> SuiteConfig {
        let mut c = self.clone();
        match suite {
            SuiteName::OrbitLeafMatch => {
                c.activation.get_or_insert(Activation::Exp);
                c.m.get_or_insert(2);
                c.d.get_or_insert(1);
                c.mode.get_or_insert(PartitionMode::Equality);
            }
            SuiteName::AllSimsSymmetryInduced => {
                c.activation.get_or_insert(Activation::Tanh);
                c.m.get_or_insert(2);
                c.d.get_or_insert(1);
                c.mode.get_or_insert(PartitionMode::Sign);
            }
            SuiteName::DeepSymmetry => {
                c.widths.get_or_insert_with(|| vec![2, 3, 2, 1]);
            }
            SuiteName::InvariantMapGate => {}
        }
        if suite != SuiteName::OrbitLeafMatch && suite != SuiteName::InvariantMapGate {
            c.trials.get_or_insert(20);
            c.t_end.get_or_insert(crate::flow::DEFAULT_T);
            c.dt.get_or_insert(crate::flow::DEFAULT_DT);
        }
        c
    }

    fn validate_sizes(&self) -> Result<()> {
        if self.m.is_some_and(|m| m == 0 || m > 4) {
            return Err(Error::invalid("suites support 1 ≤ m ≤ 4"));
        }
        if self.d.is_some_and(|d| d == 0 || d > 3) {
            return Err(Error::invalid("suites support 1 ≤ d ≤ 3"));
        }
        if let Some(w) = &self.widths {
            if w.len() < 2 || w.len() > 4 {
                return Err(Error::invalid("suites support depth 1 ≤ L ≤ 3"));
            }
        }
        if self.trials == Some(0) {
            return Err(Error::invalid("trials must be ≥ 1"));
        }
        Ok(())
    }

    fn probe(&self) -> ProbeConfig {
        ProbeConfig::default()
            .with_seed(self.seed)
            .with_trials(self.trials.unwrap_or(20))
            .with_horizon(
                self.t_end.unwrap_or(crate::flow::DEFAULT_T),
                self.dt.unwrap_or(crate::flow::DEFAULT_DT),
            )
            .with_losses(LossFn::ALL.to_vec())
    }
}

pub fn theorem_suite(name: SuiteName, cfg: &SuiteConfig) -> Result<ScenarioResult> {
    let cfg = cfg.resolved(name);
    cfg.validate_sizes()?;
    match name {
        SuiteName::OrbitLeafMatch => orbit_leaf_match(&cfg, false),
        SuiteName::AllSimsSymmetryInduced => orbit_leaf_match(&cfg, true),
        SuiteName::DeepSymmetry => deep_symmetry(&cfg),
        SuiteName::InvariantMapGate => invariant_map_gate(&cfg),
    }
}

/// Exact member of `leaf` obtained by projecting a seeded random point.
/// Smallest `|a|`, `‖w‖∞` and `‖w_i ∓ w_j‖∞` across block representatives of
/// a leaf member. Below this the trailing singular values of the field matrix
/// crowd the rank tolerance, notably for `d = 1`.
pub const LEAF_SEPARATION: f64 = 0.25;
/// Largest `|θ_k|` of a leaf member; `exp` fields at larger weights let a
/// single anchor dominate `σ₁`.
pub const LEAF_MAX_ENTRY: f64 = 2.5;

const LEAF_DRAWS: usize = 10_000;

/// Leaf member whose block representatives are [`LEAF_SEPARATION`] apart and
/// whose entries are bounded by [`LEAF_MAX_ENTRY`].
pub fn leaf_member(model: &Model, leaf: &NeuronPartition, seed: u64) -> Result<Vec<f64>> {
    let sim = SimDescriptor::from_partition(leaf.clone());
    let mut rng = rng::seeded(seed);
    let Some(net) = model.as_two_layer() else {
        return sim.project(model, &model.random_theta(&mut rng, 1.0));
    };
    let b = net.d + 1;
    for _ in 0..LEAF_DRAWS {
        let theta = sim.project(model, &model.random_theta(&mut rng, 1.0))?;
        let reps: Vec<&[f64]> = leaf.blocks.iter().map(|blk| &theta[blk[0] * b..(blk[0] + 1) * b]).collect();
        let norm = |v: &[f64]| v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let apart = |u: &[f64], v: &[f64], s: f64| u.iter().zip(v).fold(0.0_f64, |acc, (p, q)| acc.max((p - s * q).abs()));
        let spread = reps.iter().enumerate().all(|(i, u)| {
            u[0].abs() >= LEAF_SEPARATION
                && norm(&u[1..]) >= LEAF_SEPARATION
                && reps[i + 1..]
                    .iter()
                    .all(|v| apart(&u[1..], &v[1..], 1.0).min(apart(&u[1..], &v[1..], -1.0)) >= LEAF_SEPARATION)
        });
        if spread && norm(&theta) <= LEAF_MAX_ENTRY {
            return Ok(theta);
        }
    }
    Err(Error::invalid(format!("no separated member of leaf {} in {LEAF_DRAWS} draws", leaf.label())))
}

/// Rank, spectral gap, classification and dimension checks for one leaf.
pub fn leaf_rank_checks(model: &Model, leaf: &NeuronPartition, theta: &[f64], seed: u64) -> Result<ScenarioResult> {
    let net = model
        .as_two_layer()
        .ok_or_else(|| Error::Unsupported("leaf checks need a two-layer network".into()))?;
    let mut r = ScenarioResult::new(leaf.label());
    let predicted = predicted_leaf_dim(leaf, net.d);
    let report = lie_span_rank(model, theta, &LieSpanConfig::default_for(model).with_seed(seed))?;
    r.check("rank", report.rank as f64, Relation::Equals, predicted as f64);
    r.check("gap_ratio", report.gap_ratio, Relation::AtLeast, CONFIDENT_GAP);
    let declared = SimDescriptor::from_partition(leaf.clone()).dim(model)?;
    r.check("declared_dim", declared as f64, Relation::Equals, predicted as f64);
    let classified = classify_partition(net, theta, leaf.mode, DEFAULT_CLASSIFY_TOL)
        .map(|p| p == *leaf)
        .unwrap_or(false);
    r.check_true("classified", classified);
    Ok(r)
}

fn orbit_leaf_match(cfg: &SuiteConfig, with_flows: bool) -> Result<ScenarioResult> {
    let name = if with_flows {
        SuiteName::AllSimsSymmetryInduced
    } else {
        SuiteName::OrbitLeafMatch
    };
    let activation = cfg.activation.unwrap_or(Activation::Tanh);
    let (m, d) = (cfg.m.unwrap_or(2), cfg.d.unwrap_or(1));
    let mode = cfg.mode.unwrap_or(PartitionMode::Equality);
    let model: Model = TwoLayer::new(activation, m, d)?.into();
    let leaves = enumerate_leaves(m, mode)?;
    let members: Vec<Vec<f64>> = leaves
        .iter()
        .enumerate()
        .map(|(k, leaf)| leaf_member(&model, leaf, rng::derive_seed(cfg.seed, k as u64)))
        .collect::<Result<_>>()?;

    let per_leaf: Vec<ScenarioResult> = leaves
        .par_iter()
        .zip(&members)
        .enumerate()
        .map(|(k, (leaf, theta))| {
            let mut r = leaf_rank_checks(&model, leaf, theta, rng::derive_seed(cfg.seed, k as u64))?;
            if with_flows {
                let sim = SimDescriptor::from_partition(leaf.clone());
                let probe = cfg.probe().with_seed(rng::derive_seed(cfg.seed, k as u64));
                let report = invariance_probe(&model, &sim, theta, &probe)?;
                r.check("drift", report.max_drift, Relation::Below, HOLD_TOL);
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut result = ScenarioResult::new(name.as_str());
    for (leaf, r) in leaves.iter().zip(per_leaf) {
        result.absorb(&format!("leaf {}: ", leaf.label()), r);
    }

    if with_flows {
        let dims: Vec<usize> = leaves.iter().map(|l| predicted_leaf_dim(l, d)).collect();
        let pairs: Vec<(usize, usize)> = (0..leaves.len())
            .flat_map(|a| (0..leaves.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && dims[a] == dims[b])
            .collect();
        let escapes: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let sim = SimDescriptor::from_partition(leaves[a].clone());
                let pc = PerturbationConfig {
                    seed: rng::derive_seed(cfg.seed, (a * leaves.len() + b) as u64),
                    ..PerturbationConfig::default()
                };
                anchor_flow_distance(&model, &members[b], &sim, &pc)
            })
            .collect::<Result<_>>()?;
        for (&(a, b), &dist) in pairs.iter().zip(&escapes) {
            let key = format!("escape {} from {}", leaves[a].label(), leaves[b].label());
            if dist > ESCAPE_TOL {
                result.check(key, dist, Relation::Above, ESCAPE_TOL);
            } else {
                result.inconclusive(key);
            }
        }
    }
    Ok(result)
}

struct DeepItem {
    label: &'static str,
    activation: Activation,
    sim: SimDescriptor,
}

fn deep_symmetry(cfg: &SuiteConfig) -> Result<ScenarioResult> {
    let widths = cfg.widths.clone().unwrap_or_else(|| vec![2, 3, 2, 1]);
    let depth = widths.len() - 1;
    if depth < 2 || widths[1..depth].iter().any(|&n| n < 2) {
        return Err(Error::invalid("deep_symmetry needs at least one hidden layer of width ≥ 2"));
    }
    let odd = cfg.activation.unwrap_or(Activation::Tanh);
    let flat = cfg.activation.unwrap_or(Activation::CoshMinusOne);
    let hidden = &widths[1..depth];

    // I_1 = {2}, I_2 = {1}, … alternating.
    let sets: Vec<Vec<usize>> = (0..hidden.len()).map(|k| vec![usize::from(k % 2 == 0)]).collect();
    let sign_one: Vec<Vec<i8>> = hidden
        .iter()
        .enumerate()
        .map(|(k, &n)| (0..n).map(|i| if k == 0 && i == 0 { -1 } else { 1 }).collect())
        .collect();
    let sign_prime: Vec<Vec<i8>> = widths[1..]
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (0..n)
                .map(|i| if k < hidden.len() && i == k % n { -1 } else { 1 })
                .collect()
        })
        .collect();
    let swap: Vec<Permutation> = hidden
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if k == 0 {
                Permutation::swap(n, 0, 1)
            } else {
                Permutation::identity(n)
            }
        })
        .collect();

    let items = vec![
        DeepItem {
            label: "zero_pattern",
            activation: odd,
            sim: SimDescriptor::ZeroPattern { sets: sets.clone() },
        },
        DeepItem {
            label: "row_zero layer 1",
            activation: flat,
            sim: SimDescriptor::RowZero { layer: 1, row: 0 },
        },
        DeepItem {
            label: "row_zero layer 2",
            activation: flat,
            sim: SimDescriptor::RowZero {
                layer: 2,
                row: widths[2] - 1,
            },
        },
        DeepItem {
            label: "fixed_point_set sign",
            activation: odd,
            sim: SimDescriptor::FixedPointSet {
                elements: vec![GroupElement::sign(sign_one.clone())],
            },
        },
        DeepItem {
            label: "fixed_point_set sign_prime",
            activation: flat,
            sim: SimDescriptor::FixedPointSet {
                elements: vec![GroupElement::sign_prime(sign_prime.clone())],
            },
        },
        DeepItem {
            label: "fixed_point_set perm",
            activation: cfg.activation.unwrap_or(Activation::Sigmoid),
            sim: SimDescriptor::FixedPointSet {
                elements: vec![GroupElement::perm(swap)],
            },
        },
    ];

    let probe = cfg.probe();
    let drifts: Vec<(f64, Option<f64>)> = items
        .par_iter()
        .enumerate()
        .map(|(k, item)| {
            let model: Model = Mlp::new(item.activation, widths.clone())?.into();
            let mut rng = rng::seeded(rng::derive_seed(cfg.seed, k as u64));
            let theta = item.sim.project(&model, &model.random_theta(&mut rng, DEEP_INIT_SCALE))?;
            let report = invariance_probe(&model, &item.sim, &theta, &probe.clone().with_seed(cfg.seed ^ k as u64))?;
            let constancy = if item.sim.free_entries(&model)?.is_empty() {
                None
            } else {
                let data = Dataset::generate(&DatasetSpec::gaussian(25, cfg.seed), model.input_dim())?;
                let flow = FlowConfig::new(probe.t_end, probe.dt).with_monitors(vec![item.sim.clone()]);
                let traj = integrate(&model, &theta, &data, LossFn::Square, &flow)?;
                Some(
                    traj.channels
                        .iter()
                        .filter(|c| c.name.starts_with("const:"))
                        .map(|c| c.max())
                        .fold(0.0, f64::max),
                )
            };
            Ok((report.max_drift, constancy))
        })
        .collect::<Result<_>>()?;

    let mut result = ScenarioResult::new(SuiteName::DeepSymmetry.as_str());
    for (item, (drift, constancy)) in items.iter().zip(drifts) {
        result.check(format!("{} [{}]: drift", item.label, item.activation), drift, Relation::Below, HOLD_TOL);
        if let Some(c) = constancy {
            result.check(
                format!("{} [{}]: free entry constancy", item.label, item.activation),
                c,
                Relation::AtMost,
                CONSTANCY_TOL,
            );
        }
    }

    for (k, (label, activation, g)) in [
        ("infinitesimal sign", odd, GroupElement::sign(sign_one)),
        ("infinitesimal sign_prime", flat, GroupElement::sign_prime(sign_prime)),
    ]
    .into_iter()
    .enumerate()
    {
        let model: Model = Mlp::new(activation, widths.clone())?.into();
        let sim = SimDescriptor::FixedPointSet {
            elements: vec![g.clone()],
        };
        let mut worst = 0.0_f64;
        for point in 0..10_u64 {
            let mut rng = rng::seeded(rng::derive_seed(cfg.seed, 100 + 10 * k as u64 + point));
            let theta = sim.project(&model, &model.random_theta(&mut rng, DEEP_INIT_SCALE))?;
            let r = check_infinitesimal_invariance(&model, &g, &theta, 100, cfg.seed ^ point)?;
            worst = worst.max(r.max_violation);
        }
        result.check(format!("{label} [{activation}]: max violation"), worst, Relation::Below, INFINITESIMAL_TOL);
    }
    Ok(result)
}

/// `F(θ)(x) = (θ₁ − θ₂)x` as a linear model with features `{x, −x}`.
pub fn two_term_model() -> Model {
    let term = |coeff: f64| Term {
        coeff,
        powers: vec![1],
    };
    LinearModel::new(
        1,
        Basis::Terms {
            terms: vec![term(1.0), term(-1.0)],
        },
    )
    .expect("two-term model is valid")
    .into()
}

/// `g(θ) = (θ₁ + θ₂, 2θ₂)`.
pub fn two_term_invariant_map(theta: &[f64]) -> Vec<f64> {
    vec![theta[0] + theta[1], 2.0 * theta[1]]
}

fn invariant_map_gate(cfg: &SuiteConfig) -> Result<ScenarioResult> {
    let model = two_term_model();
    let mut result = ScenarioResult::new(SuiteName::InvariantMapGate.as_str());

    let mut rng = rng::seeded(cfg.seed);
    let mut invariance = 0.0_f64;
    for _ in 0..100 {
        let theta = rng::normal_vec(&mut rng, 2);
        let x = rng::normal_vec(&mut rng, 1);
        let diff = model.forward(&two_term_invariant_map(&theta), &x)? - model.forward(&theta, &x)?;
        invariance = invariance.max(diff.abs());
    }
    result.check("g preserves F", invariance, Relation::AtMost, 1e-12);

    let theta0 = [1.0, 0.0];
    let moved = two_term_invariant_map(&theta0);
    let displacement = moved.iter().zip(&theta0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    result.check("theta0 fixed by g", displacement, Relation::Equals, 0.0);

    // The induced field at x is (x, −x): θ₂ leaves zero at unit speed for x = 1.
    let field = eval_field(&model, &FieldExpr::base(vec![1.0]), &theta0)?;
    result.check("field at x=1 moves theta2", field[1].abs(), Relation::Above, 0.0);
    let data = Dataset::new(vec![vec![1.0]], vec![0.0])?;
    let traj = integrate(&model, &theta0, &data, LossFn::Linear, &FlowConfig::new(1.0, 1e-3))?;
    let drift = traj.thetas.iter().map(|t| t[1].abs()).fold(0.0, f64::max);
    result.check("flow drift from theta2 = 0", drift, Relation::Above, ESCAPE_TOL);
    Ok(result)
}
