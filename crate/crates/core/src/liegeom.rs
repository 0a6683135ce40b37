//! Induced vector fields, Lie brackets and the rank of the Lie closure.
//!
//! Every input `x` induces the parameter-space field `X_x(θ) = ∇_θ F(θ)(x)`.
//! Brackets follow the coordinate convention
//! `[X, Y](θ) = DX(θ)·Y(θ) − DY(θ)·X(θ)`, i.e. `[X,Y]h = Y(Xh) − X(Yh)`.
//! Rank is sign-invariant; only field-value tests depend on this choice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{inf_norm, Model};
use crate::rng;
pub use crate::symmetry::predicted_leaf_dim;

/// Syntax tree of bracket expressions over induced fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldExpr {
    Base { anchor: Vec<f64> },
    Bracket { left: Box<FieldExpr>, right: Box<FieldExpr> },
}

impl FieldExpr {
    pub fn base(anchor: Vec<f64>) -> Self {
        FieldExpr::Base { anchor }
    }

    pub fn bracket(left: FieldExpr, right: FieldExpr) -> Self {
        FieldExpr::Bracket {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            FieldExpr::Base { .. } => 0,
            FieldExpr::Bracket { left, right } => 1 + left.depth().max(right.depth()),
        }
    }

    fn check_anchors(&self, d: usize) -> Result<()> {
        match self {
            FieldExpr::Base { anchor } => crate::error::check_len("anchor", d, anchor.len()),
            FieldExpr::Bracket { left, right } => {
                left.check_anchors(d)?;
                right.check_anchors(d)
            }
        }
    }
}

fn checked(expr: &FieldExpr, v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::non_finite(format!("field {expr:?}")))
    }
}

fn eval_unchecked(model: &Model, expr: &FieldExpr, theta: &[f64]) -> Result<Vec<f64>> {
    match expr {
        FieldExpr::Base { anchor } => checked(expr, model.grad_theta(theta, anchor)?),
        FieldExpr::Bracket { left, right } => {
            let xl = eval_unchecked(model, left, theta)?;
            let yr = eval_unchecked(model, right, theta)?;
            let dx_y = directional_derivative(model, left, theta, &yr)?;
            let dy_x = directional_derivative(model, right, theta, &xl)?;
            checked(expr, dx_y.iter().zip(&dy_x).map(|(a, b)| a - b).collect())
        }
    }
}

/// `DX(θ)·u`: exact Hessian-vector product for base fields, central
/// differences of the nested field otherwise.
fn directional_derivative(model: &Model, expr: &FieldExpr, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    match expr {
        FieldExpr::Base { anchor } => model.hess_theta_vec(theta, anchor, u),
        FieldExpr::Bracket { .. } => {
            let umax = inf_norm(u);
            if umax == 0.0 {
                return Ok(vec![0.0; u.len()]);
            }
            let h = f64::EPSILON.cbrt() * inf_norm(theta).max(1.0) / umax.max(1.0);
            let plus: Vec<f64> = theta.iter().zip(u).map(|(t, d)| t + h * d).collect();
            let minus: Vec<f64> = theta.iter().zip(u).map(|(t, d)| t - h * d).collect();
            let fp = eval_unchecked(model, expr, &plus)?;
            let fm = eval_unchecked(model, expr, &minus)?;
            Ok(fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * h)).collect())
        }
    }
}

/// Value of the field expression at `θ`.
pub fn eval_field(model: &Model, expr: &FieldExpr, theta: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len("theta", model.n_params(), theta.len())?;
    expr.check_anchors(model.input_dim())?;
    eval_unchecked(model, expr, theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieSpanConfig {
    pub n_anchors: usize,
    pub bracket_depth: usize,
    pub rank_tol: f64,
    pub seed: u64,
    /// Hard limit on the number of stacked fields.
    #[serde(default = "default_max_fields")]
    pub max_fields: usize,
    /// Operands per bracket level: the first `bracket_candidates` fields of
    /// the previous level are bracketed with the first `bracket_candidates`
    /// base fields.
    #[serde(default = "default_bracket_candidates")]
    pub bracket_candidates: usize,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const CONFIDENT_GAP: f64 = 1e4;

fn default_max_fields() -> usize {
    512
}

fn default_bracket_candidates() -> usize {
    8
}

impl LieSpanConfig {
    /// `4M` anchors; depth 0 for two-layer and linear models, 1 for deep nets.
    pub fn default_for(model: &Model) -> Self {
        LieSpanConfig {
            n_anchors: 4 * model.n_params(),
            bracket_depth: usize::from(matches!(model, Model::Mlp(_))),
            rank_tol: DEFAULT_RANK_TOL,
            seed: 0,
            max_fields: default_max_fields(),
            bracket_candidates: default_bracket_candidates(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_anchors(mut self, n: usize) -> Self {
        self.n_anchors = n;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.bracket_depth = depth;
        self
    }
}

/// SVD evidence for `dim Lie_θ(F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieSpanReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    #[serde(with = "crate::json::inf_as_null")]
    pub gap_ratio: f64,
    pub n_fields: usize,
    pub n_params: usize,
    pub n_anchors: usize,
    pub bracket_depth: usize,
    pub bracket_candidates: usize,
    pub max_fields: usize,
    pub rank_tol: f64,
    pub confident: bool,
    /// Rank of the fields up to each bracket depth, `0..=bracket_depth`.
    pub rank_by_depth: Vec<usize>,
}

/// Enumerate the stacked fields, level by level.
pub fn enumerate_fields(anchors: &[Vec<f64>], depth: usize, candidates: usize) -> Vec<Vec<FieldExpr>> {
    let bases: Vec<FieldExpr> = anchors.iter().cloned().map(FieldExpr::base).collect();
    let mut levels = vec![bases.clone()];
    let right: Vec<&FieldExpr> = bases.iter().take(candidates).collect();
    for k in 1..=depth {
        let prev = &levels[k - 1];
        let left: Vec<&FieldExpr> = prev.iter().take(candidates).collect();
        let mut next = Vec::new();
        for (i, l) in left.iter().enumerate() {
            for (j, r) in right.iter().enumerate() {
                if k == 1 && j <= i {
                    continue;
                }
                next.push(FieldExpr::bracket((*l).clone(), (*r).clone()));
            }
        }
        levels.push(next);
    }
    levels
}

fn field_count(n_anchors: usize, depth: usize, candidates: usize) -> usize {
    let c = candidates.min(n_anchors);
    let mut total = n_anchors;
    let mut prev = n_anchors;
    for k in 1..=depth {
        let left = c.min(prev);
        let level = if k == 1 { c * c.saturating_sub(1) / 2 } else { left * c };
        total += level;
        prev = level;
    }
    total
}

/// Sample `n_anchors` standard-normal inputs, stack the induced fields and
/// their brackets evaluated at `θ`, and count singular values above
/// `rank_tol · σ_1`.
pub fn lie_span_rank(model: &Model, theta: &[f64], cfg: &LieSpanConfig) -> Result<LieSpanReport> {
    if cfg.n_anchors == 0 {
        return Err(Error::invalid("n_anchors must be at least 1"));
    }
    if !(cfg.rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    crate::error::check_len("theta", model.n_params(), theta.len())?;
    let requested = field_count(cfg.n_anchors, cfg.bracket_depth, cfg.bracket_candidates);
    if requested > cfg.max_fields {
        return Err(Error::Budget {
            requested,
            limit: cfg.max_fields,
        });
    }

    let mut r = rng::seeded(cfg.seed);
    let d = model.input_dim();
    let anchors: Vec<Vec<f64>> = (0..cfg.n_anchors).map(|_| rng::normal_vec(&mut r, d)).collect();
    let levels = enumerate_fields(&anchors, cfg.bracket_depth, cfg.bracket_candidates);
    debug_assert_eq!(levels.iter().map(Vec::len).sum::<usize>(), requested);

    let exprs: Vec<&FieldExpr> = levels.iter().flatten().collect();
    let rows: Vec<Vec<f64>> = exprs
        .par_iter()
        .map(|e| eval_unchecked(model, e, theta))
        .collect::<Result<_>>()?;

    let m = model.n_params();
    let mut rank_by_depth = Vec::with_capacity(levels.len());
    let mut upto = 0;
    for level in &levels[..levels.len() - 1] {
        upto += level.len();
        let sv = linalg::singular_values(&rows[..upto], m);
        rank_by_depth.push(linalg::numerical_rank(&sv, cfg.rank_tol));
    }
    let singular_values = linalg::singular_values(&rows, m);
    let rank = linalg::numerical_rank(&singular_values, cfg.rank_tol);
    rank_by_depth.push(rank);
    let gap_ratio = linalg::gap_ratio(&singular_values, rank);
    let n_fields = rows.len();
    Ok(LieSpanReport {
        rank,
        confident: gap_ratio >= CONFIDENT_GAP || rank == n_fields.min(m),
        singular_values,
        gap_ratio,
        n_fields,
        n_params: m,
        n_anchors: cfg.n_anchors,
        bracket_depth: cfg.bracket_depth,
        bracket_candidates: cfg.bracket_candidates,
        max_fields: cfg.max_fields,
        rank_tol: cfg.rank_tol,
        rank_by_depth,
    })
}
