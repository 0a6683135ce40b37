//! Linear models: the Lie closure is all of parameter space.

use serde::{Deserialize, Serialize};

use super::scenario::{Relation, ScenarioResult};
use crate::error::{Error, Result};
use crate::liegeom::{eval_field, lie_span_rank, FieldExpr, LieSpanConfig};
use crate::model::{LinearModel, Model};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub n_points: usize,
    pub seed: u64,
    /// Bracket magnitude bound.
    pub bracket_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_points: 10,
            seed: 0,
            bracket_tol: 1e-12,
        }
    }
}

/// Rank `M` at `n_points` random `θ` and vanishing brackets between base
/// fields.
pub fn linear_baseline_check(model: &LinearModel, cfg: &BaselineConfig) -> Result<ScenarioResult> {
    if !model.is_independent(cfg.seed) {
        return Err(Error::invalid("linear baseline needs an independent basis"));
    }
    let wrapped: Model = model.clone().into();
    let n = wrapped.n_params();
    let mut result = ScenarioResult::new("linear_baseline");
    let mut rng = rng::seeded(cfg.seed);
    let mut min_rank = usize::MAX;
    let mut max_bracket = 0.0_f64;
    for point in 0..cfg.n_points {
        let theta = rng::normal_vec(&mut rng, n);
        let lie = LieSpanConfig::default_for(&wrapped).with_seed(rng::derive_seed(cfg.seed, point as u64));
        min_rank = min_rank.min(lie_span_rank(&wrapped, &theta, &lie)?.rank);
        let anchors: Vec<Vec<f64>> = (0..4).map(|_| rng::normal_vec(&mut rng, model.d)).collect();
        for (i, a) in anchors.iter().enumerate() {
            for b in &anchors[i + 1..] {
                let expr = FieldExpr::bracket(FieldExpr::base(a.clone()), FieldExpr::base(b.clone()));
                let v = eval_field(&wrapped, &expr, &theta)?;
                max_bracket = v.iter().map(|x| x.abs()).fold(max_bracket, f64::max);
            }
        }
    }
    result.check("min rank", min_rank as f64, Relation::Equals, n as f64);
    result.check("max bracket", max_bracket, Relation::AtMost, cfg.bracket_tol);
    Ok(result)
}
