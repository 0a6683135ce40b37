//! Independent oracles and theorem-level scenario suites.

mod baseline;
mod degeneracy;
mod scenario;
mod suites;

pub use baseline::{linear_baseline_check, BaselineConfig};
pub use degeneracy::{
    degeneracy_report, gram_independence, DegeneracyReport, GramConfig, GramReport, Violation, ViolationKind,
};
pub use scenario::{Relation, ScenarioResult};
pub use suites::{
    leaf_member, leaf_rank_checks, theorem_suite, two_term_invariant_map, two_term_model, SuiteConfig, SuiteName,
    CONSTANCY_TOL, INFINITESIMAL_TOL,
};
