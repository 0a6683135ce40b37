//! Structural invariant manifolds of analytic models.
//!
//! The crate evaluates the family of induced vector fields
//! `{∇_θ F(·)(x) | x ∈ R^d}` of a parametric model, estimates the rank of its
//! Lie closure at a point, classifies two-layer parameters into the leaves of
//! the invariant partition induced by permutation and sign symmetries, and
//! checks by gradient-flow integration that candidate manifolds stay
//! invariant for arbitrary data and losses.
//!
//! Modules:
//! - [`model`]: two-layer, fully-connected and linear models.
//! - [`liegeom`]: induced fields, Lie brackets and Lie-closure rank.
//! - [`symmetry`]: group actions, neuron partitions, manifold descriptors.
//! - [`flow`]: gradient-flow integration and invariance probes.
//! - [`verify`]: independent oracles and theorem-level scenario suites.
//!
//! The guide in `book/` walks through each concept with runnable snippets.

pub mod error;
pub mod flow;
pub mod json;
pub mod liegeom;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Activation, Model, ModelSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// Guide chapters compiled as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/lie_rank.md")]
    mod lie_rank {}
    #[doc = include_str!("../../../book/src/leaves.md")]
    mod leaves {}
    #[doc = include_str!("../../../book/src/manifolds.md")]
    mod manifolds {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
