//! Gradient flow `dθ/dt = −∇L(θ)` for arbitrary datasets and losses, with
//! drift, condensation and constancy monitors.

mod condense;
mod data;
mod export;
mod integrate;
mod probe;

pub use condense::{condensation_at, condensation_metrics, CondensationChannels};
pub use data::{loss_and_grad, Dataset, DatasetSpec, Generator, LossFn, Provenance};
pub use export::{csv_header, write_csv};
pub use integrate::{
    integrate, Channel, ChannelMax, FlowConfig, FlowStatus, FlowSummary, FlowTrajectory, Scheme, DEFAULT_ADAPTIVE_TOL,
    DEFAULT_BLOWUP_NORM, DEFAULT_DT, DEFAULT_T,
};
pub use probe::{
    anchor_flow_distance, invariance_probe, perturbation_probe, PerturbationConfig, PerturbationReport, ProbeConfig, ProbeReport,
    TrialResult, ESCAPE_TOL, HOLD_TOL, ON_MANIFOLD_TOL,
};
