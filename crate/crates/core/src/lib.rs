//! Estimation error versus Age of Information in a single-loop networked
//! control system.
//!
//! A sensor samples an LTI plant and sends each sample over a channel with
//! i.i.d. transmission times; the controller's estimator runs open loop on
//! the freshest delivered sample. When sampling does not look at the plant
//! state, the time-average squared estimation error equals `E[f(Δ)]`, a
//! renewal ratio over the Age of Information `Δ` with
//! `f(Δ) = Σ_{i<Δ} Tr((Aⁱ)ᵀ Aⁱ Σ)`.
//!
//! - [`lti`]: plant model, cost function `f`, noise traces and the error sum.
//! - [`channel`]: transmission-time laws with exact moments.
//! - [`policy`]: zero-wait, constant and MEAS threshold waiting policies.
//! - [`analytic`]: closed renewal-ratio evaluators for `E[f(Δ)]` and `E[Δ]`.
//! - [`sim`]: slot-level and renewal-level Monte Carlo, closed-loop demo.
//! - [`experiments`]: the CSV-producing commands behind the `ncs-aoi` binary.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod lti;
pub mod policy;
pub mod rng;
pub mod sim;

pub use analytic::{expected_aoi, expected_f_delta, zero_wait_geometric_aoi, RenewalEvaluation};
pub use channel::TransmissionDistribution;
pub use error::{Error, Result};
pub use lti::{
    build_cost_function, check_linear_cost, error_from_noise, per_slot_error_variance,
    AoiCostFunction, NoiseTrace, SystemModel,
};
pub use policy::{make_policy, solve_meas, MeasSolution, PolicyKind, PolicySpec, WaitingPolicy};
pub use sim::{run_full, run_renewal_fast, RunMetrics, SimConfig, SimMode};
