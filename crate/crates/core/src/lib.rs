//! Optimal mean-variance reinsurance and investment for an insurer whose
//! stock drift is hidden (partial information) or observed (full
//! information).
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, coefficient curves, config parsing and the
//!   riskless vertex `d_min`.
//! - [`ode`]: fixed-step RK4, sampled curves and seeded Gaussian streams.
//! - [`filter`]: Kalman–Bucy filter for the hidden drift.
//! - [`cone`]: cone-constrained LQ minimisers and the backward Riccati pair.
//! - [`partial`]: efficient strategies and frontier under partial information.
//! - [`full`]: viscosity-solution value function, dual multiplier and
//!   frontier under full information, plus HJB residual checks.
//! - [`montecarlo`]: path simulation used to validate the closed forms.
//! - [`validation`]: the check suite behind `mvre validate`.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod error;
pub mod filter;
pub mod frontier;
pub mod full;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod partial;
pub mod validation;

pub use cone::{Branch, ControlPair, LqCoefficients, RiccatiSolution};
pub use error::{Error, Result};
pub use filter::{DriftFilter, FilterPath, FilterState};
pub use frontier::{FrontierCurve, FrontierPoint};
pub use full::{FullInfoOptions, FullInfoSolution, Region};
pub use model::{
    ClaimParams, Curve, DriftParams, InfoMode, MarketParams, ModelParams, Objective,
    ValidationReport,
};
pub use montecarlo::{Estimate, PathEnsemble, SimConfig, SimMode, Strategy};
pub use ode::{RngStream, SampledCurve};
pub use partial::{ApproximationMode, PartialSolution};

/// Default number of RK4 steps on `[0, T]`.
pub const DEFAULT_ODE_STEPS: usize = 10_000;
