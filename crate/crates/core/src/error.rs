use thiserror::Error;

/// Errors raised by the solvers, the ODE kernel and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },

    #[error("t = {t} is outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Riccati solution lost positivity at t = {t} (P = {value})")]
    NonPositiveRiccati { t: f64, value: f64 },

    #[error("degenerate model: {0}")]
    ModelDegenerate(String),

    #[error("target d = {d} is below the riskless vertex {vertex}")]
    InfeasibleTarget { d: f64, vertex: f64 },

    #[error("degenerate dual: e^(-2 A1 T) = 1, the risky positions earn no premium")]
    DegenerateDual,

    #[error("point (t = {t}, x = {x}) lies within {distance} of the switching curve")]
    NearCurve { t: f64, x: f64, distance: f64 },

    #[error("need at least 2 samples, got {0}")]
    InsufficientData(usize),

    #[error("{flagged} of {total} simulated paths became non-finite")]
    Simulation { flagged: usize, total: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
