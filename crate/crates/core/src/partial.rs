//! Efficient strategies and frontier when the drift is only filtered.
//!
//! The Lagrange problem `min E|X(T) - gamma|^2 - (gamma - d)^2` is solved
//! by the feedback
//!
//! ```text
//! u = xi+ (X - gamma e^{-∫_t^T r})^+ + xi- (X - gamma e^{-∫_t^T r})^-
//! ```
//!
//! and the dual maximiser `gamma*` pins `E X(T) = d`. Only cheap
//! reinsurance (`eta = theta`) is supported here.

use crate::cone::{self, Branch, ControlPair, LqCoefficients, RiccatiSolution};
use crate::error::{Error, Result};
use crate::filter::FilterState;
use crate::frontier::{FrontierCurve, FrontierPoint};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproximationMode {
    /// The filter is degenerate, so the drift is deterministic and the
    /// Riccati pair is exact.
    Exact,
    /// The filtered drift is replaced by its mean `m0 e^{∫h}` inside the
    /// Riccati pair. Approximate; Monte Carlo reports the realised gap.
    ProjectedDrift,
}

impl ApproximationMode {
    pub fn for_model(model: &ModelParams) -> Self {
        if model.drift.is_degenerate() {
            ApproximationMode::Exact
        } else {
            ApproximationMode::ProjectedDrift
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ApproximationMode::Exact => "exact",
            ApproximationMode::ProjectedDrift => "projected_drift",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialSolution {
    pub riccati: RiccatiSolution,
    pub gamma_star: f64,
    /// Riskless vertex `x0 e^{∫_0^T r}`.
    pub d0: f64,
    /// Target the solution was built for.
    pub d: f64,
    pub approximation_mode: ApproximationMode,
}

impl PartialSolution {
    /// Builds the Riccati pair on the projected drift and the dual
    /// multiplier for `model.objective.d`.
    pub fn solve(model: &ModelParams, steps: usize) -> Result<Self> {
        if !model.claim.is_cheap() {
            return Err(Error::Unsupported(
                "the partial-information solver requires cheap reinsurance (eta = theta)".into(),
            ));
        }
        model.validate_for_partial()?;
        let m_bar = cone::projected_drift(model, steps)?;
        let riccati = cone::solve_riccati_pair(model, &m_bar, steps)?;
        let gamma_star = gamma_star_partial(&riccati, model)?;
        Ok(PartialSolution {
            riccati,
            gamma_star,
            d0: riskless_vertex(model),
            d: model.objective.d,
            approximation_mode: ApproximationMode::for_model(model),
        })
    }

    /// Discounted switching level `gamma* e^{-∫_t^T r}`.
    pub fn switching_level(&self, model: &ModelParams, t: f64) -> f64 {
        self.gamma_star * model.discount_to_horizon(t)
    }
}

impl ModelParams {
    fn validate_for_partial(&self) -> Result<()> {
        let mut rep = self.validate();
        // the mode-specific drift restrictions of full mode do not apply here
        rep.violations.retain(|v| v.field != "drift" && v.field != "market");
        rep.into_result()
    }
}

/// `x0 e^{∫_0^T r}`.
pub fn riskless_vertex(model: &ModelParams) -> f64 {
    model.objective.x0 * model.growth(0.0, model.horizon())
}

/// `P-(0) e^{-2∫_0^T r}`; must lie strictly below one.
pub fn frontier_ratio(riccati: &RiccatiSolution, model: &ModelParams) -> Result<f64> {
    let c = riccati.p_minus.first() / model.growth(0.0, model.horizon()).powi(2);
    if !(c < 1.0) {
        return Err(Error::ModelDegenerate(format!(
            "1 - P-(0) e^(-2∫r) = {} is not positive",
            1.0 - c
        )));
    }
    Ok(c)
}

/// Coefficient of `(d - d0)^2` on the frontier.
pub fn frontier_coefficient(riccati: &RiccatiSolution, model: &ModelParams) -> Result<f64> {
    let c = frontier_ratio(riccati, model)?;
    Ok(c / (1.0 - c))
}

fn check_target(d: f64, d0: f64) -> Result<()> {
    if d < d0 {
        Err(Error::InfeasibleTarget { d, vertex: d0 })
    } else {
        Ok(())
    }
}

/// `gamma* = (d - x0 P-(0) e^{-∫r}) / (1 - P-(0) e^{-2∫r})` for
/// `d = model.objective.d`.
pub fn gamma_star_partial(riccati: &RiccatiSolution, model: &ModelParams) -> Result<f64> {
    gamma_star_for_target(riccati, model, model.objective.d)
}

pub fn gamma_star_for_target(riccati: &RiccatiSolution, model: &ModelParams, d: f64) -> Result<f64> {
    let c = frontier_ratio(riccati, model)?;
    check_target(d, riskless_vertex(model))?;
    let disc = 1.0 / model.growth(0.0, model.horizon());
    let x0 = model.objective.x0;
    Ok((d - x0 * riccati.p_minus.first() * disc) / (1.0 - c))
}

/// Optimal Lagrange cost `J*(x0, gamma)`:
/// `P+(0) (y0^+)^2 + P-(0) (y0^-)^2 - (gamma - d)^2`, `y0 = x0 - gamma e^{-∫r}`.
pub fn dual_value_partial(riccati: &RiccatiSolution, model: &ModelParams, gamma: f64) -> f64 {
    let disc = 1.0 / model.growth(0.0, model.horizon());
    let y0 = model.objective.x0 - gamma * disc;
    let pos = y0.max(0.0);
    let neg = (-y0).max(0.0);
    let d = model.objective.d;
    riccati.p_plus.first() * pos * pos + riccati.p_minus.first() * neg * neg - (gamma - d).powi(2)
}

pub fn frontier_partial(
    riccati: &RiccatiSolution,
    model: &ModelParams,
    d_grid: &[f64],
) -> Result<FrontierCurve> {
    let k = frontier_coefficient(riccati, model)?;
    let d0 = riskless_vertex(model);
    let points = d_grid
        .iter()
        .map(|&d| {
            check_target(d, d0)?;
            Ok(FrontierPoint {
                d,
                variance: k * (d - d0).powi(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontierCurve {
        points,
        mode: ApproximationMode::for_model(model).as_str(),
    })
}

/// Efficient feedback at `(t, x)` using the filtered drift `filter.m`.
pub fn feedback_partial(
    t: f64,
    x: f64,
    filter: &FilterState,
    sol: &PartialSolution,
    model: &ModelParams,
) -> ControlPair {
    let coeffs = LqCoefficients::at(model, t, filter.m);
    let y = x - sol.switching_level(model, t);
    if y >= 0.0 {
        cone::xi_unchecked(Branch::Plus, &coeffs).scale(y)
    } else {
        cone::xi_unchecked(Branch::Minus, &coeffs).scale(-y)
    }
}
