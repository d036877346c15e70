//! Cone-constrained LQ core.
//!
//! With `u = (q, pi) >= 0`, the reduced Hamiltonians (zero martingale
//! part) are
//!
//! ```text
//! H+(P) = min_{u>=0} P u'DD'u + 2 P B·u
//! H-(P) = min_{u>=0} P u'DD'u - 2 P B·u
//! ```
//!
//! `DD' = diag(b^2, sigma^2)` because the claim noise and the innovation are
//! independent, so each coordinate is minimised on its own half-line. The
//! backward pair `P±' = -(2 r P± + H±(P±))`, `P±(T) = 1` then reduces to
//! deterministic ODEs.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{self, SampledCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Wealth above the discounted target.
    Plus,
    /// Wealth below the discounted target.
    Minus,
}

/// Reinsurance retention `q` and risky amount `pi`, both on the cone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlPair {
    pub q: f64,
    pub pi: f64,
}

impl ControlPair {
    pub const ZERO: ControlPair = ControlPair { q: 0.0, pi: 0.0 };

    pub fn scale(self, k: f64) -> Self {
        ControlPair {
            q: self.q * k,
            pi: self.pi * k,
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.q >= 0.0 && self.pi >= 0.0
    }
}

/// Drift row `B = (b_q, b_pi)`, diffusion diagonal `(d_q, d_pi)` and the
/// affine drift `f` of the controlled wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqCoefficients {
    pub b_q: f64,
    pub b_pi: f64,
    pub d_q: f64,
    pub d_pi: f64,
    pub f: f64,
}

impl LqCoefficients {
    pub fn new(b_q: f64, b_pi: f64, d_q: f64, d_pi: f64, f: f64) -> Result<Self> {
        if !(d_q > 0.0 && d_pi > 0.0) {
            return Err(Error::Domain(format!(
                "diffusion coefficients must be positive, got ({d_q}, {d_pi})"
            )));
        }
        Ok(LqCoefficients { b_q, b_pi, d_q, d_pi, f })
    }

    /// Coefficients at time `t` for drift estimate `m` (cheap case, `f = 0`).
    pub fn at(model: &ModelParams, t: f64, m: f64) -> Self {
        let c = &model.claim;
        LqCoefficients {
            b_q: c.a * c.eta,
            b_pi: m - model.market.r.eval(t),
            d_q: c.b,
            d_pi: model.market.sigma.eval(t),
            f: 0.0,
        }
    }

    fn drifts(&self) -> [(f64, f64); 2] {
        [(self.b_q, self.d_q), (self.b_pi, self.d_pi)]
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("P must be positive, got {p}")))
    }
}

#[inline]
fn branch_sign(branch: Branch) -> f64 {
    match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    }
}

/// The objective `P u'DD'u ± 2 P B·u` being minimised.
pub fn reduced_objective(branch: Branch, p: f64, coeffs: &LqCoefficients, u: ControlPair) -> f64 {
    let s = branch_sign(branch);
    let quad = coeffs.d_q.powi(2) * u.q * u.q + coeffs.d_pi.powi(2) * u.pi * u.pi;
    let lin = coeffs.b_q * u.q + coeffs.b_pi * u.pi;
    p * quad + 2.0 * s * p * lin
}

/// Minimiser over the cone; independent of `P`.
pub fn xi_minimizer(branch: Branch, p: f64, coeffs: &LqCoefficients) -> Result<ControlPair> {
    check_p(p)?;
    Ok(xi_unchecked(branch, coeffs))
}

#[inline]
pub(crate) fn xi_unchecked(branch: Branch, coeffs: &LqCoefficients) -> ControlPair {
    let s = branch_sign(branch);
    let [(bq, dq), (bp, dp)] = coeffs.drifts();
    ControlPair {
        q: (-s * bq / (dq * dq)).max(0.0),
        pi: (-s * bp / (dp * dp)).max(0.0),
    }
}

/// Minimum value of the reduced objective; always `<= 0`.
pub fn hamiltonian_min(branch: Branch, p: f64, coeffs: &LqCoefficients) -> Result<f64> {
    check_p(p)?;
    Ok(p * hamiltonian_rate(branch, coeffs))
}

/// `H±(P) / P`.
fn hamiltonian_rate(branch: Branch, coeffs: &LqCoefficients) -> f64 {
    let s = branch_sign(branch);
    coeffs
        .drifts()
        .iter()
        .map(|&(b, d)| {
            let active = (-s * b).max(0.0);
            -active * active / (d * d)
        })
        .sum()
}

/// Sampled backward solutions `P+`, `P-`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p_plus: SampledCurve,
    pub p_minus: SampledCurve,
    /// The martingale parts vanish; always true for the supported
    /// deterministic-coefficient reductions.
    pub lambda_zero: bool,
}

impl RiccatiSolution {
    pub fn p(&self, branch: Branch) -> &SampledCurve {
        match branch {
            Branch::Plus => &self.p_plus,
            Branch::Minus => &self.p_minus,
        }
    }
}

/// `m̄(t) = m0 e^{∫h}` sampled on a uniform grid.
pub fn projected_drift(model: &ModelParams, steps: usize) -> Result<SampledCurve> {
    SampledCurve::from_fn(model.horizon(), steps, |t| model.drift.mean_drift(t))
}

/// Backward RK4 for `P±' = -(2 r P± + H±(P±))` with the drift `m_bar`.
pub fn solve_riccati_pair(
    model: &ModelParams,
    m_bar: &SampledCurve,
    steps: usize,
) -> Result<RiccatiSolution> {
    let horizon = model.horizon();
    let solve = |branch: Branch| -> Result<SampledCurve> {
        let rhs = |t: f64, y: &[f64; 1]| {
            let m = m_bar.eval(t).unwrap_or(f64::NAN);
            let coeffs = LqCoefficients::at(model, t, m);
            let p = y[0];
            [-(2.0 * model.market.r.eval(t) * p + p * hamiltonian_rate(branch, &coeffs))]
        };
        let traj = ode::integrate_backward(rhs, [1.0], horizon, steps)?;
        let curve = traj.component(0);
        if let Some(i) = curve.values().iter().position(|&p| !(p > 0.0)) {
            return Err(Error::NonPositiveRiccati {
                t: curve.grid()[i],
                value: curve.values()[i],
            });
        }
        Ok(curve)
    };
    Ok(RiccatiSolution {
        p_plus: solve(Branch::Plus)?,
        p_minus: solve(Branch::Minus)?,
        lambda_zero: true,
    })
}
