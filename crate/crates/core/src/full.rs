//! Full-information problem with constant coefficients.
//!
//! With the shifted wealth `x = X - (d - gamma)` the auxiliary problem is
//! `min E[x(T)^2] / 2` subject to
//! `dx = [r x + B u + f] dt + b q dW0 + sigma pi dW1`,
//! `B = (a eta, mu - r)`, `f = a theta - a eta + (d - gamma) r`.
//! The value function is piecewise quadratic, smooth away from the switching
//! curve `x + g1(t) e^{-r(T-t)} = 0` and a viscosity solution across it.
//!
//! Two constants appear in the efficient frontier. Expanding
//! `e^{rT} x(0) + g1(0)` gives `d_min - (d - gamma)` with the riskless vertex
//! `d_min = x0 e^{rT} + a(theta - eta)(e^{rT} - 1)/r`; this is the default.
//! [`FullInfoOptions::compat_paper_formulas`] swaps in the constant
//! `x0 e^{rT} + (a theta - a eta)/r` instead.

use crate::cone::{self, Branch, ControlPair, LqCoefficients};
use crate::error::{Error, Result};
use crate::frontier::{FrontierCurve, FrontierPoint};
use crate::model::ModelParams;
use crate::ode::{self, SampledCurve};
use crate::DEFAULT_ODE_STEPS;

/// Constant coefficients of a full-information model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullInfoParams {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub eta: f64,
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl FullInfoParams {
    pub fn from_model(model: &ModelParams) -> Result<Self> {
        let r = model.market.r.as_constant();
        let sigma = model.market.sigma.as_constant();
        let (Some(r), Some(sigma)) = (r, sigma) else {
            return Err(Error::Unsupported(
                "full-information closed forms need constant r and sigma".into(),
            ));
        };
        if !(model.drift.is_degenerate() && model.drift.h.is_zero()) {
            return Err(Error::Unsupported(
                "full-information closed forms need an observed constant drift".into(),
            ));
        }
        if !(r > 0.0 && sigma > 0.0 && model.claim.b > 0.0) {
            return Err(Error::InvalidModel("r, sigma and b must be positive".into()));
        }
        let c = &model.claim;
        Ok(FullInfoParams {
            a: c.a,
            b: c.b,
            theta: c.theta,
            eta: c.eta,
            mu: model.drift.m0,
            r,
            sigma,
            x0: model.objective.x0,
            horizon: model.objective.horizon,
        })
    }

    /// `A1 = -(mu - r)^2 / (2 sigma^2) - a^2 eta^2 / (2 b^2)`. A coordinate
    /// with a negative drift (`mu < r`) is inactive on the cone and drops out.
    pub fn a1(&self) -> f64 {
        -(self.mu - self.r).max(0.0).powi(2) / (2.0 * self.sigma.powi(2))
            - (self.a * self.eta).max(0.0).powi(2) / (2.0 * self.b.powi(2))
    }

    pub fn coefficients(&self, d: f64, gamma: f64) -> LqCoefficients {
        LqCoefficients {
            b_q: self.a * self.eta,
            b_pi: self.mu - self.r,
            d_q: self.b,
            d_pi: self.sigma,
            f: self.affine_drift(d, gamma),
        }
    }

    /// `f = a theta - a eta + (d - gamma) r`.
    pub fn affine_drift(&self, d: f64, gamma: f64) -> f64 {
        self.a * (self.theta - self.eta) + (d - gamma) * self.r
    }

    /// `g1(t) = f (e^{r(T-t)} - 1) / r`.
    pub fn g1(&self, t: f64, d: f64, gamma: f64) -> f64 {
        self.affine_drift(d, gamma) * (self.r * (self.horizon - t)).exp_m1() / self.r
    }

    /// `g1(t) e^{-r(T-t)}`, evaluated without cancellation.
    pub fn discounted_g1(&self, t: f64, d: f64, gamma: f64) -> f64 {
        -self.affine_drift(d, gamma) * (-self.r * (self.horizon - t)).exp_m1() / self.r
    }

    /// Riskless vertex `x0 e^{rT} + a (theta - eta) (e^{rT} - 1) / r`.
    pub fn riskless_vertex(&self) -> f64 {
        let rt = self.r * self.horizon;
        self.x0 * rt.exp() + self.a * (self.theta - self.eta) * rt.exp_m1() / self.r
    }

    /// The alternative constant `x0 e^{rT} + (a theta - a eta) / r`.
    pub fn printed_vertex(&self) -> f64 {
        self.x0 * (self.r * self.horizon).exp() + self.a * (self.theta - self.eta) / self.r
    }

    pub fn vertex(&self, compat: bool) -> f64 {
        if compat {
            self.printed_vertex()
        } else {
            self.riskless_vertex()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullInfoOptions {
    /// Use the printed frontier/dual constant instead of the riskless vertex.
    pub compat_paper_formulas: bool,
    /// Replaces the closed-form `A1`. Only for exercising the validator.
    pub a1_override: Option<f64>,
    pub steps: usize,
}

impl Default for FullInfoOptions {
    fn default() -> Self {
        FullInfoOptions {
            compat_paper_formulas: false,
            a1_override: None,
            steps: DEFAULT_ODE_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x + g1 e^{-r(T-t)} > 0`: hold nothing.
    AboveCurve,
    /// `x + g1 e^{-r(T-t)} < 0`: invest and retain claims.
    BelowCurve,
    OnCurve,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::AboveCurve => "above_curve",
            Region::BelowCurve => "below_curve",
            Region::OnCurve => "on_curve",
        }
    }
}

/// Region classification tolerance, relative to `max(1, |x|)`.
pub const REGION_TOL: f64 = 1e-12;

/// `P, Q, R` of a quadratic branch `V = P x^2 / 2 + Q x + R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PqrCurves {
    pub p: SampledCurve,
    pub q: SampledCurve,
    pub r: SampledCurve,
}

impl PqrCurves {
    fn from_fn(horizon: f64, steps: usize, f: impl Fn(f64) -> [f64; 3]) -> Result<Self> {
        let grid = ode::uniform_grid(horizon, steps);
        let vals: Vec<[f64; 3]> = grid.iter().map(|&t| f(t)).collect();
        let pick = |i: usize| SampledCurve::new(grid.clone(), vals.iter().map(|v| v[i]).collect());
        Ok(PqrCurves {
            p: pick(0)?,
            q: pick(1)?,
            r: pick(2)?,
        })
    }

    /// Largest sup-norm relative error over the three components.
    pub fn max_rel_error(&self, other: &PqrCurves) -> f64 {
        let err = |a: &SampledCurve, b: &SampledCurve| {
            a.sup_rel_error(|t| b.eval(t).expect("same grid"))
        };
        err(&self.p, &other.p)
            .max(err(&self.q, &other.q))
            .max(err(&self.r, &other.r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullInfoSolution {
    pub params: FullInfoParams,
    pub a1: f64,
    pub d: f64,
    /// Multiplier the value function was built for.
    pub gamma: f64,
    /// Dual maximiser for `d`.
    pub gamma_star: f64,
    pub d_vertex: f64,
    pub g1: SampledCurve,
    pub pqr_region1: PqrCurves,
    pub pqr_region2: PqrCurves,
    /// Backward RK4 solutions of the same two ODE systems.
    pub pqr_ode_region1: PqrCurves,
    pub pqr_ode_region2: PqrCurves,
    pub compat_paper_formulas: bool,
}

impl FullInfoSolution {
    pub fn compute(model: &ModelParams, d: f64, gamma: f64, opts: FullInfoOptions) -> Result<Self> {
        let params = FullInfoParams::from_model(model)?;
        let a1 = opts.a1_override.unwrap_or_else(|| params.a1());
        let compat = opts.compat_paper_formulas;
        let d_vertex = params.vertex(compat);
        let gamma_star = gamma_star_with(&params, a1, d, compat)?;
        let horizon = params.horizon;
        let steps = opts.steps;

        let mut sol = FullInfoSolution {
            params,
            a1,
            d,
            gamma,
            gamma_star,
            d_vertex,
            g1: SampledCurve::from_fn(horizon, steps, |t| params.g1(t, d, gamma))?,
            pqr_region1: PqrCurves::from_fn(horizon, 1, |_| [1.0, 0.0, 0.0])?,
            pqr_region2: PqrCurves::from_fn(horizon, 1, |_| [1.0, 0.0, 0.0])?,
            pqr_ode_region1: PqrCurves::from_fn(horizon, 1, |_| [1.0, 0.0, 0.0])?,
            pqr_ode_region2: PqrCurves::from_fn(horizon, 1, |_| [1.0, 0.0, 0.0])?,
            compat_paper_formulas: compat,
        };
        sol.pqr_region1 = PqrCurves::from_fn(horizon, steps, |t| sol.pqr(1, t))?;
        sol.pqr_region2 = PqrCurves::from_fn(horizon, steps, |t| sol.pqr(2, t))?;

        let (r, f) = (params.r, sol.f());
        let to_pqr = |tr: ode::Trajectory<3>| PqrCurves {
            p: tr.component(0),
            q: tr.component(1),
            r: tr.component(2),
        };
        sol.pqr_ode_region1 = to_pqr(ode::integrate_backward(
            |_, y: &[f64; 3]| [-2.0 * r * y[0], -r * y[1] - f * y[0], -f * y[1]],
            [1.0, 0.0, 0.0],
            horizon,
            steps,
        )?);
        sol.pqr_ode_region2 = to_pqr(ode::integrate_backward(
            |_, y: &[f64; 3]| {
                [
                    -(2.0 * r + 2.0 * a1) * y[0],
                    -(r + 2.0 * a1) * y[1] - f * y[0],
                    -a1 * y[1] * y[1] / y[0] - f * y[1],
                ]
            },
            [1.0, 0.0, 0.0],
            horizon,
            steps,
        )?);
        Ok(sol)
    }

    /// Solution at the model target `d` and its dual maximiser.
    pub fn optimal(model: &ModelParams, opts: FullInfoOptions) -> Result<Self> {
        let params = FullInfoParams::from_model(model)?;
        let a1 = opts.a1_override.unwrap_or_else(|| params.a1());
        let d = model.objective.d;
        let gamma = gamma_star_with(&params, a1, d, opts.compat_paper_formulas)?;
        Self::compute(model, d, gamma, opts)
    }

    pub fn f(&self) -> f64 {
        self.params.affine_drift(self.d, self.gamma)
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    /// `X = x + shift`.
    pub fn shift(&self) -> f64 {
        self.d - self.gamma
    }

    pub fn g1_at(&self, t: f64) -> f64 {
        self.params.g1(t, self.d, self.gamma)
    }

    /// `x + g1(t) e^{-r(T-t)}`; its sign picks the region.
    pub fn switching_value(&self, t: f64, x: f64) -> f64 {
        x + self.params.discounted_g1(t, self.d, self.gamma)
    }

    /// Shifted wealth on the switching curve at time `t`.
    pub fn curve_point(&self, t: f64) -> f64 {
        -self.params.discounted_g1(t, self.d, self.gamma)
    }

    pub fn region(&self, t: f64, x: f64) -> Region {
        let s = self.switching_value(t, x);
        if s.abs() <= REGION_TOL * x.abs().max(1.0) {
            Region::OnCurve
        } else if s > 0.0 {
            Region::AboveCurve
        } else {
            Region::BelowCurve
        }
    }

    /// Closed-form `(P, Q, R)` of branch 1 (above) or 2 (below) at `t`.
    pub fn pqr(&self, branch: u8, t: f64) -> [f64; 3] {
        let tau = self.horizon() - t;
        let r = self.params.r;
        let g = self.g1_at(t);
        match branch {
            1 => [(2.0 * r * tau).exp(), g * (r * tau).exp(), 0.5 * g * g],
            _ => {
                let a1 = self.a1;
                [
                    ((2.0 * a1 + 2.0 * r) * tau).exp(),
                    g * ((2.0 * a1 + r) * tau).exp(),
                    0.5 * (2.0 * tau * a1).exp() * g * g,
                ]
            }
        }
    }

    /// Sup-norm relative error between closed-form and ODE `P, Q, R`.
    pub fn pqr_cross_check_error(&self) -> f64 {
        self.pqr_region1
            .max_rel_error(&self.pqr_ode_region1)
            .max(self.pqr_region2.max_rel_error(&self.pqr_ode_region2))
    }

    /// One branch of the value function, regardless of region.
    pub fn value_branch(&self, branch: u8, t: f64, x: f64) -> f64 {
        let tau = self.horizon() - t;
        let r = self.params.r;
        let g = self.g1_at(t);
        match branch {
            1 => 0.5 * ((r * tau).exp() * x + g).powi(2),
            _ => 0.5 * (((self.a1 + r) * tau).exp() * x + (tau * self.a1).exp() * g).powi(2),
        }
    }
}

/// `V(t, x)` in shifted wealth.
pub fn value_function(t: f64, x: f64, sol: &FullInfoSolution) -> f64 {
    if sol.switching_value(t, x) >= 0.0 {
        sol.value_branch(1, t, x)
    } else {
        sol.value_branch(2, t, x)
    }
}

/// Optimal feedback in shifted wealth; `(0, 0)` above or on the curve.
pub fn feedback_full(t: f64, x: f64, sol: &FullInfoSolution, _model: &ModelParams) -> ControlPair {
    let s = sol.switching_value(t, x);
    if sol.region(t, x) != Region::BelowCurve {
        return ControlPair::ZERO;
    }
    let p = &sol.params;
    ControlPair {
        q: -(p.a * p.eta / (p.b * p.b)) * s,
        pi: -((p.mu - p.r) / (p.sigma * p.sigma)) * s,
    }
    .clamp_cone()
}

impl ControlPair {
    fn clamp_cone(self) -> Self {
        ControlPair {
            q: self.q.max(0.0),
            pi: self.pi.max(0.0),
        }
    }
}

fn gamma_star_with(params: &FullInfoParams, a1: f64, d: f64, compat: bool) -> Result<f64> {
    let denom = (-2.0 * a1 * params.horizon).exp_m1();
    if denom == 0.0 {
        return Err(Error::DegenerateDual);
    }
    let vertex = params.vertex(compat);
    if d < vertex {
        return Err(Error::InfeasibleTarget { d, vertex });
    }
    Ok((vertex - d) / denom)
}

/// Dual maximiser `gamma* = (k - d) / (e^{-2 A1 T} - 1)`.
pub fn gamma_star_full(model: &ModelParams, d: f64, compat: bool) -> Result<f64> {
    let params = FullInfoParams::from_model(model)?;
    gamma_star_with(&params, params.a1(), d, compat)
}

/// `Var = (k - d)^2 / (e^{-2 A1 T} - 1)` on each target.
pub fn frontier_full(model: &ModelParams, d_grid: &[f64], compat: bool) -> Result<FrontierCurve> {
    let params = FullInfoParams::from_model(model)?;
    let denom = (-2.0 * params.a1() * params.horizon).exp_m1();
    if denom == 0.0 {
        return Err(Error::DegenerateDual);
    }
    let vertex = params.vertex(compat);
    let points = d_grid
        .iter()
        .map(|&d| {
            if d < vertex {
                return Err(Error::InfeasibleTarget { d, vertex });
            }
            Ok(FrontierPoint {
                d,
                variance: (vertex - d).powi(2) / denom,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontierCurve {
        points,
        mode: if compat { "compat_printed" } else { "exact" },
    })
}

/// Dual value assembled from the value function at `t = 0`:
/// `P(0) x^2 / 2 + Q(0) x + R(0) - gamma^2 / 2` with `x = x0 - (d - gamma)`.
pub fn dual_value(params: &FullInfoParams, a1: f64, d: f64, gamma: f64) -> f64 {
    let (r, t_end) = (params.r, params.horizon);
    let x = params.x0 - (d - gamma);
    let g = params.g1(0.0, d, gamma);
    let s = x + params.discounted_g1(0.0, d, gamma);
    let (p, q, rr) = if s >= 0.0 {
        ((2.0 * r * t_end).exp(), g * (r * t_end).exp(), 0.5 * g * g)
    } else {
        (
            ((2.0 * a1 + 2.0 * r) * t_end).exp(),
            g * ((2.0 * a1 + r) * t_end).exp(),
            0.5 * (2.0 * t_end * a1).exp() * g * g,
        )
    };
    0.5 * p * x * x + q * x + rr - 0.5 * gamma * gamma
}

/// Optimal cost `min E{[X(T) - d]^2 + 2 gamma [E X(T) - d]}`, twice
/// [`dual_value`]. With `compat` the printed piecewise expression built on
/// `x0 e^{rT} + (a theta - a eta)/r` is returned instead.
pub fn optimal_cost(params: &FullInfoParams, a1: f64, d: f64, gamma: f64, compat: bool) -> f64 {
    if !compat {
        return 2.0 * dual_value(params, a1, d, gamma);
    }
    let k = params.printed_vertex();
    let t_end = params.horizon;
    let s = params.x0 - (d - gamma) + params.discounted_g1(0.0, d, gamma);
    if s < 0.0 {
        (2.0 * a1 * t_end).exp() * (k - (d - gamma)).powi(2) - gamma * gamma
    } else {
        (k - d).powi(2) + 2.0 * (k - d) * gamma
    }
}

/// `inf_{u >= 0} { p B·u + P (b^2 q^2 + sigma^2 pi^2) / 2 }`.
pub fn cone_infimum(p: f64, big_p: f64, coeffs: &LqCoefficients) -> f64 {
    [(coeffs.b_q, coeffs.d_q), (coeffs.b_pi, coeffs.d_pi)]
        .iter()
        .map(|&(b, d)| {
            let lin = p * b;
            if lin >= 0.0 {
                0.0
            } else if big_p > 0.0 {
                -lin * lin / (2.0 * big_p * d * d)
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// HJB left-hand side at an interior point, with central differences of
/// step `fd_step` in `t` and `fd_step * max(1, |x|)` in `x`.
pub fn hjb_residual(
    t: f64,
    x: f64,
    sol: &FullInfoSolution,
    _model: &ModelParams,
    fd_step: f64,
) -> Result<f64> {
    let hx = fd_step * x.abs().max(1.0);
    let ht = fd_step;
    let centre = sol.region(t, x);
    let distance = sol.switching_value(t, x).abs();
    let neighbours = [(t + ht, x), (t - ht, x), (t, x + hx), (t, x - hx)];
    if centre == Region::OnCurve
        || distance <= 10.0 * hx
        || neighbours.iter().any(|&(s, y)| sol.region(s, y) != centre)
    {
        return Err(Error::NearCurve { t, x, distance });
    }
    let v = |s: f64, y: f64| value_function(s, y, sol);
    let v0 = v(t, x);
    let v_t = (v(t + ht, x) - v(t - ht, x)) / (2.0 * ht);
    let v_x = (v(t, x + hx) - v(t, x - hx)) / (2.0 * hx);
    let v_xx = (v(t, x + hx) - 2.0 * v0 + v(t, x - hx)) / (hx * hx);

    let p = &sol.params;
    let coeffs = p.coefficients(sol.d, sol.gamma);
    Ok(v_t + v_x * (p.r * x + coeffs.f) + cone_infimum(v_x, v_xx, &coeffs))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViscosityReport {
    pub samples: usize,
    /// Largest `|V1 - V2|` between the two branches on the curve.
    pub max_branch_gap: f64,
    /// Largest finite-difference `|(V_t, V_x)|` on the curve.
    pub max_gradient_norm: f64,
    /// Largest `|P_i x + Q_i|` on the curve.
    pub max_closed_form_slope: f64,
    pub failures: Vec<String>,
}

impl ViscosityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const BRANCH_GAP_TOL: f64 = 1e-10;
pub const CURVE_GRADIENT_TOL: f64 = 1e-6;
/// Central-difference step on the curve, relative to `max(1, |x|)`.
pub const CURVE_FD_STEP: f64 = 1e-8;

/// Checks continuity, vanishing gradient and the sub/super-solution
/// inequalities at `curve_samples` points of the switching curve.
pub fn viscosity_check(sol: &FullInfoSolution, _model: &ModelParams, curve_samples: usize) -> ViscosityReport {
    let mut rep = ViscosityReport {
        samples: curve_samples,
        ..Default::default()
    };
    let horizon = sol.horizon();
    let coeffs = sol.params.coefficients(sol.d, sol.gamma);
    for i in 0..curve_samples {
        let t = horizon * i as f64 / curve_samples.max(1) as f64;
        let x = sol.curve_point(t);

        let gap = (sol.value_branch(1, t, x) - sol.value_branch(2, t, x)).abs();
        rep.max_branch_gap = rep.max_branch_gap.max(gap);
        if gap > BRANCH_GAP_TOL {
            rep.failures.push(format!("branch gap {gap:e} at t = {t}"));
        }

        let hx = CURVE_FD_STEP * x.abs().max(1.0);
        let ht = CURVE_FD_STEP;
        let v = |s: f64, y: f64| value_function(s, y, sol);
        let v_t = (v(t + ht, x) - v(t - ht, x)) / (2.0 * ht);
        let v_x = (v(t, x + hx) - v(t, x - hx)) / (2.0 * hx);
        let grad = v_t.hypot(v_x);
        rep.max_gradient_norm = rep.max_gradient_norm.max(grad);
        if grad > CURVE_GRADIENT_TOL {
            rep.failures.push(format!("gradient norm {grad:e} at t = {t}"));
        }
        for branch in [1u8, 2] {
            let [p, q, _] = sol.pqr(branch, t);
            rep.max_closed_form_slope = rep.max_closed_form_slope.max((p * x + q).abs());
        }

        let p1 = sol.pqr(1, t)[0];
        let p2 = sol.pqr(2, t)[0];
        if p2 > p1 {
            rep.failures.push(format!("P2 = {p2} > P1 = {p1} at t = {t}"));
        }
        // superdifferential {0} x {0} x [P1, inf): q + inf G >= 0
        let sub = 0.0 + cone_infimum(0.0, p1, &coeffs);
        if sub < 0.0 {
            rep.failures.push(format!("sub-solution inequality fails at t = {t}: {sub}"));
        }
        // subdifferential {0} x {0} x (-inf, P2]: q + inf G <= 0
        let sup = 0.0 + cone_infimum(0.0, p2, &coeffs);
        if sup > 0.0 {
            rep.failures.push(format!("super-solution inequality fails at t = {t}: {sup}"));
        }
    }
    rep
}

/// Cross-route check of `A1`: half the minus-branch Hamiltonian at `P = 1`.
pub fn a1_from_hamiltonian(params: &FullInfoParams) -> f64 {
    let coeffs = params.coefficients(0.0, 0.0);
    0.5 * cone::hamiltonian_min(Branch::Minus, 1.0, &coeffs).expect("P = 1 is positive")
}
