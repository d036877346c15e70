//! Kalman–Bucy filter for the hidden stock drift.
//!
//! Given observed returns `dS/S`, the conditional mean `m` and variance `n`
//! of `mu` satisfy
//!
//! ```text
//! dm = h m dt + (l + n/sigma) (1/sigma) (dS/S - m dt)
//! n' = 2 h n + l^2 + z^2 - (l + n/sigma)^2
//! ```
//!
//! `n` is deterministic, so it is solved once and shared by every path; `m`
//! is stepped with Euler on the observation grid.

use crate::error::{Error, Result};
use crate::model::{Curve, DriftParams};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ode::{self, RngStream, SampledCurve};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub t: f64,
    /// Conditional mean of the drift.
    pub m: f64,
    /// Conditional variance of the drift.
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    pub states: Vec<FilterState>,
    /// Innovation increments `(1/sigma)(dS/S - m dt)`, one per step.
    pub innovations: Vec<f64>,
}

/// Gain `l(t) + n / sigma(t)` multiplying the innovation `dW̄`.
#[inline]
pub fn gain(l: f64, n: f64, sigma: f64) -> f64 {
    l + n / sigma
}

#[inline]
fn variance_rhs(h: f64, l: f64, z: f64, sigma: f64, n: f64) -> f64 {
    let g = gain(l, n, sigma);
    2.0 * h * n + l * l + z * z - g * g
}

/// Forward RK4 solution of the conditional-variance Riccati equation.
pub fn solve_variance(
    drift: &DriftParams,
    sigma: &Curve,
    horizon: f64,
    steps: usize,
) -> Result<SampledCurve> {
    if !(drift.n0 >= 0.0) {
        return Err(Error::Domain(format!("n0 must be >= 0, got {}", drift.n0)));
    }
    let rhs = |t: f64, y: &[f64; 1]| {
        [variance_rhs(
            drift.h.eval(t),
            drift.l.eval(t),
            drift.z.eval(t),
            sigma.eval(t),
            y[0],
        )]
    };
    let traj = ode::integrate_forward(rhs, [drift.n0], horizon, steps)?;
    let mut values = Vec::with_capacity(traj.states().len());
    for (&t, s) in traj.grid().iter().zip(traj.states()) {
        let n = s[0];
        if n < -1e-12 {
            return Err(Error::Domain(format!("conditional variance negative at t = {t}: {n}")));
        }
        values.push(n.max(0.0));
    }
    SampledCurve::new(traj.grid().to_vec(), values)
}

/// One Euler step of the mean equation. `next_n` is the precomputed
/// variance at `state.t + dt`.
pub fn filter_step(
    state: &FilterState,
    observed_return: f64,
    dt: f64,
    drift: &DriftParams,
    sigma: &Curve,
    next_n: f64,
) -> FilterState {
    let t = state.t;
    let s = sigma.eval(t);
    let m = advance_mean(
        state.m,
        state.n,
        drift.h.eval(t),
        drift.l.eval(t),
        s,
        observed_return,
        dt,
    );
    FilterState {
        t: t + dt,
        m,
        n: next_n,
    }
}

/// Mean update with the coefficients already evaluated at the step start.
#[inline]
pub fn advance_mean(m: f64, n: f64, h: f64, l: f64, sigma: f64, observed_return: f64, dt: f64) -> f64 {
    m + h * m * dt + gain(l, n, sigma) / sigma * (observed_return - m * dt)
}

/// A filter bound to its parameters and precomputed variance curve.
#[derive(Debug, Clone)]
pub struct DriftFilter {
    drift: DriftParams,
    sigma: Curve,
    variance: SampledCurve,
}

impl DriftFilter {
    pub fn new(drift: DriftParams, sigma: Curve, horizon: f64, steps: usize) -> Result<Self> {
        let variance = solve_variance(&drift, &sigma, horizon, steps)?;
        Ok(DriftFilter {
            drift,
            sigma,
            variance,
        })
    }

    pub fn variance(&self) -> &SampledCurve {
        &self.variance
    }

    pub fn drift(&self) -> &DriftParams {
        &self.drift
    }

    pub fn initial_state(&self) -> FilterState {
        FilterState {
            t: 0.0,
            m: self.drift.m0,
            n: self.drift.n0,
        }
    }

    pub fn step(&self, state: &FilterState, observed_return: f64, dt: f64) -> Result<FilterState> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let next_n = self.variance.eval(state.t + dt)?;
        Ok(filter_step(state, observed_return, dt, &self.drift, &self.sigma, next_n))
    }

    /// Runs the filter over returns observed on a uniform `dt` grid.
    pub fn run(&self, observed_returns: &[f64], dt: f64) -> Result<FilterPath> {
        let mut state = self.initial_state();
        let mut states = Vec::with_capacity(observed_returns.len() + 1);
        let mut innovations = Vec::with_capacity(observed_returns.len());
        states.push(state);
        for (k, &ret) in observed_returns.iter().enumerate() {
            let s = self.sigma.eval(state.t);
            innovations.push((ret - state.m * dt) / s);
            state = self.step(&state, ret, dt)?;
            // keep grid times free of accumulated rounding
            state.t = (k + 1) as f64 * dt;
            states.push(state);
        }
        Ok(FilterPath {
            states,
            innovations,
        })
    }
}

/// Euler simulation of the hidden drift and of the observed returns
/// `dS/S = mu dt + sigma dW1` on `steps` uniform steps. Returns
/// `(returns, mu)` with `mu` sampled at every grid point.
pub fn simulate_observations(
    drift: &DriftParams,
    sigma: &Curve,
    horizon: f64,
    steps: usize,
    stream: &RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if steps == 0 || !(horizon > 0.0) {
        return Err(Error::Domain("need a positive horizon and at least one step".into()));
    }
    let dt = horizon / steps as f64;
    let sd = dt.sqrt();
    let mut rng = stream.rng();
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let mut mu = drift.m0 + drift.n0.max(0.0).sqrt() * normal();
    let mut returns = Vec::with_capacity(steps);
    let mut mus = Vec::with_capacity(steps + 1);
    mus.push(mu);
    for k in 0..steps {
        let t = k as f64 * dt;
        let dw1 = sd * normal();
        let dw2 = sd * normal();
        returns.push(mu * dt + sigma.eval(t) * dw1);
        mu += drift.h.eval(t) * mu * dt + drift.l.eval(t) * dw1 + drift.z.eval(t) * dw2;
        mus.push(mu);
    }
    Ok((returns, mus))
}
