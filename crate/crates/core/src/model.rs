//! Model parameters, deterministic coefficient curves and standing
//! assumptions.
//!
//! Claims follow `dC = a dt - b dW0`, the insurer charges `c = (1 + theta) a`
//! and cedes a fraction `1 - q` of each claim at reinsurer loading `eta`.
//! The stock is `dS/S = mu dt + sigma dW1` with a hidden drift
//! `dmu = h mu dt + l dW1 + z dW2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant coefficient on `[breaks[i], breaks[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConstant {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

/// Deterministic coefficient `r(t)`, `sigma(t)`, `h(t)`, ...
///
/// In config files a curve is either a number or
/// `{ breaks = [0.0, 50.0], values = [0.04, 0.05] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curve {
    Constant(f64),
    Piecewise(PiecewiseConstant),
}

impl From<f64> for Curve {
    fn from(v: f64) -> Self {
        Curve::Constant(v)
    }
}

impl Curve {
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let c = Curve::Piecewise(PiecewiseConstant { breaks, values });
        c.check().map_err(Error::InvalidModel)?;
        Ok(c)
    }

    /// Structural check; returns a human-readable reason on failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        match self {
            Curve::Constant(v) if v.is_finite() => Ok(()),
            Curve::Constant(v) => Err(format!("value {v} is not finite")),
            Curve::Piecewise(p) => {
                if p.breaks.is_empty() || p.breaks.len() != p.values.len() {
                    return Err("breaks and values must be non-empty and of equal length".into());
                }
                if p.breaks[0] != 0.0 {
                    return Err("first break must be 0".into());
                }
                if p.breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("breaks must be strictly increasing".into());
                }
                if p.breaks.iter().chain(&p.values).any(|v| !v.is_finite()) {
                    return Err("breaks and values must be finite".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Curve::Constant(v) => *v,
            Curve::Piecewise(p) => {
                let idx = p.breaks.partition_point(|&b| b <= t);
                p.values[idx.saturating_sub(1)]
            }
        }
    }

    /// Constant value if the curve does not vary.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Curve::Constant(v) => Some(*v),
            Curve::Piecewise(p) => {
                let first = p.values[0];
                p.values.iter().all(|&v| v == first).then_some(first)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Calls `f(length, value)` for every constant piece of `[t0, t1]`.
    fn for_each_segment(&self, t0: f64, t1: f64, mut f: impl FnMut(f64, f64)) {
        if t1 <= t0 {
            return;
        }
        match self {
            Curve::Constant(v) => f(t1 - t0, *v),
            Curve::Piecewise(p) => {
                let mut start = t0;
                let mut idx = p.breaks.partition_point(|&b| b <= t0).saturating_sub(1);
                while start < t1 {
                    let end = p.breaks.get(idx + 1).copied().unwrap_or(f64::INFINITY).min(t1);
                    f(end - start, p.values[idx]);
                    start = end;
                    idx += 1;
                }
            }
        }
    }

    /// `∫_{t0}^{t1} c(s) ds`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_segment(t0, t1, |len, v| acc += len * v);
        acc
    }

    /// Growth factor and annuity of the linear ODE `y' = c(t) y + 1` over
    /// `[t0, t1]`: returns `(e^{∫c}, ∫_{t0}^{t1} e^{∫_s^{t1} c} ds)`.
    pub fn affine_growth(&self, t0: f64, t1: f64) -> (f64, f64) {
        let mut growth = 1.0;
        let mut annuity = 0.0;
        self.for_each_segment(t0, t1, |len, v| {
            let g = (v * len).exp();
            let a = if v == 0.0 { len } else { (v * len).exp_m1() / v };
            annuity = annuity * g + a;
            growth *= g;
        });
        (growth, annuity)
    }

    /// `(min, max)` over `[0, horizon]`.
    pub fn bounds(&self, horizon: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self {
            Curve::Constant(v) => return (*v, *v),
            Curve::Piecewise(p) => {
                for (i, &v) in p.values.iter().enumerate() {
                    if p.breaks[i] <= horizon {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimParams {
    /// Claim drift rate.
    pub a: f64,
    /// Claim volatility.
    pub b: f64,
    /// Insurer safety loading.
    pub theta: f64,
    /// Reinsurer safety loading.
    pub eta: f64,
}

impl ClaimParams {
    pub fn premium_rate(&self) -> f64 {
        (1.0 + self.theta) * self.a
    }

    /// `a (theta - eta)`: the drift left after ceding every claim.
    pub fn ceded_margin(&self) -> f64 {
        self.a * (self.theta - self.eta)
    }

    pub fn is_cheap(&self) -> bool {
        self.eta == self.theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub r: Curve,
    pub sigma: Curve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftParams {
    pub h: Curve,
    pub l: Curve,
    pub z: Curve,
    pub m0: f64,
    pub n0: f64,
}

impl DriftParams {
    /// Observed drift: `h = l = z = 0`, `n0 = 0`, `mu ≡ m0`.
    pub fn known(mu: f64) -> Self {
        DriftParams {
            h: 0.0.into(),
            l: 0.0.into(),
            z: 0.0.into(),
            m0: mu,
            n0: 0.0,
        }
    }

    /// Filter demo defaults: `l = 3`, `z = 2`, `m0 = 0.06`, `n0 = 0`.
    pub fn filter_demo(h: f64) -> Self {
        DriftParams {
            h: h.into(),
            l: 3.0.into(),
            z: 2.0.into(),
            m0: 0.06,
            n0: 0.0,
        }
    }

    /// True when no filtering uncertainty ever arises.
    pub fn is_degenerate(&self) -> bool {
        self.l.is_zero() && self.z.is_zero() && self.n0 == 0.0
    }

    /// `E[m(t)] = m0 e^{∫_0^t h}`.
    pub fn mean_drift(&self, t: f64) -> f64 {
        self.m0 * self.h.integral(0.0, t).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub x0: f64,
    pub horizon: f64,
    /// Target expected terminal wealth.
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoMode {
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub info_mode: InfoMode,
    pub claim: ClaimParams,
    pub market: MarketParams,
    pub drift: DriftParams,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal observations.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_owned(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidModel(msg))
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            write!(f, "ok")?;
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

impl ModelParams {
    /// Full-information reference instance: `x0 = 50`, `T = 100`,
    /// `theta = 0.3`, `eta = 0.2`, `a = b = 1`, `mu = 0.06`, `sigma = 1`,
    /// `r = 0.04`, target `d = 10000`.
    pub fn reference_full() -> Self {
        ModelParams {
            info_mode: InfoMode::Full,
            claim: ClaimParams {
                a: 1.0,
                b: 1.0,
                theta: 0.3,
                eta: 0.2,
            },
            market: MarketParams {
                r: 0.04.into(),
                sigma: 1.0.into(),
            },
            drift: DriftParams::known(0.06),
            objective: Objective {
                x0: 50.0,
                horizon: 100.0,
                d: 10_000.0,
            },
        }
    }

    /// Short-horizon instance used for Monte Carlo validation: `T = 5`,
    /// `theta = eta = 0.2`, otherwise as [`ModelParams::reference_full`],
    /// with `d = 1.2 d_min`.
    pub fn scaled_full() -> Self {
        let mut m = Self::reference_full();
        m.claim.theta = 0.2;
        m.claim.eta = 0.2;
        m.objective.horizon = 5.0;
        m.objective.d = 1.2 * m.riskless_terminal_wealth();
        m
    }

    /// Partial-information filter demo on `T = 10` with the given `h`.
    pub fn filter_demo(h: f64) -> Self {
        ModelParams {
            info_mode: InfoMode::Partial,
            claim: ClaimParams {
                a: 1.0,
                b: 1.0,
                theta: 0.2,
                eta: 0.2,
            },
            market: MarketParams {
                r: 0.04.into(),
                sigma: 1.0.into(),
            },
            drift: DriftParams::filter_demo(h),
            objective: Objective {
                x0: 50.0,
                horizon: 10.0,
                d: 80.0,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model parameters always serialize")
    }

    pub fn horizon(&self) -> f64 {
        self.objective.horizon
    }

    /// `e^{∫_{t0}^{t1} r}`.
    pub fn growth(&self, t0: f64, t1: f64) -> f64 {
        self.market.r.integral(t0, t1).exp()
    }

    /// `e^{-∫_t^T r}`.
    pub fn discount_to_horizon(&self, t: f64) -> f64 {
        (-self.market.r.integral(t, self.horizon())).exp()
    }

    /// Terminal wealth of the zero strategy (all cash, all claims ceded),
    /// i.e. the solution of `dX = [a (theta - eta) + r X] dt` at `T`.
    /// This is the frontier vertex `d_min`.
    pub fn riskless_terminal_wealth(&self) -> f64 {
        let (growth, annuity) = self.market.r.affine_growth(0.0, self.horizon());
        self.objective.x0 * growth + self.claim.ceded_margin() * annuity
    }

    /// Checks the standing assumptions; never fails, returns a report.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let c = &self.claim;
        let horizon = self.objective.horizon;

        let positive = [("claim.a", c.a), ("claim.b", c.b), ("claim.theta", c.theta)];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                rep.push(field, format!("must be finite and > 0 (got {v})"));
            }
        }
        if !c.eta.is_finite() {
            rep.push("claim.eta", "must be finite");
        }
        match self.info_mode {
            InfoMode::Partial if c.eta != c.theta => {
                rep.push("claim.eta", "cheap reinsurance required in partial mode (eta = theta)")
            }
            InfoMode::Full if c.eta < c.theta => rep.notes.push(format!(
                "eta = {} < theta = {}: ceding every claim still earns a margin",
                c.eta, c.theta
            )),
            _ => {}
        }

        let o = &self.objective;
        if !(o.x0.is_finite() && o.x0 > 0.0) {
            rep.push("objective.x0", format!("must be finite and > 0 (got {})", o.x0));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            rep.push("objective.horizon", format!("must be finite and > 0 (got {horizon})"));
        }
        if !o.d.is_finite() {
            rep.push("objective.d", "must be finite");
        }

        let curves = [
            ("market.r", &self.market.r),
            ("market.sigma", &self.market.sigma),
            ("drift.h", &self.drift.h),
            ("drift.l", &self.drift.l),
            ("drift.z", &self.drift.z),
        ];
        let mut curves_ok = true;
        for (field, curve) in curves {
            if let Err(msg) = curve.check() {
                rep.push(field, msg);
                curves_ok = false;
            }
        }
        if curves_ok {
            let (r_min, _) = self.market.r.bounds(horizon);
            if !(r_min > 0.0) {
                rep.push("market.r", "r(t) > 0 required");
            }
            let (s_min, _) = self.market.sigma.bounds(horizon);
            if !(s_min > 0.0) {
                rep.push("market.sigma", "sigma_min > 0 required");
            }
        }

        let d = &self.drift;
        if !(d.n0.is_finite() && d.n0 >= 0.0) {
            rep.push("drift.n0", format!("must be finite and >= 0 (got {})", d.n0));
        }
        if !d.m0.is_finite() {
            rep.push("drift.m0", "must be finite");
        }

        if self.info_mode == InfoMode::Full {
            if !(d.is_degenerate() && d.h.is_zero()) {
                rep.push(
                    "drift",
                    "full mode requires an observed constant drift (h = l = z = 0, n0 = 0)",
                );
            }
            if curves_ok
                && (self.market.r.as_constant().is_none() || self.market.sigma.as_constant().is_none())
            {
                rep.push("market", "full mode requires constant r and sigma");
            }
        }
        rep
    }
}
