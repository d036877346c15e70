//! Path simulation of wealth, drift, prices and filter under a feedback
//! strategy.
//!
//! Two schemes are available. [`SimMode::Physical`] draws the hidden drift
//! with three Brownian drivers and runs the filter on simulated returns.
//! [`SimMode::Innovation`] works directly under the observation filtration
//! with two drivers. In both cases the riskless affine part of the wealth
//! equation, `dX = [r X + a(theta - eta)] dt`, is integrated exactly over each
//! step and the controlled terms use Euler-Maruyama.
//!
//! Each path draws from its own substream keyed by the path index, and the
//! ensemble is reduced sequentially, so results do not depend on the thread
//! count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cone::ControlPair;
use crate::error::{Error, Result};
use crate::filter::{self, FilterState};
use crate::full::{self, FullInfoSolution};
use crate::model::ModelParams;
use crate::ode::RngStream;
use crate::partial::{self, PartialSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Physical,
    Innovation,
}

impl SimMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMode::Physical => "physical",
            SimMode::Innovation => "innovation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub mode: SimMode,
    pub store_paths: bool,
}

/// At most this many paths are kept when `store_paths` is set.
pub const MAX_STORED_PATHS: usize = 100;
/// Points kept per stored path, roughly.
const STORED_POINTS: usize = 500;
/// Largest tolerated share of flagged paths.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        SimConfig {
            n_paths,
            dt,
            seed,
            mode: SimMode::Physical,
            store_paths: false,
        }
    }

    /// `T / 5000`.
    pub fn default_dt(horizon: f64) -> f64 {
        horizon / 5000.0
    }

    /// Number of steps covering `horizon`.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        if self.n_paths < 1 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        let k = (horizon / self.dt).round();
        if k < 1.0 || ((k * self.dt - horizon) / horizon).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "horizon {horizon} is not an integer multiple of dt = {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }
}

/// A feedback control `u(t, X, filter)`; it may not see the hidden drift.
pub trait Strategy: Sync {
    fn control(&self, t: f64, wealth: f64, filter: &FilterState) -> ControlPair;
}

impl<F> Strategy for F
where
    F: Fn(f64, f64, &FilterState) -> ControlPair + Sync,
{
    fn control(&self, t: f64, wealth: f64, filter: &FilterState) -> ControlPair {
        self(t, wealth, filter)
    }
}

/// Holds nothing and cedes every claim.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl Strategy for ZeroStrategy {
    fn control(&self, _: f64, _: f64, _: &FilterState) -> ControlPair {
        ControlPair::ZERO
    }
}

/// Full-information efficient feedback on `X - (d - gamma*)`.
#[derive(Debug, Clone)]
pub struct FullInfoStrategy<'a> {
    pub solution: &'a FullInfoSolution,
    pub model: &'a ModelParams,
}

impl Strategy for FullInfoStrategy<'_> {
    fn control(&self, t: f64, wealth: f64, _: &FilterState) -> ControlPair {
        full::feedback_full(t, wealth - self.solution.shift(), self.solution, self.model)
    }
}

/// Partial-information efficient feedback on the filtered drift.
#[derive(Debug, Clone)]
pub struct PartialInfoStrategy<'a> {
    pub solution: &'a PartialSolution,
    pub model: &'a ModelParams,
}

impl Strategy for PartialInfoStrategy<'_> {
    fn control(&self, t: f64, wealth: f64, filter: &FilterState) -> ControlPair {
        partial::feedback_partial(t, wealth, filter, self.solution, self.model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredPath {
    pub path_id: usize,
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub drift_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub mode: SimMode,
    pub n_paths: usize,
    pub steps: usize,
    /// Indices of paths excluded for non-finite state.
    pub flagged: Vec<usize>,
    pub terminal_wealth: Vec<f64>,
    pub terminal_price: Vec<f64>,
    /// `mu(T) - m(T)`; physical mode only, empty otherwise.
    pub terminal_drift_error: Vec<f64>,
    /// Times at which `m` is recorded: `T/4, T/2, T`.
    pub checkpoint_times: [f64; 3],
    pub checkpoint_drift_mean: Vec<[f64; 3]>,
    /// Conditional variance `n(T)` used by the filter.
    pub terminal_filter_variance: f64,
    /// `∫ q^2 dt` per path.
    pub int_q_sq: Vec<f64>,
    /// `∫ pi^2 dt` per path.
    pub int_pi_sq: Vec<f64>,
    pub stored: Vec<StoredPath>,
}

impl PathEnsemble {
    pub fn wealth_estimate(&self) -> Result<Estimate> {
        estimate(&self.terminal_wealth)
    }

    pub fn diagnostics_finite(&self) -> bool {
        self.int_q_sq.iter().chain(&self.int_pi_sq).all(|v| v.is_finite())
    }
}

/// Per-step coefficients shared by every path.
struct StepTable {
    dt: f64,
    sqrt_dt: f64,
    times: Vec<f64>,
    growth: Vec<f64>,
    /// `a (theta - eta)` times the annuity of `r` over the step.
    margin: Vec<f64>,
    r: Vec<f64>,
    sigma: Vec<f64>,
    h: Vec<f64>,
    l: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    a_eta: f64,
    b: f64,
    m0: f64,
    n0: f64,
    checkpoints: [usize; 3],
    store_stride: usize,
}

impl StepTable {
    fn new(model: &ModelParams, cfg: &SimConfig) -> Result<Self> {
        let horizon = model.horizon();
        let steps = cfg.steps(horizon)?;
        let dt = horizon / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let variance = filter::solve_variance(&model.drift, &model.market.sigma, horizon, steps)?;
        let margin_rate = model.claim.ceded_margin();
        let mut growth = Vec::with_capacity(steps);
        let mut margin = Vec::with_capacity(steps);
        for k in 0..steps {
            let (g, a) = model.market.r.affine_growth(times[k], times[k + 1]);
            growth.push(g);
            margin.push(margin_rate * a);
        }
        let at = |c: &crate::model::Curve| times[..steps].iter().map(|&t| c.eval(t)).collect();
        Ok(StepTable {
            dt,
            sqrt_dt: dt.sqrt(),
            growth,
            margin,
            r: at(&model.market.r),
            sigma: at(&model.market.sigma),
            h: at(&model.drift.h),
            l: at(&model.drift.l),
            z: at(&model.drift.z),
            n: variance.values().to_vec(),
            a_eta: model.claim.a * model.claim.eta,
            b: model.claim.b,
            m0: model.drift.m0,
            n0: model.drift.n0,
            checkpoints: [steps / 4, steps / 2, steps],
            store_stride: (steps / STORED_POINTS).max(1),
            times,
        })
    }

    fn steps(&self) -> usize {
        self.growth.len()
    }
}

struct PathOutcome {
    wealth: f64,
    price: f64,
    drift_error: f64,
    checkpoints: [f64; 3],
    int_q_sq: f64,
    int_pi_sq: f64,
    stored: Option<StoredPath>,
}

fn run_path(
    id: usize,
    table: &StepTable,
    x0: f64,
    strategy: &dyn Strategy,
    cfg: &SimConfig,
) -> Option<PathOutcome> {
    let mut rng = RngStream::new(cfg.seed, id as u64).rng();
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let physical = cfg.mode == SimMode::Physical;
    let dt = table.dt;
    let sd = table.sqrt_dt;

    let mut x = x0;
    let mut m = table.m0;
    let mut mu = if physical { table.m0 + table.n0.sqrt() * normal() } else { table.m0 };
    let mut price = 1.0;
    let (mut iq, mut ip) = (0.0, 0.0);
    let mut checkpoints = [0.0; 3];
    let mut next_cp = 0;
    while next_cp < 3 && table.checkpoints[next_cp] == 0 {
        checkpoints[next_cp] = m;
        next_cp += 1;
    }
    let mut stored = (cfg.store_paths && id < MAX_STORED_PATHS).then(|| StoredPath {
        path_id: id,
        times: vec![0.0],
        wealth: vec![x],
        drift_mean: vec![m],
    });

    for k in 0..table.steps() {
        let t = table.times[k];
        let n = table.n[k];
        let sigma = table.sigma[k];
        let fs = FilterState { t, m, n };
        let u = strategy.control(t, x, &fs);

        let dw0 = sd * normal();
        let (ret, dw1, dw2) = if physical {
            let dw1 = sd * normal();
            let dw2 = sd * normal();
            (mu * dt + sigma * dw1, dw1, dw2)
        } else {
            let dwbar = sd * normal();
            (m * dt + sigma * dwbar, 0.0, 0.0)
        };

        x = x * table.growth[k]
            + table.margin[k]
            + table.a_eta * u.q * dt
            + u.pi * (ret - table.r[k] * dt)
            + table.b * u.q * dw0;
        m = filter::advance_mean(m, n, table.h[k], table.l[k], sigma, ret, dt);
        if physical {
            mu += table.h[k] * mu * dt + table.l[k] * dw1 + table.z[k] * dw2;
        }
        price *= 1.0 + ret;
        iq += u.q * u.q * dt;
        ip += u.pi * u.pi * dt;

        if !(x.is_finite() && m.is_finite() && mu.is_finite()) {
            return None;
        }
        let step = k + 1;
        while next_cp < 3 && table.checkpoints[next_cp] == step {
            checkpoints[next_cp] = m;
            next_cp += 1;
        }
        if let Some(s) = stored.as_mut() {
            if step % table.store_stride == 0 || step == table.steps() {
                s.times.push(table.times[step]);
                s.wealth.push(x);
                s.drift_mean.push(m);
            }
        }
    }
    Some(PathOutcome {
        wealth: x,
        price,
        drift_error: mu - m,
        checkpoints,
        int_q_sq: iq,
        int_pi_sq: ip,
        stored,
    })
}

fn simulate(model: &ModelParams, strategy: &dyn Strategy, cfg: &SimConfig) -> Result<PathEnsemble> {
    let table = StepTable::new(model, cfg)?;
    let x0 = model.objective.x0;
    let outcomes: Vec<Option<PathOutcome>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|id| run_path(id, &table, x0, strategy, cfg))
        .collect();

    let horizon = model.horizon();
    let mut ens = PathEnsemble {
        mode: cfg.mode,
        n_paths: cfg.n_paths,
        steps: table.steps(),
        flagged: Vec::new(),
        terminal_wealth: Vec::with_capacity(cfg.n_paths),
        terminal_price: Vec::with_capacity(cfg.n_paths),
        terminal_drift_error: Vec::new(),
        checkpoint_times: table.checkpoints.map(|k| table.times[k].min(horizon)),
        checkpoint_drift_mean: Vec::with_capacity(cfg.n_paths),
        terminal_filter_variance: *table.n.last().expect("at least one step"),
        int_q_sq: Vec::with_capacity(cfg.n_paths),
        int_pi_sq: Vec::with_capacity(cfg.n_paths),
        stored: Vec::new(),
    };
    for (id, out) in outcomes.into_iter().enumerate() {
        let Some(o) = out else {
            ens.flagged.push(id);
            continue;
        };
        ens.terminal_wealth.push(o.wealth);
        ens.terminal_price.push(o.price);
        if cfg.mode == SimMode::Physical {
            ens.terminal_drift_error.push(o.drift_error);
        }
        ens.checkpoint_drift_mean.push(o.checkpoints);
        ens.int_q_sq.push(o.int_q_sq);
        ens.int_pi_sq.push(o.int_pi_sq);
        ens.stored.extend(o.stored);
    }
    if ens.flagged.len() as f64 > MAX_FLAGGED_FRACTION * cfg.n_paths as f64 {
        return Err(Error::Simulation {
            flagged: ens.flagged.len(),
            total: cfg.n_paths,
        });
    }
    Ok(ens)
}

/// Simulates the hidden drift and runs the filter on the observed returns.
pub fn simulate_physical(
    model: &ModelParams,
    strategy: &dyn Strategy,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    simulate(model, strategy, &SimConfig { mode: SimMode::Physical, ..*cfg })
}

/// Simulates under the observation filtration driven by the innovation.
pub fn simulate_innovation(
    model: &ModelParams,
    strategy: &dyn Strategy,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    simulate(model, strategy, &SimConfig { mode: SimMode::Innovation, ..*cfg })
}

/// Dispatches on `cfg.mode`.
pub fn simulate_with(model: &ModelParams, strategy: &dyn Strategy, cfg: &SimConfig) -> Result<PathEnsemble> {
    simulate(model, strategy, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

/// Sample mean and variance with standard errors; the variance error uses
/// the fourth central moment.
pub fn estimate(values: &[f64]) -> Result<Estimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut s2, mut s4) = (0.0, 0.0);
    for &v in values {
        let d2 = (v - mean) * (v - mean);
        s2 += d2;
        s4 += d2 * d2;
    }
    let variance = s2 / (nf - 1.0);
    let m2 = s2 / nf;
    let m4 = s4 / nf;
    let var_of_var = (m4 - m2 * m2 * (nf - 3.0) / (nf - 1.0)) / nf;
    Ok(Estimate {
        n,
        mean,
        variance,
        se_mean: (variance / nf).sqrt(),
        se_variance: var_of_var.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::full::FullInfoOptions;

    #[test]
    fn estimate_small_samples() {
        let e = estimate(&[3.5; 10]).unwrap();
        assert_eq!((e.mean, e.variance, e.se_mean, e.se_variance), (3.5, 0.0, 0.0, 0.0));
        let e = estimate(&[0.0, 2.0]).unwrap();
        assert_eq!((e.mean, e.variance), (1.0, 2.0));
        assert!(matches!(estimate(&[1.0]), Err(Error::InsufficientData(1))));
    }

    #[test]
    fn zero_strategy_hits_riskless_vertex() {
        let m = ModelParams::reference_full();
        let cfg = SimConfig::new(8, 0.05, 1);
        let ens = simulate_physical(&m, &ZeroStrategy, &cfg).unwrap();
        let k = m.riskless_terminal_wealth();
        for &x in &ens.terminal_wealth {
            assert!(((x - k) / k).abs() < 1e-12, "{x} vs {k}");
        }
        assert!(ens.terminal_drift_error.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn zero_strategy_partial_mode_is_riskless() {
        let m = ModelParams::filter_demo(0.0);
        let cfg = SimConfig::new(16, 0.01, 3);
        let ens = simulate_innovation(&m, &ZeroStrategy, &cfg).unwrap();
        let k = m.objective.x0 * (0.04f64 * 10.0).exp();
        assert!(ens.terminal_wealth.iter().all(|&x| ((x - k) / k).abs() < 1e-12));
        assert!(ens.terminal_drift_error.is_empty());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let m = ModelParams::scaled_full();
        let sol = FullInfoSolution::optimal(&m, FullInfoOptions::default()).unwrap();
        let strat = FullInfoStrategy { solution: &sol, model: &m };
        let cfg = SimConfig::new(64, 0.01, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_physical(&m, &strat, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        assert_eq!(a.wealth_estimate().unwrap(), b.wealth_estimate().unwrap());
        assert!(a.diagnostics_finite());
    }

    #[test]
    fn stored_paths_are_capped_and_decimated() {
        let m = ModelParams::scaled_full();
        let mut cfg = SimConfig::new(120, 0.001, 5);
        cfg.store_paths = true;
        let ens = simulate_physical(&m, &ZeroStrategy, &cfg).unwrap();
        assert_eq!(ens.stored.len(), MAX_STORED_PATHS);
        let p = &ens.stored[0];
        assert_eq!(*p.times.last().unwrap(), 5.0);
        assert!(p.times.len() <= STORED_POINTS + 2);
    }

    #[test]
    fn rejects_misaligned_dt() {
        let m = ModelParams::scaled_full();
        let cfg = SimConfig::new(10, 0.3, 1);
        assert!(matches!(simulate_physical(&m, &ZeroStrategy, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn exploding_strategy_is_flagged() {
        let m = ModelParams::scaled_full();
        let boom = |_: f64, _: f64, _: &FilterState| ControlPair { q: f64::INFINITY, pi: 0.0 };
        let cfg = SimConfig::new(4, 0.1, 1);
        assert!(matches!(
            simulate_physical(&m, &boom, &cfg),
            Err(Error::Simulation { flagged: 4, total: 4 })
        ));
    }
}
