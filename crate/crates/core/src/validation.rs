//! Self-check suite run by `mvre validate`.
//!
//! Each check recomputes a quantity by two independent routes, or against a
//! known anchor, and reports pass or fail with a short detail string. Quick
//! mode shrinks the Monte Carlo and random-draw sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::{self, Branch, ControlPair, LqCoefficients};
use crate::error::Result;
use crate::filter;
use crate::full::{self, FullInfoOptions, FullInfoParams, FullInfoSolution, Region};
use crate::model::{Curve, DriftParams, InfoMode, ModelParams};
use crate::montecarlo::{self, FullInfoStrategy, SimConfig, ZeroStrategy};
use crate::partial::{self, PartialSolution};
use crate::DEFAULT_ODE_STEPS;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidationOptions {
    pub quick: bool,
    /// Replaces `A1` in the full-information closed forms.
    pub a1_override: Option<f64>,
}

/// Anchors for the reference instance.
pub const REFERENCE_D_MIN: f64 = 2863.9;
pub const REFERENCE_COMPAT_GAMMA: f64 = -130.2;
pub const STEADY_STATE_VARIANCE: f64 = 0.60555;

fn result(id: &'static str, name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { id, name, passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

type CheckFn<'a> = Box<dyn Fn() -> Result<CheckResult> + 'a>;

/// Runs every check. `model` must be a valid configuration; the
/// full-information checks use it when it has constant coefficients and fall
/// back to the reference instance otherwise.
pub fn run_suite(model: &ModelParams, opts: &ValidationOptions) -> Vec<CheckResult> {
    let base = if FullInfoParams::from_model(model).is_ok() {
        model.clone()
    } else {
        ModelParams::reference_full()
    };
    let checks: Vec<(&'static str, &'static str, CheckFn<'_>)> = vec![
        ("1", "riskless_vertex", Box::new(check_vertex)),
        ("2", "compat_dual_anchor", Box::new(check_compat_anchor)),
        ("3", "riccati_equivalence", Box::new(|| check_riccati(&base, opts))),
        ("3b", "a1_hamiltonian", Box::new(|| check_a1(&base, opts))),
        ("4", "cone_optimality", Box::new(|| Ok(check_cone(opts)))),
        ("5", "filter_suite", Box::new(|| check_filter(opts))),
        ("6", "reduction_identity", Box::new(check_reduction)),
        ("7", "mc_frontier", Box::new(|| check_mc_frontier(opts))),
        ("8", "hjb_viscosity", Box::new(|| check_hjb(opts))),
        ("9", "pqr_cross_check", Box::new(|| check_pqr(&base, opts))),
        ("10", "reproducibility", Box::new(check_reproducibility)),
    ];
    checks
        .into_iter()
        .map(|(id, name, f)| match f() {
            Ok(r) => r,
            Err(e) => result(id, name, false, format!("error: {e}")),
        })
        .collect()
}

fn full_opts(opts: &ValidationOptions) -> FullInfoOptions {
    FullInfoOptions {
        a1_override: opts.a1_override,
        ..Default::default()
    }
}

fn check_vertex() -> Result<CheckResult> {
    let m = ModelParams::reference_full();
    let k = FullInfoParams::from_model(&m)?.riskless_vertex();
    let frontier = full::frontier_full(&m, &[k], false)?;
    let v0 = frontier.points[0].variance;
    let ok = (k - REFERENCE_D_MIN).abs() <= 0.05 && v0 == 0.0;
    Ok(result("1", "riskless_vertex", ok, format!("d_min = {k:.6}, variance at vertex = {v0}")))
}

fn check_compat_anchor() -> Result<CheckResult> {
    let m = ModelParams::reference_full();
    let p = FullInfoParams::from_model(&m)?;
    let d = 10_000.0;
    let a1 = p.a1();
    let closed = full::gamma_star_full(&m, d, true)?;
    let (mut best, mut best_g) = (f64::NEG_INFINITY, f64::NAN);
    for i in 0..=200_000 {
        let g = -1000.0 + 0.01 * i as f64;
        let v = full::optimal_cost(&p, a1, d, g, true);
        if v > best {
            best = v;
            best_g = g;
        }
    }
    let ok = (closed - REFERENCE_COMPAT_GAMMA).abs() <= 0.5
        && (best_g - REFERENCE_COMPAT_GAMMA).abs() <= 0.5;
    Ok(result(
        "2",
        "compat_dual_anchor",
        ok,
        format!("closed form {closed:.4}, grid maximiser {best_g:.2}"),
    ))
}

fn check_riccati(base: &ModelParams, opts: &ValidationOptions) -> Result<CheckResult> {
    let mut errs = Vec::new();
    let mut instances = vec![base.clone(), ModelParams::scaled_full()];
    for inst in &mut instances {
        inst.claim.theta = inst.claim.eta;
    }
    for m in &instances {
        let p = FullInfoParams::from_model(m)?;
        let a1 = opts.a1_override.unwrap_or_else(|| p.a1());
        let m_bar = cone::projected_drift(m, DEFAULT_ODE_STEPS)?;
        let ric = cone::solve_riccati_pair(m, &m_bar, DEFAULT_ODE_STEPS)?;
        let t_end = m.horizon();
        let ep = ric.p_plus.sup_rel_error(|t| (2.0 * p.r * (t_end - t)).exp());
        let em = ric
            .p_minus
            .sup_rel_error(|t| ((2.0 * p.r + 2.0 * a1) * (t_end - t)).exp());
        errs.push(ep.max(em));
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(result(
        "3",
        "riccati_equivalence",
        worst <= 1e-6,
        format!("max rel err {worst:.3e}"),
    ))
}

fn check_a1(base: &ModelParams, opts: &ValidationOptions) -> Result<CheckResult> {
    let p = FullInfoParams::from_model(base)?;
    let used = opts.a1_override.unwrap_or_else(|| p.a1());
    let h = full::a1_from_hamiltonian(&p);
    let err = (used - h).abs();
    Ok(result(
        "3b",
        "a1_hamiltonian",
        err <= 1e-12 * h.abs().max(1.0),
        format!("A1 = {used}, H-(1)/2 = {h}"),
    ))
}

/// Random coefficients against random cone probes.
pub fn check_cone(opts: &ValidationOptions) -> CheckResult {
    let (draws, probes) = if opts.quick { (100, 100) } else { (1000, 100) };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_h = f64::NEG_INFINITY;
    for _ in 0..draws {
        let c = LqCoefficients {
            b_q: rng.random_range(-2.0..2.0),
            b_pi: rng.random_range(-2.0..2.0),
            d_q: rng.random_range(0.1..3.0),
            d_pi: rng.random_range(0.1..3.0),
            f: 0.0,
        };
        let p: f64 = rng.random_range(0.01..10.0);
        for branch in [Branch::Plus, Branch::Minus] {
            let xi = cone::xi_unchecked(branch, &c);
            let best = cone::reduced_objective(branch, p, &c, xi);
            let h = cone::hamiltonian_min(branch, p, &c).unwrap_or(f64::NAN);
            worst_h = worst_h.max(h);
            for _ in 0..probes {
                let u = ControlPair {
                    q: rng.random_range(0.0..5.0),
                    pi: rng.random_range(0.0..5.0),
                };
                worst_gap = worst_gap.max(best - cone::reduced_objective(branch, p, &c, u));
            }
        }
    }
    result(
        "4",
        "cone_optimality",
        worst_gap <= 1e-9 && worst_h <= 0.0,
        format!("max(xi - probe) = {worst_gap:.3e}, max H = {worst_h:.3e}"),
    )
}

fn check_filter(opts: &ValidationOptions) -> Result<CheckResult> {
    let sigma: Curve = 1.0.into();
    let zero = filter::solve_variance(&DriftParams::known(0.06), &sigma, 10.0, DEFAULT_ODE_STEPS)?;
    let a = zero.values().iter().all(|&n| n == 0.0);

    let n0 = filter::solve_variance(&DriftParams::filter_demo(0.0), &sigma, 10.0, DEFAULT_ODE_STEPS)?;
    let b = (n0.last() - STEADY_STATE_VARIANCE).abs() <= 1e-3;

    let curves = [-0.5, 0.0, 0.5]
        .iter()
        .map(|&h| filter::solve_variance(&DriftParams::filter_demo(h), &sigma, 10.0, 2000))
        .collect::<Result<Vec<_>>>()?;
    let c = (1..curves[0].values().len()).all(|k| {
        curves[0].values()[k] < curves[1].values()[k] && curves[1].values()[k] < curves[2].values()[k]
    });

    let (paths, dt) = if opts.quick { (10_000, 1e-2) } else { (100_000, 1e-3) };
    let m = ModelParams::filter_demo(0.0);
    let ens = montecarlo::simulate_physical(&m, &ZeroStrategy, &SimConfig::new(paths, dt, 2024))?;
    let sq: Vec<f64> = ens.terminal_drift_error.iter().map(|e| e * e).collect();
    let est = montecarlo::estimate(&sq)?;
    let gap = (est.mean - ens.terminal_filter_variance).abs();
    let d = gap <= 3.0 * est.se_mean;

    Ok(result(
        "5",
        "filter_suite",
        a && b && c && d,
        format!(
            "(a) {a} (b) n(10) = {:.6} {b} (c) {c} (d) E(mu-m)^2 = {:.5} vs n(T) = {:.5}, {:.2} SE {d}",
            n0.last(),
            est.mean,
            ens.terminal_filter_variance,
            gap / est.se_mean
        ),
    ))
}

/// Partial-information model with a known drift and cheap reinsurance on
/// the short-horizon instance.
pub fn reduction_instance() -> ModelParams {
    let mut m = ModelParams::scaled_full();
    m.info_mode = InfoMode::Partial;
    m
}

fn check_reduction() -> Result<CheckResult> {
    let m = reduction_instance();
    let psol = PartialSolution::solve(&m, DEFAULT_ODE_STEPS)?;
    let fsol = FullInfoSolution::optimal(&m, FullInfoOptions::default())?;
    let d = m.objective.d;
    let mut worst: f64 = rel(psol.gamma_star, d - fsol.gamma_star);

    let grid = crate::frontier::target_grid(psol.d0 + 1.0, 3.0 * psol.d0, 25);
    let fp = partial::frontier_partial(&psol.riccati, &m, &grid)?;
    let ff = full::frontier_full(&m, &grid, false)?;
    for (a, b) in fp.points.iter().zip(&ff.points) {
        worst = worst.max(rel(a.variance, b.variance));
    }

    let fs = |t| filter::FilterState { t, m: m.drift.m0, n: 0.0 };
    let mut fb_worst: f64 = 0.0;
    for i in 0..20 {
        let t = m.horizon() * i as f64 / 20.0;
        let level = psol.switching_level(&m, t);
        for dx in [-40.0, -5.0, -0.5, 0.5, 5.0] {
            let x = level + dx;
            let up = partial::feedback_partial(t, x, &fs(t), &psol, &m);
            let uf = full::feedback_full(t, x - fsol.shift(), &fsol, &m);
            let scale = up.q.abs().max(up.pi.abs()).max(1e-300);
            fb_worst = fb_worst.max((up.q - uf.q).abs().max((up.pi - uf.pi).abs()) / scale);
        }
    }
    let ok = worst <= 1e-9 && fb_worst <= 1e-9;
    Ok(result(
        "6",
        "reduction_identity",
        ok,
        format!("gamma/frontier rel err {worst:.3e}, feedback rel err {fb_worst:.3e}"),
    ))
}

/// Realised mean and variance of the optimal strategy against the
/// frontier value at `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McFrontierOutcome {
    pub estimate: montecarlo::Estimate,
    pub target: f64,
    pub corrected_variance: f64,
    pub printed_variance: f64,
}

impl McFrontierOutcome {
    pub fn mean_ok(&self) -> bool {
        (self.estimate.mean - self.target).abs() <= 3.0 * self.estimate.se_mean
    }

    pub fn variance_within(&self, reference: f64, tol: f64) -> bool {
        rel(self.estimate.variance, reference) <= tol
    }
}

pub fn mc_frontier(m: &ModelParams, paths: usize, dt: f64, seed: u64) -> Result<McFrontierOutcome> {
    let sol = FullInfoSolution::optimal(m, FullInfoOptions::default())?;
    let strat = FullInfoStrategy { solution: &sol, model: m };
    let ens = montecarlo::simulate_physical(m, &strat, &SimConfig::new(paths, dt, seed))?;
    let d = m.objective.d;
    Ok(McFrontierOutcome {
        estimate: ens.wealth_estimate()?,
        target: d,
        corrected_variance: full::frontier_full(m, &[d], false)?.points[0].variance,
        printed_variance: full::frontier_full(m, &[d], true)?.points[0].variance,
    })
}

/// The short-horizon instance with `theta = 0.3`, where the two frontier
/// constants differ.
pub fn discriminating_instance() -> ModelParams {
    let mut m = ModelParams::scaled_full();
    m.claim.theta = 0.3;
    m.objective.d = 1.2 * m.riskless_terminal_wealth();
    m
}

fn check_mc_frontier(opts: &ValidationOptions) -> Result<CheckResult> {
    let (paths, dt) = if opts.quick { (20_000, 1e-2) } else { (200_000, 1e-3) };
    let o = mc_frontier(&ModelParams::scaled_full(), paths, dt, 7)?;
    let a = o.mean_ok();
    let b = o.variance_within(o.corrected_variance, 0.05);
    let disc = mc_frontier(&discriminating_instance(), paths, dt, 8)?;
    let c = disc.variance_within(disc.corrected_variance, 0.05)
        && !disc.variance_within(disc.printed_variance, 0.05);
    Ok(result(
        "7",
        "mc_frontier",
        a && b && c,
        format!(
            "mean {:.4} vs d {:.4} ({:.2} SE) {a}; variance {:.4} vs {:.4} {b}; \
             theta = 0.3: realised {:.4}, corrected {:.4}, printed {:.4} {c}",
            o.estimate.mean,
            o.target,
            (o.estimate.mean - o.target).abs() / o.estimate.se_mean,
            o.estimate.variance,
            o.corrected_variance,
            disc.estimate.variance,
            disc.corrected_variance,
            disc.printed_variance
        ),
    ))
}

/// Points `(t, x)` in shifted wealth at distance `[0.5, 50]` from the curve.
pub fn sample_region_points(
    sol: &FullInfoSolution,
    region: Region,
    count: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = if region == Region::AboveCurve { 1.0 } else { -1.0 };
    (0..count)
        .map(|_| {
            let t = rng.random_range(0.0..0.99 * sol.horizon());
            let dist: f64 = rng.random_range(0.5..50.0);
            (t, sol.curve_point(t) + sign * dist)
        })
        .collect()
}

fn check_hjb(opts: &ValidationOptions) -> Result<CheckResult> {
    let m = ModelParams::scaled_full();
    let sol = FullInfoSolution::optimal(&m, full_opts(opts))?;
    let mut worst: f64 = 0.0;
    for (region, seed) in [(Region::AboveCurve, 11), (Region::BelowCurve, 12)] {
        for (t, x) in sample_region_points(&sol, region, 200, seed) {
            worst = worst.max(full::hjb_residual(t, x, &sol, &m, 1e-4)?.abs());
        }
    }
    let rep = full::viscosity_check(&sol, &m, 100);
    let ok = worst <= 1e-4 && rep.passed();
    Ok(result(
        "8",
        "hjb_viscosity",
        ok,
        format!(
            "max residual {worst:.3e}, branch gap {:.3e}, gradient {:.3e}, {} failures",
            rep.max_branch_gap,
            rep.max_gradient_norm,
            rep.failures.len()
        ),
    ))
}

fn check_pqr(base: &ModelParams, opts: &ValidationOptions) -> Result<CheckResult> {
    let sol = FullInfoSolution::optimal(base, full_opts(opts))?;
    let ode_err = sol.pqr_cross_check_error();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sq_err: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random_range(0.0..sol.horizon());
        let x = sol.curve_point(t) + rng.random_range(-100.0..100.0);
        for branch in [1u8, 2] {
            let [p, q, r] = sol.pqr(branch, t);
            let expanded = 0.5 * p * x * x + q * x + r;
            // relative to the size of the expanded terms, since V vanishes on the curve
            let scale = 0.5 * p * x * x + (q * x).abs() + r.abs();
            sq_err = sq_err.max((expanded - sol.value_branch(branch, t, x)).abs() / scale);
        }
    }
    Ok(result(
        "9",
        "pqr_cross_check",
        ode_err <= 1e-6 && sq_err <= 1e-9,
        format!("ODE rel err {ode_err:.3e}, square completion rel err {sq_err:.3e}"),
    ))
}

fn check_reproducibility() -> Result<CheckResult> {
    let m = ModelParams::scaled_full();
    let sol = FullInfoSolution::optimal(&m, FullInfoOptions::default())?;
    let strat = FullInfoStrategy { solution: &sol, model: &m };
    let cfg = SimConfig::new(2000, 1e-2, 12345);
    let run = |threads: usize| -> Result<montecarlo::Estimate> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        pool.install(|| montecarlo::simulate_physical(&m, &strat, &cfg)?.wealth_estimate())
    };
    let a = run(1)?;
    let b = run(4)?;
    let c = run(1)?;
    let ok = a == b && a == c;
    Ok(result(
        "10",
        "reproducibility",
        ok,
        format!("mean {:e} / {:e}, variance {:e} / {:e}", a.mean, b.mean, a.variance, b.variance),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes_on_reference() {
        let rep = run_suite(&ModelParams::reference_full(), &ValidationOptions { quick: true, a1_override: None });
        for c in &rep {
            assert!(c.passed, "{} {} {}", c.id, c.name, c.detail);
        }
    }

    #[test]
    fn injected_a1_is_caught() {
        let opts = ValidationOptions { quick: true, a1_override: Some(-0.03) };
        let base = ModelParams::reference_full();
        assert!(!check_a1(&base, &opts).unwrap().passed);
        assert!(!check_riccati(&base, &opts).unwrap().passed);
        assert!(!check_hjb(&opts).unwrap().passed);
    }
}
