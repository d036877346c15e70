//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! asserts the same condition. Reference values are recomputed here with
//! oracles that do not go through the library code paths under test.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvre_core::cone::{self, Branch, ControlPair, LqCoefficients};
use mvre_core::filter;
use mvre_core::full::{self, FullInfoOptions, FullInfoSolution, Region};
use mvre_core::montecarlo::{self, FullInfoStrategy, SimConfig, ZeroStrategy};
use mvre_core::partial::{self, PartialSolution};
use mvre_core::{Curve, DriftParams, FilterState, InfoMode, ModelParams, DEFAULT_ODE_STEPS};

/// Writes straight to the process stdout so the line survives output capture.
fn report(id: &str, passed: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {id}: {} ({:.2} s) {detail}\n",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn mvre(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mvre"))
        .args(args)
        .output()
        .expect("mvre runs")
}

struct Reference {
    a: f64,
    b: f64,
    theta: f64,
    eta: f64,
    mu: f64,
    r: f64,
    sigma: f64,
    x0: f64,
    t: f64,
}

impl Reference {
    fn of(m: &ModelParams) -> Self {
        Reference {
            a: m.claim.a,
            b: m.claim.b,
            theta: m.claim.theta,
            eta: m.claim.eta,
            mu: m.drift.m0,
            r: m.market.r.as_constant().unwrap(),
            sigma: m.market.sigma.as_constant().unwrap(),
            x0: m.objective.x0,
            t: m.objective.horizon,
        }
    }

    fn a1(&self) -> f64 {
        let k_pi = (self.mu - self.r) / self.sigma;
        let k_q = self.a * self.eta / self.b;
        -(k_pi * k_pi + k_q * k_q) / 2.0
    }

    /// RK4 on `y' = r y + a (theta - eta)`.
    fn riskless_terminal(&self, steps: usize) -> f64 {
        let c = self.a * (self.theta - self.eta);
        let rhs = |y: f64| self.r * y + c;
        let h = self.t / steps as f64;
        let mut y = self.x0;
        for _ in 0..steps {
            let k1 = rhs(y);
            let k2 = rhs(y + 0.5 * h * k1);
            let k3 = rhs(y + 0.5 * h * k2);
            let k4 = rhs(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    fn d_min(&self) -> f64 {
        let g = (self.r * self.t).exp();
        self.x0 * g + self.a * (self.theta - self.eta) * (g - 1.0) / self.r
    }

    /// Printed optimal cost with `K = x0 e^{rT} + (a theta - a eta)/r`.
    fn printed_cost(&self, d: f64, gamma: f64) -> f64 {
        let k = self.x0 * (self.r * self.t).exp() + (self.a * self.theta - self.a * self.eta) / self.r;
        let f = self.a * self.theta - self.a * self.eta + (d - gamma) * self.r;
        let s = self.x0 - (d - gamma) + f * (1.0 - (-self.r * self.t).exp()) / self.r;
        if s < 0.0 {
            (2.0 * self.a1() * self.t).exp() * (k - (d - gamma)).powi(2) - gamma * gamma
        } else {
            (k - d).powi(2) + 2.0 * (k - d) * gamma
        }
    }

    fn g1(&self, t: f64, shift: f64) -> f64 {
        let f = self.a * (self.theta - self.eta) + shift * self.r;
        f * ((self.r * (self.t - t)).exp() - 1.0) / self.r
    }

    fn branch(&self, which: u8, t: f64, x: f64, shift: f64) -> f64 {
        let tau = self.t - t;
        let g = self.g1(t, shift);
        match which {
            1 => 0.5 * ((self.r * tau).exp() * x + g).powi(2),
            _ => 0.5 * (((self.a1() + self.r) * tau).exp() * x + (self.a1() * tau).exp() * g).powi(2),
        }
    }

    fn value(&self, t: f64, x: f64, shift: f64) -> f64 {
        let s = x + self.g1(t, shift) * (-self.r * (self.t - t)).exp();
        self.branch(if s >= 0.0 { 1 } else { 2 }, t, x, shift)
    }
}

#[test]
fn criterion_01_riskless_vertex() {
    let start = Instant::now();
    let p = Reference::of(&ModelParams::reference_full());
    let ode = p.riskless_terminal(100_000);
    let closed = p.d_min();
    let lib = ModelParams::reference_full().riskless_terminal_wealth();

    let dir = tempfile::tempdir().unwrap();
    let out = mvre(&[
        "frontier",
        "--mode",
        "full",
        "--config",
        config("full_reference.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').take(2).map(|v| v.parse().unwrap()).collect();
    let elapsed = start.elapsed();

    let passed = out.status.success()
        && csv.starts_with("d,variance,std_dev,mode\n")
        && (ode - 2863.9).abs() <= 0.05
        && (closed - ode).abs() <= 1e-6 * ode
        && (lib - ode).abs() <= 1e-6 * ode
        && (first[0] - ode).abs() <= 1e-6 * ode
        && first[1] == 0.0
        && elapsed < Duration::from_secs(1);
    report(
        "1",
        passed,
        elapsed,
        &format!("d_min ODE {ode:.6}, closed {closed:.6}, CLI vertex row d = {}, variance {}", first[0], first[1]),
    );
    assert!(passed);
}

#[test]
fn criterion_02_compat_dual_anchor() {
    let start = Instant::now();
    let m = ModelParams::reference_full();
    let p = Reference::of(&m);
    let d = 10_000.0;
    let (mut best, mut arg) = (f64::NEG_INFINITY, f64::NAN);
    for i in 0..=400_000 {
        let g = -2000.0 + 0.01 * i as f64;
        let v = p.printed_cost(d, g);
        if v > best {
            best = v;
            arg = g;
        }
    }
    let closed = full::gamma_star_full(&m, d, true).unwrap();
    let elapsed = start.elapsed();
    let passed = (arg - -130.2).abs() <= 0.5
        && (closed - -130.2).abs() <= 0.5
        && elapsed < Duration::from_secs(1);
    report(
        "2",
        passed,
        elapsed,
        &format!("grid argmax {arg:.2}, printed closed form {closed:.4} (d = 10000 inferred)"),
    );
    assert!(passed);
}

#[test]
fn criterion_03_riccati_equivalence() {
    let start = Instant::now();
    let mut instances = vec![ModelParams::reference_full(), ModelParams::scaled_full()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut m = ModelParams::scaled_full();
        m.market.r = rng.random_range(0.01..0.08).into();
        m.market.sigma = rng.random_range(0.2..2.0).into();
        m.drift.m0 = rng.random_range(0.0..0.2);
        m.claim.b = rng.random_range(0.3..2.0);
        m.claim.eta = rng.random_range(0.0..0.5);
        m.claim.theta = m.claim.eta;
        m.objective.horizon = rng.random_range(1.0..30.0);
        instances.push(m);
    }
    let mut worst: f64 = 0.0;
    for m in &instances {
        let p = Reference::of(m);
        let m_bar = cone::projected_drift(m, DEFAULT_ODE_STEPS).unwrap();
        let ric = cone::solve_riccati_pair(m, &m_bar, DEFAULT_ODE_STEPS).unwrap();
        for (k, &t) in ric.p_plus.grid().iter().enumerate() {
            let tau = p.t - t;
            let plus = (2.0 * p.r * tau).exp();
            // cone-active coordinates only
            let a1 = -((p.mu - p.r).max(0.0) / p.sigma).powi(2) / 2.0 - (p.a * p.eta / p.b).powi(2) / 2.0;
            let minus = ((2.0 * p.r + 2.0 * a1) * tau).exp();
            worst = worst
                .max(((ric.p_plus.values()[k] - plus) / plus).abs())
                .max(((ric.p_minus.values()[k] - minus) / minus).abs());
        }
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-6 && elapsed < Duration::from_secs(1);
    report("3", passed, elapsed, &format!("{} instances, max rel err {worst:.3e}", instances.len()));
    assert!(passed);
}

#[test]
fn criterion_04_cone_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_h = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let c = LqCoefficients::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.05..3.0),
            rng.random_range(0.05..3.0),
            0.0,
        )
        .unwrap();
        let p: f64 = rng.random_range(0.01..20.0);
        for (branch, s) in [(Branch::Plus, 1.0), (Branch::Minus, -1.0)] {
            let objective = |u: ControlPair| {
                p * (c.d_q.powi(2) * u.q * u.q + c.d_pi.powi(2) * u.pi * u.pi)
                    + 2.0 * s * p * (c.b_q * u.q + c.b_pi * u.pi)
            };
            let xi = cone::xi_minimizer(branch, p, &c).unwrap();
            let h = cone::hamiltonian_min(branch, p, &c).unwrap();
            assert!(xi.is_admissible());
            worst_h = worst_h.max(h);
            let at_xi = objective(xi);
            for _ in 0..100 {
                let probe = ControlPair {
                    q: rng.random_range(0.0..5.0),
                    pi: rng.random_range(0.0..5.0),
                };
                worst_gap = worst_gap.max(at_xi - objective(probe));
            }
            worst_gap = worst_gap.max(at_xi - objective(ControlPair::ZERO));
        }
    }
    let elapsed = start.elapsed();
    let passed = worst_gap <= 1e-9 && worst_h <= 0.0 && elapsed < Duration::from_secs(10);
    report(
        "4",
        passed,
        elapsed,
        &format!("max objective(xi) - objective(probe) = {worst_gap:.3e}, max H = {worst_h:.3e}"),
    );
    assert!(passed);
}

#[test]
fn criterion_05_filter_suite() {
    let start = Instant::now();
    let sigma: Curve = 1.0.into();
    let mut none = DriftParams::known(0.06);
    none.h = 0.4.into();
    let zero = filter::solve_variance(&none, &sigma, 10.0, DEFAULT_ODE_STEPS).unwrap();
    let a = zero.values().iter().all(|&n| n == 0.0);

    // stationary root of 13 - (3 + n)^2 = 0
    let root = -3.0 + 13f64.sqrt();
    let n = filter::solve_variance(&DriftParams::filter_demo(0.0), &sigma, 10.0, DEFAULT_ODE_STEPS).unwrap();
    let b = (n.last() - 0.60555).abs() <= 1e-3 && (n.last() - root).abs() <= 1e-3;

    let curves: Vec<_> = [-0.5, 0.0, 0.5]
        .iter()
        .map(|&h| filter::solve_variance(&DriftParams::filter_demo(h), &sigma, 10.0, DEFAULT_ODE_STEPS).unwrap())
        .collect();
    let c = (1..curves[0].values().len())
        .all(|k| curves[0].values()[k] < curves[1].values()[k] && curves[1].values()[k] < curves[2].values()[k]);

    let m = ModelParams::filter_demo(0.0);
    let ens = montecarlo::simulate_physical(&m, &ZeroStrategy, &SimConfig::new(100_000, 1e-3, 55)).unwrap();
    let sq: Vec<f64> = ens.terminal_drift_error.iter().map(|e| e * e).collect();
    let mean = sq.iter().sum::<f64>() / sq.len() as f64;
    let sd = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (sq.len() - 1) as f64).sqrt();
    let se = sd / (sq.len() as f64).sqrt();
    let d = (mean - n.last()).abs() <= 3.0 * se;

    let elapsed = start.elapsed();
    let passed = a && b && c && d && elapsed < Duration::from_secs(120);
    report(
        "5",
        passed,
        elapsed,
        &format!(
            "(a) {a}; (b) n(10) = {:.6} {b}; (c) {c}; (d) mean (mu-m)^2 = {mean:.5} vs n(T) = {:.5}, {:.2} SE {d}",
            n.last(),
            n.last(),
            (mean - n.last()).abs() / se
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_06_reduction_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
    let mut long = ModelParams::reference_full();
    long.claim.theta = long.claim.eta;
    for mut m in [long, ModelParams::scaled_full()] {
        m.info_mode = InfoMode::Partial;
        let psol = PartialSolution::solve(&m, DEFAULT_ODE_STEPS).unwrap();
        let fsol = FullInfoSolution::optimal(&m, FullInfoOptions::default()).unwrap();
        let d = m.objective.d;
        // the partial multiplier is the target level, the full one the shift
        worst = worst.max(rel(psol.gamma_star, d - fsol.gamma_star));

        let grid: Vec<f64> = (0..20).map(|i| psol.d0 * (1.0 + 0.1 * i as f64)).collect();
        let fp = partial::frontier_partial(&psol.riccati, &m, &grid).unwrap();
        let ff = full::frontier_full(&m, &grid, false).unwrap();
        for (x, y) in fp.points.iter().zip(&ff.points) {
            worst = worst.max(rel(x.variance, y.variance));
        }

        for i in 0..25 {
            let t = m.horizon() * i as f64 / 25.0;
            let level = psol.switching_level(&m, t);
            for dx in [-300.0, -20.0, -1.0, 0.0, 1.0, 20.0] {
                let x = level + dx;
                let fs = FilterState { t, m: m.drift.m0, n: 0.0 };
                let up = partial::feedback_partial(t, x, &fs, &psol, &m);
                let uf = full::feedback_full(t, x - fsol.shift(), &fsol, &m);
                let scale = up.q.abs().max(up.pi.abs());
                let err = (up.q - uf.q).abs().max((up.pi - uf.pi).abs());
                worst = worst.max(if scale == 0.0 { err } else { err / scale });
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-9 && elapsed < Duration::from_secs(1);
    report("6", passed, elapsed, &format!("max rel err over gamma*, frontier, feedback {worst:.3e}"));
    assert!(passed);
}

struct McRun {
    mean: f64,
    variance: f64,
    se_mean: f64,
    target: f64,
    corrected: f64,
    printed: f64,
}

/// Simulates the corrected efficient strategy and evaluates both frontier
/// formulas at the target with the oracle constants of this file.
fn mc_run(m: &ModelParams, paths: usize, seed: u64) -> McRun {
    let sol = FullInfoSolution::optimal(m, FullInfoOptions::default()).unwrap();
    let strat = FullInfoStrategy { solution: &sol, model: m };
    let ens = montecarlo::simulate_physical(m, &strat, &SimConfig::new(paths, 1e-3, seed)).unwrap();
    let xs = &ens.terminal_wealth;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

    let p = Reference::of(m);
    let d = m.objective.d;
    let denom = (-2.0 * p.a1() * p.t).exp() - 1.0;
    let printed_k = p.x0 * (p.r * p.t).exp() + (p.a * p.theta - p.a * p.eta) / p.r;
    McRun {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        target: d,
        corrected: (p.d_min() - d).powi(2) / denom,
        printed: (printed_k - d).powi(2) / denom,
    }
}

#[test]
fn criterion_07_monte_carlo_frontier() {
    let start = Instant::now();
    let m = ModelParams::scaled_full();
    let o = mc_run(&m, 200_000, 7);
    let a = (o.mean - o.target).abs() <= 3.0 * o.se_mean;
    let b = ((o.variance - o.corrected) / o.corrected).abs() <= 0.05;
    let printed_passes = ((o.variance - o.printed) / o.printed).abs() <= 0.05;
    let c = !printed_passes;
    let elapsed = start.elapsed();
    let passed = a && b && c && elapsed < Duration::from_secs(600);
    report(
        "7",
        passed,
        elapsed,
        &format!(
            "(a) mean {:.4} vs d {:.4}, {:.2} SE {a}; (b) variance {:.4} vs corrected {:.4} {b}; \
             (c) printed frontier {:.4} rejected: {c} (with theta = eta both constants equal x0 e^(rT))",
            o.mean,
            o.target,
            (o.mean - o.target).abs() / o.se_mean,
            o.variance,
            o.corrected,
            o.printed
        ),
    );
    assert!(passed);
}

/// Not a numbered criterion: the printed-frontier check on an instance
/// where the two constants differ.
#[test]
fn printed_frontier_rejected_when_theta_exceeds_eta() {
    let start = Instant::now();
    let mut m = ModelParams::scaled_full();
    m.claim.theta = 0.3;
    m.objective.d = 1.2 * m.riskless_terminal_wealth();
    let o = mc_run(&m, 200_000, 8);
    let a = (o.mean - o.target).abs() <= 3.0 * o.se_mean;
    let b = ((o.variance - o.corrected) / o.corrected).abs() <= 0.05;
    let c = ((o.variance - o.printed) / o.printed).abs() > 0.05;
    let passed = a && b && c;
    report(
        "7 (supplementary, theta = 0.3)",
        passed,
        start.elapsed(),
        &format!(
            "mean {:.4} vs d {:.4}; variance {:.4}, corrected {:.4}, printed {:.4}",
            o.mean, o.target, o.variance, o.corrected, o.printed
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_08_hjb_viscosity() {
    let start = Instant::now();
    let m = ModelParams::scaled_full();
    let p = Reference::of(&m);
    let sol = FullInfoSolution::optimal(&m, FullInfoOptions::default()).unwrap();
    let shift = sol.shift();
    let discounted_g1 = |t: f64| p.g1(t, shift) * (-p.r * (p.t - t)).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // interior residuals: library stencil and an independent one
    let mut worst_lib: f64 = 0.0;
    let mut worst_own: f64 = 0.0;
    let f = p.a * (p.theta - p.eta) + shift * p.r;
    for region in [Region::AboveCurve, Region::BelowCurve] {
        let mut count = 0;
        while count < 200 {
            let t = rng.random_range(0.0..0.99 * p.t);
            let dist: f64 = rng.random_range(0.5..60.0);
            let x = -discounted_g1(t) + if region == Region::AboveCurve { dist } else { -dist };
            assert_eq!(sol.region(t, x), region);
            worst_lib = worst_lib.max(full::hjb_residual(t, x, &sol, &m, 1e-4).unwrap().abs());

            let (ht, hx) = (1e-4, 1e-4 * x.abs().max(1.0));
            let v = |s: f64, y: f64| p.value(s, y, shift);
            let vt = (v(t + ht, x) - v(t - ht, x)) / (2.0 * ht);
            let vx = (v(t, x + hx) - v(t, x - hx)) / (2.0 * hx);
            let vxx = (v(t, x + hx) - 2.0 * v(t, x) + v(t, x - hx)) / (hx * hx);
            // minimise over a fine cone grid around the unconstrained optimum
            let coeffs = [(p.a * p.eta, p.b), (p.mu - p.r, p.sigma)];
            let mut inf = 0.0;
            for (bc, dc) in coeffs {
                let star = (-vx * bc / (vxx * dc * dc)).max(0.0);
                let mut best = 0.0f64;
                for k in 0..=2000 {
                    let u = star * k as f64 / 1000.0;
                    best = best.min(vx * bc * u + 0.5 * dc * dc * vxx * u * u);
                }
                inf += best;
            }
            worst_own = worst_own.max((vt + vx * (p.r * x + f) + inf).abs());
            count += 1;
        }
    }

    // on the switching curve
    let mut gap: f64 = 0.0;
    let mut grad: f64 = 0.0;
    let mut order = true;
    let mut subsuper = true;
    for i in 0..100 {
        let t = p.t * i as f64 / 100.0;
        let x = -discounted_g1(t);
        gap = gap.max((p.branch(1, t, x, shift) - p.branch(2, t, x, shift)).abs());
        let h = 1e-8 * x.abs().max(1.0);
        let v = |s: f64, y: f64| p.value(s, y, shift);
        let vt = (v(t + 1e-8, x) - v(t - 1e-8, x)) / 2e-8;
        let vx = (v(t, x + h) - v(t, x - h)) / (2.0 * h);
        grad = grad.max(vt.hypot(vx));
        let tau = p.t - t;
        let p1 = (2.0 * p.r * tau).exp();
        let p2 = ((2.0 * p.a1() + 2.0 * p.r) * tau).exp();
        order &= p2 <= p1;
        // inf over q, pi >= 0 of P (b^2 q^2 + sigma^2 pi^2) / 2 with zero gradient
        let quad_inf = |big_p: f64| {
            let mut best = f64::INFINITY;
            for k in 0..=50 {
                for j in 0..=50 {
                    let (q, pi) = (0.1 * k as f64, 0.1 * j as f64);
                    best = best.min(0.5 * big_p * (p.b * p.b * q * q + p.sigma * p.sigma * pi * pi));
                }
            }
            best
        };
        subsuper &= quad_inf(p1) >= 0.0 && quad_inf(p2) <= 0.0;
    }
    let rep = full::viscosity_check(&sol, &m, 100);

    let elapsed = start.elapsed();
    let passed = worst_lib <= 1e-4
        && worst_own <= 1e-4
        && gap <= 1e-10
        && grad <= 1e-6
        && order
        && subsuper
        && rep.passed()
        && elapsed < Duration::from_secs(10);
    report(
        "8",
        passed,
        elapsed,
        &format!(
            "residual lib {worst_lib:.3e} own {worst_own:.3e}; gap {gap:.3e}; gradient {grad:.3e}; \
             P2 <= P1 {order}; sub/super {subsuper}; viscosity_check failures {}",
            rep.failures.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_09_pqr_cross_check() {
    let start = Instant::now();
    let m = ModelParams::reference_full();
    let p = Reference::of(&m);
    let sol = FullInfoSolution::optimal(&m, FullInfoOptions::default()).unwrap();
    let f = p.a * (p.theta - p.eta) + sol.shift() * p.r;
    let a1 = p.a1();

    // independent backward RK4 of both systems
    let rk4 = |rhs: &dyn Fn([f64; 3]) -> [f64; 3], steps: usize| -> Vec<[f64; 3]> {
        let h = -p.t / steps as f64;
        let mut y = [1.0, 0.0, 0.0];
        let mut out = vec![y];
        let add = |y: [f64; 3], k: [f64; 3], c: f64| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]];
        for _ in 0..steps {
            let k1 = rhs(y);
            let k2 = rhs(add(y, k1, 0.5 * h));
            let k3 = rhs(add(y, k2, 0.5 * h));
            let k4 = rhs(add(y, k3, h));
            y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            out.push(y);
        }
        out.reverse();
        out
    };
    let steps = 10_000;
    let r = p.r;
    let sys1 = rk4(&|y| [-2.0 * r * y[0], -r * y[1] - f * y[0], -f * y[1]], steps);
    let sys2 = rk4(
        &|y| [-(2.0 * r + 2.0 * a1) * y[0], -(r + 2.0 * a1) * y[1] - f * y[0], -a1 * y[1] * y[1] / y[0] - f * y[1]],
        steps,
    );
    let mut ode_err: f64 = 0.0;
    for (branch, sys) in [(1u8, &sys1), (2u8, &sys2)] {
        for c in 0..3 {
            let closed: Vec<f64> = (0..=steps).map(|k| sol.pqr(branch, p.t * k as f64 / steps as f64)[c]).collect();
            let scale = closed.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (row, exact) in sys.iter().zip(&closed) {
                ode_err = ode_err.max((row[c] - exact).abs() / scale);
            }
        }
    }
    ode_err = ode_err.max(sol.pqr_cross_check_error());

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sq_err: f64 = 0.0;
    let g0 = p.g1(0.0, sol.shift());
    for _ in 0..100 {
        let x: f64 = rng.random_range(-1e4..1e4);
        let [p2, q2, r2] = sol.pqr(2, 0.0);
        let lhs = 0.5 * p2 * x * x + q2 * x + r2;
        let rhs = 0.5 * (2.0 * a1 * p.t).exp() * ((p.r * p.t).exp() * x + g0).powi(2);
        let scale = (0.5 * p2 * x * x).abs() + (q2 * x).abs() + r2.abs();
        sq_err = sq_err.max((lhs - rhs).abs() / scale);
    }
    let elapsed = start.elapsed();
    let passed = ode_err <= 1e-6 && sq_err <= 1e-9 && elapsed < Duration::from_secs(1);
    report(
        "9",
        passed,
        elapsed,
        &format!("PQR ODE vs closed form {ode_err:.3e}; completion of square {sq_err:.3e}"),
    );
    assert!(passed);
}

#[test]
fn criterion_10_reproducibility() {
    let start = Instant::now();
    let cfg = config("scaled_full.toml");
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = mvre(&[
            "--threads",
            threads,
            "simulate",
            "--mode",
            "full",
            "--config",
            cfg.to_str().unwrap(),
            "--paths",
            "4000",
            "--dt",
            "0.01",
            "--seed",
            "2024",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join("summary.json")).unwrap()
    };
    let base = run("1");
    let same = [run("1"), run("2"), run("4")].iter().all(|b| *b == base);
    let elapsed = start.elapsed();
    let passed = same && elapsed < Duration::from_secs(60);
    report(
        "10",
        passed,
        elapsed,
        &format!("summary.json byte-identical across 4 runs with 1, 1, 2, 4 workers: {same}"),
    );
    assert!(passed);
}
