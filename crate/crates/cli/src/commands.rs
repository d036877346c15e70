use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use mvre_core::filter::{self, DriftFilter};
use mvre_core::frontier::target_grid;
use mvre_core::full::{self, FullInfoOptions, FullInfoParams, FullInfoSolution};
use mvre_core::montecarlo::{self, FullInfoStrategy, PartialInfoStrategy, SimConfig, SimMode};
use mvre_core::partial::{self, ApproximationMode, PartialSolution};
use mvre_core::validation::{self, ValidationOptions};
use mvre_core::{InfoMode, ModelParams, RngStream, DEFAULT_ODE_STEPS};

use crate::args::{Cli, Command, Common, Mode, Scheme};
use crate::output::{write_csv, write_file, Cell};

/// Exit code for a failed validation suite.
const VALIDATION_FAILED: u8 = 2;

pub fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let compat = cli.compat_paper_formulas;
    match cli.command {
        Command::Filter { common, seed, steps } => filter_cmd(&common, seed, steps),
        Command::Frontier {
            common,
            mode,
            points,
            d_max,
            mc_paths,
            seed,
        } => frontier_cmd(&common, mode, points, d_max, mc_paths, seed, compat),
        Command::ValueSurface {
            common,
            nt,
            nx,
            x_min,
            x_max,
        } => value_surface_cmd(&common, nt, nx, x_min, x_max, compat),
        Command::DualCurve {
            common,
            gamma_min,
            gamma_max,
            points,
        } => dual_curve_cmd(&common, gamma_min, gamma_max, points, compat),
        Command::Simulate {
            common,
            paths,
            dt,
            seed,
            mode,
            scheme,
            store_paths,
        } => simulate_cmd(&common, paths, dt, seed, mode, scheme, store_paths, compat),
        Command::Validate {
            config,
            quick,
            inject_a1,
        } => validate_cmd(&config, quick, inject_a1),
    }
    .map(|_| 0)
    .or_else(|e| match e.downcast_ref::<ValidationFailed>() {
        Some(_) => Ok(VALIDATION_FAILED),
        None => Err(e),
    })
}

#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "validation failed")
    }
}

impl std::error::Error for ValidationFailed {}

/// Parses and validates the configuration before any computation.
fn load_model(path: &Path) -> Result<ModelParams> {
    let model = ModelParams::from_path(path)?;
    let report = model.validate();
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if !report.is_ok() {
        bail!("invalid configuration {}:\n{report}", path.display());
    }
    Ok(model)
}

fn full_options(compat: bool) -> FullInfoOptions {
    FullInfoOptions {
        compat_paper_formulas: compat,
        ..Default::default()
    }
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn filter_cmd(common: &Common, seed: Option<u64>, steps: usize) -> Result<()> {
    let m = load_model(&common.config)?;
    let horizon = m.horizon();
    let f = DriftFilter::new(m.drift.clone(), m.market.sigma.clone(), horizon, steps)?;
    let n = f.variance();
    let path = match seed {
        None => {
            let rows = n
                .grid()
                .iter()
                .zip(n.values())
                .map(|(&t, &v)| [Cell::Num(t), Cell::Num(m.drift.mean_drift(t)), Cell::Num(v)]);
            write_csv(&common.out_dir, "filter.csv", "t,m,n", rows)?
        }
        Some(seed) => {
            let stream = RngStream::new(seed, 0);
            let (returns, mu) =
                filter::simulate_observations(&m.drift, &m.market.sigma, horizon, steps, &stream)?;
            let run = f.run(&returns, horizon / steps as f64)?;
            let rows = run
                .states
                .iter()
                .zip(&mu)
                .map(|(s, &mu)| [Cell::Num(s.t), Cell::Num(s.m), Cell::Num(s.n), Cell::Num(mu)]);
            write_csv(&common.out_dir, "filter.csv", "t,m,n,mu", rows)?
        }
    };
    println!("n(T) = {}", n.last());
    report(&path);
    Ok(())
}

fn frontier_cmd(
    common: &Common,
    mode: Mode,
    points: usize,
    d_max: Option<f64>,
    mc_paths: usize,
    seed: u64,
    compat: bool,
) -> Result<()> {
    let m = load_model(&common.config)?;
    let upper = |vertex: f64| d_max.unwrap_or(m.objective.d.max(2.0 * vertex));
    let curve = match mode {
        Mode::Full => {
            let vertex = FullInfoParams::from_model(&m)?.vertex(compat);
            full::frontier_full(&m, &target_grid(vertex, upper(vertex), points), compat)?
        }
        Mode::Partial => {
            let sol = PartialSolution::solve(&m, DEFAULT_ODE_STEPS)?;
            let curve =
                partial::frontier_partial(&sol.riccati, &m, &target_grid(sol.d0, upper(sol.d0), points))?;
            if sol.approximation_mode == ApproximationMode::ProjectedDrift && mc_paths >= 2 {
                let strat = PartialInfoStrategy { solution: &sol, model: &m };
                let cfg = SimConfig::new(mc_paths, SimConfig::default_dt(m.horizon()), seed);
                let est = montecarlo::simulate_physical(&m, &strat, &cfg)?.wealth_estimate()?;
                let analytic = partial::frontier_partial(&sol.riccati, &m, &[m.objective.d])?;
                println!(
                    "projected-drift approximation: at d = {} the analytic variance is {}, \
                     realised mean {} (se {}), realised variance {} (se {})",
                    m.objective.d,
                    analytic.points[0].variance,
                    est.mean,
                    est.se_mean,
                    est.variance,
                    est.se_variance
                );
            }
            curve
        }
    };
    report(&write_file(&common.out_dir, "frontier.csv", &curve.to_csv())?);
    Ok(())
}

fn require_full(m: &ModelParams, what: &str) -> Result<()> {
    if m.info_mode != InfoMode::Full {
        bail!("{what} needs a full-information configuration (info_mode = \"full\")");
    }
    Ok(())
}

fn value_surface_cmd(
    common: &Common,
    nt: usize,
    nx: usize,
    x_min: Option<f64>,
    x_max: Option<f64>,
    compat: bool,
) -> Result<()> {
    let m = load_model(&common.config)?;
    require_full(&m, "value-surface")?;
    if nt < 2 || nx < 2 {
        bail!("--nt and --nx must be at least 2");
    }
    let sol = FullInfoSolution::optimal(&m, full_options(compat))?;
    let x0 = m.objective.x0 - sol.shift();
    let span = x0.abs().max(sol.curve_point(0.0).abs()).max(1.0);
    let (lo, hi) = (x_min.unwrap_or(-2.0 * span), x_max.unwrap_or(span));
    if !(lo < hi) {
        bail!("empty x range [{lo}, {hi}]");
    }
    let times = target_grid(0.0, m.horizon(), nt);
    let xs = target_grid(lo, hi, nx);
    let rows = times.iter().flat_map(|&t| {
        let sol = &sol;
        xs.iter().map(move |&x| {
            [
                Cell::Num(t),
                Cell::Num(x),
                Cell::Num(full::value_function(t, x, sol)),
                Cell::Text(sol.region(t, x).as_str()),
            ]
        })
    });
    let path = write_csv(&common.out_dir, "value_surface.csv", "t,x,V,region", rows)?;
    println!("x is the shifted wealth X - (d - gamma*), d - gamma* = {}", sol.shift());
    report(&path);
    Ok(())
}

fn dual_curve_cmd(
    common: &Common,
    gamma_min: Option<f64>,
    gamma_max: Option<f64>,
    points: usize,
    compat: bool,
) -> Result<()> {
    let m = load_model(&common.config)?;
    let d = m.objective.d;
    let (gamma_star, value): (f64, Box<dyn Fn(f64) -> f64>) = match m.info_mode {
        InfoMode::Full => {
            let p = FullInfoParams::from_model(&m)?;
            let a1 = p.a1();
            let g = full::gamma_star_full(&m, d, compat)?;
            (g, Box::new(move |gamma| full::optimal_cost(&p, a1, d, gamma, compat)))
        }
        InfoMode::Partial => {
            let sol = PartialSolution::solve(&m, DEFAULT_ODE_STEPS)?;
            let g = sol.gamma_star;
            let m2 = m.clone();
            (g, Box::new(move |gamma| partial::dual_value_partial(&sol.riccati, &m2, gamma)))
        }
    };
    let width = 5.0 * gamma_star.abs().max(1.0);
    let lo = gamma_min.unwrap_or(gamma_star - width);
    let hi = gamma_max.unwrap_or(gamma_star + width);
    if !(lo < hi) || points < 2 {
        bail!("need gamma_min < gamma_max and at least two points");
    }
    let rows = target_grid(lo, hi, points)
        .into_iter()
        .map(|g| [Cell::Num(g), Cell::Num(value(g))]);
    let path = write_csv(&common.out_dir, "dual_curve.csv", "gamma,dual_value", rows)?;
    println!("gamma* = {gamma_star}");
    report(&path);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    common: &Common,
    paths: usize,
    dt: Option<f64>,
    seed: u64,
    mode: Mode,
    scheme: Scheme,
    store_paths: bool,
    compat: bool,
) -> Result<()> {
    let m = load_model(&common.config)?;
    let cfg = SimConfig {
        n_paths: paths,
        dt: dt.unwrap_or_else(|| SimConfig::default_dt(m.horizon())),
        seed,
        mode: match scheme {
            Scheme::Physical => SimMode::Physical,
            Scheme::Innovation => SimMode::Innovation,
        },
        store_paths,
    };
    if cfg.mode == SimMode::Innovation && m.info_mode != InfoMode::Partial {
        bail!("--scheme innovation requires a partial-information configuration");
    }
    let d = m.objective.d;
    let (ens, analytic, gamma_star, vertex, label) = match mode {
        Mode::Full => {
            let sol = FullInfoSolution::optimal(&m, full_options(compat))?;
            let strat = FullInfoStrategy { solution: &sol, model: &m };
            let ens = montecarlo::simulate_with(&m, &strat, &cfg)?;
            let fr = full::frontier_full(&m, &[d], compat)?;
            (ens, fr.points[0].variance, sol.gamma_star, sol.d_vertex, fr.mode)
        }
        Mode::Partial => {
            let sol = PartialSolution::solve(&m, DEFAULT_ODE_STEPS)?;
            let strat = PartialInfoStrategy { solution: &sol, model: &m };
            let ens = montecarlo::simulate_with(&m, &strat, &cfg)?;
            let fr = partial::frontier_partial(&sol.riccati, &m, &[d])?;
            (ens, fr.points[0].variance, sol.gamma_star, sol.d0, fr.mode)
        }
    };
    let est = ens.wealth_estimate()?;
    let summary = json!({
        "strategy": match mode { Mode::Full => "full", Mode::Partial => "partial" },
        "scheme": cfg.mode.as_str(),
        "n_paths": cfg.n_paths,
        "dt": cfg.dt,
        "steps": ens.steps,
        "seed": cfg.seed,
        "flagged_paths": ens.flagged.len(),
        "mean": est.mean,
        "variance": est.variance,
        "se_mean": est.se_mean,
        "se_variance": est.se_variance,
        "target_d": d,
        "analytic_variance": analytic,
        "analytic_mode": label,
        "gamma_star": gamma_star,
        "d_min": vertex,
        "mean_within_3se": (est.mean - d).abs() <= 3.0 * est.se_mean,
        "diagnostics_finite": ens.diagnostics_finite(),
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    report(&write_file(&common.out_dir, "summary.json", &text)?);
    if store_paths {
        let rows = ens.stored.iter().flat_map(|p| {
            (0..p.times.len()).map(move |i| {
                [
                    Cell::Int(p.path_id),
                    Cell::Num(p.times[i]),
                    Cell::Num(p.wealth[i]),
                    Cell::Num(p.drift_mean[i]),
                ]
            })
        });
        report(&write_csv(&common.out_dir, "paths.csv", "path_id,t,wealth,m", rows)?);
    }
    println!(
        "mean {} (se {}), variance {} (se {}), analytic variance {}",
        est.mean, est.se_mean, est.variance, est.se_variance, analytic
    );
    Ok(())
}

fn validate_cmd(config: &Path, quick: bool, inject_a1: Option<f64>) -> Result<()> {
    let m = load_model(config)?;
    let opts = ValidationOptions {
        quick,
        a1_override: inject_a1,
    };
    let results = validation::run_suite(&m, &opts);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:>3}  {:<width$}  {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        eprintln!("failing checks: {}", failed.join(", "));
        Err(ValidationFailed.into())
    }
}
