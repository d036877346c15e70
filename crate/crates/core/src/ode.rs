//! Deterministic numerics shared by the solvers: classical RK4 on a uniform
//! grid (forward and backward in time), sampled curves with linear
//! interpolation, and reproducible Gaussian streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Values on a strictly increasing grid covering `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Domain(
                "a sampled curve needs at least two nodes and one value per node".into(),
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::Domain("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t: grid[i] });
        }
        Ok(SampledCurve { grid, values })
    }

    /// Curve on `t_k = k T / (len - 1)`.
    pub fn uniform(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let grid = uniform_grid(horizon, values.len().saturating_sub(1).max(1));
        Self::new(grid, values)
    }

    /// Samples `f` on a uniform grid with `steps` intervals.
    pub fn from_fn(horizon: f64, steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(horizon, steps);
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Exact at nodes, linear in between.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon.max(1.0);
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::OutOfRange { t, horizon });
        }
        let t = t.clamp(0.0, horizon);
        let i = self.grid.partition_point(|&g| g <= t);
        if i == 0 {
            return Ok(self.values[0]);
        }
        if i == self.grid.len() {
            return Ok(self.last());
        }
        let (t0, t1) = (self.grid[i - 1], self.grid[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if t == t0 {
            return Ok(v0);
        }
        let w = (t - t0) / (t1 - t0);
        Ok(v0 + w * (v1 - v0))
    }

    /// Largest `|self - other| / scale` over the nodes of `self`, with
    /// `scale = max |other|` on those nodes.
    pub fn sup_rel_error(&self, other: impl Fn(f64) -> f64) -> f64 {
        let reference: Vec<f64> = self.grid.iter().map(|&t| other(t)).collect();
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = self
            .values
            .iter()
            .zip(&reference)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if scale == 0.0 {
            err
        } else {
            err / scale
        }
    }
}

pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    let h = horizon / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    grid[steps] = horizon;
    grid
}

/// States of an `N`-dimensional ODE on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    grid: Vec<f64>,
    states: Vec<[f64; N]>,
}

impl<const N: usize> Trajectory<N> {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.states
    }

    pub fn first(&self) -> [f64; N] {
        self.states[0]
    }

    pub fn last(&self) -> [f64; N] {
        *self.states.last().unwrap()
    }

    pub fn component(&self, i: usize) -> SampledCurve {
        SampledCurve {
            grid: self.grid.clone(),
            values: self.states.iter().map(|s| s[i]).collect(),
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + a * k[i])
}

fn rk4_step<const N: usize, F>(rhs: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = rhs(t + h, &axpy(y, h, &k3));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Solves `y' = rhs(t, y)`, `y(0) = initial` on `[0, horizon]`.
pub fn integrate_forward<const N: usize, F>(
    rhs: F,
    initial: [f64; N],
    horizon: f64,
    steps: usize,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    check_steps(horizon, steps)?;
    let grid = uniform_grid(horizon, steps);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial);
    let mut y = initial;
    for k in 0..steps {
        let (t0, t1) = (grid[k], grid[k + 1]);
        y = rk4_step(&rhs, t0, &y, t1 - t0);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t: t1 });
        }
        states.push(y);
    }
    Ok(Trajectory { grid, states })
}

/// Solves the terminal-value problem `y' = rhs(t, y)`, `y(T) = terminal`,
/// marching from `T` down to `0`. The result is indexed forward in time.
pub fn integrate_backward<const N: usize, F>(
    rhs: F,
    terminal: [f64; N],
    horizon: f64,
    steps: usize,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    check_steps(horizon, steps)?;
    let grid = uniform_grid(horizon, steps);
    let mut states = vec![terminal; steps + 1];
    let mut y = terminal;
    for k in (0..steps).rev() {
        let (t0, t1) = (grid[k], grid[k + 1]);
        y = rk4_step(&rhs, t1, &y, t0 - t1);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t: t0 });
        }
        states[k] = y;
    }
    Ok(Trajectory { grid, states })
}

/// Scalar form of [`integrate_backward`].
pub fn integrate_backward_scalar(
    rhs: impl Fn(f64, f64) -> f64,
    terminal: f64,
    horizon: f64,
    steps: usize,
) -> Result<SampledCurve> {
    integrate_backward(|t, y: &[f64; 1]| [rhs(t, y[0])], [terminal], horizon, steps)
        .map(|tr| tr.component(0))
}

fn check_steps(horizon: f64, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::Domain("at least one integration step required".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// A reproducible random stream. `(master_seed, substream_id)` fixes the
/// whole sequence; distinct substreams are independent ChaCha streams, so
/// any parallel schedule sees the same numbers per substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub substream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, substream_id: u64) -> Self {
        RngStream {
            master_seed,
            substream_id,
        }
    }

    pub fn substream(&self, substream_id: u64) -> Self {
        RngStream::new(self.master_seed, substream_id)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.substream_id);
        rng
    }
}

/// `count` independent `N(0, dt)` draws.
pub fn gaussian_increments(stream: &RngStream, count: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let scale = dt.sqrt();
    let mut rng = stream.rng();
    Ok((0..count)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect())
}
