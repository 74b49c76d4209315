//! Finite-population simulator: workers as diffusing particles drifting up the
//! systematic-utility gradient, with births and the mollified empirical density.
//! Also hosts the one-dimensional Nash toy and the spatial Gini index.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::economy::{EconomyFields, ParamSet};
use crate::error::{Error, Result};
use crate::grid::{gradient, wrap_coord, Grid2D, ScalarField, VectorField};
use crate::kernels::{deposit, mollifier_bandwidth, KernelFamily};

/// Stream reserved for drawing initial positions; agent streams count up from 0.
const PLACEMENT_STREAM: u64 = u64::MAX;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Agents on the torus `[0, lx) x [0, ly)`, each with its own random stream.
#[derive(Debug, Clone)]
pub struct Population {
    lx: f64,
    ly: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    unit_mass: f64,
    initial_count: usize,
    seed: u64,
    next_stream: u64,
    t: f64,
}

impl Population {
    /// Agents at the given points (wrapped onto the torus). Each carries `1 / N0`.
    pub fn from_positions(grid: &Grid2D, positions: &[(f64, f64)], seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::config(
                "agents.n",
                "population needs at least one agent",
            ));
        }
        if let Some(k) = positions
            .iter()
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Domain(format!(
                "agent {k} has a non-finite position"
            )));
        }
        let (lx, ly) = (grid.lx(), grid.ly());
        let n = positions.len();
        Ok(Self {
            lx,
            ly,
            x: positions.iter().map(|p| wrap_coord(p.0, lx)).collect(),
            y: positions.iter().map(|p| wrap_coord(p.1, ly)).collect(),
            rngs: (0..n as u64).map(|s| stream_rng(seed, s)).collect(),
            unit_mass: 1.0 / n as f64,
            initial_count: n,
            seed,
            next_stream: n as u64,
            t: 0.0,
        })
    }

    /// `n` agents drawn i.i.d. from a density: cell chosen proportionally to
    /// its mass, then a uniform point inside the cell.
    pub fn sample_from_density(density: &ScalarField, n: usize, seed: u64) -> Result<Self> {
        let grid = *density.grid();
        let dist = WeightedIndex::new(density.values().iter().map(|v| v.max(0.0)))
            .map_err(|e| Error::Domain(format!("cannot sample agents from density: {e}")))?;
        let mut rng = stream_rng(seed, PLACEMENT_STREAM);
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (i, j) = grid.coords(dist.sample(&mut rng));
                let x = (i as f64 + rng.random::<f64>()) * grid.dx();
                let y = (j as f64 + rng.random::<f64>()) * grid.dy();
                (x, y)
            })
            .collect();
        Self::from_positions(&grid, &positions, seed)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn initial_count(&self) -> usize {
        self.initial_count
    }

    pub fn unit_mass(&self) -> f64 {
        self.unit_mass
    }

    /// Total labour `N_t / N0`.
    pub fn mass(&self) -> f64 {
        self.len() as f64 * self.unit_mass
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn position(&self, k: usize) -> (f64, f64) {
        (self.x[k], self.y[k])
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.lx != grid.lx() || self.ly != grid.ly() {
            return Err(Error::GridMismatch(format!(
                "population lives on {}x{} but grid is {}x{}",
                self.lx,
                self.ly,
                grid.lx(),
                grid.ly()
            )));
        }
        Ok(())
    }
}

/// Mollified empirical density and the bandwidth actually used.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub density: ScalarField,
    pub bandwidth: f64,
    /// `N^-lambda` before the two-cell floor.
    pub nominal_bandwidth: f64,
    pub floor_binds: bool,
}

/// `l^N(x) = (1/N0) sum_i theta_hN(x - X_i)` with an Epanechnikov mollifier and
/// `h_N = max(N^-lambda, 2 max(dx, dy))`, `N` the current head count.
pub fn empirical_density(pop: &Population, grid: &Grid2D, lambda: f64) -> Result<DensityEstimate> {
    pop.check_grid(grid)?;
    let nominal = mollifier_bandwidth(pop.len(), lambda)?;
    let floor = 2.0 * grid.max_spacing();
    let h = nominal.max(floor);
    let mut density = ScalarField::zeros(*grid);
    let mut scratch = Vec::new();
    for k in 0..pop.len() {
        deposit(
            &mut density,
            &KernelFamily::Epanechnikov,
            h,
            pop.x[k],
            pop.y[k],
            pop.unit_mass,
            &mut scratch,
        );
    }
    Ok(DensityEstimate {
        density,
        bandwidth: h,
        nominal_bandwidth: nominal,
        floor_binds: floor > nominal,
    })
}

/// Euler–Maruyama step driven by a precomputed `grad v`:
/// `X += dt/c_M grad v(X) + sigma/c_M sqrt(dt) xi`.
pub fn advance(pop: &mut Population, grad_v: &VectorField, p: &ParamSet, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(
            "numerics.dt",
            format!("time step must be positive, got {dt}"),
        ));
    }
    pop.check_grid(grad_v.grid())?;
    let drift = dt / p.c_m;
    let noise = p.sigma / p.c_m * dt.sqrt();
    for k in 0..pop.len() {
        let [gx, gy] = grad_v.sample(pop.x[k], pop.y[k]);
        let mut nx = pop.x[k] + drift * gx;
        let mut ny = pop.y[k] + drift * gy;
        if noise > 0.0 {
            let rng = &mut pop.rngs[k];
            let xi: f64 = rng.sample(StandardNormal);
            let eta: f64 = rng.sample(StandardNormal);
            nx += noise * xi;
            ny += noise * eta;
        }
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(Error::Numeric {
                t: pop.t,
                step: 0,
                message: format!("agent {k} left the domain with a non-finite position"),
            });
        }
        pop.x[k] = wrap_coord(nx, pop.lx);
        pop.y[k] = wrap_coord(ny, pop.ly);
    }
    pop.t += dt;
    Ok(())
}

/// Moves every agent along `grad v` computed from `fields`.
pub fn step_agents(
    pop: &mut Population,
    fields: &EconomyFields,
    p: &ParamSet,
    dt: f64,
) -> Result<()> {
    advance(pop, &gradient(&fields.v), p, dt)
}

/// Net birth rate, either constant or piecewise constant per grid cell.
#[derive(Debug, Clone)]
pub enum RateField {
    Constant(f64),
    Field(ScalarField),
}

impl RateField {
    fn validate(&self) -> Result<()> {
        let bad = match self {
            RateField::Constant(r) => (!(*r >= 0.0) || !r.is_finite()).then_some(*r),
            RateField::Field(f) => f.values().iter().copied().find(|r| !(*r >= 0.0)),
        };
        match bad {
            Some(r) => Err(Error::Domain(format!(
                "birth rate must be nonnegative, got {r}"
            ))),
            None => Ok(()),
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        match self {
            RateField::Constant(r) => *r,
            RateField::Field(f) => {
                let g = f.grid();
                let i = g.wrap_i((x / g.dx()).floor() as isize);
                let j = g.wrap_j((y / g.dy()).floor() as isize);
                f.at(i, j)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RateField::Constant(r) => *r == 0.0,
            RateField::Field(f) => f.values().iter().all(|r| *r == 0.0),
        }
    }
}

/// Each agent independently duplicates with probability `1 - exp(-n(X) dt)`,
/// decided on its own stream. Offspring appear at the mother's location with a
/// fresh stream. Returns the number of births.
pub fn spawn_births(pop: &mut Population, rate: &RateField, dt: f64) -> Result<usize> {
    rate.validate()?;
    if let RateField::Field(f) = rate {
        pop.check_grid(f.grid())?;
    }
    if rate.is_zero() {
        return Ok(0);
    }
    let existing = pop.len();
    let mut born = 0;
    for k in 0..existing {
        let prob = 1.0 - (-rate.at(pop.x[k], pop.y[k]) * dt).exp();
        if prob > 0.0 && pop.rngs[k].random::<f64>() < prob {
            let (x, y) = (pop.x[k], pop.y[k]);
            pop.x.push(x);
            pop.y.push(y);
            pop.rngs.push(stream_rng(pop.seed, pop.next_stream));
            pop.next_stream += 1;
            born += 1;
        }
    }
    Ok(born)
}

/// Positions, moving cost and step of the one-dimensional Nash game.
#[derive(Debug, Clone, PartialEq)]
pub struct NashConfig1D {
    pub positions: Vec<f64>,
    pub c_m: f64,
    pub dt: f64,
}

impl NashConfig1D {
    pub fn new(positions: Vec<f64>, c_m: f64, dt: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::config("nash.positions", "need at least two workers"));
        }
        if !(c_m > 0.0) {
            return Err(Error::config("nash.c_m", format!("must be > 0, got {c_m}")));
        }
        if !(dt >= 0.0) {
            return Err(Error::config("nash.dt", format!("must be >= 0, got {dt}")));
        }
        Ok(Self { positions, c_m, dt })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// `b = dt / (c_M N)`.
    pub fn b(&self) -> f64 {
        self.dt / (self.c_m * self.n() as f64)
    }

    pub fn barycenter(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.n() as f64
    }

    /// `1 + (N-1) b` on the diagonal, `-b` elsewhere.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (n, b) = (self.n(), self.b());
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + (n as f64 - 1.0) * b
            } else {
                -b
            }
        })
    }

    /// `A^-1 = (b 11^T + I) / (N b + 1)`.
    pub fn explicit_inverse(&self) -> DMatrix<f64> {
        let (n, b) = (self.n(), self.b());
        let s = 1.0 / (n as f64 * b + 1.0);
        DMatrix::from_fn(n, n, |i, j| if i == j { (b + 1.0) * s } else { b * s })
    }

    /// Right-hand side `-(X_i - mean X) / c_M`.
    pub fn rhs(&self) -> DVector<f64> {
        let m = self.barycenter();
        DVector::from_iterator(self.n(), self.positions.iter().map(|x| -(x - m) / self.c_m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashVelocities {
    /// LU solution of `A V = X~`.
    pub solved: Vec<f64>,
    /// `-(X_i - mean X) / (c_M + dt)`.
    pub closed_form: Vec<f64>,
}

impl NashVelocities {
    pub fn max_discrepancy(&self) -> f64 {
        self.solved
            .iter()
            .zip(&self.closed_form)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn nash_velocities_1d(cfg: &NashConfig1D) -> Result<NashVelocities> {
    let solved = cfg
        .matrix()
        .lu()
        .solve(&cfg.rhs())
        .ok_or_else(|| Error::Numeric {
            t: 0.0,
            step: 0,
            message: "Nash system is singular".into(),
        })?;
    let m = cfg.barycenter();
    let closed_form = cfg
        .positions
        .iter()
        .map(|x| -(x - m) / (cfg.c_m + cfg.dt))
        .collect();
    Ok(NashVelocities {
        solved: solved.iter().copied().collect(),
        closed_form,
    })
}

/// Moves every worker by `dt V` using the closed-form equilibrium velocities.
pub fn nash_step(cfg: &mut NashConfig1D) {
    let m = cfg.barycenter();
    let k = cfg.dt / (cfg.c_m + cfg.dt);
    for x in cfg.positions.iter_mut() {
        *x -= k * (*x - m);
    }
}

/// `G^S = 1/(2 mean) * (1/N) sum_i sum_j |X_i - X_j|`, zero for full agglomeration.
pub fn gini_spatial(positions: &[f64]) -> Result<f64> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::Domain(
            "spatial Gini needs at least two positions".into(),
        ));
    }
    let mean = positions.iter().sum::<f64>() / n as f64;
    if !(mean > 0.0) {
        return Err(Error::Domain(format!(
            "spatial Gini needs a positive mean, got {mean}"
        )));
    }
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_{i<j} (x_j - x_i) = sum_k x_k (2k - n + 1) over the sorted sample
    let half: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 - n as f64 + 1.0))
        .sum();
    Ok(2.0 * half / n as f64 / (2.0 * mean))
}
