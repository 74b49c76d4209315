//! Finite-volume solver for the aggregation–diffusion equation
//!
//! `dl/dt = n l + D lap l - div(l V)`, with `V = grad v / c_M` and
//! `D = sigma^2 / (2 c_M^2)`.
//!
//! Fluxes live on cell faces: advection takes the upwind density, diffusion
//! the two-point difference. Each face flux enters its two cells with opposite
//! signs, so mass is conserved by construction. Time stepping is explicit Euler
//! under a step bound that keeps the update monotone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{metrics_row, AnalysisConfig, MetricsRow};
use crate::economy::{compute_fields, regularized_power_slope, EconomyFields, ParamSet};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, Grid2D, ScalarField};
use crate::kernels::{discretize, ConvolutionMethod, Convolver, KernelSpec};

/// Negative densities above this are rounding and get clamped; below it the step failed.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Fraction of the stability bound actually used, in `(0, 1]`.
    pub safety: f64,
    pub dt_max: f64,
    /// Bypass the adaptive bound (tests and convergence studies).
    pub fixed_dt: Option<f64>,
    pub convolution: ConvolutionMethod,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            safety: 0.4,
            dt_max: 0.5,
            fixed_dt: None,
            convolution: ConvolutionMethod::Direct,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::config(
                "numerics.safety",
                format!("must lie in (0, 1], got {}", self.safety),
            ));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::config(
                "numerics.dt_max",
                format!("must be positive, got {}", self.dt_max),
            ));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(
                    "numerics.fixed_dt",
                    format!("must be positive, got {dt}"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything that stays fixed during a run.
#[derive(Debug)]
pub struct Model {
    grid: Grid2D,
    params: ParamSet,
    g: ScalarField,
    a_es: ScalarField,
    growth: ScalarField,
    convolver: Convolver,
    numerics: Numerics,
}

impl Model {
    /// Model with the cone spillover kernel of bandwidth `params.h`.
    pub fn new(
        grid: Grid2D,
        params: ParamSet,
        g: ScalarField,
        a_es: ScalarField,
        numerics: Numerics,
    ) -> Result<Self> {
        let spec = KernelSpec::cone(params.h);
        Self::with_kernel(grid, params, g, a_es, &spec, numerics)
    }

    pub fn with_kernel(
        grid: Grid2D,
        params: ParamSet,
        g: ScalarField,
        a_es: ScalarField,
        spec: &KernelSpec,
        numerics: Numerics,
    ) -> Result<Self> {
        params.validate()?;
        numerics.validate()?;
        ensure_same_grid(&grid, g.grid())?;
        ensure_same_grid(&grid, a_es.grid())?;
        let kernel = discretize(spec, &grid)?;
        let growth = ScalarField::constant(grid, params.n_rate);
        Ok(Self {
            grid,
            convolver: Convolver::new(kernel, numerics.convolution),
            params,
            g,
            a_es,
            growth,
            numerics,
        })
    }

    /// Baseline landscape: `G = 1`, `A_ES = 0`.
    pub fn uniform(grid: Grid2D, params: ParamSet, numerics: Numerics) -> Result<Self> {
        Self::new(
            grid,
            params,
            ScalarField::constant(grid, 1.0),
            ScalarField::zeros(grid),
            numerics,
        )
    }

    /// Replaces the constant growth rate by a field.
    pub fn with_growth(mut self, growth: ScalarField) -> Result<Self> {
        ensure_same_grid(&self.grid, growth.grid())?;
        if let Some(r) = growth.values().iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::Domain(format!(
                "growth rate must be nonnegative, got {r}"
            )));
        }
        self.growth = growth;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn potential(&self) -> &ScalarField {
        &self.g
    }

    pub fn exogenous_amenities(&self) -> &ScalarField {
        &self.a_es
    }

    pub fn growth(&self) -> &ScalarField {
        &self.growth
    }

    pub fn convolver(&self) -> &Convolver {
        &self.convolver
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    pub fn fields(&self, l: &ScalarField) -> Result<EconomyFields> {
        compute_fields(l, &self.g, &self.a_es, &self.params, &self.convolver)
    }

    fn transport(&self, l: &ScalarField) -> Result<Transport> {
        ensure_same_grid(&self.grid, l.grid())?;
        let fields = self.fields(l)?;
        Ok(Transport::new(&self.grid, &fields.v, self.params.c_m))
    }

    /// Time derivative of the density.
    pub fn rhs(&self, l: &ScalarField) -> Result<ScalarField> {
        let tr = self.transport(l)?;
        let out = tr.rhs(l, &self.growth, self.params.diffusion());
        if let Some(k) = out.iter().position(|v| !v.is_finite()) {
            let (i, j) = self.grid.coords(k);
            return Err(Error::Numeric {
                t: f64::NAN,
                step: 0,
                message: format!("non-finite tendency at cell ({i}, {j})"),
            });
        }
        Ok(ScalarField::from_values_unchecked(self.grid, out))
    }

    /// Largest explicit step keeping the update monotone, scaled by `safety`.
    pub fn stable_dt(&self, l: &ScalarField, safety: f64) -> Result<f64> {
        let fields = self.fields(l)?;
        let tr = Transport::new(&self.grid, &fields.v, self.params.c_m);
        Ok(self
            .dt_bounds(l, &fields, &tr)
            .combined(safety, self.numerics.dt_max))
    }

    fn dt_bounds(&self, l: &ScalarField, fields: &EconomyFields, tr: &Transport) -> DtBounds {
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        let spacing = 1.0 / (dx * dx) + 1.0 / (dy * dy);
        let d = self.params.diffusion();
        let diffusion = if d > 0.0 {
            1.0 / (2.0 * d * spacing)
        } else {
            f64::INFINITY
        };
        let out_rate = tr.max_outflow_rate();
        let advection = if out_rate > 0.0 {
            1.0 / out_rate
        } else {
            f64::INFINITY
        };
        // Local dependence of v on l acts like a density-dependent diffusion
        // with coefficient l |dv/dl| / c_M; explicit stepping must resolve it.
        let p = &self.params;
        let kappa = l
            .values()
            .iter()
            .zip(fields.a_l.values().iter().zip(fields.y.values()))
            .map(|(&lk, (&al, &yk))| {
                let wage = al * lk * regularized_power_slope(lk, p.beta, p.l_bar_reg);
                let amen = p.a0 * (p.phi * p.beta * (p.tau * yk).powf(p.phi) - p.mu_a * lk);
                (wage + amen).abs() / p.c_m
            })
            .fold(0.0, f64::max);
        let local = if kappa > 0.0 {
            1.0 / (2.0 * kappa * spacing)
        } else {
            f64::INFINITY
        };
        DtBounds {
            diffusion,
            advection,
            local,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtBounds {
    pub diffusion: f64,
    pub advection: f64,
    pub local: f64,
}

impl DtBounds {
    pub fn combined(&self, safety: f64, dt_max: f64) -> f64 {
        let b = self.diffusion.min(self.advection).min(self.local);
        (safety * b).min(dt_max)
    }
}

/// Face velocities `(v_east - v) / (c_M dx)` and `(v_north - v) / (c_M dy)`.
struct Transport {
    grid: Grid2D,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl Transport {
    fn new(grid: &Grid2D, v: &ScalarField, c_m: f64) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let vv = v.values();
        let (sx, sy) = (1.0 / (c_m * grid.dx()), 1.0 / (c_m * grid.dy()));
        let mut ux = vec![0.0; grid.len()];
        let mut uy = vec![0.0; grid.len()];
        for i in 0..nx {
            let ie = if i + 1 == nx { 0 } else { i + 1 };
            for j in 0..ny {
                let jn = if j + 1 == ny { 0 } else { j + 1 };
                let k = i * ny + j;
                ux[k] = (vv[ie * ny + j] - vv[k]) * sx;
                uy[k] = (vv[i * ny + jn] - vv[k]) * sy;
            }
        }
        Self {
            grid: *grid,
            ux,
            uy,
        }
    }

    fn max_outflow_rate(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        let mut worst: f64 = 0.0;
        for i in 0..nx {
            let iw = if i == 0 { nx - 1 } else { i - 1 };
            for j in 0..ny {
                let js = if j == 0 { ny - 1 } else { j - 1 };
                let k = i * ny + j;
                let out = self.ux[k].max(0.0) / dx
                    + (-self.ux[iw * ny + j]).max(0.0) / dx
                    + self.uy[k].max(0.0) / dy
                    + (-self.uy[i * ny + js]).max(0.0) / dy;
                worst = worst.max(out);
            }
        }
        worst
    }

    fn rhs(&self, l: &ScalarField, growth: &ScalarField, d: f64) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        let lv = l.values();
        let mut fx = vec![0.0; lv.len()];
        let mut fy = vec![0.0; lv.len()];
        for i in 0..nx {
            let ie = if i + 1 == nx { 0 } else { i + 1 };
            for j in 0..ny {
                let jn = if j + 1 == ny { 0 } else { j + 1 };
                let k = i * ny + j;
                let (e, n) = (ie * ny + j, i * ny + jn);
                let (u, w) = (self.ux[k], self.uy[k]);
                fx[k] = u * if u > 0.0 { lv[k] } else { lv[e] } - d * (lv[e] - lv[k]) / dx;
                fy[k] = w * if w > 0.0 { lv[k] } else { lv[n] } - d * (lv[n] - lv[k]) / dy;
            }
        }
        let gv = growth.values();
        let mut out = vec![0.0; lv.len()];
        for i in 0..nx {
            let iw = if i == 0 { nx - 1 } else { i - 1 };
            for j in 0..ny {
                let js = if j == 0 { ny - 1 } else { j - 1 };
                let k = i * ny + j;
                out[k] =
                    gv[k] * lv[k] - (fx[k] - fx[iw * ny + j]) / dx - (fy[k] - fy[i * ny + js]) / dy;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub l: ScalarField,
    pub t: f64,
    pub step_count: u64,
    pub dt_last: f64,
    /// Mass added by clamping round-off negatives to zero.
    pub clamped_mass: f64,
}

impl SolverState {
    pub fn new(l: ScalarField) -> Result<Self> {
        if let Some(k) = l.values().iter().position(|v| !(*v >= 0.0)) {
            let (i, j) = l.grid().coords(k);
            return Err(Error::Domain(format!(
                "initial density must be nonnegative, got {} at cell ({i}, {j})",
                l.values()[k]
            )));
        }
        Ok(Self {
            l,
            t: 0.0,
            step_count: 0,
            dt_last: 0.0,
            clamped_mass: 0.0,
        })
    }

    pub fn mass(&self) -> f64 {
        self.l.integral()
    }
}

/// One explicit Euler step; `max_dt` caps the step (used to land on output times).
pub fn step(state: &mut SolverState, model: &Model, max_dt: f64) -> Result<f64> {
    let fields = model.fields(&state.l).map_err(|e| with_time(e, state))?;
    let tr = Transport::new(model.grid(), &fields.v, model.params().c_m);
    let dt = match model.numerics().fixed_dt {
        Some(dt) => dt,
        None => model
            .dt_bounds(&state.l, &fields, &tr)
            .combined(model.numerics().safety, model.numerics().dt_max),
    }
    .min(max_dt);
    if !(dt > 0.0) {
        return Err(Error::Numeric {
            t: state.t,
            step: state.step_count,
            message: format!("time step collapsed to {dt}"),
        });
    }
    advance(state, model, &tr, dt)?;
    Ok(dt)
}

/// Explicit Euler step of prescribed size.
pub fn step_with_dt(state: &mut SolverState, model: &Model, dt: f64) -> Result<()> {
    let tr = model.transport(&state.l).map_err(|e| with_time(e, state))?;
    advance(state, model, &tr, dt)
}

fn with_time(e: Error, state: &SolverState) -> Error {
    match e {
        Error::Domain(message) => Error::Numeric {
            t: state.t,
            step: state.step_count,
            message,
        },
        other => other,
    }
}

fn advance(state: &mut SolverState, model: &Model, tr: &Transport, dt: f64) -> Result<()> {
    let grid = *model.grid();
    let tend = tr.rhs(&state.l, model.growth(), model.params().diffusion());
    let mut clamped = 0.0;
    let mut next = state.l.values().to_vec();
    for (k, (lk, r)) in next.iter_mut().zip(&tend).enumerate() {
        let v = *lk + dt * r;
        if !v.is_finite() {
            let (i, j) = grid.coords(k);
            return Err(Error::Numeric {
                t: state.t,
                step: state.step_count,
                message: format!("non-finite density at cell ({i}, {j})"),
            });
        }
        if v < 0.0 {
            if v < -NEGATIVITY_TOLERANCE {
                let (i, j) = grid.coords(k);
                return Err(Error::Instability {
                    t: state.t,
                    step: state.step_count,
                    min_value: v,
                    i,
                    j,
                });
            }
            clamped -= v;
            *lk = 0.0;
        } else {
            *lk = v;
        }
    }
    state.l = ScalarField::from_values_unchecked(grid, next);
    state.t += dt;
    state.step_count += 1;
    state.dt_last = dt;
    state.clamped_mass += clamped * grid.cell_area();
    Ok(())
}

/// Uniform density of the given mass plus a mean-free perturbation of
/// relative amplitude `amplitude`, drawn from a fixed-seed generator.
pub fn perturbed_uniform(
    grid: Grid2D,
    mass: f64,
    amplitude: f64,
    seed: u64,
) -> Result<ScalarField> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::config(
            "init.amplitude",
            format!("must lie in [0, 1), got {amplitude}"),
        ));
    }
    let mean = mass / grid.area();
    if amplitude == 0.0 {
        return Ok(ScalarField::constant(grid, mean));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..grid.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let avg = noise.iter().sum::<f64>() / noise.len() as f64;
    noise.iter_mut().for_each(|z| *z -= avg);
    let peak = noise.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    ScalarField::from_values(
        grid,
        noise
            .into_iter()
            .map(|z| mean * (1.0 + scale * z))
            .collect(),
    )
}

/// Output times of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Zero disables periodic metrics; the initial and final rows are always emitted.
    pub metrics_interval: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(
                "run.t_end",
                format!("must be >= 0, got {}", self.t_end),
            ));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_end))
        {
            return Err(Error::config(
                "run.snapshot_times",
                format!("snapshot time {t} outside [0, {}]", self.t_end),
            ));
        }
        if !(self.metrics_interval >= 0.0 && self.metrics_interval.is_finite()) {
            return Err(Error::config(
                "run.metrics_interval",
                format!("must be >= 0, got {}", self.metrics_interval),
            ));
        }
        Ok(())
    }

    /// Sorted, deduplicated times at which the stepper must land exactly.
    fn stops(&self) -> Vec<f64> {
        let mut stops: Vec<f64> = self.snapshot_times.clone();
        if self.metrics_interval > 0.0 {
            let n = (self.t_end / self.metrics_interval).floor() as u64;
            stops.extend((1..=n).map(|k| k as f64 * self.metrics_interval));
        }
        stops.push(self.t_end);
        stops.retain(|t| *t > 0.0 && *t <= self.t_end);
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * self.t_end);
        stops
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub l: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub metrics: Vec<MetricsRow>,
    pub final_state: SolverState,
    pub initial_mass: f64,
}

impl Trajectory {
    pub fn relative_mass_drift(&self) -> f64 {
        ((self.final_state.mass() - self.initial_mass) / self.initial_mass).abs()
    }
}

/// A failed run together with everything produced before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (last good state at t = {})",
            self.error, self.partial.final_state.t
        )
    }
}

impl std::error::Error for RunFailure {}

/// Integrates to `schedule.t_end`, landing exactly on every output time.
pub fn run(
    model: &Model,
    initial: ScalarField,
    schedule: &Schedule,
    analysis: &AnalysisConfig,
) -> std::result::Result<Trajectory, RunFailure> {
    let initial_mass = initial.integral();
    let fail = |error, traj: Trajectory| RunFailure {
        error,
        partial: Box::new(traj),
    };
    let state = match SolverState::new(initial) {
        Ok(s) => s,
        Err(e) => {
            let l = ScalarField::zeros(*model.grid());
            let traj = Trajectory {
                snapshots: vec![],
                metrics: vec![],
                final_state: SolverState::new(l).expect("zero density is valid"),
                initial_mass,
            };
            return Err(fail(e, traj));
        }
    };
    let mut traj = Trajectory {
        snapshots: vec![],
        metrics: vec![],
        final_state: state,
        initial_mass,
    };
    if let Err(e) = schedule.validate() {
        return Err(fail(e, traj));
    }
    let tol = 1e-9 * schedule.t_end;
    let wants_snapshot = |t: f64| schedule.snapshot_times.iter().any(|s| (s - t).abs() <= tol);
    let wants_metrics = |t: f64| {
        if (t - schedule.t_end).abs() <= tol {
            return true;
        }
        let iv = schedule.metrics_interval;
        iv > 0.0 && ((t / iv).round() * iv - t).abs() <= tol
    };
    let emit = |traj: &mut Trajectory, t: f64| -> Result<()> {
        let st = &traj.final_state;
        if wants_snapshot(t) {
            traj.snapshots.push(Snapshot {
                t,
                step: st.step_count,
                l: st.l.clone(),
            });
        }
        if wants_metrics(t) {
            let row = metrics_row(model, &st.l, t, analysis)?;
            traj.metrics.push(row);
        }
        Ok(())
    };
    if let Err(e) = emit(&mut traj, 0.0) {
        return Err(fail(e, traj));
    }
    for stop in schedule.stops() {
        while stop - traj.final_state.t > tol {
            // a failed step leaves the state untouched, so it stays the last good one
            let remaining = stop - traj.final_state.t;
            if let Err(e) = step(&mut traj.final_state, model, remaining) {
                return Err(fail(e, traj));
            }
            if stop - traj.final_state.t <= tol {
                traj.final_state.t = stop;
            }
        }
        if let Err(e) = emit(&mut traj, stop) {
            return Err(fail(e, traj));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(n: usize) -> Model {
        let g = Grid2D::new(4.0, 4.0, n, n).unwrap();
        Model::uniform(g, ParamSet::default(), Numerics::default()).unwrap()
    }

    #[test]
    fn uniform_is_stationary() {
        let m = baseline(32);
        let l = ScalarField::constant(*m.grid(), 1.0 / 16.0);
        assert!(m.rhs(&l).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tendency_sums_to_zero() {
        let m = baseline(32);
        let l = perturbed_uniform(*m.grid(), 1.0, 0.3, 4).unwrap();
        let r = m.rhs(&l).unwrap();
        let scale = r.values().iter().map(|v| v.abs()).sum::<f64>();
        assert!(r.sum().abs() <= 1e-13 * scale);
    }

    #[test]
    fn pure_diffusion_matches_laplacian_eigenvalue() {
        let g = Grid2D::new(4.0, 4.0, 32, 32).unwrap();
        let p = ParamSet {
            a0: 0.0,
            ..ParamSet::default()
        };
        let m = Model::new(
            g,
            p.clone(),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
            Numerics::default(),
        )
        .unwrap();
        let eps = 1e-3;
        let l = ScalarField::from_fn(g, |x, _| {
            1.0 / 16.0 + eps * (std::f64::consts::TAU * 2.0 * x / 4.0).cos()
        });
        let r = m.rhs(&l).unwrap();
        let lam = crate::grid::laplacian_eigenvalue(&g, 2, 0);
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            let (x, _) = g.cell_center(i, j);
            let expected =
                p.diffusion() * lam * eps * (std::f64::consts::TAU * 2.0 * x / 4.0).cos();
            assert!(
                (r.values()[k] - expected).abs() < 1e-18,
                "{} vs {}",
                r.values()[k],
                expected
            );
        }
    }

    #[test]
    fn dt_bounds_follow_spacing() {
        let m = baseline(128);
        let l = ScalarField::constant(*m.grid(), 1.0 / 16.0);
        let fields = m.fields(&l).unwrap();
        let tr = Transport::new(m.grid(), &fields.v, 100.0);
        let b = m.dt_bounds(&l, &fields, &tr);
        let dx: f64 = 0.03125;
        assert!((b.diffusion - dx * dx * 1e4 / (2.0 * 0.0025)).abs() < 1e-9);
        assert!((b.diffusion - 1953.125).abs() < 1e-9);
        assert_eq!(b.advection, f64::INFINITY);
    }

    #[test]
    fn no_dynamics_gives_dt_max() {
        let g = Grid2D::new(4.0, 4.0, 32, 32).unwrap();
        let p = ParamSet {
            a0: 0.0,
            sigma: 0.0,
            ..ParamSet::default()
        };
        let m = Model::new(
            g,
            p,
            ScalarField::zeros(g),
            ScalarField::zeros(g),
            Numerics::default(),
        )
        .unwrap();
        let l = perturbed_uniform(g, 1.0, 0.2, 1).unwrap();
        assert_eq!(m.stable_dt(&l, 0.5).unwrap(), Numerics::default().dt_max);
    }

    #[test]
    fn perturbation_is_mean_free_and_positive() {
        let g = Grid2D::new(4.0, 4.0, 32, 32).unwrap();
        let l = perturbed_uniform(g, 1.0, 0.01, 7).unwrap();
        assert!((l.integral() - 1.0).abs() < 1e-14);
        assert!(l.min() > 0.0);
        assert!((l.max() / (1.0 / 16.0) - 1.0).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn schedule_stops_are_merged() {
        let s = Schedule {
            t_end: 2.0,
            snapshot_times: vec![0.0, 0.5, 2.0],
            metrics_interval: 1.0,
        };
        assert_eq!(s.stops(), vec![0.5, 1.0, 2.0]);
        let bad = Schedule {
            snapshot_times: vec![3.0],
            ..s
        };
        assert!(bad.validate().is_err());
    }
}
