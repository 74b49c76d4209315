//! Diagnostics: welfare, inequality, linear stability of the uniform state,
//! cluster counts and distances between densities.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::economy::{EconomyFields, ParamSet, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, gradient, laplacian_eigenvalue, Grid2D, ScalarField};
use crate::kernels::DiscreteKernel;
use crate::meanfield::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Superlevel set `{l > threshold * mean}` defining clusters.
    pub cluster_threshold: f64,
    /// Prefactor of the representative worker's expected movement.
    pub drift_prefactor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            cluster_threshold: 1.5,
            drift_prefactor: 2.0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_threshold > 1.0 && self.cluster_threshold.is_finite()) {
            return Err(Error::config(
                "analysis.cluster_threshold",
                format!("must be > 1, got {}", self.cluster_threshold),
            ));
        }
        if !self.drift_prefactor.is_finite() {
            return Err(Error::config("analysis.drift_prefactor", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub t: f64,
    pub mass: f64,
    #[serde(rename = "SU")]
    pub su: f64,
    pub aggregate_v: f64,
    pub entropy_term: f64,
    pub theil: f64,
    pub total_output: f64,
    pub max_density: f64,
    pub cluster_count: usize,
    pub rep_drift_norm: f64,
    pub equilibrium_residual: f64,
    /// Raw `int l log l`.
    #[serde(skip)]
    pub l_log_l: f64,
    /// Social utility with the entropy weighted by `sigma^2 / (2 c_M^2)`.
    #[serde(skip)]
    pub su_alt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialUtility {
    pub su: f64,
    pub aggregate_v: f64,
    pub entropy_term: f64,
}

fn l_log_l(l: &ScalarField) -> f64 {
    l.values()
        .iter()
        .map(|v| v * v.max(LOG_FLOOR).ln())
        .sum::<f64>()
        * l.grid().cell_area()
}

/// `SU = int l v - sigma^2/(2 c_M) int l log l`, i.e. `int l u`.
pub fn social_utility(
    l: &ScalarField,
    fields: &EconomyFields,
    p: &ParamSet,
) -> Result<SocialUtility> {
    ensure_same_grid(l.grid(), fields.v.grid())?;
    let aggregate_v = l
        .values()
        .iter()
        .zip(fields.v.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * l.grid().cell_area();
    let entropy_term = p.entropy_weight() * l_log_l(l);
    Ok(SocialUtility {
        su: aggregate_v - entropy_term,
        aggregate_v,
        entropy_term,
    })
}

/// The alternative weighting `int l v - sigma^2/(2 c_M^2) int l log l`.
pub fn social_utility_alt(l: &ScalarField, fields: &EconomyFields, p: &ParamSet) -> Result<f64> {
    let su = social_utility(l, fields, p)?;
    Ok(su.aggregate_v - p.diffusion() * l_log_l(l))
}

/// `int (l/M) log((l/M) |Omega|)`: zero for the uniform density.
pub fn theil(l: &ScalarField) -> Result<f64> {
    let m = l.integral();
    if !(m > 0.0) {
        return Err(Error::Domain(format!(
            "Theil index needs positive mass, got {m}"
        )));
    }
    let area = l.grid().area();
    let s: f64 = l
        .values()
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let q = v / m;
            q * (q * area).ln()
        })
        .sum();
    Ok(s * l.grid().cell_area())
}

/// Growth rate `|k|^2 (l_bar W_hat / c_M - sigma^2 / (2 c_M^2))` of a Fourier
/// mode of the uniform state (linear wages, no amenities).
pub fn dispersion_rate(k: [f64; 2], p: &ParamSet, l_bar: f64, kernel_hat: f64) -> f64 {
    let k2 = k[0] * k[0] + k[1] * k[1];
    k2 * (l_bar * kernel_hat / p.c_m - p.diffusion())
}

/// Continuous wavevector of mode `(m, n)` on `grid`.
pub fn wavevector(grid: &Grid2D, m: i64, n: i64) -> [f64; 2] {
    let tau = std::f64::consts::TAU;
    [tau * m as f64 / grid.lx(), tau * n as f64 / grid.ly()]
}

/// Dispersion rate with `|k|^2` replaced by the eigenvalue of the discrete
/// Laplacian, which is what the finite-volume scheme actually sees.
pub fn discrete_dispersion_rate(
    kernel: &DiscreteKernel,
    p: &ParamSet,
    l_bar: f64,
    m: i64,
    n: i64,
) -> f64 {
    let k2 = -laplacian_eigenvalue(kernel.grid(), m, n);
    let w = kernel.fourier_coefficient(m, n);
    k2 * (l_bar * w / p.c_m - p.diffusion())
}

/// Largest discrete rate over all nonzero modes.
pub fn max_dispersion_rate(kernel: &DiscreteKernel, p: &ParamSet, l_bar: f64) -> f64 {
    let g = kernel.grid();
    let (nx, ny) = (g.nx() as i64, g.ny() as i64);
    let mut best = f64::NEG_INFINITY;
    for m in -(nx / 2) + 1..=nx / 2 {
        for n in -(ny / 2) + 1..=ny / 2 {
            if m == 0 && n == 0 {
                continue;
            }
            best = best.max(discrete_dispersion_rate(kernel, p, l_bar, m, n));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalScan {
    /// The uniform state changes stability at some `c_M` in `[lower, upper]`.
    Bracket { lower: f64, upper: f64 },
    /// No sign change in the scanned range; `unstable` tells which side.
    OutOfRange { unstable: bool },
}

/// Bisection on `c_M` for the sign change of the largest dispersion rate.
/// Below the critical value the uniform state is stable, above it unstable.
pub fn critical_cm_scan(
    p_base: &ParamSet,
    l_bar: f64,
    kernel: &DiscreteKernel,
    range: (f64, f64),
    tol: f64,
) -> Result<CriticalScan> {
    let (mut lo, mut hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::config(
            "stability.range",
            format!("invalid scan range [{lo}, {hi}]"),
        ));
    }
    let rate = |c: f64| {
        let p = ParamSet {
            c_m: c,
            ..p_base.clone()
        };
        max_dispersion_rate(kernel, &p, l_bar)
    };
    let (r_lo, r_hi) = (rate(lo), rate(hi));
    if r_lo > 0.0 && r_hi > 0.0 {
        return Ok(CriticalScan::OutOfRange { unstable: true });
    }
    if r_lo <= 0.0 && r_hi <= 0.0 {
        return Ok(CriticalScan::OutOfRange { unstable: false });
    }
    let stable_low = r_lo <= 0.0;
    while hi - lo > tol * lo.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if (rate(mid) <= 0.0) == stable_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalScan::Bracket {
        lower: lo,
        upper: hi,
    })
}

/// Connected components (8-neighbour, periodic) of `{l > rel_threshold * mean(l)}`.
pub fn count_clusters(l: &ScalarField, rel_threshold: f64) -> usize {
    cluster_labels(l, rel_threshold).1
}

/// Per-cell component labels (`usize::MAX` outside the superlevel set) and the count.
pub fn cluster_labels(l: &ScalarField, rel_threshold: f64) -> (Vec<usize>, usize) {
    let g = *l.grid();
    let cut = rel_threshold * l.mean();
    let vals = l.values();
    let mut label = vec![usize::MAX; g.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if vals[start] <= cut || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = g.coords(k);
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let nb = g.idx(g.wrap_i(i as isize + di), g.wrap_j(j as isize + dj));
                    if vals[nb] > cut && label[nb] == usize::MAX {
                        label[nb] = count;
                        queue.push_back(nb);
                    }
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Mass-weighted centroid of every cluster, computed with periodic (circular) means.
pub fn cluster_centroids(l: &ScalarField, rel_threshold: f64) -> Vec<(f64, f64)> {
    let g = *l.grid();
    let (labels, n) = cluster_labels(l, rel_threshold);
    let tau = std::f64::consts::TAU;
    let mut acc = vec![[0.0f64; 4]; n];
    for (k, &lab) in labels.iter().enumerate() {
        if lab == usize::MAX {
            continue;
        }
        let (i, j) = g.coords(k);
        let (x, y) = g.cell_center(i, j);
        let w = l.values()[k];
        let (ax, ay) = (tau * x / g.lx(), tau * y / g.ly());
        acc[lab][0] += w * ax.cos();
        acc[lab][1] += w * ax.sin();
        acc[lab][2] += w * ay.cos();
        acc[lab][3] += w * ay.sin();
    }
    acc.iter()
        .map(|a| {
            let x = a[1].atan2(a[0]).rem_euclid(tau) / tau * g.lx();
            let y = a[3].atan2(a[2]).rem_euclid(tau) / tau * g.ly();
            (x, y)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDistance {
    pub l1: f64,
    /// Mean of the two axis-marginal distances.
    pub sliced_w1: f64,
    pub w1_x: f64,
    pub w1_y: f64,
}

/// Circular 1-D Wasserstein-1 between two cell-mass histograms with spacing `h`:
/// the optimal cyclic offset of the CDF difference is its median.
fn circular_w1(a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    let mut diff: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            acc += x - y;
            acc
        })
        .collect();
    let mut sorted = diff.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[sorted.len() / 2];
    diff.iter_mut().map(|d| (*d - med).abs()).sum::<f64>() * h
}

fn marginals(f: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = f.grid();
    let ca = g.cell_area();
    let mut mx = vec![0.0; g.nx()];
    let mut my = vec![0.0; g.ny()];
    for (k, v) in f.values().iter().enumerate() {
        let (i, j) = g.coords(k);
        mx[i] += v * ca;
        my[j] += v * ca;
    }
    (mx, my)
}

pub fn density_distance(a: &ScalarField, b: &ScalarField) -> Result<DensityDistance> {
    ensure_same_grid(a.grid(), b.grid())?;
    let (ma, mb) = (a.integral(), b.integral());
    if (ma - mb).abs() > 1e-6 * ma.abs().max(mb.abs()).max(1.0) {
        return Err(Error::Domain(format!(
            "densities carry different mass: {ma} vs {mb}"
        )));
    }
    let g = a.grid();
    let l1 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * g.cell_area();
    let (ax, ay) = marginals(a);
    let (bx, by) = marginals(b);
    let w1_x = circular_w1(&ax, &bx, g.dx());
    let w1_y = circular_w1(&ay, &by, g.dy());
    Ok(DensityDistance {
        l1,
        sliced_w1: 0.5 * (w1_x + w1_y),
        w1_x,
        w1_y,
    })
}

/// Expected movement of the representative worker, `(pref / c_M) int l grad u`.
pub fn representative_drift(
    l: &ScalarField,
    u: &ScalarField,
    p: &ParamSet,
    prefactor: f64,
) -> Result<[f64; 2]> {
    ensure_same_grid(l.grid(), u.grid())?;
    let gu = gradient(u);
    let ca = l.grid().cell_area();
    let mut s = [0.0; 2];
    for (k, lk) in l.values().iter().enumerate() {
        s[0] += lk * gu.vx()[k];
        s[1] += lk * gu.vy()[k];
    }
    let f = prefactor / p.c_m * ca;
    Ok([s[0] * f, s[1] * f])
}

/// `L2` norm of the PDE tendency.
pub fn equilibrium_residual(model: &Model, l: &ScalarField) -> Result<f64> {
    let r = model.rhs(l)?;
    Ok((r.values().iter().map(|v| v * v).sum::<f64>() * l.grid().cell_area()).sqrt())
}

/// Every diagnostic for one density.
pub fn metrics_row(
    model: &Model,
    l: &ScalarField,
    t: f64,
    cfg: &AnalysisConfig,
) -> Result<MetricsRow> {
    let p = model.params();
    let fields = model.fields(l)?;
    let su = social_utility(l, &fields, p)?;
    let drift = representative_drift(l, &fields.u, p, cfg.drift_prefactor)?;
    let llogl = l_log_l(l);
    Ok(MetricsRow {
        t,
        mass: l.integral(),
        su: su.su,
        aggregate_v: su.aggregate_v,
        entropy_term: su.entropy_term,
        theil: theil(l)?,
        total_output: fields.y.integral(),
        max_density: l.max(),
        cluster_count: count_clusters(l, cfg.cluster_threshold),
        rep_drift_norm: drift[0].hypot(drift[1]),
        equilibrium_residual: equilibrium_residual(model, l)?,
        l_log_l: llogl,
        su_alt: su.aggregate_v - p.diffusion() * llogl,
    })
}
