//! Periodic rectangle (torus) geometry and centered finite-difference calculus.
//!
//! Cells are indexed `(i, j)` with `i` along x and `j` along y; values are
//! stored row-major as `i * ny + j`. Cell `(i, j)` is centered at
//! `((i + 0.5) dx, (j + 0.5) dy)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
}

impl Grid2D {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::config(
                "grid.lx",
                format!("length must be positive, got {lx}"),
            ));
        }
        if !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::config(
                "grid.ly",
                format!("length must be positive, got {ly}"),
            ));
        }
        if nx < MIN_CELLS {
            return Err(Error::config(
                "grid.nx",
                format!("need at least {MIN_CELLS} cells, got {nx}"),
            ));
        }
        if ny < MIN_CELLS {
            return Err(Error::config(
                "grid.ny",
                format!("need at least {MIN_CELLS} cells, got {ny}"),
            ));
        }
        Ok(Self {
            lx,
            ly,
            nx,
            ny,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn max_spacing(&self) -> f64 {
        self.dx.max(self.dy)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Inverse of [`Grid2D::idx`].
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    #[inline]
    pub fn wrap_i(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }

    #[inline]
    pub fn wrap_j(&self, j: isize) -> usize {
        j.rem_euclid(self.ny as isize) as usize
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Wraps a point into `[0, lx) x [0, ly)`.
    pub fn wrap_point(&self, x: f64, y: f64) -> (f64, f64) {
        (wrap_coord(x, self.lx), wrap_coord(y, self.ly))
    }

    /// Shortest signed displacement `a - b` on the circle of length `l`.
    pub fn periodic_delta(a: f64, b: f64, l: f64) -> f64 {
        let mut d = (a - b) % l;
        if d > 0.5 * l {
            d -= l;
        } else if d < -0.5 * l {
            d += l;
        }
        d
    }
}

pub(crate) fn wrap_coord(x: f64, l: f64) -> f64 {
    let w = x.rem_euclid(l);
    // rem_euclid can round up to exactly l for tiny negative inputs
    if w >= l {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    /// Wraps raw row-major values; rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx(),
                grid.ny(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.coords(k);
            return Err(Error::Domain(format!(
                "non-finite value at cell ({i}, {j})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Cell-sum quadrature of the field over the torus.
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest value; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        self.grid.coords(best)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `sqrt(sum f^2 dx dy)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Translates by whole cells: `out[i + si, j + sj] = self[i, j]`.
    pub fn rolled(&self, si: isize, sj: isize) -> Self {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.nx() {
            let ti = g.wrap_i(i as isize + si);
            for j in 0..g.ny() {
                let tj = g.wrap_j(j as isize + sj);
                out[g.idx(ti, tj)] = self.values[g.idx(i, j)];
            }
        }
        Self {
            grid: g,
            values: out,
        }
    }

    /// Periodic bilinear interpolation between cell centers.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = x / g.dx() - 0.5;
        let fy = y / g.dy() - 0.5;
        let i0 = fx.floor();
        let j0 = fy.floor();
        let tx = fx - i0;
        let ty = fy - j0;
        let i0 = g.wrap_i(i0 as isize);
        let j0 = g.wrap_j(j0 as isize);
        let i1 = (i0 + 1) % g.nx();
        let j1 = (j0 + 1) % g.ny();
        let v00 = self.at(i0, j0);
        let v10 = self.at(i1, j0);
        let v01 = self.at(i0, j1);
        let v11 = self.at(i1, j1);
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            vx: vec![0.0; grid.len()],
            vy: vec![0.0; grid.len()],
        }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        ensure_same_grid(&x.grid, &y.grid)?;
        Ok(Self {
            grid: x.grid,
            vx: x.values,
            vy: y.values,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    pub fn x_component(&self) -> ScalarField {
        ScalarField::from_values_unchecked(self.grid, self.vx.clone())
    }

    pub fn y_component(&self) -> ScalarField {
        ScalarField::from_values_unchecked(self.grid, self.vy.clone())
    }

    /// Bilinear sample of both components.
    pub fn sample(&self, x: f64, y: f64) -> [f64; 2] {
        // Interpolation weights are shared; going through ScalarField would clone.
        let g = &self.grid;
        let fx = x / g.dx() - 0.5;
        let fy = y / g.dy() - 0.5;
        let i0f = fx.floor();
        let j0f = fy.floor();
        let tx = fx - i0f;
        let ty = fy - j0f;
        let i0 = g.wrap_i(i0f as isize);
        let j0 = g.wrap_j(j0f as isize);
        let i1 = (i0 + 1) % g.nx();
        let j1 = (j0 + 1) % g.ny();
        let w = [
            (1.0 - tx) * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * (1.0 - ty),
            tx * ty,
        ];
        let ks = [g.idx(i0, j0), g.idx(i0, j1), g.idx(i1, j0), g.idx(i1, j1)];
        let mut out = [0.0; 2];
        for (wk, k) in w.iter().zip(ks) {
            out[0] += wk * self.vx[k];
            out[1] += wk * self.vy[k];
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.vx
            .iter()
            .zip(&self.vy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Cell-sum of the pointwise dot product, times the cell area.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let s: f64 = self
            .vx
            .iter()
            .zip(&other.vx)
            .map(|(a, b)| a * b)
            .chain(self.vy.iter().zip(&other.vy).map(|(a, b)| a * b))
            .sum();
        Ok(s * self.grid.cell_area())
    }
}

pub(crate) fn ensure_same_grid(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} on [0,{}]x[0,{}] vs {}x{} on [0,{}]x[0,{}]",
            a.nx(),
            a.ny(),
            a.lx(),
            a.ly(),
            b.nx(),
            b.ny(),
            b.lx(),
            b.ly()
        )))
    }
}

/// Centered second-order periodic gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let inv2dx = 0.5 / g.dx();
    let inv2dy = 0.5 / g.dy();
    let v = f.values();
    let mut vx = vec![0.0; g.len()];
    let mut vy = vec![0.0; g.len()];
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        for j in 0..ny {
            let jp = (j + 1) % ny;
            let jm = (j + ny - 1) % ny;
            let k = g.idx(i, j);
            vx[k] = (v[g.idx(ip, j)] - v[g.idx(im, j)]) * inv2dx;
            vy[k] = (v[g.idx(i, jp)] - v[g.idx(i, jm)]) * inv2dy;
        }
    }
    VectorField { grid: g, vx, vy }
}

/// Centered periodic divergence; the negative adjoint of [`gradient`].
pub fn divergence(field: &VectorField) -> ScalarField {
    let g = *field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let inv2dx = 0.5 / g.dx();
    let inv2dy = 0.5 / g.dy();
    let mut out = vec![0.0; g.len()];
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        for j in 0..ny {
            let jp = (j + 1) % ny;
            let jm = (j + ny - 1) % ny;
            out[g.idx(i, j)] = (field.vx[g.idx(ip, j)] - field.vx[g.idx(im, j)]) * inv2dx
                + (field.vy[g.idx(i, jp)] - field.vy[g.idx(i, jm)]) * inv2dy;
        }
    }
    ScalarField::from_values_unchecked(g, out)
}

/// Five-point periodic Laplacian.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let cx = 1.0 / (g.dx() * g.dx());
    let cy = 1.0 / (g.dy() * g.dy());
    let v = f.values();
    let mut out = vec![0.0; g.len()];
    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        for j in 0..ny {
            let jp = (j + 1) % ny;
            let jm = (j + ny - 1) % ny;
            let c = v[g.idx(i, j)];
            out[g.idx(i, j)] = (v[g.idx(ip, j)] - 2.0 * c + v[g.idx(im, j)]) * cx
                + (v[g.idx(i, jp)] - 2.0 * c + v[g.idx(i, jm)]) * cy;
        }
    }
    ScalarField::from_values_unchecked(g, out)
}

/// Discrete eigenvalue of the five-point Laplacian for the Fourier mode
/// with integer wavenumbers `(kx, ky)`.
pub fn laplacian_eigenvalue(grid: &Grid2D, kx: i64, ky: i64) -> f64 {
    use std::f64::consts::TAU;
    let ax = TAU * kx as f64 * grid.dx() / grid.lx();
    let ay = TAU * ky as f64 * grid.dy() / grid.ly();
    -(2.0 / (grid.dx() * grid.dx())) * (1.0 - ax.cos())
        - (2.0 / (grid.dy() * grid.dy())) * (1.0 - ay.cos())
}
