//! Radial kernels, their periodic discretization, and convolution on the torus.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, Grid2D, ScalarField};

/// One-dimensional quadratic utility kernel `1/2 (1 - z^2)` on `|z| <= 1`, zero outside.
pub fn eval_utility_kernel_1d(z: f64) -> f64 {
    if z.abs() <= 1.0 {
        0.5 * (1.0 - z * z)
    } else {
        0.0
    }
}

/// Mollifier bandwidth `N^-lambda`, with `lambda` restricted to `(0, 1/4)`.
pub fn mollifier_bandwidth(n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 0.25) {
        return Err(Error::config(
            "params.lambda",
            format!("mollifier exponent must lie in (0, 0.25), got {lambda}"),
        ));
    }
    if n == 0 {
        return Err(Error::Domain(
            "mollifier bandwidth needs at least one agent".into(),
        ));
    }
    Ok((n as f64).powf(-lambda))
}

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of a kernel as a function of `r = |z| / h`, supported on `r < 1`.
#[derive(Clone)]
pub enum KernelFamily {
    /// `1/2 (1 - r^2)`, the radial version of the utility kernel.
    QuadraticW,
    /// `1 - r`, the spillover kernel of the baseline calibration.
    Cone,
    /// `1 - r^2`.
    Epanechnikov,
    /// User supplied, nonnegative and nonincreasing on `[0, 1)`.
    CustomRadial(ProfileFn),
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::QuadraticW => f.write_str("QuadraticW"),
            KernelFamily::Cone => f.write_str("Cone"),
            KernelFamily::Epanechnikov => f.write_str("Epanechnikov"),
            KernelFamily::CustomRadial(_) => f.write_str("CustomRadial(..)"),
        }
    }
}

impl KernelFamily {
    pub fn profile(&self, r: f64) -> f64 {
        if !(0.0..1.0).contains(&r) {
            return 0.0;
        }
        match self {
            KernelFamily::QuadraticW => 0.5 * (1.0 - r * r),
            KernelFamily::Cone => 1.0 - r,
            KernelFamily::Epanechnikov => 1.0 - r * r,
            KernelFamily::CustomRadial(p) => p(r).max(0.0),
        }
    }

    /// Constant `c` such that `c * profile(|z|)` integrates to one over the unit disk.
    pub fn continuous_normalization(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            KernelFamily::QuadraticW => 4.0 / PI,
            KernelFamily::Cone => 3.0 / PI,
            KernelFamily::Epanechnikov => 2.0 / PI,
            KernelFamily::CustomRadial(_) => {
                // composite Simpson on r p(r)
                let n = 2000;
                let h = 1.0 / n as f64;
                let mut s = 0.0;
                for k in 0..=n {
                    let r = k as f64 * h;
                    let w = if k == 0 || k == n {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    s += w * r * self.profile(r.min(1.0 - 1e-15));
                }
                1.0 / (2.0 * PI * s * h / 3.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Self {
        Self { family, bandwidth }
    }

    pub fn cone(bandwidth: f64) -> Self {
        Self::new(KernelFamily::Cone, bandwidth)
    }

    pub fn epanechnikov(bandwidth: f64) -> Self {
        Self::new(KernelFamily::Epanechnikov, bandwidth)
    }

    /// Continuous density `h^-2 c p(|z|/h)` at offset `(zx, zy)`.
    pub fn eval(&self, zx: f64, zy: f64) -> f64 {
        let h = self.bandwidth;
        let r = zx.hypot(zy) / h;
        self.family.continuous_normalization() * self.family.profile(r) / (h * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub di: isize,
    pub dj: isize,
    /// Kernel value times cell area, so taps sum to one.
    pub weight: f64,
}

/// A kernel sampled at cell-center offsets and renormalized to unit mass.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    grid: Grid2D,
    bandwidth: f64,
    taps: Vec<Tap>,
}

/// Midpoint-samples `spec` on `grid` and renormalizes it to unit mass.
pub fn discretize(spec: &KernelSpec, grid: &Grid2D) -> Result<DiscreteKernel> {
    let h = spec.bandwidth;
    if !(h.is_finite() && h >= 2.0 * grid.max_spacing()) {
        return Err(Error::Resolution(format!(
            "bandwidth {h} is below two cells ({}) on this grid",
            2.0 * grid.max_spacing()
        )));
    }
    if h >= 0.5 * grid.lx().min(grid.ly()) {
        return Err(Error::Resolution(format!(
            "bandwidth {h} wraps around a domain of size {}x{}",
            grid.lx(),
            grid.ly()
        )));
    }
    let (dx, dy) = (grid.dx(), grid.dy());
    let ri = (h / dx).ceil() as isize;
    let rj = (h / dy).ceil() as isize;
    let mut taps = Vec::new();
    for di in -ri..=ri {
        let zx = di as f64 * dx;
        for dj in -rj..=rj {
            let zy = dj as f64 * dy;
            let w = spec.family.profile(zx.hypot(zy) / h);
            if w > 0.0 {
                taps.push(Tap { di, dj, weight: w });
            }
        }
    }
    let total: f64 = taps.iter().map(|t| t.weight).sum();
    for t in &mut taps {
        t.weight /= total;
    }
    Ok(DiscreteKernel {
        grid: *grid,
        bandwidth: h,
        taps,
    })
}

impl DiscreteKernel {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Kernel density values laid out on the grid with the origin at cell `(0, 0)`.
    pub fn as_field(&self) -> ScalarField {
        let g = self.grid;
        let inv_area = 1.0 / g.cell_area();
        let mut f = ScalarField::zeros(g);
        for t in &self.taps {
            let k = g.idx(g.wrap_i(t.di), g.wrap_j(t.dj));
            f.values_mut()[k] += t.weight * inv_area;
        }
        f
    }

    /// Real DFT coefficient at integer wavenumbers; equals 1 at `(0, 0)`.
    pub fn fourier_coefficient(&self, kx: i64, ky: i64) -> f64 {
        use std::f64::consts::TAU;
        let g = &self.grid;
        let ax = TAU * kx as f64 / g.nx() as f64;
        let ay = TAU * ky as f64 / g.ny() as f64;
        self.taps
            .iter()
            .map(|t| t.weight * (ax * t.di as f64 + ay * t.dj as f64).cos())
            .sum()
    }
}

/// Direct periodic convolution `(k * f)(x) = sum_z k(z) f(x - z) dx dy`.
pub fn convolve(f: &ScalarField, k: &DiscreteKernel) -> Result<ScalarField> {
    ensure_same_grid(f.grid(), k.grid())?;
    let g = *f.grid();
    let ny = g.ny();
    let src = f.values();
    let mut out = vec![0.0; g.len()];
    // Every cell accumulates the taps in the same order, which keeps the
    // result exactly equivariant under whole-cell translations.
    for (i, row_out) in out.chunks_exact_mut(ny).enumerate() {
        for t in &k.taps {
            let si = g.wrap_i(i as isize - t.di);
            let row = &src[si * ny..][..ny];
            // out[j] += w * row[(j - dj) mod ny], split into two contiguous runs
            let shift = g.wrap_j(t.dj);
            let (head, tail) = row_out.split_at_mut(shift);
            for (o, s) in tail.iter_mut().zip(&row[..ny - shift]) {
                *o += t.weight * s;
            }
            for (o, s) in head.iter_mut().zip(&row[ny - shift..]) {
                *o += t.weight * s;
            }
        }
    }
    Ok(ScalarField::from_values_unchecked(g, out))
}

/// Transform-based convolution with a cached kernel spectrum.
pub struct FftConvolver {
    grid: Grid2D,
    spectrum: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftConvolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftConvolver")
            .field("grid", &self.grid)
            .finish()
    }
}

impl FftConvolver {
    pub fn new(kernel: &DiscreteKernel) -> Self {
        let g = *kernel.grid();
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(g.ny());
        let row_inv = planner.plan_fft_inverse(g.ny());
        let col_fwd = planner.plan_fft_forward(g.nx());
        let col_inv = planner.plan_fft_inverse(g.nx());
        let mut conv = Self {
            grid: g,
            spectrum: Vec::new(),
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); g.len()];
        for t in kernel.taps() {
            buf[g.idx(g.wrap_i(t.di), g.wrap_j(t.dj))].re += t.weight;
        }
        conv.transform(&mut buf, false);
        conv.spectrum = buf;
        conv
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for r in buf.chunks_exact_mut(ny) {
            row.process(r);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for i in 0..nx {
                column[i] = buf[i * ny + j];
            }
            col.process(&mut column);
            for i in 0..nx {
                buf[i * ny + j] = column[i];
            }
        }
    }

    pub fn convolve(&self, f: &ScalarField) -> Result<ScalarField> {
        ensure_same_grid(f.grid(), &self.grid)?;
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / self.grid.len() as f64;
        Ok(ScalarField::from_values_unchecked(
            self.grid,
            buf.iter().map(|c| c.re * scale).collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    /// Gather over kernel taps; exactly translation equivariant and sign preserving.
    #[default]
    Direct,
    Fft,
}

/// A kernel bundled with its preferred convolution path.
#[derive(Debug)]
pub struct Convolver {
    kernel: DiscreteKernel,
    fft: Option<FftConvolver>,
}

impl Convolver {
    pub fn new(kernel: DiscreteKernel, method: ConvolutionMethod) -> Self {
        let fft = match method {
            ConvolutionMethod::Direct => None,
            ConvolutionMethod::Fft => Some(FftConvolver::new(&kernel)),
        };
        Self { kernel, fft }
    }

    pub fn kernel(&self) -> &DiscreteKernel {
        &self.kernel
    }

    pub fn method(&self) -> ConvolutionMethod {
        if self.fft.is_some() {
            ConvolutionMethod::Fft
        } else {
            ConvolutionMethod::Direct
        }
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        match &self.fft {
            None => convolve(f, &self.kernel),
            Some(c) => {
                let mut out = c.convolve(f)?;
                // transform round-off can leave values like -1e-19 where the input is nonnegative
                out.values_mut().iter_mut().for_each(|v| {
                    if *v < 0.0 && *v > -1e-14 {
                        *v = 0.0
                    }
                });
                Ok(out)
            }
        }
    }
}

/// Adds `mass` spread by a radial kernel of bandwidth `h` around `(x, y)`.
///
/// Weights are sampled at cell centers and renormalized so exactly `mass`
/// is deposited regardless of where the point sits inside its cell. When
/// no center falls inside the support the whole mass lands in the nearest cell.
pub fn deposit(
    out: &mut ScalarField,
    family: &KernelFamily,
    h: f64,
    x: f64,
    y: f64,
    mass: f64,
    scratch: &mut Vec<(usize, f64)>,
) {
    let g = *out.grid();
    let (dx, dy) = (g.dx(), g.dy());
    let ci = (x / dx - 0.5).floor() as isize;
    let cj = (y / dy - 0.5).floor() as isize;
    let ri = (h / dx).ceil() as isize + 1;
    let rj = (h / dy).ceil() as isize + 1;
    scratch.clear();
    let mut total = 0.0;
    for i in ci - ri..=ci + ri {
        let zx = (i as f64 + 0.5) * dx - x;
        for j in cj - rj..=cj + rj {
            let zy = (j as f64 + 0.5) * dy - y;
            let w = family.profile(zx.hypot(zy) / h);
            if w > 0.0 {
                total += w;
                scratch.push((g.idx(g.wrap_i(i), g.wrap_j(j)), w));
            }
        }
    }
    let inv_area = 1.0 / g.cell_area();
    let vals = out.values_mut();
    if total > 0.0 {
        let scale = mass * inv_area / total;
        for &(k, w) in scratch.iter() {
            vals[k] += w * scale;
        }
    } else {
        let i = g.wrap_i((x / dx).floor() as isize);
        let j = g.wrap_j((y / dy).floor() as isize);
        vals[g.idx(i, j)] += mass * inv_area;
    }
}
