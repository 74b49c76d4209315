//! Shared fixtures for the criterion benches.

use spatial_econ::{Grid2D, ScalarField};

/// Deterministic, smooth, strictly positive test density with unit mass.
pub fn bumpy_density(grid: Grid2D) -> ScalarField {
    let (lx, ly) = (grid.lx(), grid.ly());
    let tau = std::f64::consts::TAU;
    let mut f = ScalarField::from_fn(grid, |x, y| {
        1.0 + 0.3 * (tau * 3.0 * x / lx).sin() * (tau * 2.0 * y / ly).cos()
            + 0.2 * (tau * 5.0 * (x + y) / lx).cos()
    });
    let m = f.integral();
    f.scale(1.0 / m);
    f
}
