//! Economic fields generated by a labour density: technology, income,
//! wages, endogenous amenities and utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, gradient, ScalarField, VectorField};
use crate::kernels::Convolver;

/// Density floor used only when reporting `log l`.
pub const LOG_FLOOR: f64 = 1e-10;

/// Model constants. Defaults are the baseline calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamSet {
    /// Movement cost.
    pub c_m: f64,
    /// Scale of the idiosyncratic noise.
    pub sigma: f64,
    /// Production exponent.
    pub beta: f64,
    /// Amenity scale.
    pub a0: f64,
    /// Income share spent on amenities.
    pub tau: f64,
    /// Returns-to-scale exponent of amenity provision.
    pub phi: f64,
    /// Congestion rate.
    pub mu_a: f64,
    /// Bandwidth of the production spillover kernel.
    pub h: f64,
    /// Net workforce growth rate, constant in space and time.
    pub n_rate: f64,
    /// Density below which wages use the bounded continuation.
    pub l_bar_reg: f64,
    /// Mollifier exponent for the agent density estimator.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self {
            c_m: 100.0,
            sigma: 0.05,
            beta: 0.6,
            a0: 6.0,
            tau: 0.2,
            phi: 0.5,
            mu_a: 0.2,
            h: 0.4,
            n_rate: 0.0,
            l_bar_reg: 0.1,
            lambda: 0.2,
            seed: 0,
        }
    }
}

fn check(ok: bool, key: &str, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("params.{key}"), msg()))
    }
}

impl ParamSet {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("c_m", self.c_m),
            ("sigma", self.sigma),
            ("beta", self.beta),
            ("a0", self.a0),
            ("tau", self.tau),
            ("phi", self.phi),
            ("mu_a", self.mu_a),
            ("h", self.h),
            ("n_rate", self.n_rate),
            ("l_bar_reg", self.l_bar_reg),
            ("lambda", self.lambda),
        ];
        for (k, v) in finite {
            check(v.is_finite(), k, || format!("must be finite, got {v}"))?;
        }
        check(self.c_m > 0.0, "c_m", || {
            format!("must be > 0, got {}", self.c_m)
        })?;
        check(self.sigma >= 0.0, "sigma", || {
            format!("must be >= 0, got {}", self.sigma)
        })?;
        check(self.beta > 0.0 && self.beta <= 1.0, "beta", || {
            format!("must lie in (0, 1], got {}", self.beta)
        })?;
        check(self.a0 >= 0.0, "a0", || {
            format!("must be >= 0, got {}", self.a0)
        })?;
        check(self.tau > 0.0 && self.tau < 1.0, "tau", || {
            format!("must lie in (0, 1), got {}", self.tau)
        })?;
        check(self.phi > 0.0 && self.phi < 1.0, "phi", || {
            format!("must lie in (0, 1), got {}", self.phi)
        })?;
        check(self.mu_a >= 0.0, "mu_a", || {
            format!("must be >= 0, got {}", self.mu_a)
        })?;
        check(self.h > 0.0, "h", || format!("must be > 0, got {}", self.h))?;
        check(self.n_rate >= 0.0, "n_rate", || {
            format!("must be >= 0, got {}", self.n_rate)
        })?;
        check(self.l_bar_reg > 0.0, "l_bar_reg", || {
            format!("must be > 0, got {}", self.l_bar_reg)
        })?;
        check(self.lambda > 0.0 && self.lambda < 0.25, "lambda", || {
            format!("must lie in (0, 0.25), got {}", self.lambda)
        })?;
        Ok(())
    }

    /// Diffusion coefficient `sigma^2 / (2 c_M^2)` of the density equation.
    pub fn diffusion(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.c_m * self.c_m)
    }

    /// Weight `sigma^2 / (2 c_M)` of `log l` in the total utility.
    pub fn entropy_weight(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.c_m)
    }
}

/// `l^(beta - 1)` above `l_bar`; below it the linear continuation
/// `l_bar^(beta - 1) (2 - l / l_bar)`, which is bounded by `2 l_bar^(beta - 1)`.
///
/// With `beta = 1` there is no singularity and the result is identically one.
pub fn regularized_power(l: f64, beta: f64, l_bar: f64) -> Result<f64> {
    if l.is_nan() || l < 0.0 {
        return Err(Error::Domain(format!(
            "density must be nonnegative, got {l}"
        )));
    }
    Ok(regularized_power_unchecked(l, beta, l_bar))
}

#[inline]
pub(crate) fn regularized_power_unchecked(l: f64, beta: f64, l_bar: f64) -> f64 {
    if beta == 1.0 {
        1.0
    } else if l > l_bar {
        l.powf(beta - 1.0)
    } else {
        l_bar.powf(beta - 1.0) * (2.0 - l / l_bar)
    }
}

/// Derivative of [`regularized_power`] with respect to `l`.
#[inline]
pub(crate) fn regularized_power_slope(l: f64, beta: f64, l_bar: f64) -> f64 {
    if beta == 1.0 {
        0.0
    } else if l > l_bar {
        (beta - 1.0) * l.powf(beta - 2.0)
    } else {
        -l_bar.powf(beta - 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct EconomyFields {
    /// Local technology `G (W * l)`.
    pub a_l: ScalarField,
    /// Income `A_l l^beta`.
    pub y: ScalarField,
    /// Wages `A_l l^(beta - 1)`, regularized near zero density.
    pub w: ScalarField,
    pub a_en: ScalarField,
    /// Systematic utility `w + A_EN + A_ES`.
    pub v: ScalarField,
    /// Total utility `v - sigma^2 / (2 c_M) log l`.
    pub u: ScalarField,
}

/// Evaluates every economic field for the density `l`.
pub fn compute_fields(
    l: &ScalarField,
    g: &ScalarField,
    a_es: &ScalarField,
    p: &ParamSet,
    kernel: &Convolver,
) -> Result<EconomyFields> {
    ensure_same_grid(l.grid(), g.grid())?;
    ensure_same_grid(l.grid(), a_es.grid())?;
    let grid = *l.grid();
    if let Some(k) = l.values().iter().position(|v| !(*v >= 0.0)) {
        let (i, j) = grid.coords(k);
        return Err(Error::Domain(format!(
            "negative or NaN density {} at cell ({i}, {j})",
            l.values()[k]
        )));
    }
    let smoothed = kernel.apply(l)?;
    let n = grid.len();
    let mut a_l = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut a_en = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let ew = p.entropy_weight();
    for k in 0..n {
        let lk = l.values()[k];
        let al = g.values()[k] * smoothed.values()[k];
        let yk = al * lk.powf(p.beta);
        let wk = al * regularized_power_unchecked(lk, p.beta, p.l_bar_reg);
        let ak = p.a0 * ((p.tau * yk).powf(p.phi) - p.mu_a * lk);
        let vk = wk + ak + a_es.values()[k];
        a_l.push(al);
        y.push(yk);
        w.push(wk);
        a_en.push(ak);
        v.push(vk);
        u.push(vk - ew * lk.max(LOG_FLOOR).ln());
    }
    let wrap = |values| ScalarField::from_values(grid, values);
    Ok(EconomyFields {
        a_l: wrap(a_l)?,
        y: wrap(y)?,
        w: wrap(w)?,
        a_en: wrap(a_en)?,
        v: wrap(v)?,
        u: wrap(u)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmenityThreshold {
    Finite(f64),
    /// No congestion: amenities never oppose agglomeration.
    Infinite,
}

impl AmenityThreshold {
    pub fn value(&self) -> f64 {
        match self {
            AmenityThreshold::Finite(v) => *v,
            AmenityThreshold::Infinite => f64::INFINITY,
        }
    }
}

/// Density above which endogenous amenities decrease with further crowding:
/// `[phi beta tau^phi A_l^phi / mu_A]^(1 / (1 - phi beta))`.
pub fn amenity_threshold(a_l: f64, p: &ParamSet) -> Result<AmenityThreshold> {
    if !(a_l > 0.0) {
        return Err(Error::Domain(format!(
            "technology level must be positive, got {a_l}"
        )));
    }
    if p.mu_a == 0.0 {
        return Ok(AmenityThreshold::Infinite);
    }
    let base = p.phi * p.beta * p.tau.powf(p.phi) * a_l.powf(p.phi) / p.mu_a;
    Ok(AmenityThreshold::Finite(
        base.powf(1.0 / (1.0 - p.phi * p.beta)),
    ))
}

/// Endogenous amenities at a single location for a fixed technology level.
pub fn pointwise_amenity(l: f64, a_l: f64, p: &ParamSet) -> f64 {
    p.a0 * ((p.tau * a_l * l.powf(p.beta)).powf(p.phi) - p.mu_a * l)
}

#[derive(Debug, Clone)]
pub struct FieldGradients {
    pub a_l: VectorField,
    pub y: VectorField,
    pub w: VectorField,
    pub a_en: VectorField,
    pub v: VectorField,
}

pub fn field_gradients(fields: &EconomyFields) -> FieldGradients {
    FieldGradients {
        a_l: gradient(&fields.a_l),
        y: gradient(&fields.y),
        w: gradient(&fields.w),
        a_en: gradient(&fields.a_en),
        v: gradient(&fields.v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::kernels::{discretize, ConvolutionMethod, KernelSpec};

    fn setup(lx: f64, n: usize, h: f64) -> (Grid2D, Convolver) {
        let g = Grid2D::new(lx, lx, n, n).unwrap();
        let k = discretize(&KernelSpec::cone(h), &g).unwrap();
        (g, Convolver::new(k, ConvolutionMethod::Direct))
    }

    #[test]
    fn defaults_are_baseline_and_valid() {
        let p = ParamSet::default();
        p.validate().unwrap();
        assert_eq!((p.c_m, p.sigma, p.beta, p.a0), (100.0, 0.05, 0.6, 6.0));
        assert_eq!(
            (p.tau, p.phi, p.mu_a, p.h, p.n_rate),
            (0.2, 0.5, 0.2, 0.4, 0.0)
        );
    }

    #[test]
    fn validation_names_the_key() {
        let p = ParamSet {
            phi: 1.5,
            ..ParamSet::default()
        };
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "params.phi"),
            other => panic!("unexpected {other:?}"),
        }
        let p = ParamSet {
            beta: 1.2,
            ..ParamSet::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn regularized_power_branches() {
        assert_eq!(regularized_power(1.0, 0.6, 0.1).unwrap(), 1.0);
        let at = regularized_power(0.1, 0.6, 0.1).unwrap();
        assert!((at - 0.1f64.powf(-0.4)).abs() < 1e-12);
        let above = regularized_power(0.1 + 1e-12, 0.6, 0.1).unwrap();
        assert!((above - at).abs() < 1e-9);
        let zero = regularized_power(0.0, 0.6, 0.1).unwrap();
        assert_eq!(zero, 2.0 * 0.1f64.powf(-0.4));
        assert!(regularized_power(-1e-3, 0.6, 0.1).is_err());
        assert_eq!(regularized_power(0.0, 1.0, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn regularized_power_sup_is_value_at_zero() {
        let bound = 2.0 * 0.05f64.powf(0.7 - 1.0);
        let sup = (0..=20_000)
            .map(|k| regularized_power(k as f64 * 1e-4, 0.7, 0.05).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(sup, bound);
    }

    #[test]
    fn uniform_state_closed_form() {
        let (g, k) = setup(1.0, 16, 0.25);
        let l = ScalarField::constant(g, 1.0);
        let one = ScalarField::constant(g, 1.0);
        let zero = ScalarField::zeros(g);
        let f = compute_fields(&l, &one, &zero, &ParamSet::default(), &k).unwrap();
        let expected_aen = 6.0 * (0.2f64.sqrt() - 0.2);
        for kk in 0..g.len() {
            assert!((f.a_l.values()[kk] - 1.0).abs() < 1e-13);
            assert!((f.y.values()[kk] - 1.0).abs() < 1e-13);
            assert!((f.w.values()[kk] - 1.0).abs() < 1e-13);
            assert!((f.a_en.values()[kk] - expected_aen).abs() < 1e-12);
        }
        assert!((expected_aen - 1.4833).abs() < 1e-4);
    }

    #[test]
    fn empty_economy_has_finite_wages() {
        let (g, k) = setup(4.0, 32, 0.4);
        let l = ScalarField::zeros(g);
        let one = ScalarField::constant(g, 1.0);
        let f = compute_fields(&l, &one, &ScalarField::zeros(g), &ParamSet::default(), &k).unwrap();
        assert!(f.y.values().iter().all(|v| *v == 0.0));
        assert!(f.a_en.values().iter().all(|v| *v == 0.0));
        assert!(f.w.is_finite() && f.u.is_finite());
    }

    #[test]
    fn unusable_land_produces_nothing() {
        let (g, k) = setup(4.0, 32, 0.4);
        let l = ScalarField::from_fn(g, |x, y| 1.0 + 0.5 * (x * 1.3).sin() * y.cos());
        let pot = ScalarField::from_fn(g, |x, _| if x < 2.0 { 0.0 } else { 1.0 });
        let f = compute_fields(&l, &pot, &ScalarField::zeros(g), &ParamSet::default(), &k).unwrap();
        for kk in 0..g.len() {
            if pot.values()[kk] == 0.0 {
                assert_eq!(f.a_l.values()[kk], 0.0);
                assert_eq!(f.y.values()[kk], 0.0);
                assert_eq!(f.w.values()[kk], 0.0);
            }
        }
    }

    #[test]
    fn negative_density_reports_cell() {
        let (g, k) = setup(4.0, 16, 0.5);
        let mut l = ScalarField::constant(g, 1.0);
        l.set(3, 9, -0.1);
        let one = ScalarField::constant(g, 1.0);
        let err =
            compute_fields(&l, &one, &ScalarField::zeros(g), &ParamSet::default(), &k).unwrap_err();
        assert!(err.to_string().contains("(3, 9)"), "{err}");
    }

    #[test]
    fn threshold_closed_form_and_monotonicity() {
        let p = ParamSet::default();
        let t = amenity_threshold(1.0, &p).unwrap().value();
        let expected = (0.5 * 0.6 * 0.2f64.sqrt() / 0.2).powf(1.0 / 0.7);
        assert!((t - expected).abs() < 1e-14);
        assert!((t - 0.565).abs() < 1e-3);
        let lower_mu = ParamSet {
            mu_a: 0.1,
            ..p.clone()
        };
        assert!(amenity_threshold(1.0, &lower_mu).unwrap().value() > t);
        assert!(amenity_threshold(2.0, &p).unwrap().value() > t);
        let no_congestion = ParamSet {
            mu_a: 0.0,
            ..p.clone()
        };
        assert_eq!(
            amenity_threshold(1.0, &no_congestion).unwrap(),
            AmenityThreshold::Infinite
        );
        assert!(amenity_threshold(0.0, &p).is_err());
    }

    #[test]
    fn uniform_density_has_flat_fields() {
        let (g, k) = setup(4.0, 32, 0.4);
        let l = ScalarField::constant(g, 1.0 / 16.0);
        let one = ScalarField::constant(g, 1.0);
        let f = compute_fields(&l, &one, &ScalarField::zeros(g), &ParamSet::default(), &k).unwrap();
        let grads = field_gradients(&f);
        for vf in [&grads.a_l, &grads.y, &grads.w, &grads.a_en, &grads.v] {
            assert_eq!(vf.max_norm(), 0.0);
        }
    }
}
