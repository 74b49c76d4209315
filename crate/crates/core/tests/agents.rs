use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_econ::grid::VectorField;
use spatial_econ::meanfield::perturbed_uniform;
use spatial_econ::microsim::{
    advance, empirical_density, gini_spatial, nash_step, nash_velocities_1d, spawn_births,
    NashConfig1D, Population, RateField,
};
use spatial_econ::{Grid2D, ParamSet, ScalarField};

fn grid() -> Grid2D {
    Grid2D::new(4.0, 4.0, 32, 32).unwrap()
}

fn constant_gradient(g: Grid2D, gx: f64, gy: f64) -> VectorField {
    VectorField::from_components(ScalarField::constant(g, gx), ScalarField::constant(g, gy))
        .unwrap()
}

#[test]
fn drift_follows_the_utility_gradient() {
    let g = grid();
    let p = ParamSet {
        c_m: 2.0,
        sigma: 0.0,
        ..ParamSet::default()
    };
    let mut pop = Population::from_positions(&g, &[(1.0, 1.0), (3.9, 0.05)], 0).unwrap();
    advance(&mut pop, &constant_gradient(g, 1.0, -0.5), &p, 0.2).unwrap();
    let (x, y) = pop.position(0);
    assert!((x - 1.1).abs() < 1e-14 && (y - 0.95).abs() < 1e-14);
    // wraps across the periodic boundary
    let (x, y) = pop.position(1);
    let near_origin = |c: f64| c.abs() < 1e-12 || (c - 4.0).abs() < 1e-12;
    assert!(near_origin(x) && near_origin(y), "({x}, {y})");
    assert!((0.0..4.0).contains(&x) && (0.0..4.0).contains(&y));
    assert!((pop.time() - 0.2).abs() < 1e-15);
}

#[test]
fn noise_has_the_euler_maruyama_variance() {
    let g = grid();
    let p = ParamSet {
        c_m: 1.0,
        sigma: 0.2,
        ..ParamSet::default()
    };
    let n = 20_000;
    let start: Vec<(f64, f64)> = (0..n).map(|_| (2.0, 2.0)).collect();
    let mut pop = Population::from_positions(&g, &start, 7).unwrap();
    let dt = 0.1;
    advance(&mut pop, &constant_gradient(g, 0.3, 0.0), &p, dt).unwrap();
    let dx: Vec<f64> = pop.xs().iter().map(|x| x - 2.0).collect();
    let mean = dx.iter().sum::<f64>() / n as f64;
    let var = dx.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want_var = (p.sigma / p.c_m).powi(2) * dt;
    let se_mean = (want_var / n as f64).sqrt();
    assert!(
        (mean - 0.3 * dt / p.c_m).abs() < 4.0 * se_mean,
        "mean {mean}"
    );
    assert!((var / want_var - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn births_are_binomial_with_the_exponential_probability() {
    let g = grid();
    let n0 = 20_000;
    let (rate, dt) = (0.5f64, 0.1);
    let prob = 1.0 - (-rate * dt).exp();
    let sd = (n0 as f64 * prob * (1.0 - prob)).sqrt();
    let density = ScalarField::constant(g, 1.0 / 16.0);
    for seed in 0..5 {
        let mut pop = Population::sample_from_density(&density, n0, seed).unwrap();
        let born = spawn_births(&mut pop, &RateField::Constant(rate), dt).unwrap();
        assert!(
            (born as f64 - n0 as f64 * prob).abs() < 3.0 * sd,
            "seed {seed}: {born}"
        );
        assert_eq!(pop.len(), n0 + born);
        assert!((pop.mass() - (n0 + born) as f64 / n0 as f64).abs() < 1e-12);
    }
}

#[test]
fn births_follow_the_rate_field() {
    let g = grid();
    let rate = ScalarField::from_fn(g, |x, _| if x < 2.0 { 2.0 } else { 0.0 });
    let n = 10_000;
    let mut pop =
        Population::sample_from_density(&ScalarField::constant(g, 1.0 / 16.0), n, 3).unwrap();
    spawn_births(&mut pop, &RateField::Field(rate), 0.2).unwrap();
    let right = pop.xs().iter().filter(|x| **x >= 2.0).count();
    let left = pop.len() - right;
    assert!(left as f64 > 1.2 * right as f64);
    assert!(spawn_births(&mut pop, &RateField::Constant(-1.0), 0.1).is_err());
}

#[test]
fn empirical_density_of_uniform_samples_is_nearly_uniform() {
    let g = grid();
    let uniform = ScalarField::constant(g, 1.0 / 16.0);
    let mut avg = ScalarField::zeros(g);
    for seed in 0..20 {
        let pop = Population::sample_from_density(&uniform, 8000, seed).unwrap();
        let est = empirical_density(&pop, &g, 0.2).unwrap();
        assert!((est.density.integral() - 1.0).abs() < 1e-12);
        assert!(est.bandwidth >= 2.0 * g.max_spacing());
        for (a, b) in avg.values_mut().iter_mut().zip(est.density.values()) {
            *a += b / 20.0;
        }
    }
    let rel = avg
        .values()
        .iter()
        .map(|v| (v * 16.0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(rel < 0.15, "max relative deviation {rel}");
}

#[test]
fn sampling_follows_the_density() {
    let g = grid();
    let l = ScalarField::from_fn(g, |x, _| if x < 1.0 { 1.0 } else { 0.0 });
    let pop = Population::sample_from_density(&l, 5000, 1).unwrap();
    assert!(pop.xs().iter().all(|x| *x < 1.0));
}

#[test]
fn agents_are_reproducible_per_seed() {
    let g = grid();
    let p = ParamSet {
        c_m: 1.0,
        sigma: 0.3,
        ..ParamSet::default()
    };
    let l0 = perturbed_uniform(g, 1.0, 0.2, 1).unwrap();
    let grad = constant_gradient(g, 0.1, 0.2);
    let go = |seed| {
        let mut pop = Population::sample_from_density(&l0, 500, seed).unwrap();
        for _ in 0..5 {
            advance(&mut pop, &grad, &p, 0.05).unwrap();
            spawn_births(&mut pop, &RateField::Constant(0.5), 0.05).unwrap();
        }
        pop
    };
    let (a, b, c) = (go(11), go(11), go(12));
    assert_eq!(a.xs(), b.xs());
    assert_eq!(a.ys(), b.ys());
    assert_ne!(a.xs(), c.xs());
}

#[test]
fn mismatched_grids_are_rejected() {
    let g = grid();
    let pop = Population::from_positions(&g, &[(1.0, 1.0)], 0).unwrap();
    let other = Grid2D::new(3.0, 8.0, 24, 64).unwrap();
    assert!(empirical_density(&pop, &other, 0.2)
        .unwrap_err()
        .is_config());
}

fn brute_gini(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let s: f64 = xs
        .iter()
        .flat_map(|a| xs.iter().map(move |b| (a - b).abs()))
        .sum();
    s / n / (2.0 * mean)
}

#[test]
fn nash_closed_form_inverse_and_gini() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(2..=60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let cfg = NashConfig1D::new(
            xs.clone(),
            rng.random_range(0.2..5.0),
            rng.random_range(0.01..1.0),
        )
        .unwrap();
        let id = cfg.matrix() * cfg.explicit_inverse();
        assert!((id - nalgebra::DMatrix::identity(n, n)).abs().max() < 1e-12);
        assert!(nash_velocities_1d(&cfg).unwrap().max_discrepancy() < 1e-12);
        let gini = gini_spatial(&xs).unwrap();
        assert!((gini - brute_gini(&xs)).abs() < 1e-12 * gini.max(1.0));
    }
    assert_eq!(gini_spatial(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert!(gini_spatial(&[1.0]).is_err());
    assert!(gini_spatial(&[-1.0, 0.5]).is_err());
}

#[test]
fn nash_step_contracts_towards_the_barycenter() {
    let mut cfg = NashConfig1D::new(vec![0.0, 1.0, 5.0], 1.0, 0.5).unwrap();
    let m = cfg.barycenter();
    let spread = |c: &NashConfig1D| c.positions.iter().map(|x| (x - m).abs()).sum::<f64>();
    let before = spread(&cfg);
    nash_step(&mut cfg);
    assert!((cfg.barycenter() - m).abs() < 1e-15);
    assert!((spread(&cfg) - before * (1.0 - 0.5 / 1.5)).abs() < 1e-12);
    assert!(NashConfig1D::new(vec![1.0], 1.0, 0.1).is_err());
}
