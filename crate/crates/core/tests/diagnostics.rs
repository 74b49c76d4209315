use spatial_econ::analysis::{
    cluster_centroids, count_clusters, critical_cm_scan, density_distance,
    discrete_dispersion_rate, dispersion_rate, max_dispersion_rate, representative_drift,
    social_utility, social_utility_alt, theil, wavevector, CriticalScan,
};
use spatial_econ::grid::laplacian_eigenvalue;
use spatial_econ::kernels::{discretize, KernelSpec};
use spatial_econ::meanfield::{Model, Numerics};
use spatial_econ::{Grid2D, ParamSet, ScalarField};

fn grid() -> Grid2D {
    Grid2D::new(4.0, 4.0, 64, 64).unwrap()
}

fn bump(g: Grid2D, cx: f64, cy: f64, r: f64) -> ScalarField {
    ScalarField::from_fn(g, |x, y| {
        let dx = Grid2D::periodic_delta(x, cx, g.lx());
        let dy = Grid2D::periodic_delta(y, cy, g.ly());
        (1.0 - (dx * dx + dy * dy) / (r * r)).max(0.0)
    })
}

fn normalized(mut f: ScalarField) -> ScalarField {
    let m = f.integral();
    f.scale(1.0 / m);
    f
}

#[test]
fn social_utility_at_the_uniform_state() {
    let g = grid();
    let p = ParamSet::default();
    let model = Model::uniform(g, p.clone(), Numerics::default()).unwrap();
    let l_bar = 1.0 / 16.0;
    let l = ScalarField::constant(g, l_bar);
    let f = model.fields(&l).unwrap();
    let su = social_utility(&l, &f, &p).unwrap();
    let v_bar = f.v.values()[0];
    let want = v_bar - p.entropy_weight() * l_bar.ln();
    assert!((su.su - want).abs() < 1e-13);
    assert!((su.aggregate_v - v_bar).abs() < 1e-13);
    let alt = social_utility_alt(&l, &f, &p).unwrap();
    assert!((alt - (v_bar - p.diffusion() * l_bar.ln())).abs() < 1e-13);
    let quiet = ParamSet { sigma: 0.0, ..p };
    let s0 = social_utility(&l, &model.fields(&l).unwrap(), &quiet).unwrap();
    assert_eq!(s0.su, s0.aggregate_v);
}

#[test]
fn theil_vanishes_only_at_uniform() {
    let g = grid();
    assert!(theil(&ScalarField::constant(g, 0.3)).unwrap().abs() < 1e-13);
    let peaked = normalized(bump(g, 2.0, 2.0, 0.5));
    let spread = normalized(bump(g, 2.0, 2.0, 1.5));
    let (tp, ts) = (theil(&peaked).unwrap(), theil(&spread).unwrap());
    assert!(tp > ts && ts > 0.0);
}

#[test]
fn clusters_are_counted_across_the_seam() {
    let g = grid();
    let two = bump(g, 1.0, 1.0, 0.3)
        .zip_map(&bump(g, 3.0, 3.0, 0.3), |a, b| a + b)
        .unwrap();
    assert_eq!(count_clusters(&two, 1.5), 2);
    let seam = bump(g, 0.0, 2.0, 0.4);
    assert_eq!(count_clusters(&seam, 1.5), 1);
    let c = cluster_centroids(&seam, 1.5);
    assert_eq!(c.len(), 1);
    assert!(
        c[0].0.min(4.0 - c[0].0) < 0.05 && (c[0].1 - 2.0).abs() < 0.05,
        "{c:?}"
    );
    assert_eq!(count_clusters(&ScalarField::constant(g, 1.0), 1.5), 0);
}

#[test]
fn translation_distance_is_the_shift() {
    let g = grid();
    let a = normalized(bump(g, 1.0, 2.0, 0.5));
    let shift = 8;
    let b = a.rolled(shift, 0);
    let d = density_distance(&a, &b).unwrap();
    let delta = shift as f64 * g.dx();
    assert!((d.w1_x - delta).abs() < 1e-12, "{d:?}");
    assert!(d.w1_y.abs() < 1e-12);
    assert!((d.sliced_w1 - 0.5 * delta).abs() < 1e-12);
    assert!(d.l1 > 0.0 && d.l1 <= 2.0 + 1e-12);
    let same = density_distance(&a, &a).unwrap();
    assert_eq!((same.l1, same.sliced_w1), (0.0, 0.0));
    // the circular distance never exceeds half the period
    let far = a.rolled(40, 0);
    assert!(density_distance(&a, &far).unwrap().w1_x <= 2.0 + 1e-12);
    let heavier = a.map(|v| 2.0 * v);
    assert!(density_distance(&a, &heavier).is_err());
}

#[test]
fn dispersion_relation_and_critical_cost() {
    let g = grid();
    let kernel = discretize(&KernelSpec::cone(0.4), &g).unwrap();
    let p = ParamSet {
        beta: 1.0,
        a0: 0.0,
        ..ParamSet::default()
    };
    let l_bar = 1.0 / 16.0;
    let k = wavevector(&g, 1, 0);
    let hat = kernel.fourier_coefficient(1, 0);
    let k2 = k[0] * k[0];
    assert!(
        (dispersion_rate(k, &p, l_bar, hat) - k2 * (l_bar * hat / p.c_m - p.diffusion())).abs()
            < 1e-15
    );
    let discrete = discrete_dispersion_rate(&kernel, &p, l_bar, 1, 0);
    let lam = -laplacian_eigenvalue(&g, 1, 0);
    assert!((discrete - lam * (l_bar * hat / p.c_m - p.diffusion())).abs() < 1e-15);

    let CriticalScan::Bracket { lower, upper } =
        critical_cm_scan(&p, l_bar, &kernel, (1e-4, 1e4), 1e-12).unwrap()
    else {
        panic!("no bracket");
    };
    let max_hat = (0..64)
        .flat_map(|m| (0..64).map(move |n| (m, n)))
        .filter(|mn| *mn != (0, 0))
        .map(|(m, n)| kernel.fourier_coefficient(m, n))
        .fold(f64::NEG_INFINITY, f64::max);
    let closed = p.sigma * p.sigma / (2.0 * l_bar * max_hat);
    assert!(
        lower <= closed * (1.0 + 1e-9) && upper >= closed * (1.0 - 1e-9),
        "[{lower}, {upper}] vs {closed}"
    );
    let below = ParamSet {
        c_m: 0.9 * lower,
        ..p.clone()
    };
    let above = ParamSet {
        c_m: 1.1 * upper,
        ..p.clone()
    };
    assert!(max_dispersion_rate(&kernel, &below, l_bar) < 0.0);
    assert!(max_dispersion_rate(&kernel, &above, l_bar) > 0.0);

    // wider spillovers and more noise both raise the critical cost
    let scan = |h: f64, sigma: f64| {
        let k = discretize(&KernelSpec::cone(h), &g).unwrap();
        let p = ParamSet { sigma, ..p.clone() };
        match critical_cm_scan(&p, l_bar, &k, (1e-4, 1e4), 1e-10).unwrap() {
            CriticalScan::Bracket { lower, .. } => lower,
            other => panic!("{other:?}"),
        }
    };
    assert!(scan(0.8, 0.05) > scan(0.4, 0.05));
    assert!(scan(0.4, 0.1) > scan(0.4, 0.05));
    assert!(matches!(
        critical_cm_scan(&p, l_bar, &kernel, (10.0, 100.0), 1e-10).unwrap(),
        CriticalScan::OutOfRange { unstable: true }
    ));
}

#[test]
fn representative_drift_points_up_the_utility_gradient() {
    let g = grid();
    let p = ParamSet::default();
    let l = ScalarField::constant(g, 1.0 / 16.0);
    let u = ScalarField::from_fn(g, |x, _| (std::f64::consts::TAU * x / 4.0).sin());
    let d = representative_drift(&l, &u, &p, 2.0).unwrap();
    assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
    let l = bump(g, 1.0, 2.0, 0.5);
    let d = representative_drift(&l, &u, &p, 2.0).unwrap();
    assert!(d[0] > 0.0 && d[1].abs() < 1e-12);
    let d1 = representative_drift(&l, &u, &p, 1.0).unwrap();
    assert!((d[0] - 2.0 * d1[0]).abs() < 1e-15);
}
