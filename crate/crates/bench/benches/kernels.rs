use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spatial_econ::grid::Grid2D;
use spatial_econ::kernels::{convolve, discretize, FftConvolver, KernelSpec};
use spatial_econ::meanfield::{step, Model, Numerics, SolverState};
use spatial_econ::microsim::{empirical_density, Population};
use spatial_econ::ParamSet;
use spatial_econ_bench::bumpy_density;
use std::hint::black_box;

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolution");
    for n in [64usize, 128, 256] {
        let grid = Grid2D::new(4.0, 4.0, n, n).unwrap();
        let f = bumpy_density(grid);
        let kernel = discretize(&KernelSpec::cone(0.4), &grid).unwrap();
        group.bench_with_input(BenchmarkId::new("direct", n), &n, |b, _| {
            b.iter(|| convolve(black_box(&f), &kernel).unwrap())
        });
        let fft = FftConvolver::new(&kernel);
        group.bench_with_input(BenchmarkId::new("fft", n), &n, |b, _| {
            b.iter(|| fft.convolve(black_box(&f)).unwrap())
        });
    }
    group.finish();
}

fn pde_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("pde_step");
    for n in [64usize, 128] {
        let grid = Grid2D::new(4.0, 4.0, n, n).unwrap();
        let model = Model::uniform(grid, ParamSet::default(), Numerics::default()).unwrap();
        let l0 = bumpy_density(grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched(
                || SolverState::new(l0.clone()).unwrap(),
                |mut st| step(&mut st, &model, f64::INFINITY).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn agent_density(c: &mut Criterion) {
    let grid = Grid2D::new(4.0, 4.0, 64, 64).unwrap();
    let pop = Population::sample_from_density(&bumpy_density(grid), 32_000, 1).unwrap();
    c.bench_function("empirical_density_32k", |b| {
        b.iter(|| empirical_density(black_box(&pop), &grid, 0.2).unwrap())
    });
}

criterion_group!(benches, convolution, pde_step, agent_density);
criterion_main!(benches);
