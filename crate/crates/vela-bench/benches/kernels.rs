//! Benchmarks for the hot kernels: spectral transforms, the nonlinear
//! right-hand side, a full integrating-factor RK4 step, and pointwise
//! constitutive tensor evaluation.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use vela::dynamics::{generate_initial_data, nonlinear_rhs, step, SolverConfig};
use vela::fields::random_band_limited_scalar;
use vela::{rng, Grid, Mat3, MaterialModel, MaterialParams};

const N: usize = 32;

fn grid() -> Grid {
    Grid::new(N, 2.0 * std::f64::consts::PI).unwrap()
}

fn model() -> MaterialModel {
    MaterialModel::builtin(MaterialParams::new(1.6, 0.01).unwrap()).unwrap()
}

fn bench_fft_roundtrip(c: &mut Criterion) {
    let g = grid();
    let mut r = rng::stream(11, "bench-fft");
    let f = random_band_limited_scalar(&g, &mut r, 4, 6);
    c.bench_function("scalar_gradient_32", |b| {
        b.iter(|| std::hint::black_box(f.gradient()));
    });
    c.bench_function("scalar_laplacian_32", |b| {
        b.iter(|| std::hint::black_box(f.laplacian()));
    });
}

fn bench_nonlinear_rhs(c: &mut Criterion) {
    let g = grid();
    let m = model();
    let state = generate_initial_data(&g, &m, 11, 0.01).unwrap();
    c.bench_function("nonlinear_rhs_32", |b| {
        b.iter(|| std::hint::black_box(nonlinear_rhs(&state, &m, true).unwrap()));
    });
}

fn bench_time_step(c: &mut Criterion) {
    let g = grid();
    let cfg = SolverConfig::new(model(), &g);
    let state = generate_initial_data(&g, &cfg.model, 11, cfg.epsilon).unwrap();
    c.bench_function("rk4_step_32", |b| {
        b.iter_batched(
            || state.clone(),
            |s| std::hint::black_box(step(&s, &cfg).unwrap()),
            BatchSize::LargeInput,
        );
    });
}

fn bench_ahat(c: &mut Criterion) {
    let m = model();
    let h = Mat3::identity() + Mat3::new(0.01, 0.002, 0.0, -0.003, 0.99, 0.001, 0.0, 0.004, 1.01);
    c.bench_function("ahat_pointwise", |b| {
        b.iter(|| std::hint::black_box(m.ahat(&h).unwrap()));
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_fft_roundtrip, bench_nonlinear_rhs, bench_time_step, bench_ahat
}
criterion_main!(benches);
