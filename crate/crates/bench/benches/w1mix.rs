use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use w1mix::experiment::prefix_w1_on_grid;
use w1mix::functionals::compute_v;
use w1mix::gaussian::l1_norm_distribution;
use w1mix::kernel::{estimate_kernel_mc, exact_kernel_iid, Grid};
use w1mix::process::{make_finite_markov, make_iid, ModelDescriptor};
use w1mix::wasserstein::{w1_empirical_vs_cdf, w1_empirical_vs_empirical};
use w1mix::{DistributionSpec, QuadratureConfig};

fn wasserstein(c: &mut Criterion) {
    let mut group = c.benchmark_group("w1");
    let q = QuadratureConfig::default();
    let normal = DistributionSpec::standard_normal();
    let model = make_iid(normal.clone()).unwrap();
    for n in [1_000usize, 100_000] {
        let x = model.sample_batch(1, 0, n).unwrap();
        let y = model.sample_batch(1, 1, n).unwrap();
        group.bench_with_input(BenchmarkId::new("vs_normal_cdf", n), &x, |b, x| {
            b.iter(|| w1_empirical_vs_cdf(black_box(x), &normal, &q).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("two_sample", n), &(x, y), |b, (x, y)| {
            b.iter(|| w1_empirical_vs_empirical(black_box(x), black_box(y)))
        });
    }
    let path = model.path(2, 0, 100_000);
    let ks = w1mix::experiment::geometric_k_grid(100_000, 1.2, 1);
    group.bench_function("prefix_trajectory_1e5", |b| {
        b.iter(|| prefix_w1_on_grid(black_box(&path), &ks, &normal).unwrap())
    });
    group.finish();
}

fn functionals(c: &mut Criterion) {
    let q = QuadratureConfig::default();
    let mut group = c.benchmark_group("functionals");
    for name in ["iid-normal", "sticky-markov", "ar1"] {
        let model = ModelDescriptor::builtin(name).unwrap().build().unwrap();
        group.bench_function(BenchmarkId::new("compute_v", name), |b| {
            b.iter(|| compute_v(black_box(model.mixing()), &q).unwrap())
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    group.sample_size(10);
    let chain = make_finite_markov(&[vec![0.9, 0.1], vec![0.1, 0.9]], &[0.0, 1.0]).unwrap();
    let grid = Grid::for_marginal(chain.marginal(), 128).unwrap();
    group.bench_function("bartlett_1e5_b50_g128", |b| {
        b.iter(|| estimate_kernel_mc(&chain, &grid, 100_000, 50, 3).unwrap())
    });
    let u = DistributionSpec::standard_uniform();
    let g = Grid::for_marginal(&u, 256).unwrap();
    let k = exact_kernel_iid(&u, &g);
    group.bench_function("l1_norm_draws_1e4_g256", |b| {
        b.iter(|| l1_norm_distribution(&k, 10_000, 4).unwrap())
    });
    group.finish();
}

criterion_group!(benches, wasserstein, functionals, kernels);
criterion_main!(benches);
