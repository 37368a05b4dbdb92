use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfdelay::backward::{counterexample_clark_ocone, BackwardConfig};
use mfdelay::control::ControlProcess;
use mfdelay::forward::{simulate_with_noise, ForwardConfig};
use mfdelay::models::AffineScalar;
use mfdelay::par;
use mfdelay::rng::sample_brownian;
use mfdelay::{InitialSegment, RandomSource, TimeGrid};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn forward(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 0.0, 0.1, 1e-2).unwrap();
    let n = 20_000;
    let model = AffineScalar {
        a: -0.5,
        a_delay: 0.3,
        a_mean: 0.4,
        s: 0.5,
        ..Default::default()
    };
    let xi = InitialSegment::constant(&grid, n, &[1.0]);
    let u = ControlProcess::none(&grid, n);
    let noise = sample_brownian(&grid, n, 1, &RandomSource::new(1));
    let cfg = ForwardConfig::new(n);
    let mut group = c.benchmark_group("forward_euler");
    group.sample_size(10);
    for (name, on) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &on, |b, &on| {
            par::set_parallel(on);
            b.iter(|| simulate_with_noise(&model, &xi, &u, &grid, &cfg, &noise).unwrap());
        });
    }
    par::set_parallel(true);
    group.finish();
}

fn backward(c: &mut Criterion) {
    let cfg = BackwardConfig::default();
    let mut group = c.benchmark_group("backward_picard");
    group.sample_size(10);
    for (name, on) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &on, |b, &on| {
            par::set_parallel(on);
            b.iter(|| {
                counterexample_clark_ocone(20_000, 1e-2, &cfg, &RandomSource::new(3)).unwrap()
            });
        });
    }
    par::set_parallel(true);
    group.finish();
}

criterion_group!(benches, forward, backward);
criterion_main!(benches);
