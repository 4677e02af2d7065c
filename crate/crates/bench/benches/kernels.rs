use attractlab::{alpha_proxy, hausdorff_semidist, CoverMethod, MetricSpec, Semigroup};
use attractlab_bench::{ball, forced_wave};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("wave_rhs");
    for n in [8, 32, 64] {
        let sys = forced_wave(n);
        let x = ball(sys.metric(), 1, 1).points()[0].clone();
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| sys.derivative(black_box(x), 0.0).unwrap())
        });
    }
    group.finish();
}

fn evolve(c: &mut Criterion) {
    let sys = forced_wave(32);
    let x = ball(sys.metric(), 1, 2).points()[0].clone();
    c.bench_function("wave_advance_n32_t1", |b| b.iter(|| sys.advance(black_box(&x), 1.0).unwrap()));
}

fn alpha(c: &mut Criterion) {
    let spec = MetricSpec::dirichlet_1d(16);
    let large = ball(&spec, 400, 3);
    c.bench_function("alpha_greedy_400pts_m8", |b| {
        b.iter(|| alpha_proxy(black_box(&large), 8, &spec, CoverMethod::Greedy).unwrap())
    });
    let small = ball(&spec, 10, 4);
    c.bench_function("alpha_exact_10pts_m3", |b| {
        b.iter(|| alpha_proxy(black_box(&small), 3, &spec, CoverMethod::Exact).unwrap())
    });
    let other = ball(&spec, 400, 5);
    c.bench_function("semidist_400x400", |b| {
        b.iter(|| hausdorff_semidist(black_box(&large), &other, &spec).unwrap())
    });
}

criterion_group!(benches, rhs, evolve, alpha);
criterion_main!(benches);
