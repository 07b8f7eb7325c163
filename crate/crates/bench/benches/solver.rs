use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use twophase::ops;
use twophase_bench::fixture;

fn bench_ch(c: &mut Criterion) {
    let mut g = c.benchmark_group("ch_solve");
    g.sample_size(10);
    for n in [32, 64] {
        let f = fixture(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| b.iter(|| f.solve_ch(black_box(2e-3))));
    }
    g.finish();
}

fn bench_ns(c: &mut Criterion) {
    let mut g = c.benchmark_group("saddle_solve");
    g.sample_size(10);
    for n in [32, 64] {
        let f = fixture(n);
        let ch = f.solve_ch(2e-3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| b.iter(|| f.solve_ns(black_box(2e-3), &ch)));
    }
    g.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("full_step");
    g.sample_size(10);
    let f = fixture(32);
    g.bench_function("32", |b| b.iter(|| f.stepper.step(black_box(&f.state), 2e-3).unwrap()));
    g.finish();
}

fn bench_ops(c: &mut Criterion) {
    let f = fixture(128);
    let v = &f.state.v;
    c.bench_function("skew_convection/128", |b| b.iter(|| ops::skew_convection(black_box(v), black_box(v)).unwrap()));
    let eta = f.state.phi.map(|_| 1.0);
    c.bench_function("viscous_apply/128", |b| b.iter(|| ops::viscous_apply(black_box(v), &eta).unwrap()));
}

criterion_group!(benches, bench_ch, bench_ns, bench_step, bench_ops);
criterion_main!(benches);
