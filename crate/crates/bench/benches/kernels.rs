use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use thetagk::cylinder::Collocation;
use thetagk::*;

fn expansion(c: &mut Criterion) {
    let p = ThetaParams::new(2).unwrap();
    c.bench_function("gauss_map", |b| {
        b.iter(|| gauss_map(&p, black_box(0.3141592)).unwrap())
    });
    c.bench_function("expand_digits/20", |b| {
        b.iter(|| expand_digits(&p, black_box(0.3141592), 20).unwrap())
    });
}

fn operators(c: &mut Criterion) {
    let p = ThetaParams::new(2).unwrap();
    let mut g = c.benchmark_group("grid");
    for n in [256usize, 1024, 4096] {
        let f = GridFunction::from_fn(&p, n, |x| x / p.theta).unwrap();
        g.bench_with_input(BenchmarkId::new("gk1d_step", n), &f, |b, f| {
            b.iter(|| gk1d_step(&p, f, None).unwrap())
        });
        if n <= 1024 {
            g.bench_with_input(BenchmarkId::new("apply_u/4000", n), &f, |b, f| {
                b.iter(|| apply_u(&p, f, 4000).unwrap())
            });
        }
    }
    g.finish();
}

fn cylinders(c: &mut Criterion) {
    let p = ThetaParams::new(2).unwrap();
    c.bench_function("collocation/default", |b| {
        b.iter(|| Collocation::with_defaults(&p))
    });
    let colloc = Collocation::with_defaults(&p);
    let rect = Rect::new(&p, 0.5, 0.5).unwrap();
    let mut g = c.benchmark_group("fbar");
    for n in [2usize, 8] {
        g.bench_with_input(BenchmarkId::new("exact", n), &n, |b, &n| {
            b.iter(|| natural_extension::fbar_exact_with(&p, &colloc, n, rect).unwrap())
        });
    }
    g.sample_size(10);
    g.bench_function("monte_carlo/1e5", |b| {
        b.iter(|| fbar_mc(&p, 6, rect, 100_000, 42).unwrap())
    });
    g.finish();
    c.bench_function("joint_dist/n4", |b| {
        b.iter(|| joint_dist(&p, 0.2, 4, 0.4, 0.5).unwrap())
    });
}

criterion_group!(benches, expansion, operators, cylinders);
criterion_main!(benches);
