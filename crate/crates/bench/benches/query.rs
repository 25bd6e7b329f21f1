use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smoothdist::sampling::sample_polytope;
use smoothdist::{blend, build, shapes, BuildConfig};

fn bench_query(c: &mut Criterion) {
    let mut group = c.benchmark_group("query");
    for eps in [0.2, 0.1, 0.05] {
        let s = build(&shapes::unit_square(), &BuildConfig::new(eps, 0)).unwrap();
        let points = sample_polytope(&s.polytope, 256, 0, 1);
        group.bench_with_input(BenchmarkId::new("blend", eps), &eps, |b, _| {
            let mut k = 0;
            b.iter(|| {
                k = (k + 1) % points.len();
                blend::eval(&s, &points[k]).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("witness", eps), &eps, |b, _| {
            let mut k = 0;
            b.iter(|| {
                k = (k + 1) % points.len();
                s.witness_value(&points[k]).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("gradient", eps), &eps, |b, _| {
            let mut k = 0;
            b.iter(|| {
                k = (k + 1) % points.len();
                blend::eval_gradient(&s, &points[k]).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_query);
criterion_main!(benches);
