use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smoothdist::{build, shapes, BuildConfig};

fn bench_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    let square = shapes::unit_square();
    for eps in [0.2, 0.1] {
        group.bench_with_input(BenchmarkId::new("square", eps), &eps, |b, &eps| {
            b.iter(|| build(&square, &BuildConfig::new(eps, 0)).unwrap())
        });
    }
    let cube = shapes::random_polytope(3, 8, 1);
    group.bench_function(BenchmarkId::new("random3d_8", 0.2), |b| {
        b.iter(|| build(&cube, &BuildConfig::new(0.2, 0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_build);
criterion_main!(benches);
