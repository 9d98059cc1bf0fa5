use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tvlab_core::excess::excess_e;
use tvlab_core::fixtures::{complex_pair, Fixture, FixtureId};
use tvlab_core::geometry::Region;
use tvlab_core::par;
use tvlab_core::stationarity::{bump_family, first_variation_defect};
use tvlab_core::varifold::sample_graph;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn bench_pipeline(c: &mut Criterion) {
    let fixture = Fixture::new(FixtureId::HoloPairCurved { a: [1.0, 0.0], b: [0.3, 0.1] }).unwrap();
    let grid = fixture.grid(1.0 / 128.0, 1.2).unwrap();
    let v = sample_graph(&grid).unwrap();
    let cone = complex_pair([1.0, 0.0]).unwrap();
    let region = Region::unit_ball(4);
    let centers: Vec<Vec<f64>> = vec![vec![0.0; 4], vec![0.3, 0.0, 0.0, 0.0], vec![0.0, -0.3, 0.0, 0.0]];
    let fields = bump_family(&centers, 0.5);

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for (name, seq) in modes() {
        par::set_sequential(seq);
        group.bench_with_input(BenchmarkId::new("sample_graph", name), &grid, |b, g| {
            b.iter(|| sample_graph(black_box(g)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("excess_e", name), &v, |b, v| {
            b.iter(|| excess_e(black_box(v), &cone, &region).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("first_variation", name), &v, |b, v| {
            b.iter(|| first_variation_defect(black_box(v), &fields).unwrap())
        });
    }
    par::set_sequential(false);
    group.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
