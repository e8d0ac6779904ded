use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use stakecosi_bench::stakeholders;
use stakecosi_core::election::{build_memory_map, leader_schedule};
use stakecosi_core::vectors::fixture_seed;

fn election(c: &mut Criterion) {
    let cs = fixture_seed();
    let mut group = c.benchmark_group("memory_map_and_schedule");
    for total in [100u64, 1_000, 10_000] {
        let list = stakeholders(10, total / 10);
        group.bench_with_input(BenchmarkId::from_parameter(total), &list, |b, list| {
            b.iter(|| {
                let map = build_memory_map(black_box(list), &cs).unwrap();
                leader_schedule(&map, &cs, 64)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, election);
criterion_main!(benches);
