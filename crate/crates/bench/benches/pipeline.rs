use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use escape_lab_bench::tent_chain;
use escape_lab_core::{
    build_report, leading_eigenvalue, refine, simulate_survival, transition_matrix, InitialLaw,
    DEFAULT_SPECTRAL_TOL,
};

fn bench_refine(c: &mut Criterion) {
    let map = tent_chain(0.3, 0).0;
    let mut group = c.benchmark_group("refine");
    for levels in [3u32, 5, 7] {
        group.bench_with_input(BenchmarkId::from_parameter(levels), &levels, |b, &levels| {
            b.iter(|| refine(&map, map.base_partition(), black_box(levels)).unwrap())
        });
    }
    group.finish();
}

fn bench_transition(c: &mut Criterion) {
    let (map, partition, _, _) = tent_chain(0.3, 7);
    c.bench_function("transition/k=256", |b| {
        b.iter(|| transition_matrix(&map, black_box(&partition)).unwrap())
    });
}

fn bench_eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("leading_eigenvalue");
    for levels in [4u32, 6, 8] {
        let matrix = tent_chain(0.3, levels).2;
        let punched = matrix.punch_hole(matrix.order() / 2).unwrap();
        group.bench_with_input(
            BenchmarkId::new("k", matrix.order()),
            &punched,
            |b, punched| {
                b.iter(|| leading_eigenvalue(black_box(punched), DEFAULT_SPECTRAL_TOL).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_report(c: &mut Criterion) {
    let (_, _, matrix, measure) = tent_chain(0.3, 4);
    c.bench_function("build_report/k=32", |b| {
        b.iter(|| build_report(black_box(&matrix), &measure, DEFAULT_SPECTRAL_TOL).unwrap())
    });
}

fn bench_simulation(c: &mut Criterion) {
    let (map, partition, _, _) = tent_chain(0.3, 0);
    let hole = partition.cell(0).unwrap();
    c.bench_function("simulate/100k", |b| {
        b.iter(|| {
            simulate_survival(&map, &hole, 20, 100_000, black_box(7), InitialLaw::default())
                .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_refine,
    bench_transition,
    bench_eigensolve,
    bench_report,
    bench_simulation
);
criterion_main!(benches);
