use criterion::{criterion_group, criterion_main, Criterion};
use rootbarrier::*;
use std::hint::black_box;

fn gaussian_setup() -> (MarginalFamily, SpaceTimeGrid, Partition) {
    let family = MarginalFamily::gaussian_shift(1.0).unwrap();
    let grid = make_grid(&family, 1.25, 0.05, grid::DEFAULT_NODE_BUDGET).unwrap();
    let partition = make_partition(4, PartitionStyle::Uniform).unwrap();
    (family, grid, partition)
}

fn solve(c: &mut Criterion) {
    let (family, grid, partition) = gaussian_setup();
    let opts = SolveOptions { record_every: 50, barrier_threshold: Tolerances::default().barrier(&grid) };
    c.bench_function("solve_layers gaussian dx=0.05 n=4", |b| {
        b.iter(|| solve_layers(black_box(&family), &partition, &grid, &opts).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let (family, grid, partition) = gaussian_setup();
    let opts = SolveOptions { record_every: 50, barrier_threshold: Tolerances::default().barrier(&grid) };
    let barriers = extract(&solve_layers(&family, &partition, &grid, &opts).unwrap()).unwrap();
    let sim = SimOptions { paths: 10_000, h_sim: grid.dt, seed: 1, probe_times: vec![] };
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("simulate_root gaussian 1e4 paths", |b| {
        b.iter(|| simulate_root(black_box(&family), &barriers, &sim).unwrap())
    });
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let family = MarginalFamily::three_point(0.1, 0.4).unwrap();
    let grid = make_grid(&family, 1.25, 0.5, grid::DEFAULT_NODE_BUDGET).unwrap();
    let partition = make_partition(2, PartitionStyle::Uniform).unwrap();
    let mut group = c.benchmark_group("tree_oracle");
    group.sample_size(10);
    group.bench_function("three-point n=2 depth=4", |b| {
        b.iter(|| tree_oracle(black_box(&family), &partition, &grid, 4, 2).unwrap())
    });
    group.finish();
}

criterion_group!(benches, solve, simulate, oracle);
criterion_main!(benches);
