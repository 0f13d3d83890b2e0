use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use impact_harvest::model::cosine_forcing;
use impact_harvest::par;
use impact_harvest::presets::Scenario;
use impact_harvest::simulator::InitialState;
use impact_harvest::solver::{seeds_2to1, solve_2to1_lenient, SolveOptions};
use impact_harvest::sweep::{grid, scan_step, ScanOptions};

fn seed_grid(c: &mut Criterion) {
    let params = Scenario::standard(PI / 6.0).at(0.18);
    let f = cosine_forcing(params.phi);
    let seeds = seeds_2to1(&params);
    let opts = SolveOptions::default();
    let solve = |s: &_| solve_2to1_lenient(&params, &f, *s, &opts).ok();

    let mut group = c.benchmark_group("seed_grid_2to1");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&seeds, solve)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_sequential(&seeds, solve)))
    });
    group.finish();
}

fn cold_pattern_sweep(c: &mut Criterion) {
    let sc = Scenario::standard(PI / 6.0);
    let ds = grid(0.15, 0.25, 0.01).unwrap();
    let mut opts = ScanOptions::default();
    opts.simulation.t_transient = 100.0;
    opts.simulation.t_window = 64.0;
    let init = InitialState::bottom_impact(0.0, 0.5);
    let f = sc.forcing();
    let step = |d: &f64| scan_step(&sc.params, &f, *d, init, &opts).ok();

    let mut group = c.benchmark_group("cold_pattern_sweep");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| black_box(par::map(&ds, step))));
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_sequential(&ds, step)))
    });
    group.finish();
}

criterion_group!(benches, seed_grid, cold_pattern_sweep);
criterion_main!(benches);
