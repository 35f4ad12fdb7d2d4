use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use relpend::autonomous::running_time;
use relpend::integrate::IntegratorConfig;
use relpend::model::CylinderState;
use relpend::poincare::{poincare_map, poincare_map_with_tangent, strip_bound};
use relpend::solver::{find_fixed_points, reduced_point, SolverConfig};
use relpend_bench::benchmark_params;

fn bench_poincare_map(c: &mut Criterion) {
    let params = benchmark_params();
    let cfg = IntegratorConfig::default();
    let s0 = CylinderState::new(0.3, 0.2);
    c.bench_function("poincare_map", |b| {
        b.iter(|| poincare_map(&params, black_box(&s0), &cfg).unwrap())
    });
    c.bench_function("poincare_map_with_tangent", |b| {
        b.iter(|| poincare_map_with_tangent(&params, black_box(&s0), &cfg).unwrap())
    });
}

fn bench_reduced_point(c: &mut Criterion) {
    let params = benchmark_params();
    let cfg = IntegratorConfig::default();
    let bound = strip_bound(&params).unwrap();
    c.bench_function("reduced_point", |b| {
        b.iter(|| reduced_point(&params, black_box(1.0), &bound, &cfg).unwrap())
    });
}

fn bench_find_fixed_points(c: &mut Criterion) {
    let params = benchmark_params();
    let icfg = IntegratorConfig::default();
    let scfg = SolverConfig {
        grid_size: 90,
        ..Default::default()
    };
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("find_fixed_points_grid90", |b| {
        b.iter(|| find_fixed_points(&params, &scfg, &icfg).unwrap())
    });
    group.finish();
}

fn bench_running_time(c: &mut Criterion) {
    c.bench_function("running_time_quadrature", |b| {
        b.iter(|| running_time(black_box(0.1), black_box(1.5), 1).unwrap())
    });
}

criterion_group!(
    benches,
    bench_poincare_map,
    bench_reduced_point,
    bench_find_fixed_points,
    bench_running_time
);

criterion_main!(benches);
