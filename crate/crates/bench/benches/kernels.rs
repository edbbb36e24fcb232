use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use leveldot::ensembles::{SeedPath, SymmetryClass};
use leveldot::spectral::eigen::arrowhead_eigen;
use leveldot::spectral::{decompose_eigenbasis, survival, TimeGrid};
use leveldot::theory::{p_full, p_res_closed, P_FULL_TOLERANCE};
use leveldot_bench::{arrowhead_input, desk_spec, overlaps, BENCH_SEED};

fn survival_kernel(c: &mut Criterion) {
    let spec = desk_spec(SymmetryClass::Unitary);
    let o = overlaps(&spec);
    let times = TimeGrid::default().times(&spec);
    c.bench_function("survival/400x200", |b| b.iter(|| survival(black_box(&o), black_box(&times))));
}

fn realization(c: &mut Criterion) {
    let mut group = c.benchmark_group("realization");
    for class in SymmetryClass::ALL {
        let spec = desk_spec(class);
        let mut index = 0;
        group.bench_with_input(BenchmarkId::from_parameter(class), &spec, |b, spec| {
            b.iter(|| {
                index += 1;
                decompose_eigenbasis(spec, SeedPath::new(BENCH_SEED, index)).unwrap()
            })
        });
    }
    group.finish();
}

fn arrowhead(c: &mut Criterion) {
    let spec = desk_spec(SymmetryClass::Unitary);
    let (poles, zeta) = arrowhead_input(&spec);
    c.bench_function("arrowhead/399", |b| {
        b.iter(|| arrowhead_eigen(0.0, black_box(&poles), black_box(&zeta), 4.0 * f64::EPSILON).unwrap())
    });
}

fn theory(c: &mut Criterion) {
    let mut group = c.benchmark_group("p_full");
    for gamma in [0.022, 0.46, 46.0] {
        group.bench_with_input(BenchmarkId::from_parameter(gamma), &gamma, |b, &g| {
            b.iter(|| p_full(black_box(1.0), g, P_FULL_TOLERANCE).unwrap())
        });
    }
    group.finish();
    c.bench_function("p_res_closed", |b| b.iter(|| p_res_closed(black_box(3.7)).unwrap()));
}

criterion_group!(benches, survival_kernel, realization, arrowhead, theory);
criterion_main!(benches);
