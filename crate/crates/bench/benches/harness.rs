use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hkflow_core::entropy::production;
use hkflow_core::harness::{algterm_scan, eep_sweep};
use hkflow_core::mesh::{build_density, build_grid, DensityBuilder, DensityKind, DomainKind};
use hkflow_core::profiles::{GSpec, PsiSpec};

fn bench_production(c: &mut Criterion) {
    let grid = build_grid(DomainKind::Torus2d, 256).unwrap();
    let steady = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap();
    let rho = build_density(
        &grid,
        &DensityBuilder::normalized(DensityKind::TrigRandom { modes: 4, amplitude: 0.9, seed: Some(1) }),
        None,
    )
    .unwrap();
    let psi = PsiSpec::beckner(1.0).unwrap();
    c.bench_function("production torus2d n=256", |b| {
        b.iter(|| production(&grid, black_box(&rho), &steady, &GSpec::log(), &psi).unwrap())
    });
}

fn bench_sweep(c: &mut Criterion) {
    let grid = build_grid(DomainKind::IntervalNoflux, 512).unwrap();
    let steady = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap();
    let family: Vec<_> = (0..20)
        .map(|seed| DensityBuilder::normalized(DensityKind::TrigRandom { modes: 4, amplitude: 0.9, seed: Some(seed) }))
        .collect();
    let psi = PsiSpec::beckner(3.0).unwrap();
    c.bench_function("eep_sweep 20 members n=512", |b| {
        b.iter(|| eep_sweep(black_box(&family), &GSpec::log(), &psi, &grid, &steady, 0.5, 5.0).unwrap())
    });
}

fn bench_algterm(c: &mut Criterion) {
    let psi = PsiSpec::beckner(1.0).unwrap();
    c.bench_function("algterm_scan 2000 samples", |b| {
        b.iter(|| algterm_scan(&GSpec::arctangential(), &psi, black_box(0.1), 1e6, 2000).unwrap())
    });
}

criterion_group!(benches, bench_production, bench_sweep, bench_algterm);
criterion_main!(benches);
