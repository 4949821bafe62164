use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hkflow_core::flow::{rhs, simulate, FlowConfig, FlowMode};
use hkflow_core::mesh::{build_density, build_grid, DensityBuilder, DensityKind, DomainKind, Field};
use hkflow_core::profiles::{GSpec, PsiSpec};

fn setup(kind: DomainKind, n: usize) -> (hkflow_core::mesh::Grid, Field, Field) {
    let grid = build_grid(kind, n).unwrap();
    let steady = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap();
    let bump = Field::from_fn(grid, |x, _| 1.0 + 0.5 * (2.0 * PI * x).cos());
    let rho = steady.zip_with(&bump, |s, b| s * b).unwrap();
    (grid, steady, rho)
}

fn bench_rhs(c: &mut Criterion) {
    for (kind, n) in [(DomainKind::IntervalNoflux, 1024), (DomainKind::Torus2d, 128)] {
        let (grid, steady, rho) = setup(kind, n);
        c.bench_function(&format!("rhs {kind:?} n={n}"), |b| {
            b.iter(|| rhs(&grid, black_box(&rho), &steady, &GSpec::log(), FlowMode::Full).unwrap())
        });
    }
}

fn bench_simulate(c: &mut Criterion) {
    let (grid, steady, rho) = setup(DomainKind::IntervalNoflux, 64);
    let mut cfg = FlowConfig::new(grid, GSpec::log(), steady, rho, 0.1);
    cfg.psi_monitors = vec![PsiSpec::beckner(1.0).unwrap(), PsiSpec::beckner(2.0).unwrap()];
    cfg.snapshot_every = 4;
    c.bench_function("simulate n=64 t=0.1", |b| b.iter(|| simulate(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, bench_rhs, bench_simulate);
criterion_main!(benches);
