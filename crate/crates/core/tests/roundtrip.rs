use hkflow_core::flow::{simulate, FlowConfig, SeriesTable};
use hkflow_core::harness::{
    read_sequence_csv, write_sequence_csv, InequalityName, InequalityParams, InequalityReport, SequenceRow,
};
use hkflow_core::mesh::{build_density, build_grid, integrate, DensityBuilder, DensityKind, DomainKind, Field};
use hkflow_core::profiles::{GSpec, ProfileJson, PsiSpec};
use proptest::prelude::*;

fn domain() -> impl Strategy<Value = DomainKind> {
    prop_oneof![Just(DomainKind::IntervalNoflux), Just(DomainKind::Torus1d), Just(DomainKind::Torus2d)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn field_csv_round_trips_exactly(kind in domain(), n in 4usize..24, seed in any::<u64>()) {
        let grid = build_grid(kind, n).unwrap();
        let f = build_density(
            &grid,
            &DensityBuilder::new(DensityKind::TrigRandom { modes: 3, amplitude: 0.7, seed: Some(seed) }),
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = Field::read_csv(grid, buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn sequence_csv_round_trips_with_infinities(rows in prop::collection::vec((1.0f64..1e3, 0.0f64..10.0, 0.0f64..10.0), 1..12)) {
        let mut rows: Vec<SequenceRow> = rows
            .into_iter()
            .map(|(param, entropy, w)| SequenceRow { param, entropy, production_w: w, production_h: w * entropy })
            .collect();
        rows[0].production_h = f64::INFINITY;
        let mut buf = Vec::new();
        write_sequence_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_sequence_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn trig_random_is_seed_deterministic(seed in any::<u64>()) {
        let grid = build_grid(DomainKind::Torus1d, 64).unwrap();
        let b = DensityBuilder::normalized(DensityKind::TrigRandom { modes: 4, amplitude: 0.9, seed: Some(seed) });
        let (a, c) = (build_density(&grid, &b, None).unwrap(), build_density(&grid, &b, None).unwrap());
        prop_assert_eq!(a.values(), c.values());
        prop_assert!((integrate(&grid, &a) - 1.0).abs() < 1e-12);
        prop_assert!(a.min() > 0.0);
    }
}

#[test]
fn profile_json_round_trips() {
    for g in [GSpec::log(), GSpec::arctangential(), GSpec::power(0.5).unwrap()] {
        let text = serde_json::to_string(&ProfileJson::from(g)).unwrap();
        let back: ProfileJson = serde_json::from_str(&text).unwrap();
        assert_eq!(GSpec::try_from(back).unwrap(), g);
        let psi = PsiSpec::driving(g);
        let back: ProfileJson = serde_json::from_str(&serde_json::to_string(&ProfileJson::from(psi)).unwrap()).unwrap();
        assert_eq!(PsiSpec::try_from(back).unwrap(), psi);
    }
    let bad: ProfileJson = serde_json::from_str(r#"{"kind": "power", "alpha": 1}"#).unwrap();
    assert!(GSpec::try_from(bad).is_err());
}

#[test]
fn report_json_keeps_non_finite_values() {
    let rep = InequalityReport {
        name: InequalityName::Eep,
        lhs: 0.5,
        rhs: 0.0,
        ratio: f64::INFINITY,
        params: InequalityParams::default(),
    };
    let text = serde_json::to_string(&rep).unwrap();
    assert!(text.contains("\"inf\""));
    assert_eq!(serde_json::from_str::<InequalityReport>(&text).unwrap(), rep);
}

#[test]
fn series_csv_matches_trajectory() {
    let grid = build_grid(DomainKind::IntervalNoflux, 16).unwrap();
    let steady = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.4, k: 1 }), None).unwrap();
    let initial = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: -0.3, k: 2 }), None).unwrap();
    let mut cfg = FlowConfig::new(grid, GSpec::power(2.0).unwrap(), steady, initial, 0.05);
    cfg.psi_monitors = vec![PsiSpec::beckner(1.5).unwrap()];
    cfg.snapshot_every = 7;
    let traj = simulate(&cfg).unwrap();
    let mut buf = Vec::new();
    traj.write_series_csv(&mut buf).unwrap();
    let table = SeriesTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(table.column("t").unwrap(), traj.times);
    assert_eq!(table.column("mass").unwrap(), traj.mass_series);
    assert_eq!(table.column("entropy_0").unwrap(), traj.entropy_series[0]);
    assert!(table.column("entropy_1").is_none());
}
