use cellgamma::cellopt::{compute_cell_energy, CellOptions, InitStrategy};
use cellgamma::gamma::{
    build_recovery_field, evaluate_full_energy, run_gamma_sweep, sweep_ratio, DomainSpec,
    GammaOptions, PaddingOptions, RecoveryProfile,
};
use cellgamma::grid::{build_frame, CellGrid, StateField};
use cellgamma::model::{catalog_lookup, JumpData, ModelSpecs, ParamMap, ParamValue};
use cellgamma::poisson::BcVariant;
use cellgamma::Error;

fn model(name: &str, params: &[(&str, f64)]) -> ModelSpecs {
    let map: ParamMap = params
        .iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Number(*v)))
        .collect();
    catalog_lookup(name, &map).unwrap()
}

fn dw_jump() -> JumpData {
    JumpData::new(vec![1.0], vec![-1.0], vec![1.0]).unwrap()
}

fn recovery(jump: &JumpData, specs: &ModelSpecs, n0: usize, lateral: &[usize]) -> RecoveryProfile {
    let grid = CellGrid::new(build_frame(&jump.nu).unwrap(), n0, lateral).unwrap();
    let sol = compute_cell_energy(
        jump,
        specs,
        &grid,
        BcVariant::NeumannNormalPeriodicLateral,
        &CellOptions::default(),
    )
    .unwrap();
    RecoveryProfile::new(&grid, &sol, jump, specs.constraint).unwrap()
}

fn opts() -> GammaOptions {
    GammaOptions {
        cell_normal: 256,
        ..Default::default()
    }
}

#[test]
fn recovery_field_is_monotone_with_exact_end_states() {
    let specs = model("double_well", &[]);
    let rec = recovery(&dw_jump(), &specs, 256, &[]);
    let domain = DomainSpec::unit_cube(vec![2049]);
    let eps = 1.0 / 16.0;
    let field = build_recovery_field(&domain, &rec, eps).unwrap();
    let grid = domain.grid().unwrap();
    let half = eps / (2.0 * rec.l_star);
    let mut inside = 0;
    for node in 0..grid.n_nodes() {
        let d = domain.position(&grid, node)[0] - 0.5;
        let v = field.node(node)[0];
        if d >= half {
            assert_eq!(v, 1.0);
        } else if d <= -half {
            assert_eq!(v, -1.0);
        } else {
            inside += 1;
        }
    }
    assert!(inside > 10);
    assert!(field.values.windows(2).all(|w| w[1] >= w[0]));
}

fn max_slope(field: &StateField, h: f64) -> f64 {
    field
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0, f64::max)
}

#[test]
fn halving_epsilon_doubles_the_gradient() {
    let specs = model("double_well", &[]);
    let rec = recovery(&dw_jump(), &specs, 256, &[]);
    let domain = DomainSpec::unit_cube(vec![8193]);
    let h = domain.grid().unwrap().spacing()[0];
    let coarse = max_slope(&build_recovery_field(&domain, &rec, 1.0 / 16.0).unwrap(), h);
    let fine = max_slope(&build_recovery_field(&domain, &rec, 1.0 / 32.0).unwrap(), h);
    assert!((fine / coarse - 2.0).abs() <= 0.1, "{coarse} {fine}");
}

#[test]
fn oversized_epsilon_is_rejected() {
    let specs = model("double_well", &[]);
    let rec = recovery(&dw_jump(), &specs, 128, &[]);
    let domain = DomainSpec::unit_cube(vec![257]);
    let eps = 1.01 * rec.l_star;
    assert!(matches!(
        build_recovery_field(&domain, &rec, eps),
        Err(Error::EpsilonTooLarge { .. })
    ));

    let sweep = run_gamma_sweep(&domain, &dw_jump(), &specs, &[eps, 0.05], &opts()).unwrap();
    assert!(sweep.rows[0].error.as_deref().unwrap().contains("epsilon"));
    assert!(sweep.rows[0].full_energy.is_nan());
    assert!(sweep.rows[1].error.is_none());
}

#[test]
fn flat_fields_carry_no_energy() {
    let specs = model("double_well", &[]);
    let domain = DomainSpec::unit_cube(vec![64, 32]);
    let jump = JumpData::new(vec![1.0], vec![-1.0], vec![1.0, 0.0]).unwrap();
    let specs2 = model("double_well", &[("space_dim", 2.0)]);
    let grid = domain.grid().unwrap();
    let field = StateField::from_fn(&grid, 1, |_, v| v[0] = 1.0);
    let e = evaluate_full_energy(
        &field,
        0.1,
        &specs2,
        &jump,
        &domain,
        &PaddingOptions::default(),
    )
    .unwrap();
    assert!(e.total.abs() <= 1e-12, "{e:?}");

    let none = JumpData::no_jump(vec![-1.0], vec![1.0]).unwrap();
    let domain = DomainSpec::unit_cube(vec![257]);
    let sweep = run_gamma_sweep(&domain, &none, &specs, &[0.1, 0.05], &opts()).unwrap();
    for row in &sweep.rows {
        assert_eq!(row.full_energy, 0.0);
        assert_eq!(row.ratio, 1.0);
    }
    assert_eq!(sweep_ratio(0.0, 0.0), 1.0);
}

#[test]
fn double_well_sweep_converges_to_the_prediction() {
    let specs = model("double_well", &[]);
    let domain = DomainSpec::unit_cube(vec![8193]);
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let sweep = run_gamma_sweep(&domain, &dw_jump(), &specs, &eps, &opts()).unwrap();
    assert!(sweep.cell_converged);
    assert!((sweep.cell_estimate - 8.0 / 3.0).abs() <= 1e-3);
    assert_eq!(sweep.interface_measure, 1.0);
    for row in &sweep.rows {
        assert!(row.error.is_none());
        assert!(row.full_energy >= 0.0);
        assert!((row.ratio - 1.0).abs() <= 0.01, "{row:?}");
    }
    let (first, last) = (sweep.rows[0].ratio, sweep.rows[3].ratio);
    assert!((last - 1.0).abs() <= (first - 1.0).abs() + 0.02);
}

#[test]
fn padding_barely_changes_the_nonlocal_energy() {
    let specs = model("micromagnetics_2d", &[]);
    let jump = JumpData::new(vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0], vec![1.0, 0.0]).unwrap();
    let mut domain = DomainSpec::unit_cube(vec![1025, 32]);
    domain.periodic = vec![false, true];
    let o = GammaOptions {
        cell_normal: 32,
        cell_lateral: vec![8],
        cell: CellOptions {
            starts: Some(vec![InitStrategy::OneDimensionalTanh]),
            ..Default::default()
        },
        extrapolate: false,
        ..Default::default()
    };
    let sweep = run_gamma_sweep(&domain, &jump, &specs, &[1.0 / 64.0], &o).unwrap();
    let row = &sweep.rows[0];
    assert!(row.error.is_none(), "{row:?}");
    assert!(row.full_energy >= 0.0);
    let change = row.padding_change.unwrap();
    assert!(change <= 0.01, "{row:?}");
}

#[test]
fn bad_sweeps_are_rejected() {
    let specs = model("double_well", &[]);
    let domain = DomainSpec::unit_cube(vec![257]);
    assert!(run_gamma_sweep(&domain, &dw_jump(), &specs, &[0.05, 0.1], &opts()).is_err());
    assert!(run_gamma_sweep(&domain, &dw_jump(), &specs, &[], &opts()).is_err());
    let small = DomainSpec::unit_cube(vec![16]);
    assert!(matches!(small.validate(), Err(Error::BadDomain(_))));
}
