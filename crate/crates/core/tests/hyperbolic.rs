use std::sync::Arc;

use cellgamma::grid::{build_frame, CellGrid, TensorField};
use cellgamma::hyperbolic::{
    build_base_fields, build_base_fields_centered, compute_shock_cell_energy, cubic_ramp,
    reduce_to_static_frame, viscous_profile_oracle_1d, ShockOptions, ShockProblem,
};
use cellgamma::model::{
    catalog_lookup, ConservationLaw, FluxMap, LinearFlux, ParamMap, SpaceTimeJumpData,
};
use cellgamma::Error;
use proptest::prelude::*;

fn burgers() -> ConservationLaw {
    catalog_lookup("burgers", &ParamMap::new())
        .unwrap()
        .conservation
        .unwrap()
}

fn standing() -> SpaceTimeJumpData {
    SpaceTimeJumpData::new(vec![-1.0], vec![1.0], vec![1.0, 0.0]).unwrap()
}

fn tilted() -> SpaceTimeJumpData {
    let s = 0.5f64.sqrt();
    SpaceTimeJumpData::new(vec![0.0], vec![2.0], vec![s, -s]).unwrap()
}

fn cell(nu: &[f64], n0: usize, lateral: usize) -> CellGrid {
    CellGrid::new(build_frame(nu).unwrap(), n0, &[lateral]).unwrap()
}

fn problem(jump: &SpaceTimeJumpData, grid: &CellGrid) -> ShockProblem {
    let law = burgers();
    let base = build_base_fields(jump, law.flux.as_ref(), grid).unwrap();
    ShockProblem::new(grid, jump, law.flux.clone(), law.entropy.clone(), base).unwrap()
}

fn opts() -> ShockOptions {
    ShockOptions {
        random_starts: 0,
        ..Default::default()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 4000;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn standing_base_flux_is_constant() {
    let grid = cell(&[1.0, 0.0], 33, 4);
    let base = build_base_fields(&standing(), burgers().flux.as_ref(), &grid).unwrap();
    assert!(base.gamma0.values.iter().all(|&g| (g - 0.5).abs() <= 1e-15));
    assert!(base.constraint_residual(&grid) <= 1e-12);
}

#[test]
fn tilted_base_interpolates_the_end_fluxes() {
    let grid = cell(&tilted().nu, 33, 4);
    let base = build_base_fields(&tilted(), burgers().flux.as_ref(), &grid).unwrap();
    for node in 0..grid.n_nodes() {
        match grid.normal_index(node) {
            0 => assert_eq!(base.gamma0.node(node), &[2.0]),
            32 => assert_eq!(base.gamma0.node(node), &[0.0]),
            _ => {}
        }
    }
    assert!(base.constraint_residual(&grid) <= 1e-10);
}

#[test]
fn constant_data_give_constant_fields_and_zero_energy() {
    let jump = SpaceTimeJumpData::no_jump(vec![0.7], vec![0.6, 0.8]).unwrap();
    let grid = cell(&jump.nu, 17, 4);
    let p = problem(&jump, &grid);
    assert!(p.base.zeta0.values.iter().all(|&z| z == 0.7));
    let f = 0.7 * 0.7 / 2.0;
    assert!(p.base.gamma0.values.iter().all(|&g| (g - f).abs() <= 1e-15));
    let e = p.assemble_energy(&p.zero_potential(), 1.0).unwrap();
    assert!(e.total.abs() <= 1e-10);

    let sol = compute_shock_cell_energy(&jump, burgers().flux, burgers().entropy, &grid, &opts())
        .unwrap();
    assert!(sol.cell.energy.total.abs() <= 1e-10);
}

#[test]
fn base_energy_matches_quadrature_of_the_ramp() {
    // ζ₀ = 1 − 2θ, γ₀ = 1/2, so |∂ζ₀|² = 4θ'² and γ₀ − ζ₀²/2 = 2θ(1 − θ).
    let theta = |t: f64| cubic_ramp(t, 0.0);
    let dtheta = |t: f64| {
        let x = t + 0.5;
        6.0 * x * (1.0 - x)
    };
    let a = simpson(|t| 4.0 * dtheta(t).powi(2), -0.5, 0.5);
    let b = simpson(|t| (2.0 * theta(t) * (1.0 - theta(t))).powi(2), -0.5, 0.5);
    assert!((a - 4.8).abs() < 1e-10);

    let grid = cell(&[1.0, 0.0], 257, 4);
    let p = problem(&standing(), &grid);
    for l in [0.5, 1.0, 3.0] {
        let e = p.assemble_energy(&p.zero_potential(), l).unwrap();
        let exact = l * a + b / l;
        assert!(
            (e.total - exact).abs() <= 1e-3 * exact,
            "{l} {} {exact}",
            e.total
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_potentials_keep_the_constraint(seed in 0u64..10_000, tilt in 0.2f64..1.5) {
        let nu = vec![tilt.cos(), tilt.sin()];
        let f = |u: f64| u * u / 2.0;
        // Speed −ν_s/ν_y fixes u⁻ once u⁺ = 0.
        let speed = -nu[1] / nu[0];
        let um = 2.0 * speed;
        prop_assume!(um.abs() > 1e-3);
        let jump = SpaceTimeJumpData::new(vec![0.0], vec![um], nu.clone()).unwrap();
        prop_assume!((f(um) - speed * um).abs() < 1e-9);
        let grid = cell(&nu, 16, 5);
        let p = problem(&jump, &grid);
        let mut w = p.zero_potential();
        for node in 0..grid.n_nodes() {
            if p.is_free(node) {
                w.values[node] = cellgamma::rng::uniform(seed, 0, node as u64, 0);
            }
        }
        prop_assert!(p.constraint_residual(&w).unwrap() <= 1e-10);
    }
}

#[test]
fn pinned_rows_reject_nonzero_potential() {
    let grid = cell(&[1.0, 0.0], 16, 4);
    let p = problem(&standing(), &grid);
    let mut w = p.zero_potential();
    w.values[0] = 1.0;
    assert!(matches!(p.fields(&w), Err(Error::InadmissibleProfile(_))));
    let bad = TensorField::zeros(&grid, 2, 1);
    assert!(matches!(p.fields(&bad), Err(Error::ShapeMismatch(_))));
}

#[test]
fn standing_shock_energy_approaches_the_viscous_profile() {
    let law = burgers();
    let oracle =
        viscous_profile_oracle_1d(1.0, -1.0, law.flux.as_ref(), law.entropy.as_ref()).unwrap();
    assert!((oracle - 4.0 / 3.0).abs() <= 1e-10);
    let grid = cell(&[1.0, 0.0], 128, 4);
    let sol =
        compute_shock_cell_energy(&standing(), law.flux, law.entropy, &grid, &opts()).unwrap();
    let e = sol.cell.energy.total;
    assert!(e >= 0.99 * oracle, "{e}");
    assert!(e <= 1.05 * oracle, "{e}");
    assert!(sol.constraint_residual <= 1e-10);
    assert_eq!(sol.rh_residuals.len(), 1);
}

#[test]
fn energy_is_insensitive_to_the_ramp_position() {
    let law = burgers();
    let grid = cell(&[1.0, 0.0], 128, 4);
    let h = grid.spacing()[0];
    let mut e = Vec::new();
    for center in [0.0, h] {
        let o = ShockOptions { center, ..opts() };
        let sol = compute_shock_cell_energy(
            &standing(),
            law.flux.clone(),
            law.entropy.clone(),
            &grid,
            &o,
        )
        .unwrap();
        e.push(sol.cell.energy.total);
    }
    assert!((e[0] - e[1]).abs() <= 1e-3 * e[0], "{e:?}");
}

#[test]
fn centered_base_rejects_centers_outside_the_cell() {
    let grid = cell(&[1.0, 0.0], 16, 4);
    let f = burgers().flux;
    assert!(build_base_fields_centered(&standing(), f.as_ref(), &grid, 0.5).is_err());
    assert!(build_base_fields_centered(&standing(), f.as_ref(), &grid, 0.2).is_ok());
}

#[test]
fn tilted_shock_scales_to_the_static_frame() {
    let law = burgers();
    let jump = tilted();
    let red = reduce_to_static_frame(&jump, law.flux.clone()).unwrap();
    assert!((red.factor - 0.5f64.sqrt()).abs() <= 1e-15);
    let rj = red.reduced_jump(&jump).unwrap();
    assert_eq!(rj.nu, vec![1.0, 0.0]);

    let grid = cell(&jump.nu, 96, 4);
    let full =
        compute_shock_cell_energy(&jump, law.flux.clone(), law.entropy.clone(), &grid, &opts())
            .unwrap();
    let rgrid = cell(&rj.nu, 96, 4);
    let reduced = compute_shock_cell_energy(
        &rj,
        red.reduced_flux.clone(),
        law.entropy.clone(),
        &rgrid,
        &opts(),
    )
    .unwrap();
    let scaled = red.factor * reduced.cell.energy.total;
    let e = full.cell.energy.total;
    assert!((e - scaled).abs() <= 0.02 * e, "{e} {scaled}");

    let v = viscous_profile_oracle_1d(2.0, 0.0, red.reduced_flux.as_ref(), law.entropy.as_ref())
        .unwrap();
    assert!((v - 4.0 / 3.0).abs() <= 1e-10, "{v}");
    assert!(e >= 0.99 * red.factor * v, "{e}");
}

#[test]
fn static_reduction_examples() {
    let law = burgers();
    let red = reduce_to_static_frame(&tilted(), law.flux.clone()).unwrap();
    let f = |u: f64| {
        let mut o = [0.0];
        red.reduced_flux.value(&[u], &mut o);
        o[0]
    };
    assert!(f(2.0).abs() <= 1e-15 && f(0.0).abs() <= 1e-15);

    let red = reduce_to_static_frame(&standing(), law.flux.clone()).unwrap();
    assert_eq!(red.factor, 1.0);
    assert!(Arc::ptr_eq(&red.reduced_flux, &law.flux));

    let adv: Arc<dyn FluxMap> = Arc::new(LinearFlux::new(1, 1, 1, vec![1.0]));
    let s = 0.5f64.sqrt();
    let jump = SpaceTimeJumpData::new(vec![3.0], vec![-1.0], vec![s, -s]).unwrap();
    let red = reduce_to_static_frame(&jump, adv).unwrap();
    let mut a = [0.0];
    let mut b = [0.0];
    red.reduced_flux.value(&[3.0], &mut a);
    red.reduced_flux.value(&[-1.0], &mut b);
    assert!((a[0] - b[0]).abs() <= 1e-15);
    assert!(a[0].abs() <= 1e-15);
}

#[test]
fn viscous_oracle_examples() {
    let law = burgers();
    let v = viscous_profile_oracle_1d(0.4, 0.4, law.flux.as_ref(), law.entropy.as_ref()).unwrap();
    assert_eq!(v, 0.0);
    let v = viscous_profile_oracle_1d(2.0, -2.0, law.flux.as_ref(), law.entropy.as_ref()).unwrap();
    assert!((v - 32.0 / 3.0).abs() <= 1e-9, "{v}");
    assert!(matches!(
        viscous_profile_oracle_1d(1.0, 0.0, law.flux.as_ref(), law.entropy.as_ref()),
        Err(Error::RankineHugoniotViolated(_))
    ));
}

#[test]
fn invalid_space_time_data_are_rejected() {
    let law = burgers();
    let bad = SpaceTimeJumpData::new(vec![0.0], vec![1.0], vec![1.0, 0.0]).unwrap();
    let grid = cell(&bad.nu, 16, 4);
    assert!(matches!(
        compute_shock_cell_energy(&bad, law.flux.clone(), law.entropy.clone(), &grid, &opts()),
        Err(Error::RankineHugoniotViolated(_))
    ));
    assert!(matches!(
        SpaceTimeJumpData::new(vec![0.0], vec![1.0], vec![0.0, 1.0]),
        Err(Error::DegenerateNormal)
    ));
}
