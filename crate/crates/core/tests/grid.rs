use std::sync::Arc;

use cellgamma::cellopt::{compute_cell_energy, CellOptions, InitStrategy};
use cellgamma::grid::{
    build_frame, divergence, gradient, laplacian, read_cgrid, write_cgrid, CellGrid, EdgeField,
    StateField,
};
use cellgamma::model::{
    ConstraintSet, DirichletEnergy, JumpData, LinearFlux, ModelSpecs, UniaxialAnisotropy,
};
use cellgamma::poisson::BcVariant;
use proptest::prelude::*;

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn noise(len: usize, seed: u64) -> Vec<f64> {
    (0..len as u64)
        .map(|i| cellgamma::rng::uniform(seed, 0, i, 0))
        .collect()
}

fn grid_strategy() -> impl Strategy<Value = CellGrid> {
    (
        prop::collection::vec(-1.0f64..1.0, 2..=3),
        8usize..12,
        prop::sample::select(vec![1usize, 4, 5, 6]),
    )
        .prop_filter_map("degenerate normal", |(v, n0, nl)| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 0.1 {
                return None;
            }
            let nu = unit(&v);
            let lat = vec![nl; nu.len() - 1];
            CellGrid::new(build_frame(&nu).ok()?, n0, &lat).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frame_is_orthonormal_with_normal_first(v in prop::collection::vec(-1.0f64..1.0, 2..=4)) {
        prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 0.01);
        let nu = unit(&v);
        let f = build_frame(&nu).unwrap();
        prop_assert_eq!(f.normal(), nu.as_slice());
        prop_assert!(f.gram_residual() < 1e-14);
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient(g in grid_strategy(), comps in 1usize..3, seed in 0u64..1000) {
        let u = StateField { comps, values: noise(g.n_nodes() * comps, seed) };
        let mut v = EdgeField::zeros(&g, comps);
        let mut k = 0u64;
        for a in 0..g.axes() {
            for x in v.axes[a].iter_mut() {
                *x = cellgamma::rng::uniform(seed, 1, k, 0);
                k += 1;
            }
        }
        let gu = gradient(&g, &u).unwrap();
        let dv = divergence(&g, &v).unwrap();
        let lhs = gu.inner(&v, &g);
        let rhs = -u.inner(&dv, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} {rhs}");
    }

    #[test]
    fn divergence_of_gradient_is_the_laplacian(g in grid_strategy(), seed in 0u64..1000) {
        let u = StateField { comps: 2, values: noise(g.n_nodes() * 2, seed) };
        let a = divergence(&g, &gradient(&g, &u).unwrap()).unwrap();
        let b = laplacian(&g, &u).unwrap();
        let scale = b.max_abs().max(1.0);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn cgrid_round_trip(dims in prop::collection::vec(1usize..5, 1..4), seed in 0u64..100) {
        let n: usize = dims.iter().product();
        let values = noise(n, seed);
        let mut buf = Vec::new();
        write_cgrid(&mut buf, &dims, &values).unwrap();
        let (d, v) = read_cgrid(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(d, dims);
        prop_assert_eq!(v, values);
    }
}

/// Micromagnetic model whose in-plane flux is rotated by `angle`.
fn rotated_micromagnetics(angle: f64) -> ModelSpecs {
    let (c, s) = (angle.cos(), angle.sin());
    let coeffs = vec![c, -s, 0.0, s, c, 0.0];
    ModelSpecs::new(
        "rotated_micromagnetics",
        Arc::new(UniaxialAnisotropy {
            dim: 3,
            axis: 2,
            scale: 1.0,
        }),
        Arc::new(LinearFlux::new(3, 1, 2, coeffs)),
        Arc::new(DirichletEnergy {
            state_dim: 3,
            space_dim: 2,
            scale: 1.0,
        }),
        ConstraintSet::UnitSphere,
    )
    .unwrap()
}

#[test]
fn cell_energy_is_frame_equivariant() {
    let opts = CellOptions {
        starts: Some(vec![InitStrategy::OneDimensionalTanh]),
        gtol: Some(1e-7),
        etol: 1e-12,
        ..Default::default()
    };
    let phi_p = vec![0.6, 0.8, 0.0];
    let phi_m = vec![0.0, -0.6, 0.8];
    let mut energies = Vec::new();
    for angle in [0.0, 0.7, 2.0] {
        let specs = rotated_micromagnetics(angle);
        let nu = vec![angle.cos(), angle.sin()];
        let jump = JumpData::new(phi_p.clone(), phi_m.clone(), nu.clone()).unwrap();
        let grid = CellGrid::new(build_frame(&nu).unwrap(), 12, &[6]).unwrap();
        let sol =
            compute_cell_energy(&jump, &specs, &grid, BcVariant::DirichletCell, &opts).unwrap();
        assert!(sol.converged);
        energies.push(sol.energy.total);
    }
    for e in &energies[1..] {
        assert!(
            (e - energies[0]).abs() <= 1e-9 * energies[0],
            "{energies:?}"
        );
    }
}
