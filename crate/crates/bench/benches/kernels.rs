use criterion::{black_box, criterion_group, criterion_main, Criterion};

use cellgamma::cellopt::{
    compute_cell_energy, init_profiles, CellOptions, CellProblem, InitStrategy,
};
use cellgamma::grid::{build_frame, CellGrid};
use cellgamma::model::{catalog_lookup, JumpData, ParamMap};
use cellgamma::poisson::{BcVariant, PoissonSolver, PoissonSource};

const NEUMANN: BcVariant = BcVariant::NeumannNormalPeriodicLateral;

fn poisson(c: &mut Criterion) {
    let grid = CellGrid::new(build_frame(&[0.6, 0.8]).unwrap(), 64, &[64]).unwrap();
    let src = PoissonSource::random(&grid, 3, 1, 0).unwrap();
    for bc in [NEUMANN, BcVariant::DirichletCell] {
        let solver = PoissonSolver::new(&grid, bc);
        c.bench_function(&format!("poisson_64x64_{}", bc.name()), |b| {
            b.iter(|| solver.solve(black_box(&src)).unwrap())
        });
    }
}

fn energy_gradient(c: &mut Criterion) {
    let specs = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
    let jump = JumpData::new(vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0], vec![1.0, 0.0]).unwrap();
    let grid = CellGrid::new(build_frame(&jump.nu).unwrap(), 64, &[64]).unwrap();
    let problem = CellProblem::new(&grid, &specs, &jump, NEUMANN).unwrap();
    let profile = init_profiles(
        &jump,
        &specs,
        &grid,
        &InitStrategy::RandomPerturbed {
            count: 1,
            amplitude: 0.3,
        },
        0,
    )
    .unwrap()
    .remove(0);
    c.bench_function("micromagnetic_gradient_64x64", |b| {
        b.iter(|| problem.energy_gradient(black_box(&profile), 0.5).unwrap())
    });
}

fn double_well_cell(c: &mut Criterion) {
    let specs = catalog_lookup("double_well", &ParamMap::new()).unwrap();
    let jump = JumpData::new(vec![1.0], vec![-1.0], vec![1.0]).unwrap();
    let grid = CellGrid::new(build_frame(&[1.0]).unwrap(), 512, &[]).unwrap();
    let mut g = c.benchmark_group("cell");
    g.sample_size(10);
    g.bench_function("double_well_512", |b| {
        b.iter(|| {
            compute_cell_energy(&jump, &specs, &grid, NEUMANN, &CellOptions::default()).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, poisson, energy_gradient, double_well_cell);
criterion_main!(benches);
