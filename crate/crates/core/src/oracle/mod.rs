//! Slow, independent reference computations used to validate the solvers.

mod geodesic;

use nalgebra::{DMatrix, DVector};

pub use geodesic::{geodesic_energy_1d, geodesic_path_1d, GeodesicSampling, PathSample};

use crate::cellopt::{minimize_from, CellProblem, NcgOptions};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, StateField};
use crate::model::ConstraintSet;
use crate::poisson::{BcVariant, PoissonSource};
use crate::rng::uniform;

/// Largest number of free unknowns accepted by [`brute_force_cell_min`].
pub const BRUTE_FORCE_MAX_UNKNOWNS: usize = 200;

/// Minimum over `starts` randomized starts (straight sweep plus nodal noise)
/// at tight tolerances, without preconditioning.
pub fn brute_force_cell_min(problem: &CellProblem, starts: usize, seed: u64) -> Result<f64> {
    let grid = &problem.grid;
    let m = problem.state_dim();
    let slab = grid.slab_len();
    let free = (grid.n_nodes() - 2 * slab) * m;
    if free > BRUTE_FORCE_MAX_UNKNOWNS || grid.dims().iter().any(|&d| d > 8) {
        return Err(Error::ProblemTooLarge(free));
    }
    let jump = &problem.jump;
    let amp = 0.5 * jump.jump_size() + 0.1;
    let n0 = grid.dims()[0];
    let profiles: Vec<StateField> = (0..starts.max(1))
        .map(|k| {
            StateField::from_fn(grid, m, |node, out| {
                let i = grid.normal_index(node);
                if i == 0 {
                    out.copy_from_slice(&jump.phi_minus);
                    return;
                }
                if i == n0 - 1 {
                    out.copy_from_slice(&jump.phi_plus);
                    return;
                }
                let f = i as f64 / (n0 - 1) as f64;
                for c in 0..m {
                    out[c] = jump.phi_minus[c]
                        + f * (jump.phi_plus[c] - jump.phi_minus[c])
                        + amp * uniform(seed, k as u64, node as u64, c as u64);
                }
                if problem.specs.constraint == ConstraintSet::UnitSphere {
                    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n < 1e-3 {
                        out.copy_from_slice(&jump.phi_minus);
                    } else {
                        out.iter_mut().for_each(|x| *x /= n);
                    }
                }
            })
        })
        .collect();
    let opts = NcgOptions {
        gtol: 1e-7,
        etol: 1e-14,
        max_iter: 20_000,
        window: 10,
        dtol: 1e-14,
    };
    let sol = minimize_from(problem, &profiles, &opts, false, seed)?;
    Ok(sol.energy.total)
}

/// Central differences of the total energy at scale `l`, node by node on
/// the free rows. On the sphere each perturbation is retracted, which yields
/// the tangential gradient.
pub fn finite_difference_gradient(
    problem: &CellProblem,
    profile: &StateField,
    l: f64,
    step: f64,
) -> Result<StateField> {
    if !(step > 0.0) {
        return Err(Error::BadParams(format!("finite-difference step {step}")));
    }
    problem.check_admissible(profile)?;
    let grid = &problem.grid;
    let m = problem.state_dim();
    let slab = grid.slab_len();
    let sphere = problem.sphere();
    let mut g = StateField::zeros(grid, m);
    let mut work = profile.clone();
    for node in slab..grid.n_nodes() - slab {
        for k in 0..m {
            let mut e = [0.0; 2];
            for (j, sgn) in [1.0, -1.0].iter().enumerate() {
                let v = work.node_mut(node);
                v.copy_from_slice(profile.node(node));
                v[k] += sgn * step;
                if sphere {
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= n);
                }
                e[j] = problem.assemble_energy(&work, l)?.total;
            }
            work.node_mut(node).copy_from_slice(profile.node(node));
            g.node_mut(node)[k] = (e[0] - e[1]) / (2.0 * step);
        }
    }
    Ok(g)
}

/// Dense reference for the duality identity: the weighted minimum-norm
/// field `X` with `Gᵀ W X = Gᵀ W M̂ + β` (free rows only for the Dirichlet
/// variants), computed by an SVD pseudo-inverse of the explicitly assembled
/// difference matrix. `‖X‖²_W = min over divergence-free L of ‖L + M̂‖²_W`.
pub struct DenseDualityOracle {
    grid: CellGrid,
    bc: BcVariant,
    edges: Vec<(usize, usize)>,
    rows: Vec<usize>,
    /// `A = Gᵀ W` restricted to `rows`.
    a: DMatrix<f64>,
    /// Pseudo-inverse of `A W^{-1/2}`.
    pinv: DMatrix<f64>,
}

impl DenseDualityOracle {
    pub fn new(grid: &CellGrid, bc: BcVariant) -> Result<Self> {
        let nn = grid.n_nodes();
        let n0 = grid.dims()[0];
        let mut edges = Vec::new();
        for a in 0..grid.axes() {
            for node in 0..nn {
                if grid.has_edge(a, node) {
                    edges.push((a, node));
                }
            }
        }
        if edges.len() > 4096 {
            return Err(Error::ProblemTooLarge(edges.len()));
        }
        let rows: Vec<usize> = (0..nn)
            .filter(|&v| {
                let i = grid.normal_index(v);
                !bc.is_dirichlet() || (i > 0 && i + 1 < n0)
            })
            .collect();
        let mut row_of = vec![usize::MAX; nn];
        for (r, &v) in rows.iter().enumerate() {
            row_of[v] = r;
        }
        let mut a = DMatrix::zeros(rows.len(), edges.len());
        let mut b = DMatrix::zeros(rows.len(), edges.len());
        for (e, &(ax, node)) in edges.iter().enumerate() {
            let up = grid.forward(node, ax).expect("edge");
            let h = grid.spacing()[ax];
            let w = grid.edge_weight(ax, node);
            for (v, s) in [(up, 1.0 / h), (node, -1.0 / h)] {
                if row_of[v] != usize::MAX {
                    a[(row_of[v], e)] += w * s;
                    b[(row_of[v], e)] += w.sqrt() * s;
                }
            }
        }
        let pinv = b
            .pseudo_inverse(1e-10)
            .map_err(|e| Error::BadParams(format!("dense duality oracle: {e}")))?;
        Ok(DenseDualityOracle {
            grid: grid.clone(),
            bc,
            edges,
            rows,
            a,
            pinv,
        })
    }

    /// `min ‖L + M̂‖²_W` over discretely divergence-free `L`, summed over
    /// components.
    pub fn min_energy(&self, src: &PoissonSource) -> Result<f64> {
        let grid = &self.grid;
        src.edges.check(grid)?;
        let l = src.comps();
        let slab = grid.slab_len();
        let nn = grid.n_nodes();
        let area: f64 = grid.spacing()[1..].iter().product();
        let mut total = 0.0;
        for k in 0..l {
            let mh = DVector::from_iterator(
                self.edges.len(),
                self.edges.iter().map(|&(a, v)| src.edges.edge(a, v)[k]),
            );
            let mut c = &self.a * mh;
            if !self.bc.is_dirichlet() {
                for (r, &v) in self.rows.iter().enumerate() {
                    if v < slab {
                        c[r] += area * src.bottom[v * l + k];
                    } else if v >= nn - slab {
                        c[r] -= area * src.top[(v - (nn - slab)) * l + k];
                    }
                }
            }
            let z = &self.pinv * c;
            total += z.norm_squared();
        }
        Ok(total)
    }
}
