//! Potential problems `ΔH = div M` on a cell and the Helmholtz–Leray
//! projection.
//!
//! The discrete problem is variational: with `G` the edge gradient and `W`
//! the edge weights, `H` solves `Gᵀ W G H = Gᵀ W M̂ + β`, where `M̂` is the
//! source sampled on edges and `β` carries the boundary normal flux of the
//! Neumann variant, so that the normal derivative of `H` vanishes at the
//! pinned rows. The Dirichlet variants hold `H = 0` on both end rows.

mod modal;

use serde::{Deserialize, Serialize};

pub use modal::{Closure, ModalSolver, ModalSystem};

use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, CellGrid, EdgeField, StateField, TensorField};
use crate::rng::uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcVariant {
    NeumannNormalPeriodicLateral,
    DirichletCell,
    DirichletPaddedBox,
}

impl BcVariant {
    pub fn is_dirichlet(&self) -> bool {
        !matches!(self, BcVariant::NeumannNormalPeriodicLateral)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BcVariant::NeumannNormalPeriodicLateral => "neumann_normal_periodic_lateral",
            BcVariant::DirichletCell => "dirichlet_cell",
            BcVariant::DirichletPaddedBox => "dirichlet_padded_box",
        }
    }
}

/// Source of a potential problem: `l` components on edges plus the normal
/// flux `M·ν` on the bottom and top node rows (`slab_len × l` each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSource {
    pub edges: EdgeField,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl PoissonSource {
    pub fn new(grid: &CellGrid, edges: EdgeField, bottom: Vec<f64>, top: Vec<f64>) -> Result<Self> {
        edges.check(grid)?;
        let n = grid.slab_len() * edges.comps;
        if bottom.len() != n || top.len() != n {
            return Err(Error::ShapeMismatch(
                "boundary flux rows do not fit the grid".into(),
            ));
        }
        Ok(PoissonSource { edges, bottom, top })
    }

    /// Samples a node tensor field: edges by [`EdgeField::from_node_tensor`],
    /// boundary fluxes from the end rows.
    pub fn from_node_tensor(grid: &CellGrid, m: &TensorField) -> Result<Self> {
        let edges = EdgeField::from_node_tensor(grid, m)?;
        let (l, n) = (m.rows, m.cols);
        let nu = grid.frame().normal();
        let slab = grid.slab_len();
        let top0 = grid.n_nodes() - slab;
        let mut bottom = vec![0.0; slab * l];
        let mut top = vec![0.0; slab * l];
        for j in 0..slab {
            for r in 0..l {
                let flux =
                    |node: usize| -> f64 { (0..n).map(|c| m.node(node)[r * n + c] * nu[c]).sum() };
                bottom[j * l + r] = flux(j);
                top[j * l + r] = flux(top0 + j);
            }
        }
        Ok(PoissonSource { edges, bottom, top })
    }

    /// Node tensor with entries uniform on `[−1, 1)`, then the top normal
    /// flux shifted so its lateral mean matches the bottom one (Neumann
    /// compatible).
    pub fn random(grid: &CellGrid, comps: usize, seed: u64, stream: u64) -> Result<Self> {
        let n = grid.frame().dim();
        let mut m = TensorField::zeros(grid, comps, n);
        for node in 0..grid.n_nodes() {
            for (c, v) in m.node_mut(node).iter_mut().enumerate() {
                *v = uniform(seed, stream, node as u64, c as u64);
            }
        }
        let mut src = Self::from_node_tensor(grid, &m)?;
        let slab = grid.slab_len();
        for k in 0..comps {
            let mb: f64 = (0..slab).map(|j| src.bottom[j * comps + k]).sum::<f64>() / slab as f64;
            let mt: f64 = (0..slab).map(|j| src.top[j * comps + k]).sum::<f64>() / slab as f64;
            for j in 0..slab {
                src.top[j * comps + k] += mb - mt;
            }
        }
        Ok(src)
    }

    pub fn comps(&self) -> usize {
        self.edges.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.bottom
            .iter()
            .chain(&self.top)
            .fold(self.edges.max_abs(), |m, x| m.max(x.abs()))
    }
}

/// Discrete potential with its edge gradient and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub h: StateField,
    pub grad_h: EdgeField,
    pub residual_norm: f64,
    pub bc: BcVariant,
    /// Right-hand-side mass removed from the Neumann zero mode.
    pub subtracted_mass: f64,
}

impl PotentialField {
    /// `Σ_edges w |∇H|²`.
    pub fn energy(&self, grid: &CellGrid) -> f64 {
        self.grad_h.norm_sq(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub j0_projection: f64,
    pub nonlocal_energy: f64,
    pub gap: f64,
}

/// `Gᵀ W G u`, the weighted stiffness.
pub fn apply_stiffness(grid: &CellGrid, u: &StateField) -> Result<StateField> {
    let mut d = divergence(grid, &gradient(grid, u)?)?;
    for node in 0..grid.n_nodes() {
        let w = grid.node_weight(node);
        d.node_mut(node).iter_mut().for_each(|x| *x *= -w);
    }
    Ok(d)
}

/// Reusable solver for many sources on one grid.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    grid: CellGrid,
    modal: ModalSolver,
    bc: BcVariant,
    check_residual: bool,
}

impl PoissonSolver {
    pub fn new(grid: &CellGrid, bc: BcVariant) -> Self {
        PoissonSolver {
            grid: grid.clone(),
            modal: ModalSolver::new(grid),
            bc,
            check_residual: true,
        }
    }

    /// Skips the residual verification (used inside optimizer loops after
    /// the first verified solve).
    pub fn unchecked(mut self) -> Self {
        self.check_residual = false;
        self
    }

    pub fn bc(&self) -> BcVariant {
        self.bc
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    fn system(&self) -> ModalSystem {
        let n0 = self.grid.dims()[0];
        if self.bc.is_dirichlet() {
            ModalSystem {
                lo: 1,
                hi: n0 - 2,
                bottom: Closure::Dirichlet,
                top: Closure::Dirichlet,
                alpha: 1.0,
                beta: 0.0,
            }
        } else {
            ModalSystem {
                lo: 0,
                hi: n0 - 1,
                bottom: Closure::Neumann,
                top: Closure::Neumann,
                alpha: 1.0,
                beta: 0.0,
            }
        }
    }

    pub fn solve(&self, src: &PoissonSource) -> Result<PotentialField> {
        let grid = &self.grid;
        src.edges.check(grid)?;
        let l = src.comps();
        let slab = grid.slab_len();
        let nn = grid.n_nodes();
        let area: f64 = grid.spacing()[1..].iter().product();
        let mut rhs = divergence(grid, &src.edges)?;
        for node in 0..nn {
            let w = grid.node_weight(node);
            rhs.node_mut(node).iter_mut().for_each(|x| *x *= -w);
        }
        let mut subtracted = 0.0f64;
        if !self.bc.is_dirichlet() {
            let tol = 1e-8 * (1.0 + src.max_abs());
            let top0 = nn - slab;
            for k in 0..l {
                let mb: f64 = (0..slab).map(|j| src.bottom[j * l + k]).sum::<f64>() / slab as f64;
                let mt: f64 = (0..slab).map(|j| src.top[j * l + k]).sum::<f64>() / slab as f64;
                let imbalance = (mt - mb).abs();
                if imbalance > tol {
                    return Err(Error::NeumannIncompatible {
                        imbalance,
                        tolerance: tol,
                    });
                }
                for j in 0..slab {
                    rhs.values[j * l + k] += area * src.bottom[j * l + k];
                    rhs.values[(top0 + j) * l + k] -= area * src.top[j * l + k];
                }
                let total: f64 = (0..nn).map(|i| rhs.values[i * l + k]).sum();
                let wsum: f64 = (0..nn).map(|i| grid.node_weight(i)).sum();
                for i in 0..nn {
                    rhs.values[i * l + k] -= total * grid.node_weight(i) / wsum;
                }
                subtracted = subtracted.max(total.abs());
            }
        }
        let sys = self.system();
        let mut h = StateField::zeros(grid, l);
        let mut col_r = vec![0.0; nn];
        let mut col_x = vec![0.0; nn];
        for k in 0..l {
            for i in 0..nn {
                col_r[i] = if (sys.lo * slab..(sys.hi + 1) * slab).contains(&i) {
                    rhs.values[i * l + k]
                } else {
                    0.0
                };
            }
            self.modal.solve(&sys, &col_r, &mut col_x);
            for i in 0..nn {
                h.values[i * l + k] = col_x[i];
            }
        }
        let mut residual_norm = 0.0;
        if self.check_residual {
            let kh = apply_stiffness(grid, &h)?;
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in sys.lo * slab..(sys.hi + 1) * slab {
                for k in 0..l {
                    num = num.max((kh.values[i * l + k] - rhs.values[i * l + k]).abs());
                    den = den.max(rhs.values[i * l + k].abs());
                }
            }
            residual_norm = if den > 0.0 { num / den } else { num };
            if !(residual_norm <= 1e-10) {
                return Err(Error::SolverDiverged(residual_norm));
            }
        }
        let grad_h = gradient(grid, &h)?;
        Ok(PotentialField {
            h,
            grad_h,
            residual_norm,
            bc: self.bc,
            subtracted_mass: subtracted,
        })
    }
}

pub fn solve_cell_poisson(
    grid: &CellGrid,
    src: &PoissonSource,
    bc: BcVariant,
) -> Result<PotentialField> {
    PoissonSolver::new(grid, bc).solve(src)
}

/// Divergence-free part `M̂ − ∇H` of the edge source.
pub fn leray_project(grid: &CellGrid, src: &PoissonSource, bc: BcVariant) -> Result<EdgeField> {
    let pot = solve_cell_poisson(grid, src, bc)?;
    let mut out = src.edges.clone();
    out.axpy(-1.0, &pot.grad_h);
    Ok(out)
}

/// `J₀ = ‖L₀ + M̂‖²` with `L₀ = ∇H − M̂`, against `‖∇H‖²`.
pub fn duality_gap(grid: &CellGrid, src: &PoissonSource, bc: BcVariant) -> Result<DualityReport> {
    let pot = solve_cell_poisson(grid, src, bc)?;
    let mut l0 = pot.grad_h.clone();
    l0.axpy(-1.0, &src.edges);
    l0.axpy(1.0, &src.edges);
    let j0 = l0.norm_sq(grid);
    let nonlocal = pot.energy(grid);
    Ok(DualityReport {
        j0_projection: j0,
        nonlocal_energy: nonlocal,
        gap: (j0 - nonlocal).abs(),
    })
}

/// Discrete divergence of an edge field restricted to interior rows, the
/// quantity that vanishes for projected fields.
pub fn interior_divergence(grid: &CellGrid, v: &EdgeField) -> Result<f64> {
    let d = divergence(grid, v)?;
    let slab = grid.slab_len();
    let c = v.comps;
    Ok(d.values[slab * c..(grid.n_nodes() - slab) * c]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs())))
}
