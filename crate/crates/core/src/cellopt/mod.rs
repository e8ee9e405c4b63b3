//! Discrete cell energies, their gradients, and the multistart minimization
//! over profiles and the scale `L`.

mod energy;
mod init;
pub mod ncg;
mod scale;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use energy::{CellProblem, EnergyBreakdown, Scale};
pub use init::{init_profiles, init_profiles_mirrored, smoothed_step, InitStrategy, STEP_WIDTH};
pub use ncg::{minimize, NcgOptions, NcgResult, Objective};
pub use scale::{golden_section_log2, optimize_scale, ScaleOptimum, LOG2_L_RANGE};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, StateField};
use crate::model::{JumpData, ModelSpecs};
use crate::poisson::{BcVariant, Closure, ModalSolver, ModalSystem};

/// Relative tolerance of the golden-section scale search.
pub const SCALE_RTOL: f64 = 1e-4;

/// Final energies closer than this (relative) count as ties.
pub const TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    /// Gradient tolerance; `None` means `1e−6·(1 + |φ⁺ − φ⁻|)`.
    pub gtol: Option<f64>,
    pub etol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Start strategies in order; `None` means tanh, geodesic and four
    /// random starts of amplitude `0.1·|φ⁺ − φ⁻|`.
    pub starts: Option<Vec<InitStrategy>>,
    /// Builds the mirror images of the default starts (for flipped data).
    pub mirror: bool,
    pub parallel: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            gtol: None,
            etol: 1e-8,
            max_iter: 5000,
            seed: 0,
            starts: None,
            mirror: false,
            parallel: true,
        }
    }
}

impl CellOptions {
    pub fn default_starts(jump_size: f64) -> Vec<InitStrategy> {
        vec![
            InitStrategy::OneDimensionalTanh,
            InitStrategy::GeodesicSweep,
            InitStrategy::RandomPerturbed {
                count: 4,
                amplitude: 0.1 * jump_size,
            },
        ]
    }

    pub fn gtol_for(&self, jump: &JumpData) -> f64 {
        self.gtol.unwrap_or(1e-6 * (1.0 + jump.jump_size()))
    }
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub strategy: String,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub profile: StateField,
    pub l_star: f64,
    pub energy: EnergyBreakdown,
    pub bc: BcVariant,
    pub iterations: usize,
    pub converged: bool,
    /// Final energy of every start, in start order.
    pub starts: Vec<f64>,
    pub start_reports: Vec<StartReport>,
    pub best_start: usize,
    pub grad_max: f64,
    pub seed: u64,
    pub history: Vec<f64>,
}

impl CellSolution {
    /// `Err(NotConverged)` unless the reported start converged.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
            })
        }
    }
}

/// Index of the lowest energy, ties (within [`TIE_RTOL`]) to the lowest
/// index. Independent of evaluation order.
pub fn best_index(energies: &[f64]) -> Option<usize> {
    let min = energies
        .iter()
        .copied()
        .filter(|e| !e.is_nan())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return if energies.is_empty() { None } else { Some(0) };
    }
    let tol = TIE_RTOL * min.abs().max(1e-300);
    energies.iter().position(|&e| e <= min + tol)
}

/// Scale minimizing the total energy of a fixed profile: closed form for
/// quadratic `G`, golden section on `log₂ L ∈ [−8, 8]` otherwise.
pub fn optimize_scale_general(problem: &CellProblem, profile: &StateField) -> Result<ScaleOptimum> {
    problem.check_admissible(profile)?;
    if problem.specs.gradient.homogeneous_quadratic() {
        let e = problem.assemble_energy(profile, 1.0)?;
        return optimize_scale(e.grad_term, e.b());
    }
    let (lo, hi) = LOG2_L_RANGE;
    let (l, e) = golden_section_log2(
        |l| problem.assemble_energy(profile, l).map(|b| b.total),
        lo,
        hi,
        SCALE_RTOL / std::f64::consts::LN_2,
    )?;
    let eps = 1e-9;
    Ok(ScaleOptimum {
        l_star: l,
        e_star: e,
        at_bracket: l <= lo.exp2() * (1.0 + eps) || l >= hi.exp2() * (1.0 - eps),
    })
}

/// Objective over the full nodal vector of a profile.
pub(crate) struct CellObjective<'a> {
    problem: &'a CellProblem,
    scratch: StateField,
    grad: StateField,
    quadratic: bool,
    l: f64,
    precond: Option<(ModalSolver, usize)>,
    refresh_every: usize,
}

impl<'a> CellObjective<'a> {
    pub(crate) fn new(problem: &'a CellProblem, profile: &StateField, l0: f64) -> Self {
        let quadratic = problem.specs.gradient.homogeneous_quadratic();
        let n0 = problem.grid.dims()[0];
        let precond = (n0 >= 3).then(|| (ModalSolver::new(&problem.grid), n0));
        CellObjective {
            problem,
            scratch: profile.clone(),
            grad: profile.clone(),
            quadratic,
            l: l0,
            precond,
            refresh_every: 10,
        }
    }

    pub(crate) fn scale(&self) -> Scale {
        if self.quadratic {
            Scale::Optimal
        } else {
            Scale::Fixed(self.l)
        }
    }

    pub(crate) fn without_preconditioner(mut self) -> Self {
        self.precond = None;
        self
    }
}

impl Objective for CellObjective<'_> {
    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self.scratch.values.copy_from_slice(x);
        let scale = self.scale();
        let res = match grad {
            Some(g) => {
                let r = self
                    .problem
                    .evaluate(&self.scratch, scale, Some(&mut self.grad));
                g.copy_from_slice(&self.grad.values);
                r
            }
            None => self.problem.evaluate(&self.scratch, scale, None),
        };
        match res {
            Ok(e) => {
                if self.quadratic && e.total.is_finite() {
                    self.l = e.scale;
                }
                e.total
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn retract(&self, x: &mut [f64]) {
        if !self.problem.sphere() {
            return;
        }
        let m = self.problem.state_dim();
        let slab = self.problem.grid.slab_len();
        let nn = self.problem.grid.n_nodes();
        for node in slab..nn - slab {
            let v = &mut x[node * m..(node + 1) * m];
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|a| *a /= n);
            }
        }
    }

    fn to_tangent(&self, x: &[f64], v: &mut [f64]) {
        let m = self.problem.state_dim();
        let slab = self.problem.grid.slab_len();
        let nn = self.problem.grid.n_nodes();
        v[..slab * m].iter_mut().for_each(|a| *a = 0.0);
        v[(nn - slab) * m..].iter_mut().for_each(|a| *a = 0.0);
        if !self.problem.sphere() {
            return;
        }
        for node in slab..nn - slab {
            let z = &x[node * m..(node + 1) * m];
            let w = &mut v[node * m..(node + 1) * m];
            let d: f64 = z.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(z).for_each(|(a, b)| *a -= d * b);
        }
    }

    /// `(2L·K + (2/L)·M)⁻¹` per component on the free rows.
    fn precondition(&self, _x: &[f64], g: &[f64], out: &mut [f64]) {
        let Some((solver, n0)) = &self.precond else {
            out.copy_from_slice(g);
            return;
        };
        let l = if self.l.is_finite() && self.l > 0.0 {
            self.l
        } else {
            1.0
        };
        let sys = ModalSystem {
            lo: 1,
            hi: n0 - 2,
            bottom: Closure::Dirichlet,
            top: Closure::Dirichlet,
            alpha: 2.0 * l,
            beta: 2.0 / l,
        };
        let m = self.problem.state_dim();
        let nn = self.problem.grid.n_nodes();
        let mut col = vec![0.0; nn];
        let mut sol = vec![0.0; nn];
        for k in 0..m {
            for i in 0..nn {
                col[i] = g[i * m + k];
            }
            solver.solve(&sys, &col, &mut sol);
            for i in 0..nn {
                out[i * m + k] = sol[i];
            }
        }
    }

    fn max_step(&self, _x: &[f64], d: &[f64]) -> f64 {
        if !self.problem.sphere() {
            return f64::INFINITY;
        }
        let dm = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if dm > 0.0 {
            0.5 / dm
        } else {
            f64::INFINITY
        }
    }

    fn refresh(&mut self, iteration: usize, x: &[f64]) -> bool {
        if self.quadratic || iteration % self.refresh_every != 0 {
            return false;
        }
        self.scratch.values.copy_from_slice(x);
        let before = self.eval_at(self.l);
        let (lo, hi) = LOG2_L_RANGE;
        let p = self.problem;
        let s = &self.scratch;
        let res = golden_section_log2(
            |l| p.evaluate(s, Scale::Fixed(l), None).map(|e| e.total),
            lo,
            hi,
            SCALE_RTOL / std::f64::consts::LN_2,
        );
        match res {
            Ok((l, e)) if e < before => {
                self.l = l;
                true
            }
            _ => false,
        }
    }
}

impl CellObjective<'_> {
    fn eval_at(&self, l: f64) -> f64 {
        self.problem
            .evaluate(&self.scratch, Scale::Fixed(l), None)
            .map(|e| e.total)
            .unwrap_or(f64::INFINITY)
    }

    /// Best scale for the current scratch profile (golden section).
    pub(crate) fn fit_scale(&mut self, x: &[f64]) {
        if self.quadratic {
            return;
        }
        self.scratch.values.copy_from_slice(x);
        let (lo, hi) = LOG2_L_RANGE;
        let p = self.problem;
        let s = &self.scratch;
        if let Ok((l, _)) = golden_section_log2(
            |l| p.evaluate(s, Scale::Fixed(l), None).map(|e| e.total),
            lo,
            hi,
            SCALE_RTOL / std::f64::consts::LN_2,
        ) {
            self.l = l;
        }
    }
}

struct StartOutcome {
    report: StartReport,
    profile: StateField,
    l: f64,
    history: Vec<f64>,
}

fn run_start(
    problem: &CellProblem,
    profile: &StateField,
    strategy: &str,
    opts: &NcgOptions,
    precondition: bool,
) -> StartOutcome {
    let mut obj = CellObjective::new(problem, profile, 1.0);
    if !precondition {
        obj = obj.without_preconditioner();
    }
    obj.fit_scale(&profile.values);
    let r = minimize(&mut obj, &profile.values, opts);
    let mut out = profile.clone();
    out.values.copy_from_slice(&r.x);
    StartOutcome {
        report: StartReport {
            strategy: strategy.to_string(),
            energy: r.value,
            iterations: r.iterations,
            converged: r.converged,
            grad_max: r.grad_max,
        },
        profile: out,
        l: obj.l,
        history: r.history,
    }
}

/// Multistart minimization of the discrete cell energy over profiles and
/// the scale. A start that fails to converge is still reported, with
/// `converged = false`.
pub fn compute_cell_energy(
    jump: &JumpData,
    specs: &ModelSpecs,
    grid: &CellGrid,
    bc: BcVariant,
    opts: &CellOptions,
) -> Result<CellSolution> {
    let problem = CellProblem::new(grid, specs, jump, bc)?;
    let strategies = opts
        .starts
        .clone()
        .unwrap_or_else(|| CellOptions::default_starts(jump.jump_size()));
    let mut starts: Vec<(String, StateField)> = Vec::new();
    let mut stream = 0u64;
    for s in &strategies {
        let name = match s {
            InitStrategy::OneDimensionalTanh => "one_dimensional_tanh",
            InitStrategy::GeodesicSweep => "geodesic_sweep",
            InitStrategy::RandomPerturbed { .. } => "random_perturbed",
        };
        for p in init_profiles_mirrored(jump, specs, grid, s, opts.seed, stream, opts.mirror)? {
            starts.push((name.to_string(), p));
        }
        stream += s.count() as u64;
    }
    if starts.is_empty() {
        return Err(Error::BadStrategy("no start profiles".into()));
    }
    // Surfaces NeumannIncompatible and residual failures before optimizing.
    problem.assemble_energy(&starts[0].1, 1.0)?;
    let ncg = NcgOptions {
        gtol: opts.gtol_for(jump),
        etol: opts.etol,
        max_iter: opts.max_iter,
        window: 10,
        dtol: 1e-12,
    };
    let outcomes: Vec<StartOutcome> = if opts.parallel {
        starts
            .par_iter()
            .map(|(n, p)| run_start(&problem, p, n, &ncg, true))
            .collect()
    } else {
        starts
            .iter()
            .map(|(n, p)| run_start(&problem, p, n, &ncg, true))
            .collect()
    };
    finish(&problem, outcomes, opts.seed)
}

fn finish(problem: &CellProblem, outcomes: Vec<StartOutcome>, seed: u64) -> Result<CellSolution> {
    let energies: Vec<f64> = outcomes.iter().map(|o| o.report.energy).collect();
    let best = best_index(&energies).expect("at least one start");
    let o = &outcomes[best];
    let scale = if problem.specs.gradient.homogeneous_quadratic() {
        let e = problem.assemble_energy(&o.profile, 1.0)?;
        match optimize_scale(e.grad_term, e.b()) {
            Ok(s) => s.l_star,
            Err(Error::DegenerateScale) => 1.0,
            Err(e) => return Err(e),
        }
    } else {
        o.l
    };
    let energy = problem.assemble_energy(&o.profile, scale)?;
    Ok(CellSolution {
        profile: o.profile.clone(),
        l_star: scale,
        energy,
        bc: problem.bc,
        iterations: o.report.iterations,
        converged: o.report.converged,
        starts: energies,
        start_reports: outcomes.iter().map(|o| o.report.clone()).collect(),
        best_start: best,
        grad_max: o.report.grad_max,
        seed,
        history: o.history.clone(),
    })
}

/// Minimizes from explicit start profiles (used by the brute-force oracle).
pub fn minimize_from(
    problem: &CellProblem,
    starts: &[StateField],
    opts: &NcgOptions,
    precondition: bool,
    seed: u64,
) -> Result<CellSolution> {
    if starts.is_empty() {
        return Err(Error::BadStrategy("no start profiles".into()));
    }
    for s in starts {
        problem.check_admissible(s)?;
    }
    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .map(|p| run_start(problem, p, "explicit", opts, precondition))
        .collect();
    finish(problem, outcomes, seed)
}
