//! Space-time shock-layer cell energies for conservation laws, computed in
//! the divergence-constrained potential formulation.

mod precond;
mod problem;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use problem::{space_time_divergence, ShockProblem};

use crate::cellopt::{best_index, minimize, CellSolution, NcgOptions, Scale, StartReport};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, StateField, TensorField};
use crate::model::{validate_rankine_hugoniot, EntropyPair, FluxMap, SpaceTimeJumpData};
use crate::poisson::BcVariant;
use crate::rng::uniform;
use problem::ShockObjective;

/// Tolerance of the Rankine–Hugoniot check done before any shock solve.
pub const RH_TOL: f64 = 1e-8;

/// Clamped cubic ramp: `0` for `t ≤ c − w/2`, `1` for `t ≥ c + w/2`, and
/// `3x² − 2x³` in between, with `w = 1 − 2|c|` so the ramp stays inside the
/// cell.
pub fn cubic_ramp(t: f64, center: f64) -> f64 {
    let width = 1.0 - 2.0 * center.abs();
    let x = ((t - center) / width + 0.5).clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Fields `(ζ₀, γ₀)` satisfying the space-time constraint and the end-row
/// pinning; the unknown potential perturbs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFields {
    pub zeta0: StateField,
    /// `k × N` per node.
    pub gamma0: TensorField,
}

impl BaseFields {
    pub(crate) fn check_shape(&self, grid: &CellGrid, k: usize, n: usize) -> Result<()> {
        self.zeta0.check(grid)?;
        if self.zeta0.comps != k
            || self.gamma0.rows != k
            || self.gamma0.cols != n
            || self.gamma0.values.len() != grid.n_nodes() * k * n
        {
            return Err(Error::ShapeMismatch(
                "base fields do not fit the shock cell".into(),
            ));
        }
        Ok(())
    }

    /// Max-norm of the discrete `∂_s ζ₀ + div_y γ₀`.
    pub fn constraint_residual(&self, grid: &CellGrid) -> f64 {
        space_time_divergence(grid, &self.zeta0, &self.gamma0)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn rh_residuals(jump: &SpaceTimeJumpData, flux: &dyn FluxMap) -> Result<Vec<f64>> {
    let report = validate_rankine_hugoniot(jump, flux, RH_TOL);
    if report.get("shape").is_some() {
        return Err(Error::ShapeMismatch(
            "flux does not fit the space-time jump".into(),
        ));
    }
    let res: Vec<f64> = report.checks.iter().map(|c| c.value).collect();
    if !report.pass {
        let worst = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        return Err(Error::RankineHugoniotViolated(worst));
    }
    Ok(res)
}

pub fn build_base_fields(
    jump: &SpaceTimeJumpData,
    flux: &dyn FluxMap,
    grid: &CellGrid,
) -> Result<BaseFields> {
    build_base_fields_centered(jump, flux, grid, 0.0)
}

/// As [`build_base_fields`] with the ramp centred at normal coordinate
/// `center` (`|center| < 1/2`).
pub fn build_base_fields_centered(
    jump: &SpaceTimeJumpData,
    flux: &dyn FluxMap,
    grid: &CellGrid,
    center: f64,
) -> Result<BaseFields> {
    if !(center.abs() < 0.5) {
        return Err(Error::BadParams(format!(
            "ramp center {center} outside the cell"
        )));
    }
    rh_residuals(jump, flux)?;
    let (k, n) = (jump.state_dim(), jump.space_dim());
    if grid.axes() != n + 1 {
        return Err(Error::ShapeMismatch("shock cell needs N+1 axes".into()));
    }
    let nu_y = jump.nu_y();
    let c = jump.nu_s() / nu_y.iter().map(|x| x * x).sum::<f64>();
    let mut fm = vec![0.0; k * n];
    let mut fp = vec![0.0; k * n];
    flux.value(&jump.u_minus, &mut fm);
    flux.value(&jump.u_plus, &mut fp);
    let mut tan = vec![0.0; k * n];
    for r in 0..k {
        let du = jump.u_plus[r] - jump.u_minus[r];
        for j in 0..n {
            tan[r * n + j] = fp[r * n + j] - fm[r * n + j] + c * du * nu_y[j];
        }
    }
    let n0 = grid.dims()[0];
    let mut zeta0 = StateField::zeros(grid, k);
    let mut gamma0 = TensorField::zeros(grid, k, n);
    for node in 0..grid.n_nodes() {
        let i = grid.normal_index(node);
        let z = zeta0.node_mut(node);
        if i == 0 {
            z.copy_from_slice(&jump.u_minus);
            gamma0.node_mut(node).copy_from_slice(&fm);
            continue;
        }
        if i == n0 - 1 {
            z.copy_from_slice(&jump.u_plus);
            gamma0.node_mut(node).copy_from_slice(&fp);
            continue;
        }
        let theta = cubic_ramp(grid.coord(node, 0), center);
        for r in 0..k {
            z[r] = jump.u_minus[r] + theta * (jump.u_plus[r] - jump.u_minus[r]);
        }
        let z = z.to_vec();
        let g = gamma0.node_mut(node);
        for r in 0..k {
            for j in 0..n {
                g[r * n + j] =
                    fm[r * n + j] + theta * tan[r * n + j] - c * (z[r] - jump.u_minus[r]) * nu_y[j];
            }
        }
    }
    Ok(BaseFields { zeta0, gamma0 })
}

/// `F̂_ν(u) = F(u) + (ν_s/|ν_y|²) u ⊗ ν_y`.
#[derive(Debug, Clone)]
pub struct ReducedFlux {
    inner: Arc<dyn FluxMap>,
    coeff: f64,
    nu_y: Vec<f64>,
}

impl FluxMap for ReducedFlux {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn space_dim(&self) -> usize {
        self.inner.space_dim()
    }
    fn value(&self, s: &[f64], out: &mut [f64]) {
        self.inner.value(s, out);
        let n = self.nu_y.len();
        for r in 0..self.rows() {
            for j in 0..n {
                out[r * n + j] += self.coeff * s[r] * self.nu_y[j];
            }
        }
    }
    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        self.inner.jacobian(s, out);
        let (n, k) = (self.nu_y.len(), self.state_dim());
        for r in 0..self.rows() {
            for j in 0..n {
                out[(r * n + j) * k + r] += self.coeff * self.nu_y[j];
            }
        }
    }
}

/// Shock problem seen in the frame moving with the shock.
#[derive(Debug, Clone)]
pub struct StaticReduction {
    pub reduced_flux: Arc<dyn FluxMap>,
    /// `(ν_y/|ν_y|, 0)`.
    pub nu_prime: Vec<f64>,
    /// `|ν_y|`.
    pub factor: f64,
}

impl StaticReduction {
    /// Same states with the normal replaced by `ν′`.
    pub fn reduced_jump(&self, jump: &SpaceTimeJumpData) -> Result<SpaceTimeJumpData> {
        if jump.is_degenerate() {
            SpaceTimeJumpData::no_jump(jump.u_plus.clone(), self.nu_prime.clone())
        } else {
            SpaceTimeJumpData::new(
                jump.u_plus.clone(),
                jump.u_minus.clone(),
                self.nu_prime.clone(),
            )
        }
    }
}

pub fn reduce_to_static_frame(
    jump: &SpaceTimeJumpData,
    flux: Arc<dyn FluxMap>,
) -> Result<StaticReduction> {
    let nu_y = jump.nu_y().to_vec();
    let norm = nu_y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateNormal);
    }
    if flux.space_dim() != nu_y.len() {
        return Err(Error::ShapeMismatch(
            "flux does not fit the space-time jump".into(),
        ));
    }
    let mut nu_prime: Vec<f64> = nu_y.iter().map(|x| x / norm).collect();
    nu_prime.push(0.0);
    let coeff = jump.nu_s() / (norm * norm);
    let reduced_flux: Arc<dyn FluxMap> = if coeff == 0.0 {
        flux
    } else {
        Arc::new(ReducedFlux {
            inner: flux,
            coeff,
            nu_y,
        })
    };
    Ok(StaticReduction {
        reduced_flux,
        nu_prime,
        factor: norm,
    })
}

/// Samples of the 1D oracle integral.
pub const ORACLE_SAMPLES: usize = 10_000;

/// `∫ 2|η''(s)|·|F(s) − F(u⁻)| ds` from `u⁻` to `u⁺` (composite Simpson on
/// [`ORACLE_SAMPLES`] intervals): the lower envelope of the 1D shock cell
/// energy for scalar data that are stationary in the frame of `F`.
pub fn viscous_profile_oracle_1d(
    u_minus: f64,
    u_plus: f64,
    flux: &dyn FluxMap,
    entropy: &dyn EntropyPair,
) -> Result<f64> {
    if flux.state_dim() != 1
        || flux.rows() != 1
        || flux.space_dim() != 1
        || entropy.state_dim() != 1
    {
        return Err(Error::NonScalar);
    }
    let f = |s: f64| {
        let mut o = [0.0];
        flux.value(&[s], &mut o);
        o[0]
    };
    let (fm, fp) = (f(u_minus), f(u_plus));
    let gap = (fp - fm).abs();
    if gap > RH_TOL * (1.0 + fm.abs().max(fp.abs())) {
        return Err(Error::RankineHugoniotViolated(gap));
    }
    if u_minus == u_plus {
        return Ok(0.0);
    }
    let n = ORACLE_SAMPLES;
    let h = (u_plus - u_minus) / n as f64;
    let integrand = |s: f64| {
        let mut hs = [0.0];
        entropy.hess(&[s], &mut hs);
        2.0 * hs[0].abs() * (f(s) - fm).abs()
    };
    let mut sum = integrand(u_minus) + integrand(u_plus);
    for i in 1..n {
        let s = u_minus + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(s);
    }
    Ok(sum * h.abs() / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockOptions {
    /// Gradient tolerance; `None` means `1e−6·(1 + |u⁺ − u⁻|)`.
    pub gtol: Option<f64>,
    pub etol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Random starts besides the zero potential.
    pub random_starts: usize,
    /// Size of the induced `ζ` perturbation; `None` means `0.1·|u⁺ − u⁻|`.
    pub amplitude: Option<f64>,
    /// Centre of the base-field ramp in the normal coordinate.
    pub center: f64,
    pub parallel: bool,
}

impl Default for ShockOptions {
    fn default() -> Self {
        ShockOptions {
            gtol: None,
            etol: 1e-8,
            max_iter: 5000,
            seed: 0,
            random_starts: 2,
            amplitude: None,
            center: 0.0,
            parallel: true,
        }
    }
}

/// Shock cell solution: the common cell diagnostics (profile `ζ`, with the
/// flux mismatch `∫|γ − F(ζ)|²` reported as `potential_term`) plus the
/// potential, `γ` and the normal data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSolution {
    pub cell: CellSolution,
    pub potential: TensorField,
    pub gamma: TensorField,
    pub nu: Vec<f64>,
    pub nu_y_norm: f64,
    pub rh_residuals: Vec<f64>,
    /// Max-norm of `∂_s ζ + div_y γ` at the reported solution.
    pub constraint_residual: f64,
}

fn jump_size(jump: &SpaceTimeJumpData) -> f64 {
    jump.u_plus
        .iter()
        .zip(&jump.u_minus)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Smooth random potential on the free rows, normalised so that the induced
/// `ζ` perturbation has size about `amplitude`.
fn random_potential(problem: &ShockProblem, amplitude: f64, seed: u64, stream: u64) -> Vec<f64> {
    let grid = &problem.grid;
    let n0 = grid.dims()[0];
    let c = problem.potential_comps();
    let lat: Vec<usize> = (1..grid.axes())
        .filter(|&a| !grid.is_collapsed(a))
        .collect();
    let mut modes: Vec<Vec<(usize, i32, bool)>> = vec![vec![]];
    for &a in &lat {
        let mut next = Vec::new();
        for base in &modes {
            for q in 0..=2 {
                for sine in [false, true] {
                    if q == 0 && sine {
                        continue;
                    }
                    let mut v = base.clone();
                    v.push((a, q, sine));
                    next.push(v);
                }
            }
        }
        modes = next;
    }
    let scale = amplitude / ((3 * modes.len()) as f64).sqrt();
    let pi = std::f64::consts::PI;
    let mut w = vec![0.0; grid.n_nodes() * c];
    for node in 0..grid.n_nodes() {
        if !problem.is_free(node) {
            continue;
        }
        let i = grid.normal_index(node);
        let x = (i - 1) as f64 / (n0 - 2) as f64;
        let mut code = 0u64;
        for p in 1..=3u32 {
            let sn = (p as f64 * pi * x).sin() / (p as f64 * pi);
            for md in &modes {
                let mut lf = 1.0;
                for &(a, q, sine) in md {
                    let ph = 2.0 * pi * q as f64 * grid.coord(node, a);
                    lf *= if sine { ph.sin() } else { ph.cos() };
                }
                for q in 0..c {
                    w[node * c + q] += scale * uniform(seed, stream, code, q as u64) * sn * lf;
                }
                code += 1;
            }
        }
    }
    w
}

/// Multistart minimization over the potential and the scale: the zero
/// potential first, then `random_starts` smooth random potentials.
pub fn compute_shock_cell_energy(
    jump: &SpaceTimeJumpData,
    flux: Arc<dyn FluxMap>,
    entropy: Arc<dyn EntropyPair>,
    grid: &CellGrid,
    opts: &ShockOptions,
) -> Result<ShockSolution> {
    let rh = rh_residuals(jump, flux.as_ref())?;
    let base = build_base_fields_centered(jump, flux.as_ref(), grid, opts.center)?;
    let problem = ShockProblem::new(grid, jump, flux, entropy, base)?;
    let size = jump_size(jump);
    let amp = opts.amplitude.unwrap_or(0.1 * size);
    let mut starts = vec![(
        "zero_potential".to_string(),
        vec![0.0; grid.n_nodes() * problem.potential_comps()],
    )];
    for r in 0..opts.random_starts {
        starts.push((
            "random_potential".to_string(),
            random_potential(&problem, amp, opts.seed, r as u64),
        ));
    }
    let ncg = NcgOptions {
        gtol: opts.gtol.unwrap_or(1e-6 * (1.0 + size)),
        etol: opts.etol,
        max_iter: opts.max_iter,
        window: 10,
        dtol: 1e-12,
    };
    let run = |(name, w0): &(String, Vec<f64>)| {
        let mut obj = ShockObjective {
            problem: &problem,
            l: 1.0,
        };
        let r = minimize(&mut obj, w0, &ncg);
        let report = StartReport {
            strategy: name.clone(),
            energy: r.value,
            iterations: r.iterations,
            converged: r.converged,
            grad_max: r.grad_max,
        };
        (report, r.x, r.history)
    };
    let outcomes: Vec<(StartReport, Vec<f64>, Vec<f64>)> = if opts.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    let energies: Vec<f64> = outcomes.iter().map(|o| o.0.energy).collect();
    let best = best_index(&energies).expect("at least one start");
    let (report, x, history) = &outcomes[best];
    let mut w = problem.zero_potential();
    w.values.copy_from_slice(x);
    let energy = problem.evaluate(x, Scale::Optimal, None);
    let (zeta, gamma) = problem.fields(&w)?;
    let constraint_residual = problem.constraint_residual(&w)?;
    let cell = CellSolution {
        profile: zeta,
        l_star: energy.scale,
        energy,
        bc: BcVariant::DirichletCell,
        iterations: report.iterations,
        converged: report.converged,
        starts: energies.clone(),
        start_reports: outcomes.iter().map(|o| o.0.clone()).collect(),
        best_start: best,
        grad_max: report.grad_max,
        seed: opts.seed,
        history: history.clone(),
    };
    Ok(ShockSolution {
        cell,
        potential: w,
        gamma,
        nu: jump.nu.clone(),
        nu_y_norm: jump.nu_y().iter().map(|x| x * x).sum::<f64>().sqrt(),
        rh_residuals: rh,
        constraint_residual,
    })
}
