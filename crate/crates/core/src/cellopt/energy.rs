use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, EdgeField, ElementQuadrature, StateField};
use crate::model::{ConstraintSet, JumpData, ModelSpecs, SideModel};
use crate::poisson::{BcVariant, PoissonSolver, PoissonSource};

use super::scale::optimize_scale;

/// Scale at which the energy is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Fixed(f64),
    /// Closed-form optimal scale (quadratic gradient terms only).
    Optimal,
}

/// Terms of the discrete cell energy at one scale `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `∫ G(∇ζ)`.
    pub grad_term: f64,
    /// `∫ W(ζ)`.
    pub potential_term: f64,
    /// `∫ |∇H|²`.
    pub nonlocal_term: f64,
    pub scale: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn b(&self) -> f64 {
        self.potential_term + self.nonlocal_term
    }
}

const SIDE_EPS: f64 = 1e-14;

/// A fully specified discrete cell problem: grid, model, jump data and
/// boundary variant, with the reusable quadrature and potential solver.
#[derive(Debug, Clone)]
pub struct CellProblem {
    pub grid: CellGrid,
    pub specs: ModelSpecs,
    pub jump: JumpData,
    pub bc: BcVariant,
    quad: ElementQuadrature,
    minus: SideModel,
    plus: SideModel,
    solver: PoissonSolver,
    checked: PoissonSolver,
}

struct Scratch {
    corners: Vec<usize>,
    v: Vec<f64>,
    dv: Vec<Vec<f64>>,
    du: Vec<Vec<f64>>,
    jet: Vec<f64>,
    gjet: Vec<f64>,
    ga: Vec<Vec<f64>>,
    gva: Vec<f64>,
    jga: Vec<Vec<f64>>,
}

impl CellProblem {
    pub fn new(
        grid: &CellGrid,
        specs: &ModelSpecs,
        jump: &JumpData,
        bc: BcVariant,
    ) -> Result<Self> {
        let n = grid.frame().dim();
        if specs.space_dim() != n || jump.space_dim() != n || grid.axes() != n {
            return Err(Error::ShapeMismatch(format!(
                "space dimensions: model {}, jump {}, grid {}",
                specs.space_dim(),
                jump.space_dim(),
                n
            )));
        }
        if jump.state_dim() != specs.state_dim() {
            return Err(Error::ShapeMismatch(format!(
                "state dimensions: model {}, jump {}",
                specs.state_dim(),
                jump.state_dim()
            )));
        }
        if grid.frame().normal() != jump.nu.as_slice() {
            return Err(Error::ShapeMismatch(
                "grid frame is not built on the jump normal".into(),
            ));
        }
        if specs.constraint == ConstraintSet::UnitSphere
            && !(specs.constraint.contains(&jump.phi_plus, 1e-10)
                && specs.constraint.contains(&jump.phi_minus, 1e-10))
        {
            return Err(Error::InadmissibleProfile(
                "limiting states are off the unit sphere".into(),
            ));
        }
        let (minus, plus) = specs.sides_for(jump)?;
        let checked = PoissonSolver::new(grid, bc);
        Ok(CellProblem {
            grid: grid.clone(),
            specs: specs.clone(),
            jump: jump.clone(),
            bc,
            quad: ElementQuadrature::new(grid, 3, 2),
            minus,
            plus,
            solver: checked.clone().unchecked(),
            checked,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.specs.state_dim()
    }

    pub fn sphere(&self) -> bool {
        self.specs.constraint == ConstraintSet::UnitSphere
    }

    /// Pinned profile rows must carry `φ⁻` and `φ⁺` exactly; the sphere
    /// constraint must hold to `1e−10`.
    pub fn check_admissible(&self, profile: &StateField) -> Result<()> {
        profile.check(&self.grid)?;
        let m = self.state_dim();
        if profile.comps != m {
            return Err(Error::ShapeMismatch(
                "profile has the wrong number of components".into(),
            ));
        }
        let slab = self.grid.slab_len();
        let top0 = self.grid.n_nodes() - slab;
        for j in 0..slab {
            if profile.node(j) != self.jump.phi_minus.as_slice()
                || profile.node(top0 + j) != self.jump.phi_plus.as_slice()
            {
                return Err(Error::InadmissibleProfile(
                    "end rows are not pinned to φ∓".into(),
                ));
            }
        }
        if self.sphere() {
            for node in 0..self.grid.n_nodes() {
                if !self.specs.constraint.contains(profile.node(node), 1e-10) {
                    return Err(Error::InadmissibleProfile(format!(
                        "node {node} is off the unit sphere"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn assemble_energy(&self, profile: &StateField, l: f64) -> Result<EnergyBreakdown> {
        self.check_admissible(profile)?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::BadParams(format!("scale L = {l} must be positive")));
        }
        self.evaluate_with(profile, Scale::Fixed(l), None, &self.checked)
    }

    /// Gradient of the total energy at scale `l` with respect to every nodal
    /// value. Pinned rows are zero; on the sphere the gradient is projected
    /// on the tangent planes.
    pub fn energy_gradient(&self, profile: &StateField, l: f64) -> Result<StateField> {
        self.check_admissible(profile)?;
        let mut g = StateField::zeros(&self.grid, self.state_dim());
        self.evaluate_with(profile, Scale::Fixed(l), Some(&mut g), &self.checked)?;
        Ok(g)
    }

    /// Unchecked fast path used by the optimizer.
    pub(crate) fn evaluate(
        &self,
        profile: &StateField,
        scale: Scale,
        grad: Option<&mut StateField>,
    ) -> Result<EnergyBreakdown> {
        self.evaluate_with(profile, scale, grad, &self.solver)
    }

    fn side_weights(t: f64) -> (f64, f64) {
        if t > SIDE_EPS {
            (0.0, 1.0)
        } else if t < -SIDE_EPS {
            (1.0, 0.0)
        } else {
            (0.5, 0.5)
        }
    }

    fn evaluate_with(
        &self,
        profile: &StateField,
        scale: Scale,
        grad: Option<&mut StateField>,
        solver: &PoissonSolver,
    ) -> Result<EnergyBreakdown> {
        let grid = &self.grid;
        let m = self.state_dim();
        let n = grid.frame().dim();
        let basis = &grid.frame().basis;
        let sphere = self.sphere();
        let quadratic = self.specs.gradient.homogeneous_quadratic();
        let l_fixed = match scale {
            Scale::Fixed(l) => l,
            Scale::Optimal if quadratic => 1.0,
            Scale::Optimal => {
                return Err(Error::BadParams(
                    "closed-form scale needs a quadratic gradient term".into(),
                ))
            }
        };
        let g_int = &self.specs.gradient;
        let want = grad.is_some();
        let mut ga_field = StateField::zeros(grid, if want { m } else { 1 });
        let mut gb_field = ga_field.clone();
        let nc = self.quad.n_corners();
        let axes = grid.axes();
        let mut s = Scratch {
            corners: vec![0; nc],
            v: vec![0.0; m],
            dv: vec![vec![0.0; m]; axes],
            du: vec![vec![0.0; m]; axes],
            jet: vec![0.0; m * n],
            gjet: vec![0.0; m * n],
            ga: vec![vec![0.0; m]; axes],
            gva: vec![0.0; m],
            jga: vec![vec![0.0; m]; axes],
        };
        let mut a_sum = 0.0;
        let mut a_at_l = 0.0;
        let mut lj = vec![0.0; m * n];
        for base in 0..ElementQuadrature::n_elements(grid) {
            self.quad.corners(grid, base, &mut s.corners);
            for qp in &self.quad.points {
                s.v.iter_mut().for_each(|x| *x = 0.0);
                for d in s.dv.iter_mut() {
                    d.iter_mut().for_each(|x| *x = 0.0);
                }
                for (c, &node) in s.corners.iter().enumerate() {
                    let z = profile.node(node);
                    for k in 0..m {
                        s.v[k] += qp.shape[c] * z[k];
                    }
                    for &a in &self.quad.active {
                        let ds = qp.dshape[a][c];
                        for k in 0..m {
                            s.dv[a][k] += ds * z[k];
                        }
                    }
                }
                let mut r = 1.0;
                if sphere {
                    r = s.v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r < 1e-12 {
                        return Ok(infinite(l_fixed));
                    }
                    s.v.iter_mut().for_each(|x| *x /= r);
                    for &a in &self.quad.active {
                        let ud: f64 = s.v.iter().zip(&s.dv[a]).map(|(u, d)| u * d).sum();
                        for k in 0..m {
                            s.du[a][k] = (s.dv[a][k] - s.v[k] * ud) / r;
                        }
                    }
                } else {
                    for &a in &self.quad.active {
                        s.du[a].copy_from_slice(&s.dv[a]);
                    }
                }
                // From here on s.v holds the interpolated state u.
                s.jet.iter_mut().for_each(|x| *x = 0.0);
                for &a in &self.quad.active {
                    for k in 0..m {
                        for c in 0..n {
                            s.jet[k * n + c] += basis[a][c] * s.du[a][k];
                        }
                    }
                }
                a_sum += qp.weight * g_int.value(&s.jet);
                if !quadratic {
                    for (o, x) in lj.iter_mut().zip(&s.jet) {
                        *o = l_fixed * x;
                    }
                    a_at_l += qp.weight * g_int.value(&lj) / l_fixed;
                }
                if !want {
                    continue;
                }
                if quadratic {
                    g_int.gradient(&s.jet, &mut s.gjet);
                } else {
                    for (o, x) in lj.iter_mut().zip(&s.jet) {
                        *o = l_fixed * x;
                    }
                    g_int.gradient(&lj, &mut s.gjet);
                }
                s.gjet.iter_mut().for_each(|x| *x *= qp.weight);
                for &a in &self.quad.active {
                    for k in 0..m {
                        s.ga[a][k] = (0..n).map(|c| basis[a][c] * s.gjet[k * n + c]).sum();
                    }
                }
                if sphere {
                    let u = &s.v;
                    s.gva.iter_mut().for_each(|x| *x = 0.0);
                    let r2 = r * r;
                    for &a in &self.quad.active {
                        let c = &s.ga[a];
                        let g = &s.dv[a];
                        let cg: f64 = c.iter().zip(g).map(|(x, y)| x * y).sum();
                        let ug: f64 = u.iter().zip(g).map(|(x, y)| x * y).sum();
                        let uc: f64 = u.iter().zip(c).map(|(x, y)| x * y).sum();
                        for k in 0..m {
                            s.gva[k] +=
                                (-cg * u[k] - ug * c[k] - uc * g[k] + 3.0 * uc * ug * u[k]) / r2;
                            s.jga[a][k] = (c[k] - u[k] * uc) / r;
                        }
                    }
                } else {
                    s.gva.iter_mut().for_each(|x| *x = 0.0);
                    for &a in &self.quad.active {
                        s.jga[a].copy_from_slice(&s.ga[a]);
                    }
                }
                for (c, &node) in s.corners.iter().enumerate() {
                    let oa = ga_field.node_mut(node);
                    for k in 0..m {
                        let mut v = qp.shape[c] * s.gva[k];
                        for &a in &self.quad.active {
                            v += qp.dshape[a][c] * s.jga[a][k];
                        }
                        oa[k] += v;
                    }
                }
            }
        }
        let w_sum = match self.potential_term(profile, want.then_some(&mut gb_field)) {
            Some(w) => w,
            None => return Ok(infinite(l_fixed)),
        };
        let has_flux =
            !(self.specs.flux.is_zero() && self.minus.flux.is_zero() && self.plus.flux.is_zero());
        let nonlocal = if has_flux {
            let (src, mids) = self.source(profile);
            if mids.iter().flatten().any(|&r| r < 1e-12) {
                return Ok(infinite(l_fixed));
            }
            let pot = solver.solve(&src)?;
            if want {
                self.nonlocal_gradient(profile, &pot.grad_h, &mids, &mut gb_field);
            }
            pot.energy(grid)
        } else {
            0.0
        };
        let b = w_sum + nonlocal;
        let l = match scale {
            Scale::Fixed(l) => l,
            Scale::Optimal => match optimize_scale(a_sum, b) {
                Ok(o) => o.l_star,
                Err(_) => 1.0,
            },
        };
        if let Some(g) = grad {
            let fa = if quadratic { l } else { 1.0 };
            for ((o, x), y) in g
                .values
                .iter_mut()
                .zip(&ga_field.values)
                .zip(&gb_field.values)
            {
                *o = fa * x + y / l;
            }
            self.finish_gradient(profile, g);
        }
        let grad_part = if quadratic { l * a_sum } else { a_at_l };
        Ok(EnergyBreakdown {
            grad_term: a_sum,
            potential_term: w_sum,
            nonlocal_term: nonlocal,
            scale: l,
            total: grad_part + b / l,
        })
    }

    /// `∫ W(ζ)` by the midpoint rule on normal edges (node sampling
    /// laterally), accumulating its gradient into `grad`. `None` when a
    /// sphere-valued midpoint degenerates.
    fn potential_term(
        &self,
        profile: &StateField,
        mut grad: Option<&mut StateField>,
    ) -> Option<f64> {
        let grid = &self.grid;
        let m = self.state_dim();
        let mut mid = vec![0.0; m];
        let mut gw = vec![0.0; m];
        let mut gw2 = vec![0.0; m];
        let mut total = 0.0;
        for node in 0..grid.n_nodes() - grid.slab_len() {
            let up = grid.forward(node, 0).expect("normal edge");
            let r = self
                .edge_mid(profile, 0, node, &mut mid)
                .expect("normal edge");
            if self.sphere() && r < 1e-12 {
                return None;
            }
            let w = grid.edge_weight(0, node);
            let (wm, wp) = Self::side_weights(self.edge_t(0, node));
            let mut val = 0.0;
            if wm > 0.0 {
                val += wm * self.minus.potential.value(&mid);
            }
            if wp > 0.0 {
                val += wp * self.plus.potential.value(&mid);
            }
            total += w * val;
            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            gw.iter_mut().for_each(|x| *x = 0.0);
            for (side, c) in [(&self.minus, wm), (&self.plus, wp)] {
                if c > 0.0 {
                    side.potential.gradient(&mid, &mut gw2);
                    for k in 0..m {
                        gw[k] += c * w * gw2[k];
                    }
                }
            }
            if self.sphere() {
                let ug: f64 = mid.iter().zip(&gw).map(|(a, b)| a * b).sum();
                for k in 0..m {
                    gw[k] = (gw[k] - mid[k] * ug) / r;
                }
            }
            for k in 0..m {
                g.values[node * m + k] += 0.5 * gw[k];
                g.values[up * m + k] += 0.5 * gw[k];
            }
        }
        Some(total)
    }

    fn edge_mid(
        &self,
        profile: &StateField,
        a: usize,
        node: usize,
        out: &mut [f64],
    ) -> Option<f64> {
        let up = self.grid.forward(node, a)?;
        let (p, q) = (profile.node(node), profile.node(up));
        for k in 0..out.len() {
            out[k] = 0.5 * (p[k] + q[k]);
        }
        let mut r = 1.0;
        if self.sphere() {
            r = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r > 0.0 {
                out.iter_mut().for_each(|x| *x /= r);
            }
        }
        Some(r)
    }

    fn edge_t(&self, a: usize, node: usize) -> f64 {
        let t = self.grid.coord(node, 0);
        if a == 0 {
            t + 0.5 * self.grid.spacing()[0]
        } else {
            t
        }
    }

    /// Potential source `Ψ(ζ)` sampled on edges and end rows; also returns
    /// the norm of the raw edge average (needed for the sphere chain rule).
    pub fn source(&self, profile: &StateField) -> (PoissonSource, Vec<Vec<f64>>) {
        let grid = &self.grid;
        let m = self.state_dim();
        let n = grid.frame().dim();
        let l = self.specs.flux_rows();
        let nn = grid.n_nodes();
        let mut edges = EdgeField::zeros(grid, l);
        let mut mids = vec![vec![1.0; nn]; grid.axes()];
        let mut mid = vec![0.0; m];
        let mut psi = vec![0.0; l * n];
        let mut tmp = vec![0.0; l * n];
        for a in 0..grid.axes() {
            let b = &grid.frame().basis[a];
            for node in 0..nn {
                if !grid.has_edge(a, node) {
                    continue;
                }
                let r = self
                    .edge_mid(profile, a, node, &mut mid)
                    .expect("edge exists");
                mids[a][node] = r;
                self.side_flux(self.edge_t(a, node), &mid, &mut psi, &mut tmp);
                let out = edges.edge_mut(a, node);
                for rr in 0..l {
                    out[rr] = (0..n).map(|c| psi[rr * n + c] * b[c]).sum();
                }
            }
        }
        let slab = grid.slab_len();
        let nu = grid.frame().normal();
        let mut bottom = vec![0.0; slab * l];
        let mut top = vec![0.0; slab * l];
        for j in 0..slab {
            self.minus.flux.value(profile.node(j), &mut psi);
            for rr in 0..l {
                bottom[j * l + rr] = (0..n).map(|c| psi[rr * n + c] * nu[c]).sum();
            }
            self.plus.flux.value(profile.node(nn - slab + j), &mut psi);
            for rr in 0..l {
                top[j * l + rr] = (0..n).map(|c| psi[rr * n + c] * nu[c]).sum();
            }
        }
        (PoissonSource { edges, bottom, top }, mids)
    }

    fn side_flux(&self, t: f64, s: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let (wm, wp) = Self::side_weights(t);
        if wp == 0.0 {
            self.minus.flux.value(s, out);
        } else if wm == 0.0 {
            self.plus.flux.value(s, out);
        } else {
            self.minus.flux.value(s, out);
            self.plus.flux.value(s, tmp);
            for (o, x) in out.iter_mut().zip(tmp.iter()) {
                *o = 0.5 * (*o + x);
            }
        }
    }

    fn side_jacobian(&self, t: f64, s: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let (wm, wp) = Self::side_weights(t);
        if wp == 0.0 {
            self.minus.flux.jacobian(s, out);
        } else if wm == 0.0 {
            self.plus.flux.jacobian(s, out);
        } else {
            self.minus.flux.jacobian(s, out);
            self.plus.flux.jacobian(s, tmp);
            for (o, x) in out.iter_mut().zip(tmp.iter()) {
                *o = 0.5 * (*o + x);
            }
        }
    }

    fn nonlocal_gradient(
        &self,
        profile: &StateField,
        grad_h: &EdgeField,
        mids: &[Vec<f64>],
        out: &mut StateField,
    ) {
        let grid = &self.grid;
        let m = self.state_dim();
        let n = grid.frame().dim();
        let rows = self.specs.flux_rows();
        let mut mid = vec![0.0; m];
        let mut jac = vec![0.0; rows * n * m];
        let mut tmp = vec![0.0; rows * n * m];
        let mut gm = vec![0.0; m];
        for a in 0..grid.axes() {
            let b = &grid.frame().basis[a];
            for node in 0..grid.n_nodes() {
                if !grid.has_edge(a, node) {
                    continue;
                }
                let up = self
                    .edge_mid(profile, a, node, &mut mid)
                    .and(grid.forward(node, a))
                    .expect("edge");
                self.side_jacobian(self.edge_t(a, node), &mid, &mut jac, &mut tmp);
                let w = 2.0 * grid.edge_weight(a, node);
                let gh = grad_h.edge(a, node);
                for k in 0..m {
                    let mut acc = 0.0;
                    for rr in 0..rows {
                        let d: f64 = (0..n).map(|c| b[c] * jac[(rr * n + c) * m + k]).sum();
                        acc += gh[rr] * d;
                    }
                    gm[k] = w * acc;
                }
                if self.sphere() {
                    let r = mids[a][node];
                    let ug: f64 = mid.iter().zip(&gm).map(|(x, y)| x * y).sum();
                    for k in 0..m {
                        gm[k] = (gm[k] - mid[k] * ug) / r;
                    }
                }
                for k in 0..m {
                    out.values[node * m + k] += 0.5 * gm[k];
                    out.values[up * m + k] += 0.5 * gm[k];
                }
            }
        }
    }

    fn finish_gradient(&self, profile: &StateField, g: &mut StateField) {
        let slab = self.grid.slab_len();
        let nn = self.grid.n_nodes();
        let m = self.state_dim();
        g.values[..slab * m].iter_mut().for_each(|x| *x = 0.0);
        g.values[(nn - slab) * m..]
            .iter_mut()
            .for_each(|x| *x = 0.0);
        if self.sphere() {
            for node in slab..nn - slab {
                let z = profile.node(node);
                let gn = g.node_mut(node);
                let d: f64 = z.iter().zip(gn.iter()).map(|(a, b)| a * b).sum();
                for k in 0..m {
                    gn[k] -= d * z[k];
                }
            }
        }
    }
}

fn infinite(l: f64) -> EnergyBreakdown {
    EnergyBreakdown {
        grad_term: f64::INFINITY,
        potential_term: f64::INFINITY,
        nonlocal_term: f64::INFINITY,
        scale: l,
        total: f64::INFINITY,
    }
}
