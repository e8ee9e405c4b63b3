use std::sync::Arc;

use super::precond::ModalBands;
use super::BaseFields;
use crate::cellopt::{optimize_scale, EnergyBreakdown, Objective, Scale};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, ElementQuadrature, StateField, TensorField};
use crate::model::{EntropyPair, FluxMap, SpaceTimeJumpData};

/// Discrete shock cell: space-time grid in the frame of `ν`, base fields and
/// the evaluators of the flux and entropy.
///
/// The unknown is the potential `w ∈ ℝ^{k×N}` per node. With `∂_a` the
/// forward difference along frame axis `a` (zero on the top normal row), the
/// physical derivatives are `∂_{x_j} = Σ_a b_a[j] ∂_a`, where `x_j` for `j < N`
/// are the spatial coordinates and `x_N = s`. The fields are
/// `ζ = ζ₀ + Σ_j ∂_{y_j} w_{·j}` and `γ = γ₀ − ∂_s w`.
#[derive(Debug, Clone)]
pub struct ShockProblem {
    pub grid: CellGrid,
    pub jump: SpaceTimeJumpData,
    pub base: BaseFields,
    flux: Arc<dyn FluxMap>,
    entropy: Arc<dyn EntropyPair>,
    quad: ElementQuadrature,
    bands: Option<Arc<ModalBands>>,
}

impl ShockProblem {
    pub fn new(
        grid: &CellGrid,
        jump: &SpaceTimeJumpData,
        flux: Arc<dyn FluxMap>,
        entropy: Arc<dyn EntropyPair>,
        base: BaseFields,
    ) -> Result<Self> {
        let k = jump.state_dim();
        let n = jump.space_dim();
        if grid.axes() != n + 1
            || flux.state_dim() != k
            || flux.rows() != k
            || flux.space_dim() != n
        {
            return Err(Error::ShapeMismatch(format!(
                "shock cell: grid axes {}, flux {}→{}×{}, jump k={k} N={n}",
                grid.axes(),
                flux.state_dim(),
                flux.rows(),
                flux.space_dim()
            )));
        }
        if entropy.state_dim() != k {
            return Err(Error::ShapeMismatch(
                "entropy does not fit the state dimension".into(),
            ));
        }
        if grid.frame().normal() != jump.nu.as_slice() {
            return Err(Error::ShapeMismatch(
                "grid frame is not built on the space-time normal".into(),
            ));
        }
        base.check_shape(grid, k, n)?;
        let n0 = grid.dims()[0];
        let bands = (n0 >= 5).then(|| Arc::new(ModalBands::new(grid, n, 2, n0 - 2)));
        Ok(ShockProblem {
            grid: grid.clone(),
            jump: jump.clone(),
            base,
            flux,
            entropy,
            quad: ElementQuadrature::new(grid, 3, 2),
            bands,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.jump.state_dim()
    }

    pub fn space_dim(&self) -> usize {
        self.jump.space_dim()
    }

    /// Entries of `w` per node.
    pub fn potential_comps(&self) -> usize {
        self.state_dim() * self.space_dim()
    }

    /// Normal rows on which `w` may be nonzero: `2..=n₀−2`. The induced
    /// perturbation then vanishes on both end rows.
    pub fn free_rows(&self) -> (usize, usize) {
        (2, self.grid.dims()[0] - 2)
    }

    pub fn is_free(&self, node: usize) -> bool {
        let (lo, hi) = self.free_rows();
        let i = self.grid.normal_index(node);
        lo <= i && i <= hi
    }

    pub fn zero_potential(&self) -> TensorField {
        TensorField::zeros(&self.grid, self.state_dim(), self.space_dim())
    }

    fn check_potential(&self, w: &TensorField) -> Result<()> {
        if w.rows != self.state_dim()
            || w.cols != self.space_dim()
            || w.values.len() != self.grid.n_nodes() * self.potential_comps()
        {
            return Err(Error::ShapeMismatch("potential has the wrong shape".into()));
        }
        let c = self.potential_comps();
        for node in 0..self.grid.n_nodes() {
            if !self.is_free(node) && w.values[node * c..(node + 1) * c].iter().any(|&x| x != 0.0) {
                return Err(Error::InadmissibleProfile(
                    "potential is nonzero on a pinned row".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(ζ, γ)` induced by `w`.
    pub fn fields(&self, w: &TensorField) -> Result<(StateField, TensorField)> {
        self.check_potential(w)?;
        Ok(self.fields_unchecked(&w.values))
    }

    fn fields_unchecked(&self, w: &[f64]) -> (StateField, TensorField) {
        let grid = &self.grid;
        let (k, n) = (self.state_dim(), self.space_dim());
        let c = k * n;
        let basis = &grid.frame().basis;
        let mut zeta = self.base.zeta0.clone();
        let mut gamma = self.base.gamma0.clone();
        let mut dw = vec![0.0; w.len()];
        for a in 0..grid.axes() {
            if grid.is_collapsed(a) {
                continue;
            }
            forward_diff(grid, a, w, c, &mut dw);
            let (by, bs) = (&basis[a][..n], basis[a][n]);
            for node in 0..grid.n_nodes() {
                let d = &dw[node * c..(node + 1) * c];
                for r in 0..k {
                    let mut div = 0.0;
                    for j in 0..n {
                        div += by[j] * d[r * n + j];
                        gamma.values[node * c + r * n + j] -= bs * d[r * n + j];
                    }
                    zeta.values[node * k + r] += div;
                }
            }
        }
        (zeta, gamma)
    }

    /// Max-norm of `∂_s ζ + Σ_j ∂_{y_j} γ_{·j}` over all nodes.
    pub fn constraint_residual(&self, w: &TensorField) -> Result<f64> {
        let (zeta, gamma) = self.fields(w)?;
        Ok(space_time_divergence(&self.grid, &zeta, &gamma)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs())))
    }

    pub fn assemble_energy(&self, w: &TensorField, l: f64) -> Result<EnergyBreakdown> {
        self.check_potential(w)?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::BadParams(format!("scale L = {l}")));
        }
        Ok(self.evaluate(&w.values, Scale::Fixed(l), None))
    }

    /// Energy at `L` (or the optimal `L`) and, when requested, its gradient
    /// with respect to the free entries of `w` (zero elsewhere).
    pub(crate) fn evaluate(
        &self,
        w: &[f64],
        scale: Scale,
        grad: Option<&mut [f64]>,
    ) -> EnergyBreakdown {
        let grid = &self.grid;
        let (k, n) = (self.state_dim(), self.space_dim());
        let basis = &grid.frame().basis;
        let (zeta, gamma) = self.fields_unchecked(w);
        let nn = grid.n_nodes();
        let mut p = vec![0.0; nn * k];
        for node in 0..nn {
            self.entropy
                .grad(zeta.node(node), &mut p[node * k..(node + 1) * k]);
        }
        let want = grad.is_some();
        let mut gp = vec![0.0; if want { nn * k } else { 0 }];
        let mut gza = vec![0.0; if want { nn * k } else { 0 }];
        let mut gzb = vec![0.0; if want { nn * k } else { 0 }];
        let mut ggb = vec![0.0; if want { nn * k * n } else { 0 }];
        let nc = self.quad.n_corners();
        let mut corners = vec![0; nc];
        let mut dp = vec![vec![0.0; k]; grid.axes()];
        let mut jet = vec![0.0; k * n];
        let mut zq = vec![0.0; k];
        let mut gq = vec![0.0; k * n];
        let mut fq = vec![0.0; k * n];
        let mut jf = vec![0.0; k * n * k];
        let mut jtr = vec![0.0; k];
        let mut dsh = vec![0.0; n];
        let (mut a_sum, mut b_sum) = (0.0, 0.0);
        for base in 0..ElementQuadrature::n_elements(grid) {
            self.quad.corners(grid, base, &mut corners);
            for qp in &self.quad.points {
                zq.iter_mut().for_each(|x| *x = 0.0);
                gq.iter_mut().for_each(|x| *x = 0.0);
                for d in dp.iter_mut() {
                    d.iter_mut().for_each(|x| *x = 0.0);
                }
                for (c, &node) in corners.iter().enumerate() {
                    let sh = qp.shape[c];
                    for r in 0..k {
                        zq[r] += sh * zeta.values[node * k + r];
                    }
                    for (g, v) in gq.iter_mut().zip(gamma.node(node)) {
                        *g += sh * v;
                    }
                    for &a in &self.quad.active {
                        let ds = qp.dshape[a][c];
                        for r in 0..k {
                            dp[a][r] += ds * p[node * k + r];
                        }
                    }
                }
                jet.iter_mut().for_each(|x| *x = 0.0);
                for &a in &self.quad.active {
                    for r in 0..k {
                        for j in 0..n {
                            jet[r * n + j] += basis[a][j] * dp[a][r];
                        }
                    }
                }
                a_sum += qp.weight * jet.iter().map(|x| x * x).sum::<f64>();
                self.flux.value(&zq, &mut fq);
                for (f, g) in fq.iter_mut().zip(&gq) {
                    *f = g - *f;
                }
                b_sum += qp.weight * fq.iter().map(|x| x * x).sum::<f64>();
                if !want {
                    continue;
                }
                self.flux.jacobian(&zq, &mut jf);
                for l in 0..k {
                    jtr[l] = (0..k * n).map(|rj| jf[rj * k + l] * fq[rj]).sum();
                }
                for (c, &node) in corners.iter().enumerate() {
                    for j in 0..n {
                        dsh[j] = self
                            .quad
                            .active
                            .iter()
                            .map(|&a| basis[a][j] * qp.dshape[a][c])
                            .sum();
                    }
                    let sh = qp.shape[c];
                    for r in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += jet[r * n + j] * dsh[j];
                        }
                        gp[node * k + r] += 2.0 * qp.weight * s;
                        gzb[node * k + r] -= 2.0 * qp.weight * sh * jtr[r];
                    }
                    for (rj, g) in ggb[node * k * n..(node + 1) * k * n].iter_mut().enumerate() {
                        *g += 2.0 * qp.weight * sh * fq[rj];
                    }
                }
            }
        }
        let (l, total) = match scale {
            Scale::Fixed(l) => (l, l * a_sum + b_sum / l),
            Scale::Optimal => match optimize_scale(a_sum, b_sum) {
                Ok(s) => (s.l_star, s.e_star),
                Err(_) => (1.0, a_sum + b_sum),
            },
        };
        let breakdown = EnergyBreakdown {
            grad_term: a_sum,
            potential_term: b_sum,
            nonlocal_term: 0.0,
            scale: l,
            total,
        };
        let Some(out) = grad else {
            return breakdown;
        };
        let mut h = vec![0.0; k * k];
        for node in 0..nn {
            self.entropy.hess(zeta.node(node), &mut h);
            for r in 0..k {
                gza[node * k + r] = (0..k).map(|q| h[q * k + r] * gp[node * k + q]).sum();
            }
        }
        // Nodal sensitivities of ζ and γ at scale L.
        let gz: Vec<f64> = gza.iter().zip(&gzb).map(|(a, b)| l * a + b / l).collect();
        let gg: Vec<f64> = ggb.iter().map(|b| b / l).collect();
        let c = k * n;
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut dd = vec![0.0; nn * c];
        for a in 0..grid.axes() {
            if grid.is_collapsed(a) {
                continue;
            }
            let (by, bs) = (&basis[a][..n], basis[a][n]);
            for node in 0..nn {
                for r in 0..k {
                    for j in 0..n {
                        dd[node * c + r * n + j] =
                            by[j] * gz[node * k + r] - bs * gg[node * c + r * n + j];
                    }
                }
            }
            forward_diff_transpose_add(grid, a, &dd, c, out);
        }
        for node in 0..nn {
            if !self.is_free(node) {
                out[node * c..(node + 1) * c]
                    .iter_mut()
                    .for_each(|x| *x = 0.0);
            }
        }
        breakdown
    }
}

/// Nodal forward difference along axis `a`; zero on the top normal row.
pub(crate) fn forward_diff(grid: &CellGrid, a: usize, f: &[f64], comps: usize, out: &mut [f64]) {
    let h = grid.spacing()[a];
    for node in 0..grid.n_nodes() {
        let o = &mut out[node * comps..(node + 1) * comps];
        match grid.forward(node, a) {
            Some(up) if !grid.is_collapsed(a) => {
                for q in 0..comps {
                    o[q] = (f[up * comps + q] - f[node * comps + q]) / h;
                }
            }
            _ => o.iter_mut().for_each(|x| *x = 0.0),
        }
    }
}

/// `out += ∂_aᵀ g` for the operator of [`forward_diff`].
pub(crate) fn forward_diff_transpose_add(
    grid: &CellGrid,
    a: usize,
    g: &[f64],
    comps: usize,
    out: &mut [f64],
) {
    if grid.is_collapsed(a) {
        return;
    }
    let h = grid.spacing()[a];
    for node in 0..grid.n_nodes() {
        if let Some(up) = grid.forward(node, a) {
            for q in 0..comps {
                let v = g[node * comps + q] / h;
                out[up * comps + q] += v;
                out[node * comps + q] -= v;
            }
        }
    }
}

/// `∂_s ζ + Σ_j ∂_{y_j} γ_{·j}` with the same difference operators as the
/// potential parametrization.
pub fn space_time_divergence(grid: &CellGrid, zeta: &StateField, gamma: &TensorField) -> Vec<f64> {
    let k = zeta.comps;
    let n = gamma.cols;
    let basis = &grid.frame().basis;
    let nn = grid.n_nodes();
    let mut out = vec![0.0; nn * k];
    let mut dz = vec![0.0; nn * k];
    let mut dg = vec![0.0; nn * k * n];
    for a in 0..grid.axes() {
        if grid.is_collapsed(a) {
            continue;
        }
        forward_diff(grid, a, &zeta.values, k, &mut dz);
        forward_diff(grid, a, &gamma.values, k * n, &mut dg);
        for node in 0..nn {
            for r in 0..k {
                let mut v = basis[a][n] * dz[node * k + r];
                for j in 0..n {
                    v += basis[a][j] * dg[(node * k + r) * n + j];
                }
                out[node * k + r] += v;
            }
        }
    }
    out
}

/// NCG objective over the full nodal vector of `w` at the optimal scale.
pub(crate) struct ShockObjective<'a> {
    pub problem: &'a ShockProblem,
    pub l: f64,
}

impl Objective for ShockObjective<'_> {
    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let e = self.problem.evaluate(x, Scale::Optimal, grad);
        if e.total.is_finite() {
            self.l = e.scale;
        }
        e.total
    }

    /// `h₀·max|g|`: the gradient with respect to the induced perturbation
    /// of `(ζ, γ)` rather than the potential itself.
    fn gradient_measure(&self, g: &[f64]) -> f64 {
        self.problem.grid.spacing()[0] * g.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn to_tangent(&self, _x: &[f64], v: &mut [f64]) {
        let c = self.problem.potential_comps();
        for node in 0..self.problem.grid.n_nodes() {
            if !self.problem.is_free(node) {
                v[node * c..(node + 1) * c]
                    .iter_mut()
                    .for_each(|x| *x = 0.0);
            }
        }
    }

    /// Inverse of the constant-coefficient model Hessian, mode by mode.
    fn precondition(&self, _x: &[f64], g: &[f64], out: &mut [f64]) {
        let Some(bands) = &self.problem.bands else {
            out.copy_from_slice(g);
            return;
        };
        let l = if self.l.is_finite() && self.l > 0.0 {
            self.l
        } else {
            1.0
        };
        bands.apply(
            l,
            g,
            self.problem.potential_comps(),
            self.problem.space_dim(),
            out,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_frame;

    #[test]
    fn transpose_is_adjoint() {
        let grid = CellGrid::new(build_frame(&[0.6, 0.8]).unwrap(), 9, &[5]).unwrap();
        let nn = grid.n_nodes();
        let f: Vec<f64> = (0..2 * nn).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let g: Vec<f64> = (0..2 * nn).map(|i| ((i * 13 % 7) as f64).cos()).collect();
        for a in 0..2 {
            let mut df = vec![0.0; 2 * nn];
            forward_diff(&grid, a, &f, 2, &mut df);
            let mut dtg = vec![0.0; 2 * nn];
            forward_diff_transpose_add(&grid, a, &g, 2, &mut dtg);
            let l: f64 = df.iter().zip(&g).map(|(x, y)| x * y).sum();
            let r: f64 = f.iter().zip(&dtg).map(|(x, y)| x * y).sum();
            assert!((l - r).abs() < 1e-10 * (1.0 + l.abs()));
        }
    }
}
