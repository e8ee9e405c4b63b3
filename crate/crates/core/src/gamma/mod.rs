//! Recovery sequences across a flat interface and the full ε-energy on a
//! bounded box.
//!
//! A cell solution `ζ` with optimal scale `L*` is swept across the interface
//! as `ψ_ε(x) = ζ(L*·x̂/ε)`, where `x̂` are the frame coordinates of `x`
//! relative to the interface. With this scaling the ε-energy of the swept
//! field equals the cell energy per unit interface measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cellopt::{compute_cell_energy, CellOptions, CellSolution};
use crate::error::{Error, Result};
use crate::grid::{build_frame, CellGrid, ElementQuadrature, StateField, TensorField};
use crate::model::{ConstraintSet, JumpData, ModelSpecs, SideModel};
use crate::poisson::{BcVariant, PoissonSolver, PoissonSource};

pub const MIN_RESOLUTION: usize = 32;

/// Normal components below this count as zero.
const AXIS_TOL: f64 = 1e-9;
const SIDE_TOL: f64 = 1e-14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Axis-aligned box `Π [lower_a, upper_a]` cut by the hyperplane
/// `x·ν = offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis.
    pub resolution: Vec<usize>,
    pub nu: Vec<f64>,
    pub offset: f64,
    /// Per axis; axis 0 is never periodic.
    pub periodic: Vec<bool>,
}

impl DomainSpec {
    /// `[0, 1]^N` cut at `x₀ = 1/2`, periodic along the other axes.
    pub fn unit_cube(resolution: Vec<usize>) -> Self {
        let n = resolution.len();
        let mut nu = vec![0.0; n];
        nu[0] = 1.0;
        let mut periodic = vec![true; n];
        periodic[0] = false;
        DomainSpec {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
            resolution,
            nu,
            offset: 0.5,
            periodic,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0
            || self.upper.len() != n
            || self.resolution.len() != n
            || self.nu.len() != n
            || self.periodic.len() != n
        {
            return Err(Error::BadDomain(
                "lower, upper, resolution, nu and periodic need one common length".into(),
            ));
        }
        if self.periodic[0] {
            return Err(Error::BadDomain("axis 0 must be bounded".into()));
        }
        for a in 0..n {
            if !(self.upper[a] > self.lower[a])
                || !self.lower[a].is_finite()
                || !self.upper[a].is_finite()
            {
                return Err(Error::BadDomain(format!("axis {a} has an empty range")));
            }
            if self.resolution[a] < MIN_RESOLUTION {
                return Err(Error::BadDomain(format!(
                    "axis {a} has {} nodes, at least {MIN_RESOLUTION} are required",
                    self.resolution[a]
                )));
            }
            if self.periodic[a] && self.nu[a].abs() > AXIS_TOL {
                return Err(Error::BadDomain(format!(
                    "the interface normal has a component along periodic axis {a}"
                )));
            }
        }
        let nn = dot(&self.nu, &self.nu).sqrt();
        if !((nn - 1.0).abs() <= 1e-12) {
            return Err(Error::NonUnitNormal(nn));
        }
        if !(self.offset.is_finite() && self.half_thickness() > 0.0) {
            return Err(Error::BadDomain(
                "the interface misses the box interior".into(),
            ));
        }
        Ok(())
    }

    /// Distance from the interface to the farthest-in box corner on its
    /// nearer side, measured along `ν`.
    pub fn half_thickness(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, 0.0);
        for a in 0..self.dim() {
            let (p, q) = (self.nu[a] * self.lower[a], self.nu[a] * self.upper[a]);
            lo += p.min(q);
            hi += p.max(q);
        }
        (self.offset - lo).min(hi - self.offset)
    }

    /// `(N−1)`-dimensional measure of the interface inside the box: the
    /// derivative in the offset of the box volume below the hyperplane.
    pub fn interface_measure(&self) -> f64 {
        let mut inactive = 1.0;
        let mut nus = Vec::new();
        let mut ext = Vec::new();
        let mut c0 = self.offset;
        for a in 0..self.dim() {
            let e = self.upper[a] - self.lower[a];
            let v = self.nu[a];
            if v.abs() <= AXIS_TOL {
                inactive *= e;
                continue;
            }
            c0 -= v * self.lower[a];
            if v < 0.0 {
                c0 -= v * e;
            }
            nus.push(v.abs());
            ext.push(e);
        }
        let k = nus.len();
        let mut sum = 0.0;
        for mask in 0..(1usize << k) {
            let mut s = c0;
            let mut sign = 1.0;
            for i in 0..k {
                if (mask >> i) & 1 == 1 {
                    s -= nus[i] * ext[i];
                    sign = -sign;
                }
            }
            if s > 0.0 {
                sum += sign * s.powi(k as i32 - 1);
            }
        }
        let fact: f64 = (1..k).map(|i| i as f64).product();
        let prod: f64 = nus.iter().product();
        inactive * sum / (fact * prod)
    }

    /// Node grid of the box. Its frame is the identity, so grid axes are
    /// physical axes; bounded lateral axes put nodes on both faces and never
    /// use the wrap-around edge.
    pub fn grid(&self) -> Result<CellGrid> {
        self.validate()?;
        let n = self.dim();
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let extent = (0..n)
            .map(|a| {
                let e = self.upper[a] - self.lower[a];
                if a == 0 || self.periodic[a] {
                    e
                } else {
                    e * self.resolution[a] as f64 / (self.resolution[a] - 1) as f64
                }
            })
            .collect();
        CellGrid::with_extents(build_frame(&e0)?, self.resolution.clone(), extent)
    }

    pub fn position(&self, grid: &CellGrid, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.lower[a] + grid.index(node, a) as f64 * grid.spacing()[a])
            .collect()
    }

    fn lateral_weight(&self, grid: &CellGrid, node: usize) -> f64 {
        let mut w = 1.0;
        for a in 1..self.dim() {
            let h = grid.spacing()[a];
            let i = grid.index(node, a);
            let end = !self.periodic[a] && (i == 0 || i + 1 == grid.dims()[a]);
            w *= if end { 0.5 * h } else { h };
        }
        w
    }

    fn wraps(&self, grid: &CellGrid, node: usize) -> bool {
        (1..self.dim()).any(|a| !self.periodic[a] && grid.index(node, a) + 1 == grid.dims()[a])
    }

    fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(x, &self.nu) - self.offset
    }
}

/// `(minus, plus)` weights of the two sides at signed distance `d`.
fn side_mix(d: f64) -> (f64, f64) {
    if d > SIDE_TOL {
        (0.0, 1.0)
    } else if d < -SIDE_TOL {
        (1.0, 0.0)
    } else {
        (0.5, 0.5)
    }
}

/// Cell profile together with what is needed to sweep it across an interface.
#[derive(Debug, Clone)]
pub struct RecoveryProfile {
    pub grid: CellGrid,
    pub profile: StateField,
    pub l_star: f64,
    pub jump: JumpData,
    pub constraint: ConstraintSet,
}

impl RecoveryProfile {
    pub fn new(
        grid: &CellGrid,
        cell: &CellSolution,
        jump: &JumpData,
        constraint: ConstraintSet,
    ) -> Result<Self> {
        cell.profile.check(grid)?;
        if cell.profile.comps != jump.state_dim() {
            return Err(Error::ShapeMismatch(
                "profile and jump states differ in dimension".into(),
            ));
        }
        if !(cell.l_star > 0.0 && cell.l_star.is_finite()) {
            return Err(Error::BadParams(format!(
                "optimal scale {} is not positive",
                cell.l_star
            )));
        }
        if grid.frame().normal() != jump.nu.as_slice() {
            return Err(Error::ShapeMismatch(
                "cell frame is not built on the jump normal".into(),
            ));
        }
        Ok(RecoveryProfile {
            grid: grid.clone(),
            profile: cell.profile.clone(),
            l_star: cell.l_star,
            jump: jump.clone(),
            constraint,
        })
    }

    /// Multilinear interpolation at frame coordinates `t`: the normal
    /// coordinate is clamped to the cell, lateral ones wrap.
    pub fn sample(&self, t: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let dims = g.dims();
        let h = g.spacing();
        let mut idx = vec![(0usize, 0usize, 0.0f64); dims.len()];
        let u0 = ((t[0] + 0.5) / h[0]).clamp(0.0, (dims[0] - 1) as f64);
        let i0 = (u0.floor() as usize).min(dims[0] - 2);
        idx[0] = (i0, i0 + 1, u0 - i0 as f64);
        for a in 1..dims.len() {
            if dims[a] == 1 {
                continue;
            }
            let u = ((t[a] + 0.5) / h[a]).rem_euclid(dims[a] as f64);
            let i = (u.floor() as usize).min(dims[a] - 1);
            idx[a] = (i, (i + 1) % dims[a], u - i as f64);
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for c in 0..(1usize << dims.len()) {
            let mut w = 1.0;
            let mut node = 0;
            for (a, &(lo, hi, f)) in idx.iter().enumerate() {
                let (i, wa) = if (c >> a) & 1 == 1 {
                    (hi, f)
                } else {
                    (lo, 1.0 - f)
                };
                w *= wa;
                node += i * g.stride(a);
            }
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.profile.node(node)) {
                *o += w * v;
            }
        }
        self.constraint.project(out);
    }
}

fn check_epsilon(domain: &DomainSpec, l_star: f64, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::BadParams(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let width = epsilon / (2.0 * l_star);
    let limit = domain.half_thickness();
    if width >= limit {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            width,
            limit,
        });
    }
    Ok(())
}

/// `ψ_ε` on the box grid of `domain`: `φ±` outside the collar
/// `|x·ν − c| < ε/(2L*)`, the rescaled cell profile inside it. Lateral
/// structure repeats with period `ε/L*`, rounded along periodic box axes
/// to the nearest period that divides the box.
pub fn build_recovery_field(
    domain: &DomainSpec,
    cell: &RecoveryProfile,
    epsilon: f64,
) -> Result<StateField> {
    let grid = domain.grid()?;
    if domain.nu.len() != cell.jump.nu.len()
        || domain
            .nu
            .iter()
            .zip(&cell.jump.nu)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::BadDomain(
            "interface normal differs from the jump normal".into(),
        ));
    }
    check_epsilon(domain, cell.l_star, epsilon)?;
    let n = domain.dim();
    let basis = &cell.grid.frame().basis;
    let scale = cell.l_star / epsilon;
    let lateral_scale: Vec<f64> = (0..n)
        .map(|a| {
            // A periodic box axis holds a whole number of cell periods.
            let axis =
                (0..n).find(|&b| domain.periodic[b] && (basis[a][b].abs() - 1.0).abs() < 1e-12);
            match axis {
                Some(b) if a > 0 && cell.grid.dims()[a] > 1 => {
                    let len = domain.upper[b] - domain.lower[b];
                    (scale * len).round().max(1.0) / len
                }
                _ => scale,
            }
        })
        .collect();
    let mut t = vec![0.0; n];
    Ok(StateField::from_fn(
        &grid,
        cell.jump.state_dim(),
        |node, out| {
            let x = domain.position(&grid, node);
            let tn = scale * domain.signed_distance(&x);
            if tn >= 0.5 {
                out.copy_from_slice(&cell.jump.phi_plus);
            } else if tn <= -0.5 {
                out.copy_from_slice(&cell.jump.phi_minus);
            } else {
                t[0] = tn;
                for a in 1..n {
                    t[a] = lateral_scale[a] * dot(&x, &basis[a]);
                }
                cell.sample(&t, out);
            }
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaddingOptions {
    /// Enlargement of the box per padded axis.
    pub factor: f64,
    /// Also solve with twice the padding and report the relative change.
    pub monitor: bool,
}

impl Default for PaddingOptions {
    fn default() -> Self {
        PaddingOptions {
            factor: 4.0,
            monitor: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullEnergy {
    pub gradient_term: f64,
    pub potential_term: f64,
    pub nonlocal_term: f64,
    pub total: f64,
    pub padding_change: Option<f64>,
}

/// `I_ε(ψ) = ∫_Ω (1/ε)[G(ε∇ψ) + W(ψ)] + (1/ε)∫|∇H̄|²` with
/// `ΔH̄ = div(χ_Ω Ψ(ψ))`.
///
/// `G` uses a 2-point Gauss rule on multilinear elements, `W` the midpoints
/// of axis-0 edges. `H̄` is solved on the box padded along axis 0 and every
/// bounded lateral axis, with homogeneous Dirichlet ends on axis 0.
pub fn evaluate_full_energy(
    field: &StateField,
    epsilon: f64,
    specs: &ModelSpecs,
    jump: &JumpData,
    domain: &DomainSpec,
    padding: &PaddingOptions,
) -> Result<FullEnergy> {
    let grid = domain.grid()?;
    field.check(&grid)?;
    let m = specs.state_dim();
    let n = domain.dim();
    if field.comps != m || specs.space_dim() != n {
        return Err(Error::ShapeMismatch(
            "field, model and domain dimensions disagree".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::BadParams(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(padding.factor >= 1.0 && padding.factor.is_finite()) {
        return Err(Error::BadParams(format!(
            "padding factor must be at least 1, got {}",
            padding.factor
        )));
    }
    let (minus, plus) = specs.sides_for(jump)?;

    let quad = ElementQuadrature::new(&grid, 2, 2);
    let mut corners = vec![0; quad.n_corners()];
    let mut jet = vec![0.0; m * n];
    let mut g_term = 0.0;
    for base in 0..ElementQuadrature::n_elements(&grid) {
        if domain.wraps(&grid, base) {
            continue;
        }
        quad.corners(&grid, base, &mut corners);
        for p in &quad.points {
            jet.iter_mut().for_each(|x| *x = 0.0);
            for (c, &node) in corners.iter().enumerate() {
                let v = field.node(node);
                for ax in 0..n {
                    let d = epsilon * p.dshape[ax][c];
                    if d != 0.0 {
                        for i in 0..m {
                            jet[i * n + ax] += d * v[i];
                        }
                    }
                }
            }
            g_term += p.weight * specs.gradient.value(&jet);
        }
    }
    g_term /= epsilon;

    let h0 = grid.spacing()[0];
    let slab = grid.slab_len();
    let mut mid = vec![0.0; m];
    let mut w_term = 0.0;
    for node in 0..grid.n_nodes() - slab {
        let (a, b) = (field.node(node), field.node(node + slab));
        for i in 0..m {
            mid[i] = 0.5 * (a[i] + b[i]);
        }
        specs.constraint.project(&mut mid);
        let mut x = domain.position(&grid, node);
        x[0] += 0.5 * h0;
        let (wm, wp) = side_mix(domain.signed_distance(&x));
        let mut w = 0.0;
        if wm > 0.0 {
            w += wm * minus.potential.value(&mid);
        }
        if wp > 0.0 {
            w += wp * plus.potential.value(&mid);
        }
        w_term += h0 * domain.lateral_weight(&grid, node) * w;
    }
    w_term /= epsilon;

    let (nonlocal, padding_change) = if minus.flux.is_zero() && plus.flux.is_zero() {
        (0.0, None)
    } else {
        let e = padded_nonlocal(field, &grid, domain, (&minus, &plus), padding.factor)? / epsilon;
        let change = if padding.monitor {
            let e2 = padded_nonlocal(field, &grid, domain, (&minus, &plus), 2.0 * padding.factor)?
                / epsilon;
            Some(if e == 0.0 && e2 == 0.0 {
                0.0
            } else {
                (e2 - e).abs() / e.abs().max(e2.abs())
            })
        } else {
            None
        };
        (e, change)
    };
    Ok(FullEnergy {
        gradient_term: g_term,
        potential_term: w_term,
        nonlocal_term: nonlocal,
        total: g_term + w_term + nonlocal,
        padding_change,
    })
}

fn padded_nonlocal(
    field: &StateField,
    grid: &CellGrid,
    domain: &DomainSpec,
    sides: (&SideModel, &SideModel),
    factor: f64,
) -> Result<f64> {
    let n = domain.dim();
    let dims = grid.dims();
    let h = grid.spacing();
    let mut pdims = dims.to_vec();
    let mut offs = vec![0usize; n];
    let mut extent = Vec::with_capacity(n);
    for a in 0..n {
        if a > 0 && domain.periodic[a] {
            extent.push(dims[a] as f64 * h[a]);
            continue;
        }
        let cells = ((factor * (dims[a] - 1) as f64).round() as usize).max(dims[a] + 1);
        pdims[a] = if a == 0 { cells + 1 } else { cells };
        offs[a] = (pdims[a] - dims[a]) / 2;
        extent.push(if a == 0 {
            cells as f64 * h[a]
        } else {
            pdims[a] as f64 * h[a]
        });
    }
    let pgrid = CellGrid::with_extents(grid.frame().clone(), pdims, extent)?;
    let rows = sides.0.flux.rows();
    let mut tf = TensorField::zeros(&pgrid, rows, n);
    let mut buf = vec![0.0; rows * n];
    let mut tmp = vec![0.0; rows * n];
    for node in 0..grid.n_nodes() {
        let x = domain.position(grid, node);
        let (wm, wp) = side_mix(domain.signed_distance(&x));
        let v = field.node(node);
        buf.iter_mut().for_each(|b| *b = 0.0);
        for (side, w) in [(sides.0, wm), (sides.1, wp)] {
            if w > 0.0 {
                side.flux.value(v, &mut tmp);
                buf.iter_mut().zip(&tmp).for_each(|(b, t)| *b += w * t);
            }
        }
        let pnode: usize = (0..n)
            .map(|a| (grid.index(node, a) + offs[a]) * pgrid.stride(a))
            .sum();
        tf.node_mut(pnode).copy_from_slice(&buf);
    }
    let src = PoissonSource::from_node_tensor(&pgrid, &tf)?;
    let pot = PoissonSolver::new(&pgrid, BcVariant::DirichletPaddedBox).solve(&src)?;
    Ok(pot.energy(&pgrid))
}

/// `full / predicted`, with `0/0` reported as 1.
pub fn sweep_ratio(full: f64, predicted: f64) -> f64 {
    if full == 0.0 && predicted == 0.0 {
        1.0
    } else {
        full / predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub full_energy: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub gradient_term: f64,
    pub potential_term: f64,
    pub nonlocal_term: f64,
    pub padding_change: Option<f64>,
    /// Set when this ε failed; the energy columns are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaOptions {
    /// Normal nodes of the cell grid.
    pub cell_normal: usize,
    /// Lateral nodes of the cell grid; empty means one node per lateral axis.
    pub cell_lateral: Vec<usize>,
    pub bc: BcVariant,
    pub cell: CellOptions,
    pub padding: PaddingOptions,
    /// Predict with the two-grid Richardson estimate of the cell energy
    /// instead of the discrete value on the cell grid.
    pub extrapolate: bool,
    pub parallel: bool,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            cell_normal: 512,
            cell_lateral: Vec::new(),
            bc: BcVariant::NeumannNormalPeriodicLateral,
            cell: CellOptions::default(),
            padding: PaddingOptions::default(),
            extrapolate: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSweep {
    pub rows: Vec<SweepRow>,
    /// Discrete cell energy on the cell grid.
    pub cell_energy: f64,
    /// Cell energy used for the prediction.
    pub cell_estimate: f64,
    pub l_star: f64,
    pub interface_measure: f64,
    pub cell_converged: bool,
}

/// Solves the cell problem once, then evaluates `I_ε(ψ_ε)` for every ε.
/// A failing ε yields a row carrying its error; the sweep continues.
pub fn run_gamma_sweep(
    domain: &DomainSpec,
    jump: &JumpData,
    specs: &ModelSpecs,
    epsilons: &[f64],
    opts: &GammaOptions,
) -> Result<GammaSweep> {
    domain.validate()?;
    if epsilons.is_empty()
        || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite()))
        || epsilons.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::BadParams(
            "epsilons must be positive and strictly decreasing".into(),
        ));
    }
    if jump.space_dim() != domain.dim() {
        return Err(Error::ShapeMismatch(
            "jump and domain dimensions differ".into(),
        ));
    }
    let lateral = if opts.cell_lateral.is_empty() {
        vec![1; domain.dim() - 1]
    } else {
        opts.cell_lateral.clone()
    };
    let cell_grid = CellGrid::new(build_frame(&jump.nu)?, opts.cell_normal, &lateral)?;
    let sol = compute_cell_energy(jump, specs, &cell_grid, opts.bc, &opts.cell)?;
    let profile = RecoveryProfile::new(&cell_grid, &sol, jump, specs.constraint)?;
    let estimate = if opts.extrapolate && !jump.is_degenerate() {
        richardson(jump, specs, &cell_grid, &sol, opts)?
    } else {
        sol.energy.total
    };
    let measure = domain.interface_measure();
    let predicted = estimate * measure;
    let row = |&epsilon: &f64| -> SweepRow {
        let res = build_recovery_field(domain, &profile, epsilon)
            .and_then(|f| evaluate_full_energy(&f, epsilon, specs, jump, domain, &opts.padding));
        match res {
            Ok(e) => SweepRow {
                epsilon,
                full_energy: e.total,
                predicted,
                ratio: sweep_ratio(e.total, predicted),
                gradient_term: e.gradient_term,
                potential_term: e.potential_term,
                nonlocal_term: e.nonlocal_term,
                padding_change: e.padding_change,
                error: None,
            },
            Err(err) => SweepRow {
                epsilon,
                full_energy: f64::NAN,
                predicted,
                ratio: f64::NAN,
                gradient_term: f64::NAN,
                potential_term: f64::NAN,
                nonlocal_term: f64::NAN,
                padding_change: None,
                error: Some(err.to_string()),
            },
        }
    };
    let rows = if opts.parallel {
        epsilons.par_iter().map(row).collect()
    } else {
        epsilons.iter().map(row).collect()
    };
    Ok(GammaSweep {
        rows,
        cell_energy: sol.energy.total,
        cell_estimate: estimate,
        l_star: sol.l_star,
        interface_measure: measure,
        cell_converged: sol.converged,
    })
}

/// `(r²E_h − E_{rh})/(r² − 1)` from a second solve with every refined axis
/// halved; the discrete value when the coarse solve does not converge.
fn richardson(
    jump: &JumpData,
    specs: &ModelSpecs,
    grid: &CellGrid,
    fine: &CellSolution,
    opts: &GammaOptions,
) -> Result<f64> {
    let dims = grid.dims();
    let lateral: Vec<usize> = dims[1..]
        .iter()
        .map(|&n| if n >= 8 { n / 2 } else { n })
        .collect();
    let n0 = (dims[0] + 1) / 2;
    if n0 < 8 {
        return Ok(fine.energy.total);
    }
    let coarse_grid = CellGrid::new(grid.frame().clone(), n0, &lateral)?;
    let coarse = compute_cell_energy(jump, specs, &coarse_grid, opts.bc, &opts.cell)?;
    if !coarse.converged {
        return Ok(fine.energy.total);
    }
    let r = coarse_grid.spacing()[0] / grid.spacing()[0];
    let r2 = r * r;
    Ok((r2 * fine.energy.total - coarse.energy.total) / (r2 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interface_measure_of_diagonal() {
        let s = 0.5f64.sqrt();
        let d = DomainSpec {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            resolution: vec![32, 32],
            nu: vec![s, s],
            offset: s,
            periodic: vec![false, false],
        };
        assert!((d.interface_measure() - 2f64.sqrt()).abs() < 1e-12);
        let d = DomainSpec {
            nu: vec![s, -s],
            offset: 0.0,
            ..d
        };
        assert!((d.interface_measure() - 2f64.sqrt()).abs() < 1e-12);
    }
}
