//! Frames, cell grids, discrete fields and difference operators.
//!
//! Axis 0 of every grid runs along the frame's first vector (the jump
//! normal) and carries pinned end rows; the remaining axes are periodic.
//! Differences are taken on edges: the forward difference along axis `a` is
//! stored at the lower node of each edge, and [`divergence`] is the exact
//! negative adjoint of [`gradient`] under the weighted inner products
//! [`CellGrid::node_weight`] and [`CellGrid::edge_weight`].

mod dump;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, norm};

pub use dump::{read_cgrid, write_cgrid};
pub use quadrature::{gauss_legendre, ElementQuadrature, QuadPoint};

/// Orthonormal frame whose first vector is the jump normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub basis: Vec<Vec<f64>>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn normal(&self) -> &[f64] {
        &self.basis[0]
    }

    /// Physical vector from frame coordinates.
    pub fn to_physical(&self, t: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (ta, b) in t.iter().zip(&self.basis) {
            for (o, bc) in out.iter_mut().zip(b) {
                *o += ta * bc;
            }
        }
    }

    pub fn gram_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Completes `nu` to an orthonormal frame with the Householder reflection
/// that maps `e₁` to `nu`.
pub fn build_frame(nu: &[f64]) -> Result<Frame> {
    let n = norm(nu);
    if nu.is_empty() || !n.is_finite() || (n - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitNormal(n));
    }
    let dim = nu.len();
    let mut v: Vec<f64> = nu.iter().map(|x| -x).collect();
    v[0] += 1.0;
    let vv = dot(&v, &v);
    let mut basis = Vec::with_capacity(dim);
    basis.push(nu.to_vec());
    for j in 1..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        if vv >= 1e-30 {
            let c = 2.0 * v[j] / vv;
            for (x, vi) in e.iter_mut().zip(&v) {
                *x -= c * vi;
            }
        }
        basis.push(e);
    }
    Ok(Frame { basis })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisBc {
    PinnedNormal,
    Periodic,
}

/// Uniform node grid on a box aligned with a [`Frame`].
///
/// The normal axis has `n₀` nodes spanning `[−ℓ₀/2, ℓ₀/2]` inclusive; each
/// lateral axis has `n_a` nodes on the half-open periodic cell
/// `[−ℓ_a/2, ℓ_a/2)`. A lateral axis with a single node is collapsed: fields
/// are constant along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    frame: Frame,
    dims: Vec<usize>,
    extent: Vec<f64>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

impl CellGrid {
    /// Unit cell `I_ν`.
    pub fn new(frame: Frame, n_normal: usize, n_lateral: &[usize]) -> Result<Self> {
        let mut dims = vec![n_normal];
        dims.extend_from_slice(n_lateral);
        let extent = vec![1.0; dims.len()];
        Self::with_extents(frame, dims, extent)
    }

    pub fn with_extents(frame: Frame, dims: Vec<usize>, extent: Vec<f64>) -> Result<Self> {
        if dims.len() != frame.dim() || extent.len() != dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} axes, frame has dimension {}",
                dims.len(),
                frame.dim()
            )));
        }
        if dims[0] < 8 {
            return Err(Error::ShapeMismatch(
                "normal axis needs at least 8 nodes".into(),
            ));
        }
        if dims[1..].iter().any(|&n| n != 1 && n < 4) {
            return Err(Error::ShapeMismatch(
                "lateral axes need 1 or at least 4 nodes".into(),
            ));
        }
        if extent.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::ShapeMismatch("extents must be positive".into()));
        }
        let h = dims
            .iter()
            .zip(&extent)
            .enumerate()
            .map(|(a, (&n, &e))| {
                if a == 0 {
                    e / (n - 1) as f64
                } else {
                    e / n as f64
                }
            })
            .collect();
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len() - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(CellGrid {
            frame,
            dims,
            extent,
            h,
            strides,
        })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn axis_bc(&self, axis: usize) -> AxisBc {
        if axis == 0 {
            AxisBc::PinnedNormal
        } else {
            AxisBc::Periodic
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.dims.iter().product()
    }

    /// Nodes in one slab normal to axis 0.
    pub fn slab_len(&self) -> usize {
        self.strides[0]
    }

    pub fn normal_index(&self, node: usize) -> usize {
        node / self.strides[0]
    }

    pub fn index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.dims[axis]
    }

    pub fn is_collapsed(&self, axis: usize) -> bool {
        axis > 0 && self.dims[axis] == 1
    }

    /// Neighbour one step forward along `axis` (lateral axes wrap).
    pub fn forward(&self, node: usize, axis: usize) -> Option<usize> {
        let i = self.index(node, axis);
        if axis == 0 {
            (i + 1 < self.dims[0]).then_some(node + self.strides[0])
        } else if i + 1 < self.dims[axis] {
            Some(node + self.strides[axis])
        } else {
            Some(node + self.strides[axis] - self.dims[axis] * self.strides[axis])
        }
    }

    pub fn backward(&self, node: usize, axis: usize) -> Option<usize> {
        let i = self.index(node, axis);
        if i > 0 {
            Some(node - self.strides[axis])
        } else if axis == 0 {
            None
        } else {
            Some(node + (self.dims[axis] - 1) * self.strides[axis])
        }
    }

    /// Frame coordinate of a node along `axis`.
    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        -0.5 * self.extent[axis] + self.index(node, axis) as f64 * self.h[axis]
    }

    pub fn frame_coords(&self, node: usize) -> Vec<f64> {
        (0..self.axes()).map(|a| self.coord(node, a)).collect()
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        let t = self.frame_coords(node);
        let mut y = vec![0.0; self.frame.dim()];
        self.frame.to_physical(&t, &mut y);
        y
    }

    fn lateral_volume(&self) -> f64 {
        self.h[1..].iter().product()
    }

    /// Trapezoid weight along the normal axis times the lateral cell volume.
    pub fn node_weight(&self, node: usize) -> f64 {
        let i = self.normal_index(node);
        let end = if i == 0 || i + 1 == self.dims[0] {
            0.5
        } else {
            1.0
        };
        end * self.h[0] * self.lateral_volume()
    }

    pub fn edge_weight(&self, axis: usize, node: usize) -> f64 {
        if axis == 0 {
            self.h[0] * self.lateral_volume()
        } else {
            self.node_weight(node)
        }
    }

    pub fn has_edge(&self, axis: usize, node: usize) -> bool {
        if axis == 0 {
            self.normal_index(node) + 1 < self.dims[0]
        } else {
            !self.is_collapsed(axis)
        }
    }
}

/// Node field with `comps` entries per node, node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    pub comps: usize,
    pub values: Vec<f64>,
}

impl StateField {
    pub fn zeros(grid: &CellGrid, comps: usize) -> Self {
        StateField {
            comps,
            values: vec![0.0; grid.n_nodes() * comps],
        }
    }

    pub fn from_fn(grid: &CellGrid, comps: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut s = Self::zeros(grid, comps);
        for (node, chunk) in s.values.chunks_mut(comps).enumerate() {
            f(node, chunk);
        }
        s
    }

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.comps..(node + 1) * self.comps]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.comps..(node + 1) * self.comps]
    }

    pub fn check(&self, grid: &CellGrid) -> Result<()> {
        if self.comps == 0 || self.values.len() != grid.n_nodes() * self.comps {
            return Err(Error::ShapeMismatch(format!(
                "field of length {} does not fit {} nodes × {} components",
                self.values.len(),
                grid.n_nodes(),
                self.comps
            )));
        }
        Ok(())
    }

    /// `Σ_nodes w · ⟨u, v⟩`.
    pub fn inner(&self, other: &StateField, grid: &CellGrid) -> f64 {
        (0..grid.n_nodes())
            .map(|i| grid.node_weight(i) * dot(self.node(i), other.node(i)))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Node field of `rows × cols` matrices (row-major per node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: &CellGrid, rows: usize, cols: usize) -> Self {
        TensorField {
            rows,
            cols,
            values: vec![0.0; grid.n_nodes() * rows * cols],
        }
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let s = self.rows * self.cols;
        &self.values[node * s..(node + 1) * s]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let s = self.rows * self.cols;
        &mut self.values[node * s..(node + 1) * s]
    }
}

/// Values on grid edges: `axes[a]` holds, at the lower node of every edge
/// along axis `a`, `comps` numbers. Slots without an edge stay zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeField {
    pub comps: usize,
    pub axes: Vec<Vec<f64>>,
}

impl EdgeField {
    pub fn zeros(grid: &CellGrid, comps: usize) -> Self {
        EdgeField {
            comps,
            axes: vec![vec![0.0; grid.n_nodes() * comps]; grid.axes()],
        }
    }

    pub fn edge(&self, axis: usize, node: usize) -> &[f64] {
        &self.axes[axis][node * self.comps..(node + 1) * self.comps]
    }

    pub fn edge_mut(&mut self, axis: usize, node: usize) -> &mut [f64] {
        &mut self.axes[axis][node * self.comps..(node + 1) * self.comps]
    }

    pub fn check(&self, grid: &CellGrid) -> Result<()> {
        if self.axes.len() != grid.axes()
            || self
                .axes
                .iter()
                .any(|v| v.len() != grid.n_nodes() * self.comps)
        {
            return Err(Error::ShapeMismatch(
                "edge field does not fit the grid".into(),
            ));
        }
        Ok(())
    }

    /// `Σ_edges w_e · ⟨E, F⟩`.
    pub fn inner(&self, other: &EdgeField, grid: &CellGrid) -> f64 {
        let c = self.comps;
        let mut s = 0.0;
        for a in 0..grid.axes() {
            for node in 0..grid.n_nodes() {
                if grid.has_edge(a, node) {
                    let x = &self.axes[a][node * c..(node + 1) * c];
                    let y = &other.axes[a][node * c..(node + 1) * c];
                    s += grid.edge_weight(a, node) * dot(x, y);
                }
            }
        }
        s
    }

    pub fn norm_sq(&self, grid: &CellGrid) -> f64 {
        self.inner(self, grid)
    }

    pub fn axpy(&mut self, alpha: f64, other: &EdgeField) {
        for (a, b) in self.axes.iter_mut().zip(&other.axes) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Samples a node tensor field `M ∈ ℝ^{l×N}` on edges: the average of the
    /// two end nodes, projected on the frame vector of the edge's axis.
    pub fn from_node_tensor(grid: &CellGrid, m: &TensorField) -> Result<Self> {
        if m.cols != grid.frame().dim() || m.values.len() != grid.n_nodes() * m.rows * m.cols {
            return Err(Error::ShapeMismatch(
                "tensor field does not fit the grid".into(),
            ));
        }
        let l = m.rows;
        let n = m.cols;
        let mut e = EdgeField::zeros(grid, l);
        for a in 0..grid.axes() {
            let b = &grid.frame().basis[a];
            for node in 0..grid.n_nodes() {
                if !grid.has_edge(a, node) {
                    continue;
                }
                let up = grid.forward(node, a).expect("edge has an upper node");
                let (p, q) = (m.node(node), m.node(up));
                let out = e.edge_mut(a, node);
                for r in 0..l {
                    out[r] = (0..n)
                        .map(|c| 0.5 * (p[r * n + c] + q[r * n + c]) * b[c])
                        .sum();
                }
            }
        }
        Ok(e)
    }
}

/// Forward differences of every component along every axis.
pub fn gradient(grid: &CellGrid, u: &StateField) -> Result<EdgeField> {
    u.check(grid)?;
    let c = u.comps;
    let mut g = EdgeField::zeros(grid, c);
    for a in 0..grid.axes() {
        let inv = 1.0 / grid.spacing()[a];
        for node in 0..grid.n_nodes() {
            if !grid.has_edge(a, node) {
                continue;
            }
            let up = grid.forward(node, a).expect("edge has an upper node");
            for k in 0..c {
                g.axes[a][node * c + k] = (u.values[up * c + k] - u.values[node * c + k]) * inv;
            }
        }
    }
    Ok(g)
}

/// Negative adjoint of [`gradient`]: `⟨∇u, V⟩_E = −⟨u, div V⟩_N` for all `u`.
pub fn divergence(grid: &CellGrid, v: &EdgeField) -> Result<StateField> {
    v.check(grid)?;
    let c = v.comps;
    let mut d = StateField::zeros(grid, c);
    for a in 0..grid.axes() {
        let inv = 1.0 / grid.spacing()[a];
        for node in 0..grid.n_nodes() {
            if !grid.has_edge(a, node) {
                continue;
            }
            let up = grid.forward(node, a).expect("edge has an upper node");
            let w = grid.edge_weight(a, node) * inv;
            for k in 0..c {
                let f = w * v.axes[a][node * c + k];
                d.values[node * c + k] += f;
                d.values[up * c + k] -= f;
            }
        }
    }
    for node in 0..grid.n_nodes() {
        let w = grid.node_weight(node);
        d.node_mut(node).iter_mut().for_each(|x| *x /= w);
    }
    Ok(d)
}

/// `div ∘ grad`, assembled directly from its stencil.
pub fn laplacian(grid: &CellGrid, u: &StateField) -> Result<StateField> {
    u.check(grid)?;
    let c = u.comps;
    let mut out = StateField::zeros(grid, c);
    for node in 0..grid.n_nodes() {
        let w = grid.node_weight(node);
        for a in 0..grid.axes() {
            if grid.is_collapsed(a) {
                continue;
            }
            let h2 = grid.spacing()[a] * grid.spacing()[a];
            for (nb, edge_node) in [
                (grid.forward(node, a), node),
                (
                    grid.backward(node, a),
                    grid.backward(node, a).unwrap_or(node),
                ),
            ] {
                if let Some(nb) = nb {
                    let ratio = grid.edge_weight(a, edge_node) / w;
                    for k in 0..c {
                        out.values[node * c + k] +=
                            ratio * (u.values[nb * c + k] - u.values[node * c + k]) / h2;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frame_examples() {
        let f = build_frame(&[1.0, 0.0]).unwrap();
        assert_eq!(f.basis, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let s = 0.5f64.sqrt();
        let f = build_frame(&[s, -s]).unwrap();
        assert_eq!(f.basis[0], vec![s, -s]);
        assert!((f.basis[1][0].abs() - s).abs() < 1e-14 && (f.basis[1][1].abs() - s).abs() < 1e-14);
        assert!(f.basis[1][0] * f.basis[1][1] > 0.0);
        assert!(f.gram_residual() < 1e-14);
        let f = build_frame(&[0.0, 0.0, 1.0]).unwrap();
        assert!(f.gram_residual() < 1e-14);
        assert!(matches!(
            build_frame(&[1.0, 0.1]),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn grid_layout() {
        let g = CellGrid::new(build_frame(&[1.0, 0.0]).unwrap(), 9, &[4]).unwrap();
        assert_eq!(g.n_nodes(), 36);
        assert_eq!(g.coord(0, 0), -0.5);
        assert_eq!(g.coord(35, 0), 0.5);
        assert_eq!(g.coord(3, 1), 0.25);
        assert_eq!(g.forward(3, 1), Some(0));
        assert_eq!(g.backward(0, 1), Some(3));
        assert_eq!(g.forward(35, 0), None);
        let total: f64 = (0..g.n_nodes()).map(|i| g.node_weight(i)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(CellGrid::new(build_frame(&[1.0, 0.0]).unwrap(), 7, &[4]).is_err());
        assert!(CellGrid::new(build_frame(&[1.0, 0.0]).unwrap(), 8, &[3]).is_err());
    }

    #[test]
    fn lateral_sine_derivative() {
        let g = CellGrid::new(build_frame(&[1.0, 0.0]).unwrap(), 8, &[64]).unwrap();
        let u = StateField::from_fn(&g, 1, |n, v| v[0] = (2.0 * PI * g.coord(n, 1)).sin());
        let d = gradient(&g, &u).unwrap();
        let h = g.spacing()[1];
        let mut err = 0.0f64;
        for n in 0..g.n_nodes() {
            let mid = g.coord(n, 1) + 0.5 * h;
            err = err.max((d.edge(1, n)[0] - 2.0 * PI * (2.0 * PI * mid).cos()).abs());
        }
        assert!(err <= (2.0 * PI).powi(3) / (6.0 * 64.0 * 64.0), "{err}");
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = CellGrid::new(build_frame(&[0.6, 0.8]).unwrap(), 8, &[5]).unwrap();
        let u = StateField::from_fn(&g, 2, |_, v| v.copy_from_slice(&[1.5, -2.0]));
        assert_eq!(gradient(&g, &u).unwrap().max_abs(), 0.0);
    }
}
