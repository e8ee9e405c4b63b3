use std::fmt;
use std::sync::Arc;

use super::{EntropyPair, FluxMap, GradientIntegrand, ScalarPotential};

/// `W(s) = scale · (1 − s²)²`.
#[derive(Debug, Clone)]
pub struct DoubleWell {
    pub scale: f64,
}

impl ScalarPotential for DoubleWell {
    fn state_dim(&self) -> usize {
        1
    }
    fn value(&self, s: &[f64]) -> f64 {
        let a = 1.0 - s[0] * s[0];
        self.scale * a * a
    }
    fn gradient(&self, s: &[f64], out: &mut [f64]) {
        out[0] = -4.0 * self.scale * s[0] * (1.0 - s[0] * s[0]);
    }
}

/// `W(m) = scale · m_axis²`, the easy-plane anisotropy of thin-film models.
#[derive(Debug, Clone)]
pub struct UniaxialAnisotropy {
    pub dim: usize,
    pub axis: usize,
    pub scale: f64,
}

impl ScalarPotential for UniaxialAnisotropy {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn value(&self, s: &[f64]) -> f64 {
        self.scale * s[self.axis] * s[self.axis]
    }
    fn gradient(&self, s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        out[self.axis] = 2.0 * self.scale * s[self.axis];
    }
}

#[derive(Debug, Clone)]
pub struct ZeroPotential {
    pub dim: usize,
}

impl ScalarPotential for ZeroPotential {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _s: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct ScaledPotential {
    inner: Arc<dyn ScalarPotential>,
    scale: f64,
}

impl ScaledPotential {
    pub fn new(inner: Arc<dyn ScalarPotential>, scale: f64) -> Self {
        ScaledPotential { inner, scale }
    }
}

impl ScalarPotential for ScaledPotential {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn value(&self, s: &[f64]) -> f64 {
        self.scale * self.inner.value(s)
    }
    fn gradient(&self, s: &[f64], out: &mut [f64]) {
        self.inner.gradient(s, out);
        out.iter_mut().for_each(|x| *x *= self.scale);
    }
    fn analytic(&self) -> bool {
        self.inner.analytic()
    }
}

/// Potential given only by its values; the gradient is a central difference.
#[derive(Clone)]
pub struct FdPotential {
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl FdPotential {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FdPotential {
            dim,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FdPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FdPotential")
            .field("dim", &self.dim)
            .finish()
    }
}

impl ScalarPotential for FdPotential {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn value(&self, s: &[f64]) -> f64 {
        (self.f)(s)
    }
    fn gradient(&self, s: &[f64], out: &mut [f64]) {
        let mut x = s.to_vec();
        for k in 0..self.dim {
            let h = 1e-6 * (1.0 + s[k].abs());
            x[k] = s[k] + h;
            let fp = (self.f)(&x);
            x[k] = s[k] - h;
            let fm = (self.f)(&x);
            x[k] = s[k];
            out[k] = (fp - fm) / (2.0 * h);
        }
    }
    fn analytic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ZeroFlux {
    pub state_dim: usize,
    pub rows: usize,
    pub space_dim: usize,
}

impl FluxMap for ZeroFlux {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn rows(&self) -> usize {
        self.rows
    }
    fn space_dim(&self) -> usize {
        self.space_dim
    }
    fn value(&self, _s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
    fn jacobian(&self, _s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Linear flux `Ψ(s)_{rc} = Σ_k A_{rck} s_k`.
#[derive(Debug, Clone)]
pub struct LinearFlux {
    state_dim: usize,
    rows: usize,
    space_dim: usize,
    coeffs: Vec<f64>,
}

impl LinearFlux {
    /// `coeffs` uses the jacobian layout `(r * N + c) * m + k`.
    pub fn new(state_dim: usize, rows: usize, space_dim: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(
            coeffs.len(),
            state_dim * rows * space_dim,
            "linear flux coefficient count"
        );
        LinearFlux {
            state_dim,
            rows,
            space_dim,
            coeffs,
        }
    }

    /// Scalar advection `F(u) = u · velocity`.
    pub fn advection(velocity: &[f64]) -> Self {
        LinearFlux::new(1, 1, velocity.len(), velocity.to_vec())
    }

    /// Decoupled system `F(u)_{i,0} = speeds_i u_i` in `space_dim` dimensions.
    pub fn diagonal_system(speeds: &[f64], space_dim: usize) -> Self {
        let k = speeds.len();
        let mut coeffs = vec![0.0; k * k * space_dim];
        for (i, &c) in speeds.iter().enumerate() {
            coeffs[(i * space_dim) * k + i] = c;
        }
        LinearFlux::new(k, k, space_dim, coeffs)
    }
}

impl FluxMap for LinearFlux {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn rows(&self) -> usize {
        self.rows
    }
    fn space_dim(&self) -> usize {
        self.space_dim
    }
    fn value(&self, s: &[f64], out: &mut [f64]) {
        let m = self.state_dim;
        for (rc, o) in out.iter_mut().enumerate().take(self.rows * self.space_dim) {
            *o = self.coeffs[rc * m..(rc + 1) * m]
                .iter()
                .zip(s)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    fn jacobian(&self, _s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.coeffs);
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ScaledFlux {
    inner: Arc<dyn FluxMap>,
    scale: f64,
}

impl ScaledFlux {
    pub fn new(inner: Arc<dyn FluxMap>, scale: f64) -> Self {
        ScaledFlux { inner, scale }
    }
}

impl FluxMap for ScaledFlux {
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
        out.iter_mut().for_each(|x| *x *= self.scale);
    }
    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        self.inner.jacobian(s, out);
        out.iter_mut().for_each(|x| *x *= self.scale);
    }
    fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.inner.is_zero()
    }
}

/// Burgers flux `F(u) = (u²/2) · direction`, `k = 1`.
#[derive(Debug, Clone)]
pub struct BurgersFlux {
    pub direction: Vec<f64>,
}

impl FluxMap for BurgersFlux {
    fn state_dim(&self) -> usize {
        1
    }
    fn rows(&self) -> usize {
        1
    }
    fn space_dim(&self) -> usize {
        self.direction.len()
    }
    fn value(&self, s: &[f64], out: &mut [f64]) {
        let f = 0.5 * s[0] * s[0];
        for (o, d) in out.iter_mut().zip(&self.direction) {
            *o = f * d;
        }
    }
    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.direction) {
            *o = s[0] * d;
        }
    }
}

/// Entropy flux `q(u) = (u³/3) · direction` paired with Burgers and `η = u²/2`.
#[derive(Debug, Clone)]
pub(crate) struct BurgersEntropyFlux {
    pub direction: Vec<f64>,
}

impl FluxMap for BurgersEntropyFlux {
    fn state_dim(&self) -> usize {
        1
    }
    fn rows(&self) -> usize {
        1
    }
    fn space_dim(&self) -> usize {
        self.direction.len()
    }
    fn value(&self, s: &[f64], out: &mut [f64]) {
        let f = s[0] * s[0] * s[0] / 3.0;
        for (o, d) in out.iter_mut().zip(&self.direction) {
            *o = f * d;
        }
    }
    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.direction) {
            *o = s[0] * s[0] * d;
        }
    }
}

/// Entropy flux `q_j(u) = ½ uᵀ A_j u` of a linear flux with symmetric blocks.
#[derive(Debug, Clone)]
pub(crate) struct LinearEntropyFlux {
    pub flux: LinearFlux,
}

impl FluxMap for LinearEntropyFlux {
    fn state_dim(&self) -> usize {
        self.flux.state_dim
    }
    fn rows(&self) -> usize {
        1
    }
    fn space_dim(&self) -> usize {
        self.flux.space_dim
    }
    fn value(&self, s: &[f64], out: &mut [f64]) {
        let (k, n) = (self.flux.state_dim, self.flux.space_dim);
        for j in 0..n {
            let mut q = 0.0;
            for r in 0..k {
                for c in 0..k {
                    q += s[r] * self.flux.coeffs[(r * n + j) * k + c] * s[c];
                }
            }
            out[j] = 0.5 * q;
        }
    }
    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let (k, n) = (self.flux.state_dim, self.flux.space_dim);
        for j in 0..n {
            for c in 0..k {
                let mut g = 0.0;
                for r in 0..k {
                    let a_rc = self.flux.coeffs[(r * n + j) * k + c];
                    let a_cr = self.flux.coeffs[(c * n + j) * k + r];
                    g += 0.5 * (a_rc + a_cr) * s[r];
                }
                out[j * k + c] = g;
            }
        }
    }
}

/// `G(A) = scale · |A|²`.
#[derive(Debug, Clone)]
pub struct DirichletEnergy {
    pub state_dim: usize,
    pub space_dim: usize,
    pub scale: f64,
}

impl GradientIntegrand for DirichletEnergy {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn space_dim(&self) -> usize {
        self.space_dim
    }
    fn value(&self, jet: &[f64]) -> f64 {
        self.scale * jet.iter().map(|x| x * x).sum::<f64>()
    }
    fn gradient(&self, jet: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(jet) {
            *o = 2.0 * self.scale * x;
        }
    }
    fn homogeneous_quadratic(&self) -> bool {
        true
    }
}

/// `η(u) = ½|u|²`.
#[derive(Debug, Clone)]
pub struct QuadraticEntropy {
    pub dim: usize,
}

impl EntropyPair for QuadraticEntropy {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn eta(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().map(|x| x * x).sum::<f64>()
    }
    fn grad(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
    fn hess(&self, _u: &[f64], out: &mut [f64]) {
        let k = self.dim;
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            out[i * k + i] = 1.0;
        }
    }
}
