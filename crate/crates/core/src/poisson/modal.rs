use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::CellGrid;

/// Closure of one end of the unknown row range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// The neighbour outside the range is held at zero.
    Dirichlet,
    /// The end row is a boundary row with a natural (zero-flux) closure.
    Neumann,
}

/// Row range and coefficients of one modal solve of `(α K + β M) x = r`,
/// where `K` is the weighted stiffness `Gᵀ W G` and `M` the lumped mass.
#[derive(Debug, Clone, Copy)]
pub struct ModalSystem {
    pub lo: usize,
    pub hi: usize,
    pub bottom: Closure,
    pub top: Closure,
    pub alpha: f64,
    pub beta: f64,
}

/// Fourier-in-lateral, tridiagonal-in-normal solver for the compact
/// Laplacian of a [`CellGrid`].
#[derive(Clone)]
pub struct ModalSolver {
    n0: usize,
    slab: usize,
    h0: f64,
    area: f64,
    lat_dims: Vec<usize>,
    lambda: Vec<f64>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for ModalSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModalSolver")
            .field("n0", &self.n0)
            .field("lat_dims", &self.lat_dims)
            .finish()
    }
}

impl ModalSolver {
    pub fn new(grid: &CellGrid) -> Self {
        let dims = grid.dims();
        let h = grid.spacing();
        let lat_dims: Vec<usize> = dims[1..].to_vec();
        let slab = grid.slab_len();
        let mut planner = FftPlanner::new();
        let fwd = lat_dims
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inv = lat_dims
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        let mut lambda = vec![0.0; slab];
        for (m, l) in lambda.iter_mut().enumerate() {
            let mut rem = m;
            for a in (0..lat_dims.len()).rev() {
                let k = rem % lat_dims[a];
                rem /= lat_dims[a];
                let theta = 2.0 * std::f64::consts::PI * k as f64 / lat_dims[a] as f64;
                *l += (2.0 - 2.0 * theta.cos()) / (h[a + 1] * h[a + 1]);
            }
        }
        ModalSolver {
            n0: dims[0],
            slab,
            h0: h[0],
            area: h[1..].iter().product(),
            lat_dims,
            lambda,
            fwd,
            inv,
        }
    }

    pub(crate) fn lateral_fft(&self, data: &mut [Complex<f64>], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let mut stride = self.slab;
        for (a, &n) in self.lat_dims.iter().enumerate() {
            stride /= n;
            if n == 1 {
                continue;
            }
            let plan = &plans[a];
            let mut line = vec![Complex::new(0.0, 0.0); n];
            let outer = self.slab / (n * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for (j, x) in line.iter_mut().enumerate() {
                        *x = data[base + j * stride];
                    }
                    plan.process(&mut line);
                    for (j, x) in line.iter().enumerate() {
                        data[base + j * stride] = *x;
                    }
                }
            }
        }
    }

    fn end_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n0 {
            0.5
        } else {
            1.0
        }
    }

    /// Solves one scalar component; rows outside `lo..=hi` are set to zero.
    /// Returns `true` when the singular pure-Neumann zero mode was pinned.
    pub fn solve(&self, sys: &ModalSystem, rhs: &[f64], out: &mut [f64]) -> bool {
        let (n0, slab) = (self.n0, self.slab);
        debug_assert!(sys.lo <= sys.hi && sys.hi < n0);
        let mut spec: Vec<Complex<f64>> = rhs
            .iter()
            .map(|&x| Complex::new(x / self.area, 0.0))
            .collect();
        for i in sys.lo..=sys.hi {
            self.lateral_fft(&mut spec[i * slab..(i + 1) * slab], false);
        }
        let rows = sys.hi - sys.lo + 1;
        let mut diag = vec![0.0; rows];
        let mut col = vec![Complex::new(0.0, 0.0); rows];
        let mut cp = vec![0.0; rows];
        let off = -sys.alpha / self.h0;
        let mut pinned = false;
        for m in 0..slab {
            let lam = self.lambda[m];
            let singular = sys.beta == 0.0
                && lam == 0.0
                && sys.bottom == Closure::Neumann
                && sys.top == Closure::Neumann;
            for r in 0..rows {
                let i = sys.lo + r;
                let t = if (r == 0 && sys.bottom == Closure::Neumann)
                    || (r + 1 == rows && sys.top == Closure::Neumann)
                {
                    1.0
                } else {
                    2.0
                };
                let d = self.end_weight(i);
                diag[r] = sys.alpha * (t / self.h0 + lam * self.h0 * d) + sys.beta * self.h0 * d;
                col[r] = spec[i * slab + m];
            }
            let start = if singular {
                pinned = true;
                col[0] = Complex::new(0.0, 0.0);
                1
            } else {
                0
            };
            if start < rows {
                thomas(off, &diag[start..], &mut col[start..], &mut cp[start..]);
            }
            for r in 0..rows {
                spec[(sys.lo + r) * slab + m] = col[r];
            }
        }
        let scale = 1.0 / slab as f64;
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in sys.lo..=sys.hi {
            let row = &mut spec[i * slab..(i + 1) * slab];
            self.lateral_fft(row, true);
            for (o, x) in out[i * slab..(i + 1) * slab].iter_mut().zip(row.iter()) {
                *o = x.re * scale;
            }
        }
        if pinned {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in sys.lo..=sys.hi {
                let w = self.end_weight(i);
                num += w * out[i * slab..(i + 1) * slab].iter().sum::<f64>();
                den += w * slab as f64;
            }
            let mean = num / den;
            out[sys.lo * slab..(sys.hi + 1) * slab]
                .iter_mut()
                .for_each(|x| *x -= mean);
        }
        pinned
    }
}

/// Symmetric tridiagonal solve with constant off-diagonal `off`, real
/// matrix and complex right-hand side; `col` is overwritten by the solution.
fn thomas(off: f64, diag: &[f64], col: &mut [Complex<f64>], cp: &mut [f64]) {
    let n = diag.len();
    cp[0] = off / diag[0];
    col[0] /= diag[0];
    for i in 1..n {
        let den = diag[i] - off * cp[i - 1];
        cp[i] = off / den;
        let prev = col[i - 1];
        col[i] = (col[i] - prev * off) / den;
    }
    for i in (0..n - 1).rev() {
        let next = col[i + 1];
        col[i] -= next * cp[i];
    }
}
