use rustfft::num_complex::Complex;

use crate::grid::CellGrid;
use crate::poisson::ModalSolver;

type C64 = Complex<f64>;

/// Hermitian band matrix with two off-diagonals.
#[derive(Debug, Clone)]
struct Band {
    d: Vec<f64>,
    e1: Vec<C64>,
    e2: Vec<C64>,
}

impl Band {
    fn zeros(n: usize) -> Self {
        Band {
            d: vec![0.0; n],
            e1: vec![C64::new(0.0, 0.0); n],
            e2: vec![C64::new(0.0, 0.0); n],
        }
    }
}

/// Upper band operator on normal rows: entries `(i, i)`, `(i, i+1)`, `(i, i+2)`.
#[derive(Clone)]
struct Upper {
    u: Vec<[C64; 3]>,
}

impl Upper {
    /// `b₀ ∂₀ + μ`: nodal forward difference along the normal (zero on the
    /// top row) plus a lateral symbol.
    fn derivative(n0: usize, h0: f64, b0: f64, mu: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        let u = (0..n0)
            .map(|i| {
                if i + 1 < n0 {
                    [mu - b0 / h0, C64::new(b0 / h0, 0.0), z]
                } else {
                    [mu, z, z]
                }
            })
            .collect();
        Upper { u }
    }

    /// Product of two bidiagonal operators.
    fn mul(&self, o: &Upper) -> Upper {
        let n = self.u.len();
        let z = C64::new(0.0, 0.0);
        let u = (0..n)
            .map(|i| {
                let a = self.u[i];
                let b0 = o.u[i];
                let b1 = if i + 1 < n { o.u[i + 1] } else { [z; 3] };
                [a[0] * b0[0], a[0] * b0[1] + a[1] * b1[0], a[1] * b1[1]]
            })
            .collect();
        Upper { u }
    }

    /// Adds `c · Uᴴ diag(m) U`, restricted to rows/columns `lo..=hi`.
    fn add_gram(&self, m: &[f64], c: f64, lo: usize, hi: usize, out: &mut Band) {
        let n = self.u.len();
        for row in 0..n {
            for p in 0..3 {
                let cp = row + p;
                if cp < lo || cp > hi {
                    continue;
                }
                let a = self.u[row][p].conj();
                for q in p..3 {
                    let cq = row + q;
                    if cq > hi {
                        continue;
                    }
                    let v = c * m[row] * a * self.u[row][q];
                    match q - p {
                        0 => out.d[cp - lo] += v.re,
                        1 => out.e1[cp - lo] += v,
                        _ => out.e2[cp - lo] += v,
                    }
                }
            }
        }
    }
}

/// `LDLᴴ` solve of a Hermitian positive definite band system in place.
fn band_solve(a: &Band, rhs: &mut [C64]) {
    let n = a.d.len();
    let mut d = vec![0.0; n];
    let mut l1 = vec![C64::new(0.0, 0.0); n];
    let mut l2 = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        // L[i][i-1] = l1[i], L[i][i-2] = l2[i].
        if i >= 2 {
            l2[i] = a.e2[i - 2].conj() / d[i - 2];
        }
        if i >= 1 {
            let mut v = a.e1[i - 1].conj();
            if i >= 2 {
                v -= l2[i] * l1[i - 1].conj() * d[i - 2];
            }
            l1[i] = v / d[i - 1];
        }
        let mut di = a.d[i];
        if i >= 1 {
            di -= l1[i].norm_sqr() * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i].norm_sqr() * d[i - 2];
        }
        d[i] = di;
    }
    for i in 0..n {
        if i >= 1 {
            let p = rhs[i - 1];
            rhs[i] -= l1[i] * p;
        }
        if i >= 2 {
            let p = rhs[i - 2];
            rhs[i] -= l2[i] * p;
        }
    }
    for i in 0..n {
        rhs[i] /= d[i];
    }
    for i in (0..n).rev() {
        if i + 1 < n {
            let nx = rhs[i + 1];
            rhs[i] -= l1[i + 1].conj() * nx;
        }
        if i + 2 < n {
            let nx = rhs[i + 2];
            rhs[i] -= l2[i + 2].conj() * nx;
        }
    }
}

/// Per lateral Fourier mode, the constant-coefficient model Hessian of the
/// shock energy in the potential: for the entry `w_{rj}`,
/// `2L Σ_i (∂_i ∂_j)ᴴ M (∂_i ∂_j) + (2/L) Σ_x ∂_xᴴ M ∂_x` on the free rows.
pub(crate) struct ModalBands {
    modal: ModalSolver,
    slab: usize,
    lo: usize,
    hi: usize,
    /// `fourth[mode][j]`.
    fourth: Vec<Vec<Band>>,
    second: Vec<Band>,
}

impl std::fmt::Debug for ModalBands {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModalBands")
            .field("slab", &self.slab)
            .field("rows", &(self.lo, self.hi))
            .finish()
    }
}

impl ModalBands {
    pub(crate) fn new(grid: &CellGrid, n_space: usize, lo: usize, hi: usize) -> Self {
        let dims = grid.dims();
        let n0 = dims[0];
        let h = grid.spacing();
        let basis = &grid.frame().basis;
        let slab = grid.slab_len();
        let m: Vec<f64> = (0..n0).map(|i| grid.node_weight(i * slab)).collect();
        let nf = hi - lo + 1;
        let mut fourth = Vec::with_capacity(slab);
        let mut second = Vec::with_capacity(slab);
        for mode in 0..slab {
            let mut theta = vec![0.0; dims.len()];
            let mut rem = mode;
            for a in (1..dims.len()).rev() {
                let k = rem % dims[a];
                rem /= dims[a];
                theta[a] = 2.0 * std::f64::consts::PI * k as f64 / dims[a] as f64;
            }
            let ops: Vec<Upper> = (0..=n_space)
                .map(|x| {
                    let mut mu = C64::new(0.0, 0.0);
                    for a in 1..dims.len() {
                        if dims[a] > 1 {
                            mu += basis[a][x] * (C64::from_polar(1.0, theta[a]) - 1.0) / h[a];
                        }
                    }
                    Upper::derivative(n0, h[0], basis[0][x], mu)
                })
                .collect();
            let mut k2 = Band::zeros(nf);
            for op in &ops {
                op.add_gram(&m, 1.0, lo, hi, &mut k2);
            }
            let per_j = (0..n_space)
                .map(|j| {
                    let mut q = Band::zeros(nf);
                    for i in 0..n_space {
                        ops[i].mul(&ops[j]).add_gram(&m, 1.0, lo, hi, &mut q);
                    }
                    q
                })
                .collect();
            fourth.push(per_j);
            second.push(k2);
        }
        ModalBands {
            modal: ModalSolver::new(grid),
            slab,
            lo,
            hi,
            fourth,
            second,
        }
    }

    /// Applies the inverse model Hessian at scale `l` to `g` (`comps` entries
    /// per node, entry `r·N + j`); rows outside the free range are zeroed.
    pub(crate) fn apply(&self, l: f64, g: &[f64], comps: usize, n_space: usize, out: &mut [f64]) {
        let slab = self.slab;
        let nf = self.hi - self.lo + 1;
        let n0 = g.len() / (comps * slab);
        let mut spec = vec![C64::new(0.0, 0.0); n0 * slab];
        let mut col = vec![C64::new(0.0, 0.0); nf];
        let mut band = Band::zeros(nf);
        out.iter_mut().for_each(|x| *x = 0.0);
        for q in 0..comps {
            let j = q % n_space;
            for i in self.lo..=self.hi {
                let row = &mut spec[i * slab..(i + 1) * slab];
                for (s, x) in row.iter_mut().enumerate() {
                    *x = C64::new(g[(i * slab + s) * comps + q], 0.0);
                }
                self.modal.lateral_fft(row, false);
            }
            for mode in 0..slab {
                let f = &self.fourth[mode][j];
                let k2 = &self.second[mode];
                for r in 0..nf {
                    band.d[r] = 2.0 * l * f.d[r] + 2.0 / l * k2.d[r];
                    band.e1[r] = f.e1[r] * (2.0 * l) + k2.e1[r] * (2.0 / l);
                    band.e2[r] = f.e2[r] * (2.0 * l) + k2.e2[r] * (2.0 / l);
                    col[r] = spec[(self.lo + r) * slab + mode];
                }
                band_solve(&band, &mut col);
                for r in 0..nf {
                    spec[(self.lo + r) * slab + mode] = col[r];
                }
            }
            let scale = 1.0 / slab as f64;
            for i in self.lo..=self.hi {
                let row = &mut spec[i * slab..(i + 1) * slab];
                self.modal.lateral_fft(row, true);
                for (s, x) in row.iter().enumerate() {
                    out[(i * slab + s) * comps + q] = x.re * scale;
                }
            }
        }
    }
}
