//! Preconditioned nonlinear conjugate gradients (Polak–Ribière+, restarts,
//! Armijo backtracking) with an optional retraction for product-of-spheres
//! constraints.

use serde::{Deserialize, Serialize};

/// Smooth objective over `ℝⁿ` (or a submanifold reached by `retract`).
pub trait Objective {
    /// Value at `x`, and the tangent gradient when `grad` is given. Returns
    /// `+∞` outside the domain.
    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64;

    fn retract(&self, _x: &mut [f64]) {}

    /// Projects `v` on the tangent space at `x`.
    fn to_tangent(&self, _x: &[f64], _v: &mut [f64]) {}

    fn precondition(&self, _x: &[f64], g: &[f64], out: &mut [f64]) {
        out.copy_from_slice(g);
    }

    /// Largest useful step along `d` (keeps trial points sensible).
    fn max_step(&self, _x: &[f64], _d: &[f64]) -> f64 {
        f64::INFINITY
    }

    /// Size of a gradient for the `gtol` test.
    fn gradient_measure(&self, g: &[f64]) -> f64 {
        max_abs(g)
    }

    /// Called after every accepted iterate; may lower the objective by
    /// changing hidden parameters. Returns `true` when it did, which forces a
    /// fresh gradient and a restart.
    fn refresh(&mut self, _iteration: usize, _x: &[f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcgOptions {
    pub gtol: f64,
    pub etol: f64,
    pub max_iter: usize,
    pub window: usize,
    /// Bound on the estimated distance to the minimum, `½ gᵀ P⁻¹ g`,
    /// relative to `max(1, |f|)`.
    pub dtol: f64,
}

impl Default for NcgOptions {
    fn default() -> Self {
        NcgOptions {
            gtol: 1e-6,
            etol: 1e-8,
            max_iter: 5000,
            window: 10,
            dtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_max: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn minimize(obj: &mut impl Objective, x0: &[f64], opts: &NcgOptions) -> NcgResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    obj.retract(&mut x);
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, Some(&mut g));
    let mut s = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut history = vec![f];
    if n == 0 || !f.is_finite() {
        return NcgResult {
            x,
            value: f,
            iterations: 0,
            converged: n == 0,
            grad_max: 0.0,
            history,
        };
    }
    obj.precondition(&x, &g, &mut s);
    obj.to_tangent(&x, &mut s);
    for (di, si) in d.iter_mut().zip(&s) {
        *di = -si;
    }
    let mut gs = dot(&g, &s);
    let mut alpha_prev = 1.0f64;
    let mut gd_prev = -gs;
    let mut restarted = true;
    let mut converged = false;
    let mut iterations = 0;
    let check = |history: &[f64], gmax: f64, gs: f64| -> bool {
        if gmax > opts.gtol {
            return false;
        }
        let k = history.len() - 1;
        if 0.5 * gs.abs() > opts.dtol * history[k].abs().max(1.0) {
            return false;
        }
        if k < opts.window {
            return false;
        }
        let f_now = history[k];
        let f_old = history[k - opts.window];
        (f_old - f_now) <= opts.etol * f_now.abs().max(1.0)
    };
    while iterations < opts.max_iter {
        let gmax = obj.gradient_measure(&g);
        if check(&history, gmax, gs) || gmax == 0.0 {
            converged = true;
            break;
        }
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            for (di, si) in d.iter_mut().zip(&s) {
                *di = -si;
            }
            gd = -gs;
            restarted = true;
            if !(gd < 0.0) {
                converged = gmax <= opts.gtol;
                break;
            }
        }
        let amax = obj.max_step(&x, &d);
        let alpha0 = if iterations == 0 || !(alpha_prev > 0.0) {
            1.0
        } else if restarted {
            alpha_prev.max(1e-12)
        } else {
            alpha_prev * gd_prev / gd
        };
        let search = line_search(obj, &x, f, gd, &d, alpha0.min(amax), amax, &mut xt);
        iterations += 1;
        let Some((alpha, _)) = search else {
            if restarted {
                history.push(f);
                converged = check(&history, gmax, gs);
                break;
            }
            restarted = true;
            for (di, si) in d.iter_mut().zip(&s) {
                *di = -si;
            }
            continue;
        };
        std::mem::swap(&mut x, &mut xt);
        let mut ft = obj.eval(&x, Some(&mut gt));
        if obj.refresh(iterations, &x) {
            ft = obj.eval(&x, Some(&mut gt));
            restarted = true;
        } else {
            restarted = false;
        }
        f = ft;
        history.push(f);
        let s_old = s.clone();
        obj.precondition(&x, &gt, &mut s);
        obj.to_tangent(&x, &mut s);
        let gs_new = dot(&gt, &s);
        let beta = if restarted || iterations % n.max(50) == 0 {
            0.0
        } else {
            ((gs_new - dot(&gt, &s_old)) / gs).max(0.0)
        };
        obj.to_tangent(&x, &mut d);
        for i in 0..n {
            d[i] = -s[i] + beta * d[i];
        }
        if beta == 0.0 {
            restarted = true;
        }
        std::mem::swap(&mut g, &mut gt);
        gd_prev = gd;
        alpha_prev = alpha;
        gs = gs_new;
    }
    let grad_max = obj.gradient_measure(&g);
    NcgResult {
        x,
        value: f,
        iterations,
        converged,
        grad_max,
        history,
    }
}

/// Armijo backtracking (`c₁ = 1e−4`) with safeguarded quadratic
/// interpolation, followed by a few extrapolation or interpolation trials
/// that keep the best accepted point. On success `xt` holds the new iterate.
#[allow(clippy::too_many_arguments)]
fn line_search(
    obj: &mut impl Objective,
    x: &[f64],
    f: f64,
    gd: f64,
    d: &[f64],
    alpha0: f64,
    amax: f64,
    xt: &mut [f64],
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    let mut trial = |a: f64, out: &mut [f64]| -> f64 {
        for i in 0..x.len() {
            out[i] = x[i] + a * d[i];
        }
        obj.retract(out);
        obj.eval(out, None)
    };
    let quad_min = |a: f64, fa: f64| -> Option<f64> {
        let den = 2.0 * (fa - f - gd * a);
        (den > 0.0).then(|| -gd * a * a / den)
    };
    let mut a = if alpha0.is_finite() && alpha0 > 0.0 {
        alpha0
    } else {
        1.0f64.min(amax)
    };
    let mut fa = trial(a, xt);
    let mut tries = 0;
    while !(fa.is_finite() && fa <= f + C1 * a * gd) {
        tries += 1;
        if tries > 60 || a < 1e-300 {
            return None;
        }
        let q = if fa.is_finite() {
            quad_min(a, fa).unwrap_or(0.5 * a)
        } else {
            0.1 * a
        };
        a = q.clamp(0.1 * a, 0.5 * a);
        fa = trial(a, xt);
    }
    let mut best = xt.to_vec();
    let mut work = vec![0.0; x.len()];
    for _ in 0..8 {
        let Some(q) = quad_min(a, fa) else {
            // Concave along the ray: extrapolate.
            let a2 = (4.0 * a).min(amax);
            if a2 <= a {
                break;
            }
            let f2 = trial(a2, &mut work);
            if f2.is_finite() && f2 < fa {
                a = a2;
                fa = f2;
                best.copy_from_slice(&work);
                continue;
            }
            break;
        };
        if (q - a).abs() <= 0.01 * a {
            break;
        }
        let a2 = if q > a {
            q.min(4.0 * a).min(amax)
        } else {
            q.max(0.1 * a)
        };
        if a2 == a {
            break;
        }
        let f2 = trial(a2, &mut work);
        if f2.is_finite() && f2 < fa {
            a = a2;
            fa = f2;
            best.copy_from_slice(&work);
            if q < a * 1.0001 {
                break;
            }
        } else {
            break;
        }
    }
    xt.copy_from_slice(&best);
    Some((a, fa))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl Objective for Rosen {
        fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
            let (a, b) = (x[0], x[1]);
            if let Some(g) = grad {
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
            }
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    #[test]
    fn rosenbrock() {
        let opts = NcgOptions {
            gtol: 1e-8,
            etol: 1e-14,
            max_iter: 20000,
            window: 10,
            dtol: 1e-20,
        };
        let r = minimize(&mut Rosen, &[-1.2, 1.0], &opts);
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    /// Rayleigh quotient on the unit sphere: the minimum is the smallest
    /// eigenvalue.
    struct Rayleigh(Vec<f64>);
    impl Objective for Rayleigh {
        fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
            let v: f64 = x.iter().zip(&self.0).map(|(x, l)| l * x * x).sum();
            if let Some(g) = grad {
                for i in 0..x.len() {
                    g[i] = 2.0 * self.0[i] * x[i] - 2.0 * v * x[i];
                }
            }
            v
        }
        fn retract(&self, x: &mut [f64]) {
            let n = dot(x, x).sqrt();
            x.iter_mut().for_each(|v| *v /= n);
        }
        fn to_tangent(&self, x: &[f64], v: &mut [f64]) {
            let p = dot(x, v);
            for i in 0..x.len() {
                v[i] -= p * x[i];
            }
        }
    }

    #[test]
    fn sphere_eigenvalue() {
        let mut o = Rayleigh(vec![3.0, 1.5, 0.25, 2.0]);
        let r = minimize(&mut o, &[0.5, 0.5, 0.1, 0.5], &NcgOptions::default());
        assert!(r.converged);
        assert!((r.value - 0.25).abs() < 1e-10);
    }
}
