use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::build_frame;
use crate::model::{ConstraintSet, JumpData, ModelSpecs, SideModel};

/// Lattice resolution of the state-space graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicSampling {
    /// Samples per state dimension (per angle on the sphere).
    pub per_dim: usize,
}

impl Default for GeodesicSampling {
    fn default() -> Self {
        GeodesicSampling { per_dim: 200 }
    }
}

/// A polyline in state space from `φ⁻` to `φ⁺` with its segment costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub states: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
}

impl PathSample {
    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn length(&self) -> f64 {
        self.states.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    /// Point at arclength fraction `f ∈ [0, 1]`.
    pub fn at_fraction(&self, f: f64) -> Vec<f64> {
        let total = self.length();
        if total == 0.0 || f <= 0.0 {
            return self.states[0].clone();
        }
        if f >= 1.0 {
            return self.states[self.states.len() - 1].clone();
        }
        let target = f * total;
        let mut acc = 0.0;
        for w in self.states.windows(2) {
            let d = dist(&w[0], &w[1]);
            if acc + d >= target && d > 0.0 {
                let s = (target - acc) / d;
                return w[0]
                    .iter()
                    .zip(&w[1])
                    .map(|(a, b)| a + s * (b - a))
                    .collect();
            }
            acc += d;
        }
        self.states[self.states.len() - 1].clone()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Least-cost path for the one-dimensional cell energy with density
/// `2|r′|√(W(r) + |(Ψ(r) − Ψ(φ∓))·ν|²)`, the minus side from `φ⁻` and the
/// plus side from `φ⁺`, meeting at the best junction state.
pub fn geodesic_path_1d(
    jump: &JumpData,
    specs: &ModelSpecs,
    sampling: &GeodesicSampling,
) -> Result<PathSample> {
    let m = specs.state_dim();
    if jump.state_dim() != m || jump.space_dim() != specs.space_dim() {
        return Err(Error::ShapeMismatch(
            "jump data do not fit the model".into(),
        ));
    }
    if jump.phi_plus == jump.phi_minus {
        return Ok(PathSample {
            states: vec![jump.phi_minus.clone(), jump.phi_plus.clone()],
            costs: vec![0.0],
        });
    }
    let lattice = match specs.constraint {
        ConstraintSet::Unconstrained => {
            if m > 3 {
                return Err(Error::DimensionTooLarge(m));
            }
            Lattice::affine(jump, sampling.per_dim)?
        }
        ConstraintSet::UnitSphere => match m {
            2 => Lattice::circle(jump, sampling.per_dim),
            3 => Lattice::sphere(jump, sampling.per_dim),
            1 => {
                return Err(Error::BadParams(
                    "the 0-sphere has no connecting paths".into(),
                ))
            }
            _ => return Err(Error::DimensionTooLarge(m)),
        },
    };
    let (minus, plus) = specs.sides_for(jump)?;
    let cm = Density::new(&minus, &jump.phi_minus, &jump.nu, specs.constraint);
    let cp = Density::new(&plus, &jump.phi_plus, &jump.nu, specs.constraint);
    let (dm, pm) = lattice.dijkstra(lattice.minus, &cm);
    let (dp, pp) = lattice.dijkstra(lattice.plus, &cp);
    let mut best = (f64::INFINITY, lattice.minus);
    for v in 0..lattice.points.len() {
        let c = dm[v] + dp[v];
        if c < best.0 {
            best = (c, v);
        }
    }
    let junction = best.1;
    let mut chain = vec![junction];
    let mut v = junction;
    while let Some(p) = pm[v] {
        chain.push(p);
        v = p;
    }
    chain.reverse();
    let split = chain.len() - 1;
    let mut v = junction;
    while let Some(p) = pp[v] {
        chain.push(p);
        v = p;
    }
    let mut states: Vec<Vec<f64>> = chain.iter().map(|&i| lattice.points[i].clone()).collect();
    let last = states.len() - 1;
    states[0] = jump.phi_minus.clone();
    states[last] = jump.phi_plus.clone();
    let costs = states
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if i < split {
                cm.cost(&w[0], &w[1])
            } else {
                cp.cost(&w[0], &w[1])
            }
        })
        .collect();
    Ok(PathSample { states, costs })
}

/// Total cost of [`geodesic_path_1d`].
pub fn geodesic_energy_1d(
    jump: &JumpData,
    specs: &ModelSpecs,
    sampling: &GeodesicSampling,
) -> Result<f64> {
    Ok(geodesic_path_1d(jump, specs, sampling)?.total())
}

struct Density<'a> {
    side: &'a SideModel,
    reference: Vec<f64>,
    nu: &'a [f64],
    constraint: ConstraintSet,
}

impl<'a> Density<'a> {
    fn new(side: &'a SideModel, anchor: &[f64], nu: &'a [f64], constraint: ConstraintSet) -> Self {
        let reference = normal_flux(side, anchor, nu);
        Density {
            side,
            reference,
            nu,
            constraint,
        }
    }

    fn cost(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        self.constraint.project(&mut mid);
        let w = self.side.potential.value(&mid);
        let f = normal_flux(self.side, &mid, self.nu);
        let mis: f64 = f
            .iter()
            .zip(&self.reference)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        2.0 * dist(a, b) * (w.max(0.0) + mis).sqrt()
    }
}

fn normal_flux(side: &SideModel, s: &[f64], nu: &[f64]) -> Vec<f64> {
    let (l, n) = (side.flux.rows(), side.flux.space_dim());
    let mut psi = vec![0.0; l * n];
    side.flux.value(s, &mut psi);
    (0..l)
        .map(|r| (0..n).map(|c| psi[r * n + c] * nu[c]).sum())
        .collect()
}

struct Lattice {
    points: Vec<Vec<f64>>,
    neighbours: Box<dyn Fn(usize, &mut Vec<usize>)>,
    minus: usize,
    plus: usize,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl Lattice {
    fn dijkstra(&self, source: usize, density: &Density) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.points.len();
        let mut d = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        let mut nb = Vec::new();
        d[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(dv, v)) = heap.pop() {
            if dv > d[v] {
                continue;
            }
            (self.neighbours)(v, &mut nb);
            for &u in &nb {
                let c = dv + density.cost(&self.points[v], &self.points[u]);
                if c < d[u] {
                    d[u] = c;
                    pred[u] = Some(v);
                    heap.push(Entry(c, u));
                }
            }
        }
        (d, pred)
    }

    /// Affine lattice aligned with `Δ = φ⁺ − φ⁻`: `φ∓` are nodes, the box
    /// extends a quarter jump beyond them along `Δ` and `±¾|Δ|` across.
    fn affine(jump: &JumpData, per_dim: usize) -> Result<Self> {
        let m = jump.state_dim();
        let delta: Vec<f64> = jump
            .phi_plus
            .iter()
            .zip(&jump.phi_minus)
            .map(|(a, b)| a - b)
            .collect();
        let len = dist(&jump.phi_plus, &jump.phi_minus);
        let dir: Vec<f64> = delta.iter().map(|x| x / len).collect();
        let frame = build_frame(&dir)?;
        let n = if m == 3 { per_dim.min(64) } else { per_dim }.max(8);
        let k = ((n - 1) as f64 / 1.5).floor() as usize;
        let off = (n - 1 - k) / 2;
        let h = len / k as f64;
        let mid = (n - 1) / 2;
        let total = n.pow(m as u32);
        let mut points = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = jump.phi_minus.clone();
            for a in (0..m).rev() {
                let i = rem % n;
                rem /= n;
                let coord = if a == 0 {
                    (i as f64 - off as f64) * h
                } else {
                    (i as f64 - mid as f64) * h
                };
                for (pc, bc) in p.iter_mut().zip(&frame.basis[a]) {
                    *pc += coord * bc;
                }
            }
            points.push(p);
        }
        let stride0 = n.pow(m as u32 - 1);
        let lateral_mid = (1..m).fold(0, |acc, _| acc * n + mid);
        let minus = off * stride0 + lateral_mid;
        let plus = (off + k) * stride0 + lateral_mid;
        let neighbours = Box::new(move |v: usize, out: &mut Vec<usize>| {
            out.clear();
            let mut idx = vec![0usize; m];
            let mut rem = v;
            for a in (0..m).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            let count = 3usize.pow(m as u32);
            'outer: for code in 0..count {
                if code == count / 2 {
                    continue;
                }
                let mut c = code;
                let mut u = 0usize;
                for a in 0..m {
                    let d = (c % 3) as isize - 1;
                    c /= 3;
                    let j = idx[a] as isize + d;
                    if j < 0 || j >= n as isize {
                        continue 'outer;
                    }
                    u = u * n + j as usize;
                }
                out.push(u);
            }
        });
        let mut lat = Lattice {
            points,
            neighbours,
            minus,
            plus,
        };
        lat.points[minus] = jump.phi_minus.clone();
        lat.points[plus] = jump.phi_plus.clone();
        Ok(lat)
    }

    fn circle(jump: &JumpData, per_dim: usize) -> Self {
        let a = jump.phi_minus.clone();
        let b_raw = [-a[1], a[0]];
        let ang = (jump.phi_plus[0] * b_raw[0] + jump.phi_plus[1] * b_raw[1])
            .atan2(jump.phi_plus[0] * a[0] + jump.phi_plus[1] * a[1]);
        let delta = if ang < 0.0 {
            ang + 2.0 * std::f64::consts::PI
        } else {
            ang
        };
        let az = azimuths(delta, per_dim.max(8));
        let n = az.len();
        let points = az
            .iter()
            .map(|&t| {
                vec![
                    t.cos() * a[0] + t.sin() * b_raw[0],
                    t.cos() * a[1] + t.sin() * b_raw[1],
                ]
            })
            .collect();
        let plus = az
            .iter()
            .position(|&t| t == delta)
            .expect("φ⁺ azimuth is a node");
        let neighbours = Box::new(move |v: usize, out: &mut Vec<usize>| {
            out.clear();
            out.push((v + 1) % n);
            out.push((v + n - 1) % n);
        });
        let mut lat = Lattice {
            points,
            neighbours,
            minus: 0,
            plus,
        };
        lat.points[0] = jump.phi_minus.clone();
        lat.points[plus] = jump.phi_plus.clone();
        lat
    }

    /// `(θ, φ)` lattice about a pole orthogonal to `φ±`, so both data lie on
    /// the equator `θ = π/2` (a lattice row) with `φ⁻` at azimuth 0.
    fn sphere(jump: &JumpData, per_dim: usize) -> Self {
        let a = jump.phi_minus.clone();
        let b = &jump.phi_plus;
        let mut pole = cross(&a, b);
        let pn = dist(&pole, &[0.0; 3]);
        if pn < 1e-12 {
            let k = (0..3)
                .min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
                .expect("three components");
            let mut e = [0.0; 3];
            e[k] = 1.0;
            let d: f64 = (0..3).map(|i| e[i] * a[i]).sum();
            pole = (0..3).map(|i| e[i] - d * a[i]).collect();
        }
        let pn = dist(&pole, &[0.0; 3]);
        pole.iter_mut().for_each(|x| *x /= pn);
        let eb = cross(&pole, &a);
        let ang = (0..3)
            .map(|i| b[i] * eb[i])
            .sum::<f64>()
            .atan2((0..3).map(|i| b[i] * a[i]).sum());
        let delta = if ang < 0.0 {
            ang + 2.0 * std::f64::consts::PI
        } else {
            ang
        };
        let az = azimuths(delta, per_dim.max(8));
        let nphi = az.len();
        let ntheta = 2 * (per_dim.max(8) / 2) + 1;
        let rows = ntheta - 2;
        let mut points = Vec::with_capacity(2 + rows * nphi);
        points.push(pole.clone());
        points.push(pole.iter().map(|x| -x).collect());
        for i in 1..ntheta - 1 {
            let th = std::f64::consts::PI * i as f64 / (ntheta - 1) as f64;
            for &p in &az {
                let (st, ct) = th.sin_cos();
                points.push(
                    (0..3)
                        .map(|c| ct * pole[c] + st * (p.cos() * a[c] + p.sin() * eb[c]))
                        .collect(),
                );
            }
        }
        let eq = (ntheta - 1) / 2;
        let node = move |i: usize, j: usize| -> usize {
            if i == 0 {
                0
            } else if i == ntheta - 1 {
                1
            } else {
                2 + (i - 1) * nphi + j
            }
        };
        let minus = node(eq, 0);
        let plus = node(
            eq,
            az.iter()
                .position(|&t| t == delta)
                .expect("φ⁺ azimuth is a node"),
        );
        let neighbours = Box::new(move |v: usize, out: &mut Vec<usize>| {
            out.clear();
            if v < 2 {
                let i = if v == 0 { 1 } else { ntheta - 2 };
                out.extend((0..nphi).map(|j| node(i, j)));
                return;
            }
            let i = (v - 2) / nphi + 1;
            let j = (v - 2) % nphi;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di) as usize;
                    let jj = ((j as i64 + dj).rem_euclid(nphi as i64)) as usize;
                    let u = node(ii, jj);
                    if !out.contains(&u) {
                        out.push(u);
                    }
                }
            }
        });
        let mut lat = Lattice {
            points,
            neighbours,
            minus,
            plus,
        };
        lat.points[minus] = jump.phi_minus.clone();
        lat.points[plus] = jump.phi_plus.clone();
        lat
    }
}

/// Azimuth samples, uniform on `[0, Δ]` and on `[Δ, 2π)`, containing both.
fn azimuths(delta: f64, n: usize) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let n1 = ((n as f64 * delta / two_pi).round() as usize).clamp(1, n - 1);
    let n2 = n - n1;
    let mut out = Vec::with_capacity(n);
    for j in 0..n1 {
        out.push(j as f64 * delta / n1 as f64);
    }
    for j in 0..n2 {
        out.push(delta + j as f64 * (two_pi - delta) / n2 as f64);
    }
    out
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
