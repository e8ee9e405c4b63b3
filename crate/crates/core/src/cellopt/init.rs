use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGrid, StateField};
use crate::model::{ConstraintSet, JumpData, ModelSpecs};
use crate::oracle::{geodesic_path_1d, GeodesicSampling};
use crate::rng::uniform;

/// Width of the smoothed step used by the swept initial profiles.
pub const STEP_WIDTH: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    OneDimensionalTanh,
    GeodesicSweep,
    RandomPerturbed { count: usize, amplitude: f64 },
}

impl InitStrategy {
    pub fn parse(name: &str, count: usize, amplitude: f64) -> Result<Self> {
        match name {
            "one_dimensional_tanh" | "tanh" => Ok(InitStrategy::OneDimensionalTanh),
            "geodesic_sweep" | "geodesic" => Ok(InitStrategy::GeodesicSweep),
            "random_perturbed" | "random" => Ok(InitStrategy::RandomPerturbed { count, amplitude }),
            other => Err(Error::BadStrategy(other.to_string())),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            InitStrategy::RandomPerturbed { count, .. } => *count,
            _ => 1,
        }
    }
}

/// `½(1 + tanh(t/w))`.
pub fn smoothed_step(t: f64) -> f64 {
    0.5 * (1.0 + (t / STEP_WIDTH).tanh())
}

pub fn init_profiles(
    jump: &JumpData,
    specs: &ModelSpecs,
    grid: &CellGrid,
    strategy: &InitStrategy,
    seed: u64,
) -> Result<Vec<StateField>> {
    init_profiles_mirrored(jump, specs, grid, strategy, seed, 0, false)
}

/// As [`init_profiles`]; `stream` offsets the noise streams of random starts
/// and `mirror` evaluates every profile on the reversed normal axis, so the
/// flipped jump `(φ⁻, φ⁺, −ν)` receives the mirror images of the original
/// starts.
pub fn init_profiles_mirrored(
    jump: &JumpData,
    specs: &ModelSpecs,
    grid: &CellGrid,
    strategy: &InitStrategy,
    seed: u64,
    stream: u64,
    mirror: bool,
) -> Result<Vec<StateField>> {
    let m = specs.state_dim();
    if jump.state_dim() != m {
        return Err(Error::ShapeMismatch(
            "jump data do not fit the model".into(),
        ));
    }
    let sweep = Sweep::new(jump, specs, grid, mirror);
    match strategy {
        InitStrategy::OneDimensionalTanh => Ok(vec![
            sweep.build(&Path::Straight(straight_path(jump, specs)))
        ]),
        InitStrategy::GeodesicSweep => {
            let path = match geodesic_path_1d(jump, specs, &GeodesicSampling::default()) {
                Ok(p) => Path::Polyline(p),
                Err(Error::DimensionTooLarge(_)) => Path::Straight(straight_path(jump, specs)),
                Err(e) => return Err(e),
            };
            Ok(vec![sweep.build(&path)])
        }
        InitStrategy::RandomPerturbed { count, amplitude } => {
            if !(amplitude.is_finite() && *amplitude >= 0.0) {
                return Err(Error::BadStrategy(format!(
                    "random_perturbed amplitude {amplitude}"
                )));
            }
            let base = sweep.build(&Path::Straight(straight_path(jump, specs)));
            Ok((0..*count)
                .map(|k| {
                    let mut p = base.clone();
                    sweep.perturb(&mut p, *amplitude, seed, stream + k as u64);
                    p
                })
                .collect())
        }
    }
}

enum Path {
    Straight(StraightPath),
    Polyline(crate::oracle::PathSample),
}

impl Path {
    fn at(&self, f: f64) -> Vec<f64> {
        match self {
            Path::Straight(p) => p.at(f),
            Path::Polyline(p) => p.at_fraction(f),
        }
    }
}

/// Straight segment, or on the sphere two great-circle arcs through a chosen
/// midpoint.
struct StraightPath {
    minus: Vec<f64>,
    plus: Vec<f64>,
    mid: Option<Vec<f64>>,
}

impl StraightPath {
    fn at(&self, f: f64) -> Vec<f64> {
        match &self.mid {
            None => self
                .minus
                .iter()
                .zip(&self.plus)
                .map(|(a, b)| a + f * (b - a))
                .collect(),
            Some(mid) if f <= 0.5 => slerp(&self.minus, mid, 2.0 * f),
            Some(mid) => slerp(mid, &self.plus, 2.0 * f - 1.0),
        }
    }
}

fn straight_path(jump: &JumpData, specs: &ModelSpecs) -> StraightPath {
    let (minus, plus) = (jump.phi_minus.clone(), jump.phi_plus.clone());
    if specs.constraint != ConstraintSet::UnitSphere || minus == plus {
        return StraightPath {
            minus,
            plus,
            mid: None,
        };
    }
    let sum: Vec<f64> = minus.iter().zip(&plus).map(|(a, b)| a + b).collect();
    let n = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mid = if n > 1e-8 {
        sum.iter().map(|x| x / n).collect()
    } else {
        antipodal_midpoint(jump, specs)
    };
    StraightPath {
        minus,
        plus,
        mid: Some(mid),
    }
}

/// Among the unit vectors orthogonal to antipodal data, the one minimizing
/// `W + |(Ψ − Ψ(φ⁻))·ν|²` (both sides averaged); near-ties go to the smaller
/// flux mismatch, then to the first sampled angle.
fn antipodal_midpoint(jump: &JumpData, specs: &ModelSpecs) -> Vec<f64> {
    let m = jump.state_dim();
    let a = &jump.phi_minus;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        for b in std::iter::once(a).chain(basis.iter()) {
            let d: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            e.iter_mut().for_each(|x| *x /= n);
            basis.push(e);
        }
        if basis.len() == 2 {
            break;
        }
    }
    let sides = specs.sides_for(jump).ok();
    let score = |s: &[f64]| -> (f64, f64) {
        let Some((minus, plus)) = &sides else {
            return (0.0, 0.0);
        };
        let w = 0.5 * (minus.potential.value(s) + plus.potential.value(s));
        let (l, n) = (specs.flux_rows(), specs.space_dim());
        let mut p = vec![0.0; l * n];
        let mut p0 = vec![0.0; l * n];
        let mut mis = 0.0;
        for side in [minus, plus] {
            side.flux.value(s, &mut p);
            minus.flux.value(&jump.phi_minus, &mut p0);
            for r in 0..l {
                let d: f64 = (0..n)
                    .map(|c| (p[r * n + c] - p0[r * n + c]) * jump.nu[c])
                    .sum();
                mis += 0.5 * d * d;
            }
        }
        (w + mis, mis)
    };
    let samples = 360;
    let cands: Vec<Vec<f64>> = (0..if basis.len() == 1 { 2 } else { samples })
        .map(|k| {
            if basis.len() == 1 {
                basis[0]
                    .iter()
                    .map(|x| if k == 0 { *x } else { -x })
                    .collect()
            } else {
                let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                basis[0]
                    .iter()
                    .zip(&basis[1])
                    .map(|(x, y)| th.cos() * x + th.sin() * y)
                    .collect()
            }
        })
        .collect();
    let scores: Vec<(f64, f64)> = cands.iter().map(|c| score(c)).collect();
    let best = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    let mut pick = 0;
    let mut pick_mis = f64::INFINITY;
    for (k, s) in scores.iter().enumerate() {
        if s.0 <= best + tol && s.1 < pick_mis - tol {
            pick = k;
            pick_mis = s.1;
        }
    }
    cands[pick].clone()
}

fn slerp(a: &[f64], b: &[f64], f: f64) -> Vec<f64> {
    let c: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .sum::<f64>()
        .clamp(-1.0, 1.0);
    let th = c.acos();
    let mut out: Vec<f64> = if th < 1e-9 {
        a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()
    } else {
        let (wa, wb) = (((1.0 - f) * th).sin() / th.sin(), (f * th).sin() / th.sin());
        a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
    };
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.iter_mut().for_each(|x| *x /= n);
    out
}

struct Sweep<'a> {
    jump: &'a JumpData,
    grid: &'a CellGrid,
    constraint: ConstraintSet,
    mirror: bool,
}

impl<'a> Sweep<'a> {
    fn new(jump: &'a JumpData, specs: &ModelSpecs, grid: &'a CellGrid, mirror: bool) -> Self {
        Sweep {
            jump,
            grid,
            constraint: specs.constraint,
            mirror,
        }
    }

    fn row(&self, node: usize) -> usize {
        let i = self.grid.normal_index(node);
        if self.mirror {
            self.grid.dims()[0] - 1 - i
        } else {
            i
        }
    }

    /// Fraction of the sweep at normal row `i` (mirrored: `1 − σ(t_rev)`).
    fn fraction(&self, node: usize) -> f64 {
        let i = self.row(node);
        let t = -0.5 + i as f64 * self.grid.spacing()[0];
        if self.mirror {
            1.0 - smoothed_step(t)
        } else {
            smoothed_step(t)
        }
    }

    fn build(&self, path: &Path) -> StateField {
        let grid = self.grid;
        let n0 = grid.dims()[0];
        let slab = grid.slab_len();
        let m = self.jump.state_dim();
        let rows: Vec<Vec<f64>> = (0..n0)
            .map(|i| {
                let mut s = path.at(self.fraction(i * slab));
                self.constraint.project(&mut s);
                s
            })
            .collect();
        let mut f = StateField::zeros(grid, m);
        for node in 0..grid.n_nodes() {
            let i = grid.normal_index(node);
            let v = if i == 0 {
                &self.jump.phi_minus
            } else if i == n0 - 1 {
                &self.jump.phi_plus
            } else {
                &rows[i]
            };
            f.node_mut(node).copy_from_slice(v);
        }
        f
    }

    /// Adds smooth noise built from low normal sine modes times low lateral
    /// Fourier modes; pinned rows are untouched.
    fn perturb(&self, field: &mut StateField, amplitude: f64, seed: u64, stream: u64) {
        let grid = self.grid;
        let n0 = grid.dims()[0];
        let m = field.comps;
        let lat: Vec<usize> = (1..grid.axes())
            .filter(|&a| !grid.is_collapsed(a))
            .collect();
        // Lateral modes: wavenumber 0..=2 per active axis, cos and sin.
        let mut modes: Vec<Vec<(usize, i32, bool)>> = vec![vec![]];
        for &a in &lat {
            let mut next = Vec::new();
            for base in &modes {
                for k in 0..=2 {
                    for sine in [false, true] {
                        if k == 0 && sine {
                            continue;
                        }
                        let mut v = base.clone();
                        v.push((a, k, sine));
                        next.push(v);
                    }
                }
            }
            modes = next;
        }
        let n_modes = (3 * modes.len()) as f64;
        let scale = amplitude / n_modes.sqrt();
        let two_pi = 2.0 * std::f64::consts::PI;
        for node in 0..grid.n_nodes() {
            let i = self.row(node);
            if i == 0 || i == n0 - 1 {
                continue;
            }
            let x = i as f64 / (n0 - 1) as f64;
            let mut code = 0u64;
            let val = field.node_mut(node);
            for p in 1..=3u32 {
                let sn = (p as f64 * std::f64::consts::PI * x).sin();
                for md in &modes {
                    let mut lf = 1.0;
                    for &(a, k, sine) in md {
                        let y = grid.coord(node, a);
                        let ph = two_pi * k as f64 * y;
                        lf *= if sine { ph.sin() } else { ph.cos() };
                    }
                    for (c, v) in val.iter_mut().enumerate().take(m) {
                        *v += scale * uniform(seed, stream, code, c as u64) * sn * lf;
                    }
                    code += 1;
                }
            }
            self.constraint.project(val);
        }
    }
}
