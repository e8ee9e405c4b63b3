use super::CellGrid;

/// Gauss–Legendre rule on `[0, 1]` with 1, 2 or 3 points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.5], vec![1.0]),
        2 => {
            let d = 0.5 / 3f64.sqrt();
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        3 => {
            let d = 0.5 * 0.6f64.sqrt();
            (
                vec![0.5 - d, 0.5, 0.5 + d],
                vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            )
        }
        _ => panic!("gauss_legendre supports 1 to 3 points, got {n}"),
    }
}

/// One quadrature point of the reference element.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Rule weight times the element volume.
    pub weight: f64,
    /// Position along the normal axis as a fraction of `h₀`.
    pub xi_normal: f64,
    /// Multilinear shape function values per corner.
    pub shape: Vec<f64>,
    /// `dshape[axis][corner]`: frame-coordinate derivatives (zero on collapsed axes).
    pub dshape: Vec<Vec<f64>>,
}

/// Tensor Gauss rule for multilinear elements on a [`CellGrid`].
///
/// Elements are indexed by their lower corner node, which ranges over all
/// nodes below the top normal row. Corner `c` is reached from the base by
/// stepping forward along the `b`-th active axis whenever bit `b` of `c`
/// is set.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    pub active: Vec<usize>,
    pub points: Vec<QuadPoint>,
}

impl ElementQuadrature {
    pub fn new(grid: &CellGrid, normal_points: usize, lateral_points: usize) -> Self {
        let active: Vec<usize> = (0..grid.axes())
            .filter(|&a| !grid.is_collapsed(a))
            .collect();
        let nc = 1usize << active.len();
        let rules: Vec<(Vec<f64>, Vec<f64>)> = active
            .iter()
            .map(|&a| {
                gauss_legendre(if a == 0 {
                    normal_points
                } else {
                    lateral_points
                })
            })
            .collect();
        let volume: f64 = grid.spacing().iter().product();
        let counts: Vec<usize> = rules.iter().map(|r| r.0.len()).collect();
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut xi = vec![0.0; active.len()];
            let mut w = volume;
            for b in (0..active.len()).rev() {
                let q = rem % counts[b];
                rem /= counts[b];
                xi[b] = rules[b].0[q];
                w *= rules[b].1[q];
            }
            let mut shape = vec![1.0; nc];
            let mut dshape = vec![vec![0.0; nc]; grid.axes()];
            for c in 0..nc {
                for b in 0..active.len() {
                    let on = (c >> b) & 1 == 1;
                    shape[c] *= if on { xi[b] } else { 1.0 - xi[b] };
                }
                for (b, &a) in active.iter().enumerate() {
                    let mut d = if (c >> b) & 1 == 1 { 1.0 } else { -1.0 } / grid.spacing()[a];
                    for (bb, &x) in xi.iter().enumerate() {
                        if bb != b {
                            d *= if (c >> bb) & 1 == 1 { x } else { 1.0 - x };
                        }
                    }
                    dshape[a][c] = d;
                }
            }
            points.push(QuadPoint {
                weight: w,
                xi_normal: xi[0],
                shape,
                dshape,
            });
        }
        ElementQuadrature { active, points }
    }

    pub fn n_corners(&self) -> usize {
        1 << self.active.len()
    }

    pub fn n_elements(grid: &CellGrid) -> usize {
        grid.n_nodes() - grid.slab_len()
    }

    /// Corner nodes of the element with lower corner `base`.
    pub fn corners(&self, grid: &CellGrid, base: usize, out: &mut [usize]) {
        out[0] = base;
        for (b, &a) in self.active.iter().enumerate() {
            let half = 1 << b;
            for c in 0..half {
                out[c + half] = grid
                    .forward(out[c], a)
                    .expect("element corner inside the grid");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_frame;

    #[test]
    fn rules_integrate_polynomials() {
        for n in 1..=3 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn partition_of_unity_and_volume() {
        let g = CellGrid::new(build_frame(&[1.0, 0.0, 0.0]).unwrap(), 9, &[4, 1]).unwrap();
        let q = ElementQuadrature::new(&g, 3, 2);
        assert_eq!(q.n_corners(), 4);
        let mut vol = 0.0;
        for p in &q.points {
            assert!((p.shape.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for d in &p.dshape {
                assert!(d.iter().sum::<f64>().abs() < 1e-12);
            }
            vol += p.weight;
        }
        assert!((vol * ElementQuadrature::n_elements(&g) as f64 - 1.0).abs() < 1e-14);
        let mut c = [0usize; 4];
        q.corners(&g, 3, &mut c);
        assert_eq!(c, [3, 3 + 4, 0, 4]);
    }
}
