use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bracket of the scale search, in `log₂ L`.
pub const LOG2_L_RANGE: (f64, f64) = (-8.0, 8.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptimum {
    pub l_star: f64,
    pub e_star: f64,
    /// The optimum sits on the search bracket (one of `A`, `B` vanishes).
    pub at_bracket: bool,
}

/// Minimizes `L·A + B/L` over `L > 0`.
pub fn optimize_scale(a: f64, b: f64) -> Result<ScaleOptimum> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::BadParams(format!(
            "scale terms must be nonnegative (A = {a}, B = {b})"
        )));
    }
    match (a > 0.0, b > 0.0) {
        (true, true) => {
            let l = (b / a).sqrt();
            Ok(ScaleOptimum {
                l_star: l,
                e_star: 2.0 * (a * b).sqrt(),
                at_bracket: false,
            })
        }
        (false, true) => {
            let l = LOG2_L_RANGE.1.exp2();
            Ok(ScaleOptimum {
                l_star: l,
                e_star: b / l,
                at_bracket: true,
            })
        }
        (true, false) => {
            let l = LOG2_L_RANGE.0.exp2();
            Ok(ScaleOptimum {
                l_star: l,
                e_star: a * l,
                at_bracket: true,
            })
        }
        (false, false) => Err(Error::DegenerateScale),
    }
}

/// Golden-section minimization of `f(2^x)` for `x ∈ [lo, hi]`; returns
/// `(L, f(L))`. The bracket ends are compared too, so a monotone `f`
/// reports the bracket end.
pub fn golden_section_log2(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c.exp2())?;
    let mut fd = f(d.exp2())?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c.exp2())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d.exp2())?;
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = f(x.exp2())?;
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok((best.0.exp2(), best.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let o = optimize_scale(4.0, 8.0 / 15.0).unwrap();
        assert!((o.l_star - (2.0f64 / 15.0).sqrt()).abs() < 1e-15);
        assert!((o.e_star - 2.0 * (32.0f64 / 15.0).sqrt()).abs() < 1e-14);
        let o = optimize_scale(1.0, 1.0).unwrap();
        assert_eq!((o.l_star, o.e_star), (1.0, 2.0));
        let o = optimize_scale(0.0, 3.0).unwrap();
        assert!(o.at_bracket && o.l_star == 256.0 && o.e_star == 3.0 / 256.0);
        assert_eq!(optimize_scale(0.0, 0.0), Err(Error::DegenerateScale));
    }

    #[test]
    fn golden_section_agrees_with_closed_form() {
        let (a, b) = (4.0, 8.0 / 15.0);
        let (l, e) = golden_section_log2(|l| Ok(l * a + b / l), -8.0, 8.0, 1e-6).unwrap();
        let o = optimize_scale(a, b).unwrap();
        assert!((l / o.l_star - 1.0).abs() < 1e-4);
        assert!((e / o.e_star - 1.0).abs() < 1e-9);
    }
}
