use serde::{Deserialize, Serialize};

use super::{ConservationLaw, FluxMap, JumpData, ModelSpecs, SpaceTimeJumpData};

/// One named residual compared against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tol,
            pass: value.is_finite() && value.abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
    pub finite_difference_fallback: bool,
}

impl ValidationReport {
    fn from_checks(checks: Vec<Check>, fd: bool) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        ValidationReport {
            checks,
            pass,
            finite_difference_fallback: fd,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks that the limiting states are wells and that the normal flux is
/// continuous across the interface. Never fails; inspect `pass`.
pub fn validate_jump_data(jump: &JumpData, specs: &ModelSpecs, tol: f64) -> ValidationReport {
    let fd = specs.finite_difference_fallback();
    let m = specs.state_dim();
    let n = specs.space_dim();
    if jump.state_dim() != m || jump.space_dim() != n {
        return ValidationReport::from_checks(vec![Check::new("shape", f64::INFINITY, tol)], fd);
    }
    let (minus, plus) = match specs.sides_for(jump) {
        Ok(s) => s,
        Err(_) => {
            return ValidationReport::from_checks(
                vec![Check::new("side_tags", f64::INFINITY, tol)],
                fd,
            )
        }
    };
    let mut checks = vec![
        Check::new("W(phi_plus)", plus.potential.value(&jump.phi_plus), tol),
        Check::new("W(phi_minus)", minus.potential.value(&jump.phi_minus), tol),
    ];
    let l = specs.flux_rows();
    let mut fp = vec![0.0; l * n];
    let mut fm = vec![0.0; l * n];
    plus.flux.value(&jump.phi_plus, &mut fp);
    minus.flux.value(&jump.phi_minus, &mut fm);
    let mismatch = (0..l)
        .map(|r| {
            let d: f64 = (0..n)
                .map(|c| (fp[r * n + c] - fm[r * n + c]) * jump.nu[c])
                .sum();
            d * d
        })
        .sum::<f64>()
        .sqrt();
    checks.push(Check::new("normal_flux_mismatch", mismatch, tol));
    if specs.constraint == super::ConstraintSet::UnitSphere {
        for (name, s) in [
            ("constraint(phi_plus)", &jump.phi_plus),
            ("constraint(phi_minus)", &jump.phi_minus),
        ] {
            checks.push(Check::new(name, super::norm(s) - 1.0, tol.max(1e-10)));
        }
    }
    ValidationReport::from_checks(checks, fd)
}

/// Residual `(u⁺−u⁻)ν_s + (F(u⁺)−F(u⁻))·ν_y`, one check per component.
pub fn validate_rankine_hugoniot(
    jump: &SpaceTimeJumpData,
    flux: &dyn FluxMap,
    tol: f64,
) -> ValidationReport {
    let k = jump.state_dim();
    let n = jump.space_dim();
    if flux.state_dim() != k || flux.rows() != k || flux.space_dim() != n {
        return ValidationReport::from_checks(vec![Check::new("shape", f64::INFINITY, tol)], false);
    }
    let mut fp = vec![0.0; k * n];
    let mut fm = vec![0.0; k * n];
    flux.value(&jump.u_plus, &mut fp);
    flux.value(&jump.u_minus, &mut fm);
    let nu_y = jump.nu_y();
    let checks = (0..k)
        .map(|i| {
            let r = (jump.u_plus[i] - jump.u_minus[i]) * jump.nu_s()
                + (0..n)
                    .map(|c| (fp[i * n + c] - fm[i * n + c]) * nu_y[c])
                    .sum::<f64>();
            Check::new(format!("rh_residual[{i}]"), r, tol)
        })
        .collect();
    ValidationReport::from_checks(checks, false)
}

/// Maximum over `points` of `|∇q_j − ∇η·∇F_j|`, the entropy-pair relation.
pub fn verify_entropy_relation(law: &ConservationLaw, points: &[Vec<f64>], tol: f64) -> Check {
    let Some(q) = &law.entropy_flux else {
        return Check::new("entropy_relation", f64::INFINITY, tol);
    };
    let k = law.flux.state_dim();
    let n = law.flux.space_dim();
    let mut jf = vec![0.0; k * n * k];
    let mut jq = vec![0.0; n * k];
    let mut ge = vec![0.0; k];
    let mut worst = 0.0f64;
    for u in points {
        law.flux.jacobian(u, &mut jf);
        q.jacobian(u, &mut jq);
        law.entropy.grad(u, &mut ge);
        for j in 0..n {
            for c in 0..k {
                let rhs: f64 = (0..k).map(|r| ge[r] * jf[(r * n + j) * k + c]).sum();
                worst = worst.max((jq[j * k + c] - rhs).abs());
            }
        }
    }
    Check::new("entropy_relation", worst, tol)
}
