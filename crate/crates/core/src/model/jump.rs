use serde::{Deserialize, Serialize};

use super::norm;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// Limiting states and normal of one spatial cell problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpData {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    pub nu: Vec<f64>,
    /// Side tags `(plus, minus)`; see [`super::ModelSpecs::side`].
    pub side_coefficients: Option<(String, String)>,
}

impl JumpData {
    pub fn new(phi_plus: Vec<f64>, phi_minus: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        let j = Self::build(phi_plus, phi_minus, nu)?;
        if j.is_degenerate() {
            return Err(Error::BadParams("phi_plus equals phi_minus".into()));
        }
        Ok(j)
    }

    /// Equal limiting states, admitted for smoke tests.
    pub fn no_jump(state: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        Self::build(state.clone(), state, nu)
    }

    fn build(phi_plus: Vec<f64>, phi_minus: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        if phi_plus.len() != phi_minus.len() || phi_plus.is_empty() || nu.is_empty() {
            return Err(Error::ShapeMismatch(
                "jump states must share a nonzero dimension".into(),
            ));
        }
        let n = norm(&nu);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitNormal(n));
        }
        Ok(JumpData {
            phi_plus,
            phi_minus,
            nu,
            side_coefficients: None,
        })
    }

    pub fn with_sides(mut self, plus: impl Into<String>, minus: impl Into<String>) -> Self {
        self.side_coefficients = Some((plus.into(), minus.into()));
        self
    }

    pub fn state_dim(&self) -> usize {
        self.phi_plus.len()
    }

    pub fn space_dim(&self) -> usize {
        self.nu.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.phi_plus == self.phi_minus
    }

    pub fn jump_size(&self) -> f64 {
        let d: Vec<f64> = self
            .phi_plus
            .iter()
            .zip(&self.phi_minus)
            .map(|(a, b)| a - b)
            .collect();
        norm(&d)
    }

    /// `(φ⁻, φ⁺, −ν)` with the side tags exchanged: the same interface seen
    /// from the other side.
    pub fn flipped(&self) -> Self {
        JumpData {
            phi_plus: self.phi_minus.clone(),
            phi_minus: self.phi_plus.clone(),
            nu: self.nu.iter().map(|x| -x).collect(),
            side_coefficients: self
                .side_coefficients
                .as_ref()
                .map(|(p, m)| (m.clone(), p.clone())),
        }
    }
}

/// Limiting states and space-time normal `ν = (ν_y, ν_s)` of a shock cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeJumpData {
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub nu: Vec<f64>,
}

impl SpaceTimeJumpData {
    pub fn new(u_plus: Vec<f64>, u_minus: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        let j = Self::build(u_plus, u_minus, nu)?;
        if j.is_degenerate() {
            return Err(Error::BadParams("u_plus equals u_minus".into()));
        }
        Ok(j)
    }

    pub fn no_jump(state: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        Self::build(state.clone(), state, nu)
    }

    fn build(u_plus: Vec<f64>, u_minus: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        if u_plus.len() != u_minus.len() || u_plus.is_empty() || nu.len() < 2 {
            return Err(Error::ShapeMismatch(
                "space-time jump needs matching states and a normal with N+1 ≥ 2 entries".into(),
            ));
        }
        let n = norm(&nu);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitNormal(n));
        }
        let j = SpaceTimeJumpData {
            u_plus,
            u_minus,
            nu,
        };
        if norm(j.nu_y()) == 0.0 {
            return Err(Error::DegenerateNormal);
        }
        Ok(j)
    }

    pub fn state_dim(&self) -> usize {
        self.u_plus.len()
    }

    pub fn space_dim(&self) -> usize {
        self.nu.len() - 1
    }

    pub fn nu_y(&self) -> &[f64] {
        &self.nu[..self.nu.len() - 1]
    }

    pub fn nu_s(&self) -> f64 {
        self.nu[self.nu.len() - 1]
    }

    pub fn is_degenerate(&self) -> bool {
        self.u_plus == self.u_minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_normal() {
        assert!(matches!(
            JumpData::new(vec![1.0], vec![-1.0], vec![1.0, 1e-5]),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn rejects_equal_states_unless_asked() {
        assert!(JumpData::new(vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(JumpData::no_jump(vec![1.0], vec![1.0])
            .unwrap()
            .is_degenerate());
    }

    #[test]
    fn flip_is_an_involution() {
        let j = JumpData::new(vec![1.0], vec![-1.0], vec![0.6, 0.8])
            .unwrap()
            .with_sides("w=2", "w=1");
        assert_eq!(j.flipped().flipped(), j);
        assert_eq!(
            j.flipped().side_coefficients,
            Some(("w=1".into(), "w=2".into()))
        );
    }

    #[test]
    fn space_time_split() {
        let s = 0.5f64.sqrt();
        let j = SpaceTimeJumpData::new(vec![0.0], vec![2.0], vec![s, -s]).unwrap();
        assert_eq!(j.nu_y(), &[s]);
        assert_eq!(j.nu_s(), -s);
        assert!(matches!(
            SpaceTimeJumpData::new(vec![0.0], vec![2.0], vec![0.0, 1.0]),
            Err(Error::DegenerateNormal)
        ));
    }
}
