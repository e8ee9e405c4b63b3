//! Analytic ingredients of the cell problems.
//!
//! Every evaluator is a pure function with an analytic derivative. Layout
//! conventions used throughout the crate:
//!
//! * a state is a slice of length `m` (or `k` for conservation laws);
//! * a flux value `Ψ(s) ∈ ℝ^{l×N}` is stored row-major, entry `(r, c)` at
//!   `r * N + c`;
//! * a flux jacobian is stored with entry `∂Ψ_{rc}/∂s_k` at `(r * N + c) * m + k`;
//! * a first-order jet `∇ζ ∈ ℝ^{m×N}` is stored row-major, `∂_c ζ_i` at `i * N + c`.

mod catalog;
mod evaluators;
mod jump;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use catalog::{catalog_lookup, catalog_names, ParamMap, ParamValue};
pub use evaluators::{
    BurgersFlux, DirichletEnergy, DoubleWell, FdPotential, LinearFlux, QuadraticEntropy,
    ScaledFlux, ScaledPotential, UniaxialAnisotropy, ZeroFlux, ZeroPotential,
};
pub use jump::{JumpData, SpaceTimeJumpData};
pub use validate::{
    validate_jump_data, validate_rankine_hugoniot, verify_entropy_relation, Check, ValidationReport,
};

/// Nonnegative potential `W: ℝ^m → ℝ`.
pub trait ScalarPotential: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn value(&self, s: &[f64]) -> f64;
    fn gradient(&self, s: &[f64], out: &mut [f64]);
    /// `false` when the gradient is a finite-difference fallback.
    fn analytic(&self) -> bool {
        true
    }
}

/// Matrix-valued map `Ψ: ℝ^m → ℝ^{l×N}`; also used for hyperbolic fluxes `F`.
pub trait FluxMap: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn rows(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn value(&self, s: &[f64], out: &mut [f64]);
    fn jacobian(&self, s: &[f64], out: &mut [f64]);
    /// Identically zero maps let callers skip the potential solve.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Gradient integrand `G` evaluated on the first-order jet.
pub trait GradientIntegrand: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn value(&self, jet: &[f64]) -> f64;
    fn gradient(&self, jet: &[f64], out: &mut [f64]);
    /// `G(tA) = t² G(A)`; enables the closed-form optimal scale.
    fn homogeneous_quadratic(&self) -> bool;
}

/// Convex entropy `η: ℝ^k → ℝ` with gradient and Hessian.
pub trait EntropyPair: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn eta(&self, u: &[f64]) -> f64;
    fn grad(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `k × k`.
    fn hess(&self, u: &[f64], out: &mut [f64]);
}

/// Admissible target set for the profile values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSet {
    Unconstrained,
    UnitSphere,
}

impl ConstraintSet {
    /// Maps a state onto the constraint set in place.
    pub fn project(&self, s: &mut [f64]) {
        if let ConstraintSet::UnitSphere = self {
            let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                s.iter_mut().for_each(|x| *x /= n);
            }
        }
    }

    pub fn contains(&self, s: &[f64], tol: f64) -> bool {
        match self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::UnitSphere => {
                (s.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= tol
            }
        }
    }
}

/// Hyperbolic part of a model: flux `F`, entropy `η` and (optionally) the
/// entropy flux used to check the entropy relation.
#[derive(Debug, Clone)]
pub struct ConservationLaw {
    pub flux: Arc<dyn FluxMap>,
    pub entropy: Arc<dyn EntropyPair>,
    pub entropy_flux: Option<Arc<dyn FluxMap>>,
}

/// Per-side evaluators selected by a side-coefficient tag.
#[derive(Debug, Clone)]
pub struct SideModel {
    pub potential: Arc<dyn ScalarPotential>,
    pub flux: Arc<dyn FluxMap>,
}

/// Evaluator bundle for one model.
#[derive(Debug, Clone)]
pub struct ModelSpecs {
    pub name: String,
    pub params: ParamMap,
    pub potential: Arc<dyn ScalarPotential>,
    pub flux: Arc<dyn FluxMap>,
    pub gradient: Arc<dyn GradientIntegrand>,
    pub constraint: ConstraintSet,
    pub conservation: Option<ConservationLaw>,
    sides: BTreeMap<String, SideModel>,
}

impl ModelSpecs {
    pub fn new(
        name: impl Into<String>,
        potential: Arc<dyn ScalarPotential>,
        flux: Arc<dyn FluxMap>,
        gradient: Arc<dyn GradientIntegrand>,
        constraint: ConstraintSet,
    ) -> Result<Self> {
        let m = potential.state_dim();
        if flux.state_dim() != m || gradient.state_dim() != m {
            return Err(Error::ShapeMismatch(format!(
                "state dimensions disagree: W {}, Ψ {}, G {}",
                m,
                flux.state_dim(),
                gradient.state_dim()
            )));
        }
        if flux.space_dim() != gradient.space_dim() {
            return Err(Error::ShapeMismatch(format!(
                "space dimensions disagree: Ψ {}, G {}",
                flux.space_dim(),
                gradient.space_dim()
            )));
        }
        Ok(ModelSpecs {
            name: name.into(),
            params: ParamMap::new(),
            potential,
            flux,
            gradient,
            constraint,
            conservation: None,
            sides: BTreeMap::new(),
        })
    }

    pub fn with_conservation(mut self, law: ConservationLaw) -> Self {
        self.conservation = Some(law);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.potential.state_dim()
    }

    pub fn space_dim(&self) -> usize {
        self.flux.space_dim()
    }

    pub fn flux_rows(&self) -> usize {
        self.flux.rows()
    }

    pub fn finite_difference_fallback(&self) -> bool {
        !self.potential.analytic() || self.sides.values().any(|s| !s.potential.analytic())
    }

    /// Registers an explicit evaluator pair for a side tag.
    pub fn register_side(&mut self, tag: impl Into<String>, side: SideModel) -> Result<()> {
        if side.potential.state_dim() != self.state_dim()
            || side.flux.state_dim() != self.state_dim()
            || side.flux.rows() != self.flux_rows()
            || side.flux.space_dim() != self.space_dim()
        {
            return Err(Error::ShapeMismatch(
                "side evaluators do not match the model".into(),
            ));
        }
        self.sides.insert(tag.into(), side);
        Ok(())
    }

    /// Resolves a side tag. Registered tags win; otherwise tags of the form
    /// `w=<a>,psi=<b>` scale the base potential by `a` and the flux by `b`
    /// (either key may be omitted; `base` is the unscaled model).
    pub fn side(&self, tag: &str) -> Result<SideModel> {
        if let Some(s) = self.sides.get(tag) {
            return Ok(s.clone());
        }
        let mut w_scale = 1.0;
        let mut psi_scale = 1.0;
        if tag != "base" && !tag.is_empty() {
            for part in tag.split(',') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::BadParams(format!("side tag `{tag}`")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::BadParams(format!("side tag `{tag}`")))?;
                match k.trim() {
                    "w" if v >= 0.0 => w_scale = v,
                    "psi" => psi_scale = v,
                    _ => return Err(Error::BadParams(format!("side tag `{tag}`"))),
                }
            }
        }
        Ok(SideModel {
            potential: Arc::new(ScaledPotential::new(self.potential.clone(), w_scale)),
            flux: Arc::new(ScaledFlux::new(self.flux.clone(), psi_scale)),
        })
    }

    /// The (minus, plus) evaluator pair for a jump.
    pub fn sides_for(&self, jump: &JumpData) -> Result<(SideModel, SideModel)> {
        match &jump.side_coefficients {
            None => {
                let base = SideModel {
                    potential: self.potential.clone(),
                    flux: self.flux.clone(),
                };
                Ok((base.clone(), base))
            }
            Some((plus, minus)) => Ok((self.side(minus)?, self.side(plus)?)),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Hyperbolic flux `F: ℝ^k → ℝ^{k×N}`; same layout as [`FluxMap`].
pub type FluxFunction = dyn FluxMap;
