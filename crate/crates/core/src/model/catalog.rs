use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::evaluators::{BurgersEntropyFlux, LinearEntropyFlux};
use super::{
    BurgersFlux, ConservationLaw, ConstraintSet, DirichletEnergy, DoubleWell, FluxMap, LinearFlux,
    ModelSpecs, QuadraticEntropy, UniaxialAnisotropy, ZeroFlux, ZeroPotential,
};
use crate::error::{Error, Result};

/// Catalog parameter: a number or a list of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

pub type ParamMap = BTreeMap<String, ParamValue>;

const NAMES: [&str; 5] = [
    "double_well",
    "micromagnetics_2d",
    "burgers",
    "linear_advection",
    "quadratic_entropy",
];

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

struct Params<'a> {
    model: &'a str,
    map: &'a ParamMap,
    used: ParamMap,
}

impl<'a> Params<'a> {
    fn new(model: &'a str, map: &'a ParamMap, allowed: &[&str]) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::BadParams(format!(
                "{model}: unknown parameter `{k}`"
            )));
        }
        Ok(Params {
            model,
            map,
            used: ParamMap::new(),
        })
    }

    fn num(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.map.get(key) {
            None => default,
            Some(ParamValue::Number(x)) if x.is_finite() => *x,
            Some(_) => {
                return Err(Error::BadParams(format!(
                    "{}: `{key}` must be a number",
                    self.model
                )))
            }
        };
        self.used.insert(key.into(), ParamValue::Number(v));
        Ok(v)
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.num(key, default)?;
        if v <= 0.0 {
            return Err(Error::BadParams(format!(
                "{}: `{key}` must be positive",
                self.model
            )));
        }
        Ok(v)
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.num(key, default as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > 3.0 {
            return Err(Error::BadParams(format!(
                "{}: `{key}` must be 1, 2 or 3",
                self.model
            )));
        }
        Ok(v as usize)
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        let v = match self.map.get(key) {
            None => default,
            Some(ParamValue::List(x)) if !x.is_empty() && x.iter().all(|v| v.is_finite()) => {
                x.clone()
            }
            Some(ParamValue::Number(x)) if x.is_finite() => vec![*x],
            Some(_) => {
                return Err(Error::BadParams(format!(
                    "{}: `{key}` must be a list of numbers",
                    self.model
                )))
            }
        };
        self.used.insert(key.into(), ParamValue::List(v.clone()));
        Ok(v)
    }
}

/// Builds a catalog model. Unknown parameter keys are rejected; missing
/// ones take their defaults, and the resolved values are kept in
/// [`ModelSpecs::params`].
pub fn catalog_lookup(name: &str, params: &ParamMap) -> Result<ModelSpecs> {
    let mut specs = match name {
        "double_well" => double_well(params)?,
        "micromagnetics_2d" => micromagnetics(params)?,
        "burgers" => burgers(params)?,
        "linear_advection" => linear_advection(params)?,
        "quadratic_entropy" => quadratic_entropy(params)?,
        _ => return Err(Error::UnknownModel(name.into())),
    };
    specs.name = name.into();
    Ok(specs)
}

fn double_well(map: &ParamMap) -> Result<ModelSpecs> {
    let mut p = Params::new(
        "double_well",
        map,
        &["space_dim", "scale", "psi", "psi_axis"],
    )?;
    let n = p.count("space_dim", 1)?;
    let scale = p.positive("scale", 1.0)?;
    let psi = p.num("psi", 0.0)?;
    let axis = p.num("psi_axis", 0.0)?;
    if axis < 0.0 || axis.fract() != 0.0 || axis as usize >= n {
        return Err(Error::BadParams(
            "double_well: `psi_axis` out of range".into(),
        ));
    }
    let flux: Arc<dyn FluxMap> = if psi == 0.0 {
        Arc::new(ZeroFlux {
            state_dim: 1,
            rows: 1,
            space_dim: n,
        })
    } else {
        let mut c = vec![0.0; n];
        c[axis as usize] = psi;
        Arc::new(LinearFlux::new(1, 1, n, c))
    };
    let mut specs = ModelSpecs::new(
        "double_well",
        Arc::new(DoubleWell { scale }),
        flux,
        Arc::new(DirichletEnergy {
            state_dim: 1,
            space_dim: n,
            scale: 1.0,
        }),
        ConstraintSet::Unconstrained,
    )?;
    specs.params = p.used;
    Ok(specs)
}

fn micromagnetics(map: &ParamMap) -> Result<ModelSpecs> {
    let mut p = Params::new("micromagnetics_2d", map, &["anisotropy", "demag"])?;
    let a = p.positive("anisotropy", 1.0)?;
    let d = p.num("demag", 1.0)?;
    let mut c = vec![0.0; 6];
    c[0] = d;
    c[3 + 1] = d;
    let mut specs = ModelSpecs::new(
        "micromagnetics_2d",
        Arc::new(UniaxialAnisotropy {
            dim: 3,
            axis: 2,
            scale: a,
        }),
        Arc::new(LinearFlux::new(3, 1, 2, c)),
        Arc::new(DirichletEnergy {
            state_dim: 3,
            space_dim: 2,
            scale: 1.0,
        }),
        ConstraintSet::UnitSphere,
    )?;
    specs.params = p.used;
    Ok(specs)
}

fn conservation_bundle(
    name: &str,
    flux: Arc<dyn FluxMap>,
    entropy_flux: Arc<dyn FluxMap>,
) -> Result<ModelSpecs> {
    let k = flux.state_dim();
    let n = flux.space_dim();
    let specs = ModelSpecs::new(
        name,
        Arc::new(ZeroPotential { dim: k }),
        flux.clone(),
        Arc::new(DirichletEnergy {
            state_dim: k,
            space_dim: n,
            scale: 1.0,
        }),
        ConstraintSet::Unconstrained,
    )?;
    Ok(specs.with_conservation(ConservationLaw {
        flux,
        entropy: Arc::new(QuadraticEntropy { dim: k }),
        entropy_flux: Some(entropy_flux),
    }))
}

fn burgers(map: &ParamMap) -> Result<ModelSpecs> {
    let mut p = Params::new("burgers", map, &["space_dim", "direction"])?;
    let n = p.count("space_dim", 1)?;
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let dir = p.list("direction", e1)?;
    if dir.len() != n {
        return Err(Error::BadParams(
            "burgers: `direction` length must equal `space_dim`".into(),
        ));
    }
    let mut specs = conservation_bundle(
        "burgers",
        Arc::new(BurgersFlux {
            direction: dir.clone(),
        }),
        Arc::new(BurgersEntropyFlux { direction: dir }),
    )?;
    specs.params = p.used;
    Ok(specs)
}

fn linear_advection(map: &ParamMap) -> Result<ModelSpecs> {
    let mut p = Params::new("linear_advection", map, &["speed", "velocity"])?;
    let velocity = if map.contains_key("velocity") {
        if map.contains_key("speed") {
            return Err(Error::BadParams(
                "linear_advection: give `speed` or `velocity`, not both".into(),
            ));
        }
        p.list("velocity", vec![1.0])?
    } else {
        vec![p.num("speed", 1.0)?]
    };
    if velocity.len() > 3 {
        return Err(Error::BadParams(
            "linear_advection: at most 3 space dimensions".into(),
        ));
    }
    let f = LinearFlux::advection(&velocity);
    let mut specs = conservation_bundle(
        "linear_advection",
        Arc::new(f.clone()),
        Arc::new(LinearEntropyFlux { flux: f }),
    )?;
    specs.params = p.used;
    Ok(specs)
}

fn quadratic_entropy(map: &ParamMap) -> Result<ModelSpecs> {
    let mut p = Params::new("quadratic_entropy", map, &["speeds", "space_dim"])?;
    let speeds = p.list("speeds", vec![1.0, -1.0])?;
    let n = p.count("space_dim", 1)?;
    let f = LinearFlux::diagonal_system(&speeds, n);
    let mut specs = conservation_bundle(
        "quadratic_entropy",
        Arc::new(f.clone()),
        Arc::new(LinearEntropyFlux { flux: f }),
    )?;
    specs.params = p.used;
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_defaults() {
        let s = catalog_lookup("double_well", &ParamMap::new()).unwrap();
        assert_eq!((s.state_dim(), s.space_dim()), (1, 1));
        assert_eq!(s.potential.value(&[1.0]), 0.0);
        assert_eq!(s.potential.value(&[0.0]), 1.0);
        assert!(s.flux.is_zero());
        assert!(s.gradient.homogeneous_quadratic());
    }

    #[test]
    fn micromagnetics_layout() {
        let s = catalog_lookup("micromagnetics_2d", &ParamMap::new()).unwrap();
        assert_eq!((s.state_dim(), s.space_dim(), s.flux_rows()), (3, 2, 1));
        let mut out = [0.0; 2];
        s.flux.value(&[0.3, -0.4, 0.5], &mut out);
        assert_eq!(out, [0.3, -0.4]);
        assert!((s.potential.value(&[0.0, 0.6, 0.8]) - 0.64).abs() < 1e-15);
        assert_eq!(s.constraint, ConstraintSet::UnitSphere);
    }

    #[test]
    fn burgers_values() {
        let s = catalog_lookup("burgers", &ParamMap::new()).unwrap();
        let law = s.conservation.as_ref().unwrap();
        let mut f = [0.0];
        law.flux.value(&[3.0], &mut f);
        assert_eq!(f[0], 4.5);
        assert_eq!(law.entropy.eta(&[3.0]), 4.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            catalog_lookup("nope", &ParamMap::new()),
            Err(Error::UnknownModel(_))
        ));
        let mut p = ParamMap::new();
        p.insert("bogus".into(), ParamValue::Number(1.0));
        assert!(matches!(
            catalog_lookup("double_well", &p),
            Err(Error::BadParams(_))
        ));
        let mut p = ParamMap::new();
        p.insert("scale".into(), ParamValue::Number(-1.0));
        assert!(matches!(
            catalog_lookup("double_well", &p),
            Err(Error::BadParams(_))
        ));
    }
}
