//! Cell-problem interfacial energies for singularly perturbed functionals
//! with nonlocal terms.

pub mod cellopt;
pub mod error;
pub mod gamma;
pub mod grid;
pub mod hyperbolic;
pub mod model;
pub mod oracle;
pub mod poisson;
pub mod rng;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
