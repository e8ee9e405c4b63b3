use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cellgamma::cellopt::{CellOptions, InitStrategy};
use cellgamma::gamma::{DomainSpec, PaddingOptions};
use cellgamma::hyperbolic::ShockOptions;
use cellgamma::model::ParamMap;
use cellgamma::poisson::BcVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Cell,
    Shock,
    Duality,
    Gamma,
    Oracle,
    Catalog,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Cell => "cell",
            Subcommand::Shock => "shock",
            Subcommand::Duality => "duality",
            Subcommand::Gamma => "gamma",
            Subcommand::Oracle => "oracle",
            Subcommand::Catalog => "catalog",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: ParamMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    pub nu: Vec<f64>,
    /// `(plus, minus)` side tags.
    #[serde(default)]
    pub side_coefficients: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockJumpConfig {
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    /// `(ν_y, ν_s)`.
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub normal: usize,
    #[serde(default)]
    pub lateral: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    pub strategy: String,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub amplitude: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub gtol: Option<f64>,
    pub etol: f64,
    pub max_iter: usize,
    /// Cell starts; `None` keeps the library default set.
    pub starts: Option<Vec<StartConfig>>,
    /// Random starts of the shock solver.
    pub random_starts: usize,
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            gtol: None,
            etol: 1e-8,
            max_iter: 5000,
            starts: None,
            random_starts: 2,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShockConfig {
    /// Also solve the static-frame reduction and compare.
    pub reduce: bool,
    pub center: f64,
}

impl Default for ShockConfig {
    fn default() -> Self {
        ShockConfig {
            reduce: false,
            center: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualityConfig {
    pub samples: usize,
    pub normal: usize,
    pub lateral: Vec<usize>,
    pub nu: Vec<f64>,
    pub comps: usize,
    /// Also compute the divergence-free minimum by the dense oracle.
    pub oracle: bool,
}

impl Default for DualityConfig {
    fn default() -> Self {
        DualityConfig {
            samples: 50,
            normal: 16,
            lateral: vec![16],
            nu: vec![1.0, 0.0],
            comps: 1,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub domain: DomainSpec,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub padding: PaddingOptions,
    #[serde(default = "yes")]
    pub extrapolate: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Geodesic,
    BruteForce,
    ViscousProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    /// Lattice samples per dimension of the geodesic oracle.
    pub samples: usize,
    /// Starts of the brute-force oracle.
    pub starts: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Geodesic,
            samples: 200,
            starts: 64,
        }
    }
}

/// One run: which computation, on which model and data, with which options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub jump: Option<JumpConfig>,
    #[serde(default)]
    pub shock_jump: Option<ShockJumpConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Boundary variants; empty means the subcommand's default.
    #[serde(default)]
    pub bc: Vec<BcVariant>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub shock: ShockConfig,
    #[serde(default)]
    pub duality: DualityConfig,
    #[serde(default)]
    pub gamma: Option<GammaConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Write the optimal profiles as CGRID1 dumps next to the report.
    #[serde(default)]
    pub dump_profiles: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn empty(sub: Subcommand) -> Self {
        RunConfig {
            subcommand: Some(sub),
            model: None,
            jump: None,
            shock_jump: None,
            grid: None,
            bc: Vec::new(),
            optimizer: OptimizerConfig::default(),
            shock: ShockConfig::default(),
            duality: DualityConfig::default(),
            gamma: None,
            oracle: OracleConfig::default(),
            dump_profiles: false,
            output: None,
            threads: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies overrides and the subcommand, then checks that every section
    /// the subcommand needs is present and well formed.
    pub fn resolve(mut self, sub: Subcommand, ov: &Overrides) -> Result<Self, ConfigError> {
        match self.subcommand {
            Some(s) if s != sub => {
                return Err(ConfigError(format!(
                    "config is for `{}`, invoked as `{}`",
                    s.name(),
                    sub.name()
                )))
            }
            _ => self.subcommand = Some(sub),
        }
        if let Some(seed) = ov.seed {
            self.optimizer.seed = seed;
        }
        if ov.out.is_some() {
            self.output = ov.out.clone();
        }
        if ov.threads.is_some() {
            self.threads = ov.threads;
        }
        if self.threads == Some(0) {
            return Err(ConfigError("threads must be at least 1".into()));
        }
        if self.bc.is_empty() {
            self.bc = match sub {
                Subcommand::Duality => {
                    vec![
                        BcVariant::NeumannNormalPeriodicLateral,
                        BcVariant::DirichletCell,
                    ]
                }
                _ => vec![BcVariant::NeumannNormalPeriodicLateral],
            };
        }
        let need = |ok: bool, what: &str| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError(format!("`{}` needs `{what}`", sub.name())))
            }
        };
        match sub {
            Subcommand::Cell => {
                need(self.model.is_some(), "model")?;
                need(self.jump.is_some(), "jump")?;
                need(self.grid.is_some(), "grid")?;
            }
            Subcommand::Shock => {
                need(self.model.is_some(), "model")?;
                need(self.shock_jump.is_some(), "shock_jump")?;
                need(self.grid.is_some(), "grid")?;
            }
            Subcommand::Gamma => {
                need(self.model.is_some(), "model")?;
                need(self.jump.is_some(), "jump")?;
                need(self.gamma.is_some(), "gamma")?;
            }
            Subcommand::Oracle => {
                need(self.model.is_some(), "model")?;
                match self.oracle.kind {
                    OracleKind::Geodesic => need(self.jump.is_some(), "jump")?,
                    OracleKind::BruteForce => {
                        need(self.jump.is_some(), "jump")?;
                        need(self.grid.is_some(), "grid")?;
                    }
                    OracleKind::ViscousProfile => need(self.shock_jump.is_some(), "shock_jump")?,
                }
            }
            Subcommand::Duality => {
                let d = &self.duality;
                if d.samples == 0 || d.comps == 0 {
                    return Err(ConfigError(
                        "duality needs at least one sample and one component".into(),
                    ));
                }
                if d.lateral.len() + 1 != d.nu.len() {
                    return Err(ConfigError(
                        "duality: `lateral` must have one entry per lateral axis of `nu`".into(),
                    ));
                }
            }
            Subcommand::Catalog => {}
        }
        if let Some(starts) = &self.optimizer.starts {
            if starts.is_empty() {
                return Err(ConfigError("optimizer.starts must not be empty".into()));
            }
            for s in starts {
                InitStrategy::parse(&s.strategy, s.count, 0.0)
                    .map_err(|e| ConfigError(e.to_string()))?;
            }
        }
        if let Some(j) = &self.jump {
            if j.phi_plus.is_empty() || j.phi_plus.len() != j.phi_minus.len() || j.nu.is_empty() {
                return Err(ConfigError(
                    "jump: states must share a nonzero dimension and nu must be set".into(),
                ));
            }
        }
        if let Some(g) = &self.gamma {
            if g.epsilons.is_empty() {
                return Err(ConfigError("gamma.epsilons must not be empty".into()));
            }
        }
        Ok(self)
    }

    /// SHA-256 of the canonical JSON form without the fields that cannot
    /// change results (output location and thread count).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cell_options(&self, jump_size: f64) -> CellOptions {
        let o = &self.optimizer;
        let starts = o.starts.as_ref().map(|list| {
            list.iter()
                .map(|s| {
                    let amp = s.amplitude.unwrap_or(0.1 * jump_size);
                    InitStrategy::parse(&s.strategy, s.count, amp).expect("validated in resolve")
                })
                .collect()
        });
        CellOptions {
            gtol: o.gtol,
            etol: o.etol,
            max_iter: o.max_iter,
            seed: o.seed,
            starts,
            mirror: false,
            parallel: o.parallel,
        }
    }

    pub fn shock_options(&self) -> ShockOptions {
        let o = &self.optimizer;
        ShockOptions {
            gtol: o.gtol,
            etol: o.etol,
            max_iter: o.max_iter,
            seed: o.seed,
            random_starts: o.random_starts,
            amplitude: None,
            center: self.shock.center,
            parallel: o.parallel,
        }
    }
}
