use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

use cellgamma::cellopt::{compute_cell_energy, CellProblem, CellSolution};
use cellgamma::gamma::{run_gamma_sweep, GammaOptions};
use cellgamma::grid::{build_frame, write_cgrid, CellGrid};
use cellgamma::hyperbolic::{
    compute_shock_cell_energy, reduce_to_static_frame, viscous_profile_oracle_1d,
};
use cellgamma::model::{
    catalog_lookup, catalog_names, validate_jump_data, ConservationLaw, ConstraintSet, JumpData,
    ModelSpecs, ParamMap, ParamValue, SpaceTimeJumpData,
};
use cellgamma::oracle::{
    brute_force_cell_min, geodesic_energy_1d, DenseDualityOracle, GeodesicSampling,
};
use cellgamma::poisson::{duality_gap, BcVariant, PoissonSource};

use crate::config::{ConfigError, OracleKind, Overrides, RunConfig, Subcommand};
use crate::report::{emit_report, emit_timing, ReportMeta, ReportRow};

pub const DEFAULT_OUT: &str = "cellgamma-out";

pub const VALIDATION_TOL: f64 = 1e-8;

/// Discrete duality tolerance relative to `1 + ∫|M|²`.
pub const DUALITY_RTOL: f64 = 1e-9;

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ComputeFailed,
    ConfigInvalid,
}

impl Status {
    pub fn code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ComputeFailed => 1,
            Status::ConfigInvalid => 2,
        }
    }
}

/// Rows of one run plus the wall time of each row and the profile dumps.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ReportRow>,
    pub row_seconds: Vec<f64>,
    pub dumps: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl RunOutput {
    fn push(&mut self, row: ReportRow, t0: Instant) {
        self.rows.push(row);
        self.row_seconds.push(t0.elapsed().as_secs_f64());
    }

    pub fn failed(&self) -> bool {
        self.rows.iter().any(ReportRow::is_error)
    }
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

fn specs_of(cfg: &RunConfig, space_dim: Option<usize>) -> Result<ModelSpecs, ConfigError> {
    let m = cfg
        .model
        .as_ref()
        .ok_or_else(|| invalid("missing `model`"))?;
    let mut params = m.params.clone();
    if let Some(n) = space_dim {
        let defaults = catalog_lookup(&m.name, &ParamMap::new()).map_err(invalid)?;
        if defaults.params.contains_key("space_dim") {
            params
                .entry("space_dim".into())
                .or_insert(ParamValue::Number(n as f64));
        }
    }
    catalog_lookup(&m.name, &params).map_err(invalid)
}

fn jump_of(cfg: &RunConfig) -> Result<JumpData, ConfigError> {
    let j = cfg.jump.as_ref().ok_or_else(|| invalid("missing `jump`"))?;
    let jump = if j.phi_plus == j.phi_minus {
        JumpData::no_jump(j.phi_plus.clone(), j.nu.clone())
    } else {
        JumpData::new(j.phi_plus.clone(), j.phi_minus.clone(), j.nu.clone())
    }
    .map_err(invalid)?;
    Ok(match &j.side_coefficients {
        Some((p, m)) => jump.with_sides(p.clone(), m.clone()),
        None => jump,
    })
}

fn shock_jump_of(cfg: &RunConfig) -> Result<SpaceTimeJumpData, ConfigError> {
    let j = cfg
        .shock_jump
        .as_ref()
        .ok_or_else(|| invalid("missing `shock_jump`"))?;
    if j.u_plus == j.u_minus {
        SpaceTimeJumpData::no_jump(j.u_plus.clone(), j.nu.clone())
    } else {
        SpaceTimeJumpData::new(j.u_plus.clone(), j.u_minus.clone(), j.nu.clone())
    }
    .map_err(invalid)
}

fn grid_of(cfg: &RunConfig, nu: &[f64]) -> Result<CellGrid, ConfigError> {
    let g = cfg.grid.as_ref().ok_or_else(|| invalid("missing `grid`"))?;
    let lateral = if g.lateral.is_empty() {
        vec![1; nu.len() - 1]
    } else {
        g.lateral.clone()
    };
    CellGrid::new(build_frame(nu).map_err(invalid)?, g.normal, &lateral).map_err(invalid)
}

fn conservation(specs: &ModelSpecs) -> Result<ConservationLaw, ConfigError> {
    specs
        .conservation
        .clone()
        .ok_or_else(|| invalid(format!("model `{}` has no conservation law", specs.name)))
}

fn dims_label(grid: &CellGrid) -> String {
    grid.dims()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

fn params_label(p: &ParamMap) -> String {
    serde_json::to_string(p).expect("parameters serialize")
}

/// Metadata closing every row.
fn finish(row: &mut ReportRow, cfg: &RunConfig, hash: &str, error: Option<String>) {
    row.set("subcommand", cfg.subcommand.map(|s| s.name()).unwrap_or(""));
    row.set("seed", cfg.optimizer.seed);
    row.set("status", if error.is_some() { "error" } else { "ok" });
    row.set("error", error.map(Value::from).unwrap_or(Value::Null));
    row.set("config_hash", hash);
    row.set("version", cellgamma::VERSION);
}

fn cell_columns(row: &mut ReportRow, sol: &CellSolution) {
    let e = &sol.energy;
    row.num("total", e.total);
    row.num("grad_term", e.grad_term);
    row.num("potential_term", e.potential_term);
    row.num("nonlocal_term", e.nonlocal_term);
    row.num("l_star", sol.l_star);
    let eq = if e.total != 0.0 {
        (sol.l_star * e.grad_term - e.b() / sol.l_star).abs() / e.total
    } else {
        0.0
    };
    row.num("equipartition_residual", eq);
    row.set("iterations", sol.iterations);
    row.set("converged", sol.converged);
    row.set("best_start", sol.best_start);
    row.set(
        "best_strategy",
        sol.start_reports
            .get(sol.best_start)
            .map(|r| r.strategy.clone())
            .unwrap_or_default(),
    );
    row.num("grad_max", sol.grad_max);
}

fn run_cell(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    let jump = jump_of(cfg)?;
    let specs = specs_of(cfg, Some(jump.space_dim()))?;
    let grid = grid_of(cfg, &jump.nu)?;
    let check = validate_jump_data(&jump, &specs, VALIDATION_TOL);
    let opts = cfg.cell_options(jump.jump_size());
    for &bc in &cfg.bc {
        let t0 = Instant::now();
        let mut row = ReportRow::new();
        row.set("model", specs.name.as_str());
        row.set("bc", bc.name());
        row.set("grid", dims_label(&grid));
        let res = compute_cell_energy(&jump, &specs, &grid, bc, &opts);
        let err = match res {
            Ok(sol) => {
                cell_columns(&mut row, &sol);
                if cfg.dump_profiles {
                    let mut dims = grid.dims().to_vec();
                    dims.push(sol.profile.comps);
                    out.dumps.push((
                        format!("profile_{}.cgrid", bc.name()),
                        dims,
                        sol.profile.values.clone(),
                    ));
                }
                None
            }
            Err(e) => Some(e.to_string()),
        };
        row.set("validation_pass", check.pass);
        finish(&mut row, cfg, hash, err);
        out.push(row, t0);
    }
    Ok(())
}

fn run_shock(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    let jump = shock_jump_of(cfg)?;
    let specs = specs_of(cfg, Some(jump.space_dim()))?;
    let law = conservation(&specs)?;
    let grid = grid_of(cfg, &jump.nu)?;
    let opts = cfg.shock_options();
    let t0 = Instant::now();
    let mut row = ReportRow::new();
    row.set("model", specs.name.as_str());
    row.set("grid", dims_label(&grid));
    let mut err = None;
    match compute_shock_cell_energy(&jump, law.flux.clone(), law.entropy.clone(), &grid, &opts) {
        Ok(sol) => {
            cell_columns(&mut row, &sol.cell);
            row.num("nu_y_norm", sol.nu_y_norm);
            row.num(
                "rh_residual",
                sol.rh_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())),
            );
            row.num("constraint_residual", sol.constraint_residual);
            if cfg.dump_profiles {
                let mut dims = grid.dims().to_vec();
                dims.push(sol.cell.profile.comps);
                out.dumps.push((
                    "shock_profile.cgrid".into(),
                    dims,
                    sol.cell.profile.values.clone(),
                ));
            }
            if cfg.shock.reduce {
                let reduced = reduce_to_static_frame(&jump, law.flux.clone()).and_then(|red| {
                    let rjump = red.reduced_jump(&jump)?;
                    let rgrid = CellGrid::new(
                        build_frame(&red.nu_prime)?,
                        grid.dims()[0],
                        &grid.dims()[1..],
                    )?;
                    let rsol = compute_shock_cell_energy(
                        &rjump,
                        red.reduced_flux,
                        law.entropy.clone(),
                        &rgrid,
                        &opts,
                    )?;
                    Ok((red.factor, rsol))
                });
                match reduced {
                    Ok((factor, rsol)) => {
                        let scaled = factor * rsol.cell.energy.total;
                        row.num("reduced_total", rsol.cell.energy.total);
                        row.set("reduced_converged", rsol.cell.converged);
                        row.num("scaled_reduced_total", scaled);
                        let rel = if scaled != 0.0 {
                            (sol.cell.energy.total - scaled).abs() / scaled.abs()
                        } else {
                            0.0
                        };
                        row.num("scaling_rel_diff", rel);
                    }
                    Err(e) => err = Some(format!("reduced problem: {e}")),
                }
            }
        }
        Err(e) => err = Some(e.to_string()),
    }
    finish(&mut row, cfg, hash, err);
    out.push(row, t0);
    Ok(())
}

fn run_duality(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    let d = &cfg.duality;
    let grid = CellGrid::new(build_frame(&d.nu).map_err(invalid)?, d.normal, &d.lateral)
        .map_err(invalid)?;
    let oracles: Vec<Option<DenseDualityOracle>> = cfg
        .bc
        .iter()
        .map(|&bc| {
            if d.oracle {
                DenseDualityOracle::new(&grid, bc).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<cellgamma::Result<_>>()
        .map_err(invalid)?;
    for sample in 0..d.samples {
        let t0 = Instant::now();
        let mut row = ReportRow::new();
        row.set("sample", sample);
        row.set("grid", dims_label(&grid));
        row.set("comps", d.comps);
        let res = (|| -> cellgamma::Result<()> {
            let src = PoissonSource::random(&grid, d.comps, cfg.optimizer.seed, sample as u64)?;
            let m2 = src.edges.norm_sq(&grid);
            let tol = DUALITY_RTOL * (1.0 + m2);
            row.num("flux_norm_sq", m2);
            row.num("tolerance", tol);
            let mut pass = true;
            let mut energies = Vec::new();
            for (bc, oracle) in cfg.bc.iter().zip(&oracles) {
                let rep = duality_gap(&grid, &src, *bc)?;
                let p = bc.name();
                row.num(&format!("{p}_nonlocal"), rep.nonlocal_energy);
                row.num(&format!("{p}_j0"), rep.j0_projection);
                row.num(&format!("{p}_gap"), rep.gap);
                pass &= rep.gap.abs() <= tol;
                if let Some(o) = oracle {
                    let min = o.min_energy(&src)?;
                    let g = (min - rep.nonlocal_energy).abs();
                    row.num(&format!("{p}_oracle_min"), min);
                    row.num(&format!("{p}_oracle_gap"), g);
                    pass &= g <= tol;
                }
                energies.push((*bc, rep.nonlocal_energy));
            }
            let find = |b: BcVariant| energies.iter().find(|(x, _)| *x == b).map(|(_, e)| *e);
            if let (Some(dir), Some(neu)) = (
                find(BcVariant::DirichletCell),
                find(BcVariant::NeumannNormalPeriodicLateral),
            ) {
                let ok = dir <= neu * (1.0 + DUALITY_RTOL) + DUALITY_RTOL;
                row.set("dirichlet_le_neumann", ok);
                pass &= ok;
            }
            row.set("pass", pass);
            Ok(())
        })();
        finish(&mut row, cfg, hash, res.err().map(|e| e.to_string()));
        out.push(row, t0);
    }
    Ok(())
}

fn run_gamma(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    let jump = jump_of(cfg)?;
    let specs = specs_of(cfg, Some(jump.space_dim()))?;
    let g = cfg
        .gamma
        .as_ref()
        .ok_or_else(|| invalid("missing `gamma`"))?;
    g.domain.validate().map_err(invalid)?;
    let mut opts = GammaOptions {
        bc: cfg.bc[0],
        cell: cfg.cell_options(jump.jump_size()),
        padding: g.padding.clone(),
        extrapolate: g.extrapolate,
        parallel: cfg.optimizer.parallel,
        ..GammaOptions::default()
    };
    if let Some(grid) = &cfg.grid {
        opts.cell_normal = grid.normal;
        opts.cell_lateral = grid.lateral.clone();
    }
    let t0 = Instant::now();
    match run_gamma_sweep(&g.domain, &jump, &specs, &g.epsilons, &opts) {
        Ok(sweep) => {
            let share = t0.elapsed().as_secs_f64() / sweep.rows.len() as f64;
            for r in &sweep.rows {
                let mut row = ReportRow::new();
                row.num("epsilon", r.epsilon);
                row.num("full_energy", r.full_energy);
                row.num("predicted", r.predicted);
                row.num("ratio", r.ratio);
                row.set("model", specs.name.as_str());
                row.num("gradient_term", r.gradient_term);
                row.num("potential_term", r.potential_term);
                row.num("nonlocal_term", r.nonlocal_term);
                row.set(
                    "padding_change",
                    r.padding_change.map(Value::from).unwrap_or(Value::Null),
                );
                row.num("cell_energy", sweep.cell_energy);
                row.num("cell_estimate", sweep.cell_estimate);
                row.num("l_star", sweep.l_star);
                row.num("interface_measure", sweep.interface_measure);
                row.set("cell_converged", sweep.cell_converged);
                finish(&mut row, cfg, hash, r.error.clone());
                out.rows.push(row);
                out.row_seconds.push(share);
            }
        }
        Err(e) => {
            for &eps in &g.epsilons {
                let mut row = ReportRow::new();
                row.num("epsilon", eps);
                finish(&mut row, cfg, hash, Some(e.to_string()));
                out.rows.push(row);
                out.row_seconds.push(0.0);
            }
        }
    }
    Ok(())
}

fn run_oracle(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    let t0 = Instant::now();
    let mut row = ReportRow::new();
    let o = &cfg.oracle;
    let kind = match o.kind {
        OracleKind::Geodesic => "geodesic",
        OracleKind::BruteForce => "brute_force",
        OracleKind::ViscousProfile => "viscous_profile",
    };
    row.set("oracle", kind);
    let res: cellgamma::Result<()> = match o.kind {
        OracleKind::Geodesic => {
            let jump = jump_of(cfg)?;
            let specs = specs_of(cfg, Some(jump.space_dim()))?;
            row.set("model", specs.name.as_str());
            geodesic_energy_1d(&jump, &specs, &GeodesicSampling { per_dim: o.samples }).map(|v| {
                row.num("value", v);
            })
        }
        OracleKind::BruteForce => {
            let jump = jump_of(cfg)?;
            let specs = specs_of(cfg, Some(jump.space_dim()))?;
            let grid = grid_of(cfg, &jump.nu)?;
            row.set("model", specs.name.as_str());
            row.set("grid", dims_label(&grid));
            let bc = cfg.bc[0];
            (|| {
                let problem = CellProblem::new(&grid, &specs, &jump, bc)?;
                let v = brute_force_cell_min(&problem, o.starts, cfg.optimizer.seed)?;
                let sol = compute_cell_energy(
                    &jump,
                    &specs,
                    &grid,
                    bc,
                    &cfg.cell_options(jump.jump_size()),
                )?;
                row.num("value", v);
                row.num("solver_total", sol.energy.total);
                row.num("solver_minus_oracle", sol.energy.total - v);
                Ok(())
            })()
        }
        OracleKind::ViscousProfile => {
            let jump = shock_jump_of(cfg)?;
            let specs = specs_of(cfg, Some(jump.space_dim()))?;
            let law = conservation(&specs)?;
            row.set("model", specs.name.as_str());
            (|| {
                let red = reduce_to_static_frame(&jump, law.flux.clone())?;
                let v = viscous_profile_oracle_1d(
                    jump.u_minus[0],
                    jump.u_plus[0],
                    red.reduced_flux.as_ref(),
                    law.entropy.as_ref(),
                )?;
                row.num("reduced_value", v);
                row.num("factor", red.factor);
                row.num("value", red.factor * v);
                Ok(())
            })()
        }
    };
    finish(&mut row, cfg, hash, res.err().map(|e| e.to_string()));
    out.push(row, t0);
    Ok(())
}

fn run_catalog(cfg: &RunConfig, hash: &str, out: &mut RunOutput) -> Result<(), ConfigError> {
    for name in catalog_names() {
        let t0 = Instant::now();
        let mut row = ReportRow::new();
        row.set("model", *name);
        let err = match catalog_lookup(name, &ParamMap::new()) {
            Ok(s) => {
                row.set("state_dim", s.state_dim());
                row.set("space_dim", s.space_dim());
                row.set("flux_rows", s.flux_rows());
                row.set(
                    "constraint",
                    if s.constraint == ConstraintSet::UnitSphere {
                        "unit_sphere"
                    } else {
                        "none"
                    },
                );
                row.set("conservation_law", s.conservation.is_some());
                row.set("params", params_label(&s.params));
                None
            }
            Err(e) => Some(e.to_string()),
        };
        finish(&mut row, cfg, hash, err);
        out.push(row, t0);
    }
    Ok(())
}

/// Runs a resolved configuration. Errors are configuration errors; compute
/// failures are recorded in the rows.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, ConfigError> {
    let hash = cfg.hash();
    let mut out = RunOutput::default();
    match cfg.subcommand.ok_or_else(|| invalid("no subcommand"))? {
        Subcommand::Cell => run_cell(cfg, &hash, &mut out)?,
        Subcommand::Shock => run_shock(cfg, &hash, &mut out)?,
        Subcommand::Duality => run_duality(cfg, &hash, &mut out)?,
        Subcommand::Gamma => run_gamma(cfg, &hash, &mut out)?,
        Subcommand::Oracle => run_oracle(cfg, &hash, &mut out)?,
        Subcommand::Catalog => run_catalog(cfg, &hash, &mut out)?,
    }
    Ok(out)
}

fn write_dump(path: &Path, dims: &[usize], values: &[f64]) -> cellgamma::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_cgrid(&mut f, dims, values)
}

/// Loads, resolves and runs a configuration, then writes the report, the
/// timing sidecar and any dumps. Messages go to stderr.
pub fn run_config(sub: Subcommand, path: Option<&Path>, ov: &Overrides) -> Status {
    let started = Instant::now();
    let cfg = match path {
        Some(p) => RunConfig::load(p),
        None if sub == Subcommand::Catalog => Ok(RunConfig::empty(sub)),
        None => Err(invalid(format!("`{}` needs --config", sub.name()))),
    }
    .and_then(|c| c.resolve(sub, ov));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::ConfigInvalid;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return Status::ComputeFailed;
        }
    };
    let out = match pool.install(|| execute(&cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::ConfigInvalid;
        }
    };
    let dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let meta = ReportMeta {
        subcommand: sub.name().into(),
        config_hash: cfg.hash(),
        version: cellgamma::VERSION.into(),
    };
    if let Err(e) = emit_report(&meta, &out.rows, &dir) {
        eprintln!("error: {e}");
        return Status::ComputeFailed;
    }
    for (name, dims, values) in &out.dumps {
        if let Err(e) = write_dump(&dir.join(name), dims, values) {
            eprintln!("error: {e}");
            return Status::ComputeFailed;
        }
    }
    if let Err(e) = emit_timing(&dir, started.elapsed().as_secs_f64(), &out.row_seconds) {
        eprintln!("error: {e}");
        return Status::ComputeFailed;
    }
    for r in out.rows.iter().filter(|r| r.is_error()) {
        if let Some(Value::String(msg)) = r.get("error") {
            eprintln!("error: {msg}");
        }
    }
    if out.failed() {
        Status::ComputeFailed
    } else {
        Status::Ok
    }
}
