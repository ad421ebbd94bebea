//! Run configuration, manufactured solutions, verification suites,
//! convergence studies and report emission.

mod config;
mod convergence;
mod manufactured;
mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    check_budget, CatalogData, CatalogForcing, DataSpec, ForcingSpec, GeometrySpec, PicardSettings, Problem, RunConfig,
    SolverSettings, DEFAULT_SEED, PANEL_BUDGET,
};
pub use convergence::{
    convergence_study, manufactured_level, offset_points, one_sided_limits, ConvergenceRow, ConvergenceTable, LevelResult, ERROR_MARGIN,
    ERROR_SAMPLES, JUMP_OFFSET,
};
pub use manufactured::{
    interior_points, manufactured_solution, relative_l2, relative_pressure_l2, ManufacturedSolution, SOURCE_CLEARANCE,
};
pub use suites::{
    jump_errors, newtonian_pde_residual, single_layer_normal_defect, smooth_forcing, smooth_random_field, verify_suite,
    Check, Comparison, JumpErrors, SuiteReport, Timing, CUBE_SOURCE, SPHERE_SOURCE, SUITE_ALPHA, SUITE_NAMES,
};

use crate::error::{BbemError, Result};
use crate::geometry::{build_volume_grid, label_patches, PatchLabeling, SurfaceMesh, VolumeGrid};
use crate::kernels::Vec3;
use crate::potentials::{BoundaryField, VolumeField};
use crate::semilinear::{estimate_constants, picard_solve, semilinear_residual, ContractionReport, SemilinearConstants, SolutionMap};
use crate::solvers::{evaluate_solution, solve, BvpSpec, SolutionHandle};

/// Everything a run reports; identical configs give identical reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub n_panels: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub quadrature_order: usize,
    /// Relative residual of the (last) boundary integral system.
    pub residual_l2: f64,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    /// Constant added to the pressure so that it has zero mean over the sampled field points.
    pub pressure_constant: f64,
    pub warnings: Vec<String>,
    /// Manufactured-solution errors, when the exact solution is known.
    pub errors: Option<LevelResult>,
    /// Factor applied to all data (semilinear runs scaled to a fraction of `zeta_est`).
    pub data_scale: f64,
    pub constants: Option<SemilinearConstants>,
    pub contraction: Option<ContractionReport>,
    pub semilinear_residual: Option<f64>,
    pub n_field_samples: usize,
}

/// Where a run wrote its artifacts.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub output_dir: PathBuf,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct FieldRow {
    x: f64,
    y: f64,
    z: f64,
    u: f64,
    v: f64,
    w: f64,
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFile {
    #[serde(default)]
    velocity: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    traction: Option<Vec<[f64; 3]>>,
}

struct BoundaryData {
    h0: BoundaryField,
    g0: BoundaryField,
}

fn data_error(msg: impl Into<String>) -> BbemError {
    BbemError::Config { path: "data".into(), msg: msg.into() }
}

fn boundary_data(config: &RunConfig, mesh: &SurfaceMesh) -> Result<BoundaryData> {
    let areas = mesh.areas();
    match &config.data {
        DataSpec::Manufactured { source_point, column } => {
            let exact = manufactured_solution(mesh, Vec3::from(*source_point), *column, &config.linear_params())?;
            Ok(BoundaryData { h0: exact.trace(mesh)?, g0: exact.traction_field(mesh)? })
        }
        DataSpec::Catalog { name, scale } => Ok(BoundaryData {
            h0: BoundaryField::from_fn(mesh, |c, _| name.velocity(c) * *scale),
            g0: BoundaryField::from_fn(mesh, |_, n| name.traction(n) * *scale),
        }),
        DataSpec::File { path } => {
            let text = std::fs::read_to_string(path)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let file: DataFile = serde_path_to_error::deserialize(de).map_err(|e| BbemError::Config {
                path: format!("data.path:{}", e.path()),
                msg: e.inner().to_string(),
            })?;
            let field = |v: Option<Vec<[f64; 3]>>, what: &str| -> Result<BoundaryField> {
                match v {
                    None => Ok(BoundaryField::zeros(mesh)),
                    Some(v) if v.len() == mesh.len() => BoundaryField::new(v.into_iter().map(Vec3::from).collect(), areas.clone()),
                    Some(v) => Err(data_error(format!("{what} has {} entries, mesh has {} panels", v.len(), mesh.len()))),
                }
            };
            let needs_velocity = config.problem != Problem::Neumann;
            let needs_traction = config.problem != Problem::Dirichlet;
            if needs_velocity && file.velocity.is_none() {
                return Err(data_error("data file lacks \"velocity\""));
            }
            if needs_traction && file.traction.is_none() {
                return Err(data_error("data file lacks \"traction\""));
            }
            Ok(BoundaryData { h0: field(file.velocity, "velocity")?, g0: field(file.traction, "traction")? })
        }
    }
}

fn labeling(config: &RunConfig, mesh: &SurfaceMesh) -> Result<Option<PatchLabeling>> {
    match &config.patches {
        Some(rule) if matches!(config.problem, Problem::Mixed | Problem::Semilinear) => Ok(Some(label_patches(mesh, rule)?)),
        _ => Ok(None),
    }
}

fn forcing(config: &RunConfig, grid: &VolumeGrid) -> Option<VolumeField> {
    config.forcing.as_ref().map(|f| VolumeField::from_fn(grid, |x| f.name.value(x) * f.scale))
}

/// Cells at least one cell away from the boundary; the sampled-field locations.
fn field_points(grid: &VolumeGrid) -> Vec<Vec3> {
    grid.interior_cells(1).into_iter().map(|c| grid.centers[c]).collect()
}

fn write_fields(dir: &Path, handle: &SolutionHandle, points: &[Vec3]) -> Result<f64> {
    let sol = evaluate_solution(handle, points)?;
    let mut w = csv::Writer::from_path(dir.join("fields.csv"))?;
    for ((x, u), p) in points.iter().zip(&sol.velocity).zip(&sol.pressure) {
        w.serialize(FieldRow { x: x.x, y: x.y, z: x.z, u: u.x, v: u.y, w: u.z, p: *p })?;
    }
    w.flush()?;
    Ok(sol.pressure_constant)
}

/// Solves the configured problem and writes `report.json` and `fields.csv`
/// into `out` (or the config's `output_dir`).
pub fn run_config(path: impl AsRef<Path>, out: Option<&Path>) -> Result<RunOutcome> {
    let start = Instant::now();
    let config = RunConfig::load(path)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    let report = run(&config, &dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(RunOutcome { report, output_dir: dir, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Runs a parsed config, writing `fields.csv` into `dir`, and returns the report.
pub fn run(config: &RunConfig, dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let mesh = config.geometry.build()?;
    let labeling = labeling(config, &mesh)?;
    let opts = config.solver_options();
    let grid = build_volume_grid(&config.geometry.volume_domain(&mesh), config.volume_resolution)?;
    let points = field_points(&grid);
    let data = boundary_data(config, &mesh)?;
    std::fs::create_dir_all(dir)?;
    let mut report = RunReport {
        problem: config.problem.name().into(),
        n_panels: mesh.len(),
        alpha: config.params.alpha,
        beta: config.params.beta,
        seed: config.seed,
        quadrature_order: config.quadrature_order,
        residual_l2: 0.0,
        sigma_min: None,
        sigma_max: None,
        pressure_constant: 0.0,
        warnings: Vec::new(),
        errors: None,
        data_scale: 1.0,
        constants: None,
        contraction: None,
        semilinear_residual: None,
        n_field_samples: points.len(),
    };
    let f = forcing(config, &grid);
    let handle = if config.problem == Problem::Semilinear {
        let labeling = labeling.as_ref().expect("validated: semilinear runs have patches");
        let map = SolutionMap::new(&mesh, labeling, &grid, &config.params, &opts)?;
        let constants = estimate_constants(&map, config.picard.constant_samples, config.seed)?;
        let f = f.unwrap_or_else(|| VolumeField::zeros(&grid));
        let scale = match (config.picard.data_fraction_of_zeta, constants.zeta_est) {
            (Some(frac), Some(zeta)) => {
                let n = map.data_norm(&f, &data.h0, &data.g0);
                if n > 0.0 {
                    frac * zeta / n
                } else {
                    1.0
                }
            }
            _ => 1.0,
        };
        let (f, h0, g0) = (f.scaled(scale), data.h0.scaled(scale), data.g0.scaled(scale));
        let (handle, contraction) = picard_solve(&map, &f, &h0, &g0, &config.picard.config(), &constants)?;
        report.data_scale = scale;
        report.constants = Some(constants);
        report.contraction = Some(contraction);
        report.semilinear_residual = Some(semilinear_residual(&handle, &grid, &config.params, &f)?);
        report.residual_l2 = map.solver.solve_data(&h0, &g0).map(|(_, r)| r)?;
        handle
    } else if let (DataSpec::Manufactured { source_point, column }, None) = (&config.data, &f) {
        let exact = manufactured_solution(&mesh, Vec3::from(*source_point), *column, &config.linear_params())?;
        let samples = interior_points(&mesh, ERROR_SAMPLES, ERROR_MARGIN, config.seed)?;
        let (errors, handle, solve_report) =
            manufactured_level(config.problem.bvp_kind(), &mesh, labeling.as_ref(), &exact, &samples, &opts)?;
        report.residual_l2 = solve_report.residual_l2;
        report.sigma_min = solve_report.sigma_min;
        report.sigma_max = solve_report.sigma_max;
        report.warnings = solve_report.warnings;
        report.errors = Some(errors);
        handle
    } else {
        let mut spec = BvpSpec {
            kind: config.problem.bvp_kind(),
            params: config.linear_params(),
            mesh: mesh.clone(),
            labeling: labeling.clone(),
            dirichlet: Some(data.h0),
            neumann: Some(data.g0),
            forcing: None,
        };
        if let Some(f) = f {
            spec = spec.with_forcing(grid.clone(), f);
        }
        let (handle, solve_report) = solve(&spec, &opts)?;
        report.residual_l2 = solve_report.residual_l2;
        report.sigma_min = solve_report.sigma_min;
        report.sigma_max = solve_report.sigma_max;
        report.warnings = solve_report.warnings;
        handle
    };
    report.pressure_constant = write_fields(dir, &handle, &points)?;
    Ok(report)
}

/// Runs a convergence study and writes `convergence.csv` into `out` (or the config's `output_dir`).
pub fn run_convergence(path: impl AsRef<Path>, out: Option<&Path>) -> Result<(ConvergenceTable, PathBuf)> {
    let config = RunConfig::load(path)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    let table = convergence_study(&config)?;
    std::fs::create_dir_all(&dir)?;
    let file = dir.join("convergence.csv");
    table.write_csv(std::fs::File::create(&file)?)?;
    Ok((table, file))
}
