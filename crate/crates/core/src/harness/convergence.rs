use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{check_budget, DataSpec, GeometrySpec, Problem, RunConfig};
use super::manufactured::{interior_points, manufactured_solution, relative_l2, relative_pressure_l2, ManufacturedSolution};
use crate::error::{BbemError, Result};
use crate::geometry::{label_patches, PatchLabeling, SurfaceMesh};
use crate::kernels::{BrinkmanParams, Vec3};
use crate::potentials::{BoundaryField, OperatorKind};
use crate::solvers::{
    BoundaryOperators, BvpKind, DirichletSolver, MixedSolver, NeumannSolver, Representation, SolutionHandle, SolveReport,
    SolverOptions,
};

/// Normal offset, in mean panel diameters, of the points used to measure jumps.
pub const JUMP_OFFSET: f64 = 0.2;

/// Interior samples used for error measurements.
pub const ERROR_SAMPLES: usize = 40;

/// Clearance of the interior samples from the boundary, as a fraction of the diameter.
pub const ERROR_MARGIN: f64 = 0.15;

/// Points `c - δν, c - 2δν, c + δν, c + 2δν` for every panel centroid `c`, in
/// four consecutive blocks, with `δ = JUMP_OFFSET × h`.
pub fn offset_points(mesh: &SurfaceMesh) -> Vec<Vec3> {
    let delta = JUMP_OFFSET * mesh.mean_panel_diameter();
    let (c, n) = (mesh.centroids(), mesh.normals());
    [-1.0, -2.0, 1.0, 2.0]
        .iter()
        .flat_map(|s| c.iter().zip(&n).map(move |(c, n)| c + n * (s * delta)).collect::<Vec<_>>())
        .collect()
}

/// Interior and exterior boundary limits `2f(δ) - f(2δ)` of a field sampled at [`offset_points`].
pub fn one_sided_limits(samples: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = samples.len() / 4;
    let b = |k: usize| &samples[k * n..(k + 1) * n];
    let limit = |near: &[Vec3], far: &[Vec3]| near.iter().zip(far).map(|(a, b)| a * 2.0 - b).collect();
    (limit(b(0), b(1)), limit(b(2), b(3)))
}

/// Errors of one manufactured solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n_panels: usize,
    /// Relative velocity error at interior sample points.
    pub interior_l2: f64,
    /// Relative zero-mean pressure error at the same points.
    pub pressure_l2: f64,
    /// Relative error of the computed boundary velocity trace.
    pub trace_l2: f64,
    /// Relative violation of the representation's jump relation at the panel centroids.
    pub jump_residual: f64,
}

/// Solves the manufactured problem of `kind` on `mesh` and measures its errors at `points`.
pub fn manufactured_level(
    kind: BvpKind,
    mesh: &SurfaceMesh,
    labeling: Option<&PatchLabeling>,
    exact: &ManufacturedSolution,
    points: &[Vec3],
    opts: &SolverOptions,
) -> Result<(LevelResult, SolutionHandle, SolveReport)> {
    let start = Instant::now();
    let params = *exact.params();
    let ops = BoundaryOperators::new(mesh, &params, opts)?;
    let h0 = exact.trace(mesh)?;
    let g0 = exact.traction_field(mesh)?;
    let mut report = SolveReport { kind: kind.name().into(), alpha: params.alpha, n_panels: mesh.len(), ..Default::default() };
    let (layer, density, trace) = match kind {
        BvpKind::Dirichlet => {
            let solver = DirichletSolver::new(&ops)?;
            let (phi, residual, warnings) = solver.solve_data(&h0)?;
            let phi = BoundaryField::from_flat(&phi, mesh.areas())?;
            let trace = ops.double_layer()?.shifted(-0.5, 1.0, OperatorKind::Custom).apply(&phi)?;
            report.residual_l2 = residual;
            report.sigma_min = Some(solver.sigma_pair().0);
            report.sigma_max = Some(solver.svd.sigma_max());
            report.warnings = warnings;
            (Representation::DoubleLayer, phi, trace)
        }
        BvpKind::Neumann => {
            let solver = NeumannSolver::new(&ops)?;
            let (psi, residual) = solver.solve_data(&g0)?;
            let psi = BoundaryField::from_flat(&psi, mesh.areas())?;
            report.residual_l2 = residual;
            report.sigma_min = Some(solver.sigma_min());
            report.sigma_max = Some(solver.sigma_max());
            let trace = ops.single_layer()?.apply(&psi)?;
            (Representation::SingleLayer, psi, trace)
        }
        BvpKind::Mixed => {
            let labeling =
                labeling.ok_or_else(|| BbemError::InvalidLabeling("mixed problem without a patch labeling".into()))?;
            let solver = MixedSolver::new(&ops, labeling)?;
            let (psi, residual) = solver.solve_data(&h0, &g0)?;
            let psi = BoundaryField::from_flat(&psi, mesh.areas())?;
            report.residual_l2 = residual;
            report.sigma_min = Some(solver.sigma_min());
            report.sigma_max = Some(solver.sigma_max());
            let trace = ops.single_layer()?.apply(&psi)?;
            (Representation::MixedSingleLayer, psi, trace)
        }
    };
    let handle = SolutionHandle {
        representation: layer,
        layer,
        density,
        mesh: mesh.clone(),
        quad: ops.quad.clone(),
        params,
        forcing: None,
        layer_opts: opts.layer,
        newtonian_opts: opts.newtonian,
    };
    let u = handle.velocity(points)?;
    let p = handle.raw_pressure(points)?;
    let interior_l2 = relative_l2(&u, &exact.velocities(points)?);
    let pressure_l2 = relative_pressure_l2(&p, &exact.pressures(points)?);
    let trace_l2 = trace.combine(1.0, &h0, -1.0)?.norm() / h0.norm();
    let jump_residual = jump_residual(&handle)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((LevelResult { n_panels: mesh.len(), interior_l2, pressure_l2, trace_l2, jump_residual }, handle, report))
}

/// Double layer: `‖W_ext φ - W_int φ - φ‖ / ‖φ‖`; single layer: `‖V_ext ψ - V_int ψ‖ / ‖V_int ψ‖`,
/// with one-sided limits extrapolated from off-boundary samples.
fn jump_residual(handle: &SolutionHandle) -> Result<f64> {
    let mesh = &handle.mesh;
    let samples = handle.layer_velocity(&offset_points(mesh))?;
    let (int, ext) = one_sided_limits(&samples);
    let areas = mesh.areas();
    let wnorm = |v: &mut dyn Iterator<Item = Vec3>| v.zip(&areas).map(|(x, a)| a * x.norm_squared()).sum::<f64>().sqrt();
    let (num, den) = match handle.layer {
        Representation::DoubleLayer => (
            wnorm(&mut ext.iter().zip(&int).zip(&handle.density.values).map(|((a, b), h)| a - b - h)),
            handle.density.norm(),
        ),
        _ => (wnorm(&mut ext.iter().zip(&int).map(|(a, b)| a - b)), wnorm(&mut int.iter().copied())),
    };
    Ok(if den == 0.0 { num } else { num / den })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub n_panels: usize,
    pub trace_l2: f64,
    pub interior_l2: f64,
    pub pressure_l2: f64,
    pub jump_residual: f64,
    /// Interior error of the previous level divided by this level's; empty on the first row.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Comma-separated with a header row.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| BbemError::Mismatch(e.to_string()))
    }

    pub fn read_csv(r: impl Read) -> Result<ConvergenceTable> {
        let mut reader = csv::Reader::from_reader(r);
        let rows = reader.deserialize().collect::<std::result::Result<Vec<ConvergenceRow>, _>>()?;
        Ok(ConvergenceTable { rows })
    }
}

/// Interior points for a study, drawn once on the coarsest mesh so every level is measured at the same places.
fn study_points(mesh: &SurfaceMesh, seed: u64) -> Result<Vec<Vec3>> {
    interior_points(mesh, ERROR_SAMPLES, ERROR_MARGIN, seed)
}

/// Manufactured-solution errors over the config's refinement levels.
pub fn convergence_study(config: &RunConfig) -> Result<ConvergenceTable> {
    let DataSpec::Manufactured { source_point, column } = &config.data else {
        return Err(BbemError::Config { path: "data".into(), msg: "convergence studies need manufactured data".into() });
    };
    if config.problem == Problem::Semilinear {
        return Err(BbemError::Config {
            path: "problem".into(),
            msg: "convergence studies cover the linear problems only".into(),
        });
    }
    if config.levels.is_empty() {
        return Err(BbemError::Config { path: "levels".into(), msg: "at least one level is required".into() });
    }
    if config.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BbemError::Config { path: "levels".into(), msg: "levels must be strictly increasing".into() });
    }
    let specs: Vec<GeometrySpec> = config.levels.iter().map(|&l| config.geometry.at_level(l)).collect::<Result<_>>()?;
    for spec in &specs {
        check_budget(spec.panel_count().unwrap_or(usize::MAX))?;
    }
    let params: BrinkmanParams = config.linear_params();
    let opts = config.solver_options();
    let source = Vec3::from(*source_point);
    let mut points: Option<Vec<Vec3>> = None;
    let mut table = ConvergenceTable::default();
    for (spec, &level) in specs.iter().zip(&config.levels) {
        let mesh = spec.build()?;
        let exact = manufactured_solution(&mesh, source, *column, &params)?;
        let pts = match &points {
            Some(p) => p.clone(),
            None => study_points(&mesh, config.seed)?,
        };
        points.get_or_insert_with(|| pts.clone());
        let labeling = match &config.patches {
            Some(rule) if config.problem == Problem::Mixed => Some(label_patches(&mesh, rule)?),
            _ => None,
        };
        let (r, _, report) = manufactured_level(config.problem.bvp_kind(), &mesh, labeling.as_ref(), &exact, &pts, &opts)?;
        log::info!("level {level}: {} panels, interior error {:.3e} ({:.1} s)", r.n_panels, r.interior_l2, report.wall_time_s);
        let ratio = table.rows.last().map(|prev| prev.interior_l2 / r.interior_l2);
        table.rows.push(ConvergenceRow {
            level,
            n_panels: r.n_panels,
            trace_l2: r.trace_l2,
            interior_l2: r.interior_l2,
            pressure_l2: r.pressure_l2,
            jump_residual: r.jump_residual,
            ratio,
        });
    }
    Ok(table)
}
