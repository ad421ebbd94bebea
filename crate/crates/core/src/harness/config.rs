use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BbemError, Result};
use crate::geometry::{build_cube, build_icosphere, read_off_file, PatchRule, SurfaceMesh, VolumeDomain};
use crate::kernels::{BrinkmanParams, Vec3};
use crate::semilinear::PicardConfig;
use crate::solvers::{BvpKind, SolverOptions};

/// Largest mesh the harness will assemble densely.
pub const PANEL_BUDGET: usize = 5000;

pub const DEFAULT_SEED: u64 = 0x5EED_B2E3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Problem {
    Dirichlet,
    Neumann,
    Mixed,
    Semilinear,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Dirichlet => "DIRICHLET",
            Problem::Neumann => "NEUMANN",
            Problem::Mixed => "MIXED",
            Problem::Semilinear => "SEMILINEAR",
        }
    }

    /// Linear problem kind; the semilinear problem iterates mixed solves.
    pub fn bvp_kind(self) -> BvpKind {
        match self {
            Problem::Dirichlet => BvpKind::Dirichlet,
            Problem::Neumann => BvpKind::Neumann,
            Problem::Mixed | Problem::Semilinear => BvpKind::Mixed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Icosphere {
        level: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Cube {
        level: usize,
        #[serde(default = "unit")]
        side: f64,
    },
    /// Closed triangle mesh in OFF format; relative paths are taken from the config file's directory.
    Off { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl GeometrySpec {
    /// Panel count without building the mesh (`None` for imported meshes).
    pub fn panel_count(&self) -> Option<usize> {
        match self {
            GeometrySpec::Icosphere { level, .. } => Some(20 * 4usize.checked_pow(*level as u32)?),
            GeometrySpec::Cube { level, .. } => Some(12 * 4usize.checked_pow(*level as u32)?),
            GeometrySpec::Off { .. } => None,
        }
    }

    /// The same geometry at another refinement level.
    pub fn at_level(&self, level: usize) -> Result<GeometrySpec> {
        match self {
            GeometrySpec::Icosphere { radius, .. } => Ok(GeometrySpec::Icosphere { level, radius: *radius }),
            GeometrySpec::Cube { side, .. } => Ok(GeometrySpec::Cube { level, side: *side }),
            GeometrySpec::Off { .. } => Err(BbemError::Config {
                path: "geometry".into(),
                msg: "imported meshes have no refinement levels".into(),
            }),
        }
    }

    pub fn level(&self) -> Option<usize> {
        match self {
            GeometrySpec::Icosphere { level, .. } | GeometrySpec::Cube { level, .. } => Some(*level),
            GeometrySpec::Off { .. } => None,
        }
    }

    pub fn build(&self) -> Result<SurfaceMesh> {
        if let Some(n) = self.panel_count() {
            check_budget(n)?;
        }
        let mesh = match self {
            GeometrySpec::Icosphere { level, radius } => build_icosphere(*level, *radius)?,
            GeometrySpec::Cube { level, side } => build_cube(*level, *side)?,
            GeometrySpec::Off { path } => read_off_file(path)?,
        };
        check_budget(mesh.len())?;
        Ok(mesh)
    }

    /// Interior region for volume grids.
    pub fn volume_domain(&self, mesh: &SurfaceMesh) -> VolumeDomain {
        match self {
            GeometrySpec::Icosphere { radius, .. } => VolumeDomain::Sphere { radius: *radius },
            GeometrySpec::Cube { side, .. } => VolumeDomain::Cube { side: *side },
            GeometrySpec::Off { .. } => VolumeDomain::Mesh(Box::new(mesh.clone())),
        }
    }
}

pub fn check_budget(panels: usize) -> Result<()> {
    if panels > PANEL_BUDGET {
        return Err(BbemError::Budget(format!("{panels} panels exceed the budget of {PANEL_BUDGET}")));
    }
    Ok(())
}

/// Boundary (and volume) data of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Exact pair of a point force at `source_point` along axis `column` (1-based).
    Manufactured { source_point: [f64; 3], column: usize },
    /// JSON file with per-panel arrays `"velocity"` and/or `"traction"` in mesh order.
    File { path: PathBuf },
    /// Named closed-form boundary data.
    Catalog {
        name: CatalogData,
        #[serde(default = "unit")]
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogData {
    /// `u = e_x`, traction 0.
    Translation,
    /// `u = e_z × x`, traction 0.
    Rotation,
    /// `u = (y, 0, 0)`, traction `(ν_y, ν_x, 0)`.
    Shear,
}

impl CatalogData {
    pub fn velocity(self, x: &Vec3) -> Vec3 {
        match self {
            CatalogData::Translation => Vec3::x(),
            CatalogData::Rotation => Vec3::z().cross(x),
            CatalogData::Shear => Vec3::new(x.y, 0.0, 0.0),
        }
    }

    pub fn traction(self, n: &Vec3) -> Vec3 {
        match self {
            CatalogData::Translation | CatalogData::Rotation => Vec3::zeros(),
            CatalogData::Shear => Vec3::new(n.y, n.x, 0.0),
        }
    }
}

/// Volume forcing from a fixed catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub name: CatalogForcing,
    #[serde(default = "unit")]
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogForcing {
    /// `f = (sin 2y, xz, 1 - x²)`.
    Smooth,
    /// `f = e_z`.
    Uniform,
}

impl CatalogForcing {
    pub fn value(self, x: &Vec3) -> Vec3 {
        match self {
            CatalogForcing::Smooth => Vec3::new((2.0 * x.y).sin(), x.x * x.z, 1.0 - x.x * x.x),
            CatalogForcing::Uniform => Vec3::z(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub flux_tol: f64,
    pub svd_cutoff: f64,
    pub defect_alignment: f64,
    pub near_factor: f64,
    pub near_order: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSettings {
            flux_tol: o.flux_tol,
            svd_cutoff: o.svd_cutoff,
            defect_alignment: o.defect_alignment,
            near_factor: o.layer.near_factor,
            near_order: o.layer.near_order,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Random data tuples used to estimate the smallness constants.
    pub constant_samples: usize,
    /// When set, all data are rescaled so that their norm is this fraction of `zeta_est`.
    pub data_fraction_of_zeta: Option<f64>,
}

impl Default for PicardSettings {
    fn default() -> Self {
        let c = PicardConfig::default();
        PicardSettings { tol: c.tol, max_iter: c.max_iter, damping: c.damping, constant_samples: 8, data_fraction_of_zeta: None }
    }
}

impl PicardSettings {
    pub fn config(&self) -> PicardConfig {
        PicardConfig { tol: self.tol, max_iter: self.max_iter, damping: self.damping }
    }
}

fn default_quadrature_order() -> usize {
    6
}

fn default_volume_resolution() -> usize {
    16
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bbem-out")
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A run description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    pub geometry: GeometrySpec,
    /// Required for mixed and semilinear problems.
    #[serde(default)]
    pub patches: Option<PatchRule>,
    pub params: BrinkmanParams,
    pub data: DataSpec,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
    #[serde(default = "default_volume_resolution")]
    pub volume_resolution: usize,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub picard: PicardSettings,
    /// Refinement levels of a convergence study.
    #[serde(default)]
    pub levels: Vec<usize>,
    /// Relative paths are taken from the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn config_error(path: &str, msg: impl Into<String>) -> BbemError {
    BbemError::Config { path: path.into(), msg: msg.into() }
}

impl RunConfig {
    /// Parses JSON text; schema errors report the path of the offending entry.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path.is_empty() { "." } else { &path }, e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(".", format!("cannot read {}: {e}", path.display())))?;
        let mut config = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.check_files()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GeometrySpec::Off { path } = &mut self.geometry {
            fix(path);
        }
        if let DataSpec::File { path } = &mut self.data {
            fix(path);
        }
        fix(&mut self.output_dir);
    }

    /// Every referenced input file must exist.
    pub fn check_files(&self) -> Result<()> {
        if let GeometrySpec::Off { path } = &self.geometry {
            if !path.is_file() {
                return Err(config_error("geometry.path", format!("file {} does not exist", path.display())));
            }
        }
        if let DataSpec::File { path } = &self.data {
            if !path.is_file() {
                return Err(config_error("data.path", format!("file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Checks that do not need the mesh.
    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| config_error("params", e.to_string()))?;
        if ![1, 3, 6, 12].contains(&self.quadrature_order) {
            return Err(config_error("quadrature_order", format!("expected 1, 3, 6 or 12, got {}", self.quadrature_order)));
        }
        if self.volume_resolution < 2 {
            return Err(config_error("volume_resolution", "must be at least 2"));
        }
        if matches!(self.problem, Problem::Mixed | Problem::Semilinear) && self.patches.is_none() {
            return Err(config_error("patches", format!("{} problems need a patch rule", self.problem.name())));
        }
        if self.params.beta != 0.0 && self.problem != Problem::Semilinear {
            return Err(config_error("params.beta", "beta is only used by SEMILINEAR problems"));
        }
        if let DataSpec::Manufactured { source_point, column } = &self.data {
            if !(1..=3).contains(column) {
                return Err(config_error("data.column", format!("must be 1, 2 or 3, got {column}")));
            }
            if !source_point.iter().all(|c| c.is_finite()) {
                return Err(config_error("data.source_point", "must be finite"));
            }
        }
        if let DataSpec::Catalog { scale, .. } = &self.data {
            if !scale.is_finite() {
                return Err(config_error("data.scale", "must be finite"));
            }
        }
        if let Some(f) = &self.forcing {
            if !f.scale.is_finite() {
                return Err(config_error("forcing.scale", "must be finite"));
            }
        }
        self.picard.config().validate()?;
        if self.picard.constant_samples < 8 {
            return Err(config_error("picard.constant_samples", "must be at least 8"));
        }
        if let Some(frac) = self.picard.data_fraction_of_zeta {
            if !(frac > 0.0 && frac.is_finite()) {
                return Err(config_error("picard.data_fraction_of_zeta", "must be positive"));
            }
        }
        if self.solver.near_order == 0 || !(self.solver.near_factor >= 0.0) {
            return Err(config_error("solver", "near_order must be positive and near_factor non-negative"));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions { quad_order: self.quadrature_order, ..SolverOptions::default() };
        o.flux_tol = self.solver.flux_tol;
        o.svd_cutoff = self.solver.svd_cutoff;
        o.defect_alignment = self.solver.defect_alignment;
        o.layer.near_factor = self.solver.near_factor;
        o.layer.near_order = self.solver.near_order;
        o
    }

    /// Parameters of the linear problem (`β` dropped).
    pub fn linear_params(&self) -> BrinkmanParams {
        BrinkmanParams::brinkman(self.params.alpha)
    }
}
