//! Linear boundary-value problem solvers built on the layer-potential
//! representations: double layer for Dirichlet data, single layer for Neumann
//! and mixed data, plus a Newtonian potential for volume forcing.

mod handle;
mod systems;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use handle::{evaluate_solution, greens_identity_residual, FieldSolution, Representation, SolutionHandle};
pub use systems::{
    neumann_to_dirichlet, single_layer_trace, solve, solve_dirichlet, solve_mixed, solve_neumann, solve_poisson, DirichletSolver,
    MixedSolver, NeumannSolver, NeumannToDirichlet,
};

use crate::error::{BbemError, Result};
use crate::geometry::{panel_quadrature, PatchLabeling, QuadratureSet, SurfaceMesh, VolumeGrid};
use crate::kernels::BrinkmanParams;
use crate::potentials::{
    adjoint_double_layer, assemble_double_layer, assemble_single_layer, BoundaryField, DenseOperator, LayerOptions,
    NewtonianOptions, VolumeField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BvpKind {
    Dirichlet,
    Neumann,
    Mixed,
}

impl BvpKind {
    pub fn name(self) -> &'static str {
        match self {
            BvpKind::Dirichlet => "DIRICHLET",
            BvpKind::Neumann => "NEUMANN",
            BvpKind::Mixed => "MIXED",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Regular triangle rule order (1, 3, 6 or 12).
    pub quad_order: usize,
    pub layer: LayerOptions,
    pub newtonian: NewtonianOptions,
    /// Largest accepted `|⟨h₀, ν⟩| / (‖h₀‖ ‖ν‖)` for Dirichlet data.
    pub flux_tol: f64,
    /// Relative singular-value cutoff of the truncated SVD.
    pub svd_cutoff: f64,
    /// Cosine with `ν` above which the smallest singular mode is treated as the known defect.
    pub defect_alignment: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            quad_order: 6,
            layer: LayerOptions::default(),
            newtonian: NewtonianOptions::default(),
            flux_tol: 1e-2,
            svd_cutoff: 1e-10,
            defect_alignment: 0.9,
        }
    }
}

/// Volume forcing sampled on a grid of the same domain.
#[derive(Clone, Debug)]
pub struct Forcing {
    pub grid: VolumeGrid,
    pub f: VolumeField,
}

#[derive(Clone, Debug)]
pub struct BvpSpec {
    pub kind: BvpKind,
    pub params: BrinkmanParams,
    pub mesh: SurfaceMesh,
    pub labeling: Option<PatchLabeling>,
    /// Velocity data; for mixed problems only the Dirichlet-patch values are used.
    pub dirichlet: Option<BoundaryField>,
    /// Traction data; for mixed problems only the Neumann-patch values are used.
    pub neumann: Option<BoundaryField>,
    pub forcing: Option<Forcing>,
}

impl BvpSpec {
    pub fn dirichlet(mesh: SurfaceMesh, params: BrinkmanParams, h0: BoundaryField) -> BvpSpec {
        BvpSpec { kind: BvpKind::Dirichlet, params, mesh, labeling: None, dirichlet: Some(h0), neumann: None, forcing: None }
    }

    pub fn neumann(mesh: SurfaceMesh, params: BrinkmanParams, g0: BoundaryField) -> BvpSpec {
        BvpSpec { kind: BvpKind::Neumann, params, mesh, labeling: None, dirichlet: None, neumann: Some(g0), forcing: None }
    }

    pub fn mixed(
        mesh: SurfaceMesh,
        labeling: PatchLabeling,
        params: BrinkmanParams,
        h0: BoundaryField,
        g0: BoundaryField,
    ) -> BvpSpec {
        BvpSpec {
            kind: BvpKind::Mixed,
            params,
            mesh,
            labeling: Some(labeling),
            dirichlet: Some(h0),
            neumann: Some(g0),
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, grid: VolumeGrid, f: VolumeField) -> BvpSpec {
        self.forcing = Some(Forcing { grid, f });
        self
    }

    fn data(&self, field: &Option<BoundaryField>, what: &str) -> Result<BoundaryField> {
        let d = field.clone().ok_or_else(|| BbemError::Mismatch(format!("{} problem needs {what} data", self.kind.name())))?;
        if d.len() != self.mesh.len() {
            return Err(BbemError::Mismatch(format!("{what} data on {} panels, mesh has {}", d.len(), self.mesh.len())));
        }
        Ok(d)
    }
}

/// Solver diagnostics; serializes to a flat JSON object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub kind: String,
    pub alpha: f64,
    pub n_panels: usize,
    /// Relative weighted residual of the boundary integral system.
    pub residual_l2: f64,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub pressure_constant: f64,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

/// Lazily assembled boundary operators on one mesh, shared between solves.
pub struct BoundaryOperators {
    pub mesh: SurfaceMesh,
    pub quad: QuadratureSet,
    pub params: BrinkmanParams,
    pub opts: SolverOptions,
    v: OnceLock<DenseOperator>,
    k: OnceLock<DenseOperator>,
    kstar: OnceLock<DenseOperator>,
}

impl BoundaryOperators {
    pub fn new(mesh: &SurfaceMesh, params: &BrinkmanParams, opts: &SolverOptions) -> Result<BoundaryOperators> {
        params.validate()?;
        Ok(BoundaryOperators {
            mesh: mesh.clone(),
            quad: panel_quadrature(mesh, opts.quad_order)?,
            params: *params,
            opts: *opts,
            v: OnceLock::new(),
            k: OnceLock::new(),
            kstar: OnceLock::new(),
        })
    }

    pub fn single_layer(&self) -> Result<&DenseOperator> {
        if let Some(v) = self.v.get() {
            return Ok(v);
        }
        let v = assemble_single_layer(&self.mesh, &self.quad, &self.params, &self.opts.layer)?;
        Ok(self.v.get_or_init(|| v))
    }

    pub fn double_layer(&self) -> Result<&DenseOperator> {
        if let Some(k) = self.k.get() {
            return Ok(k);
        }
        let k = assemble_double_layer(&self.mesh, &self.quad, &self.params, &self.opts.layer)?;
        Ok(self.k.get_or_init(|| k))
    }

    pub fn adjoint_double_layer(&self) -> Result<&DenseOperator> {
        if let Some(k) = self.kstar.get() {
            return Ok(k);
        }
        let ks = adjoint_double_layer(self.double_layer()?, &self.mesh.areas())?;
        Ok(self.kstar.get_or_init(|| ks))
    }
}
