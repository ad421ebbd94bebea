use serde::{Deserialize, Serialize};

use super::Forcing;
use crate::error::{BbemError, Result};
use crate::geometry::{QuadratureSet, SurfaceMesh};
use crate::kernels::{BrinkmanParams, Vec3};
use crate::potentials::{
    eval_double_layer, eval_double_layer_pressure, eval_single_layer, eval_single_layer_pressure, BoundaryField,
    LayerOptions, NewtonianOptions, NewtonianPlan,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Representation {
    SingleLayer,
    DoubleLayer,
    MixedSingleLayer,
    WithNewtonian,
}

/// A solution in representation form, evaluable anywhere inside the domain.
#[derive(Clone, Debug)]
pub struct SolutionHandle {
    pub representation: Representation,
    /// Layer potential carrying the boundary density (never `WithNewtonian`).
    pub layer: Representation,
    pub density: BoundaryField,
    pub mesh: SurfaceMesh,
    pub quad: QuadratureSet,
    pub params: BrinkmanParams,
    pub forcing: Option<Forcing>,
    pub layer_opts: LayerOptions,
    pub newtonian_opts: NewtonianOptions,
}

/// Velocity and pressure samples; the pressure has zero mean over the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSolution {
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    /// Constant added to the raw pressure to make its sample mean zero.
    pub pressure_constant: f64,
}

impl SolutionHandle {
    /// Velocity of the layer potential alone.
    pub fn layer_velocity(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        match self.layer {
            Representation::DoubleLayer => {
                eval_double_layer(&self.mesh, &self.quad, &self.density, points, &self.params, &self.layer_opts)
            }
            _ => eval_single_layer(&self.mesh, &self.quad, &self.density, points, &self.params, &self.layer_opts),
        }
    }

    fn layer_pressure(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        match self.layer {
            Representation::DoubleLayer => {
                eval_double_layer_pressure(&self.mesh, &self.quad, &self.density, points, &self.params, &self.layer_opts)
            }
            _ => eval_single_layer_pressure(&self.mesh, &self.quad, &self.density, points, &self.layer_opts),
        }
    }

    /// Velocity at interior points.
    pub fn velocity(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        let mut u = self.layer_velocity(points)?;
        if let Some(fc) = &self.forcing {
            let plan = NewtonianPlan::new(&fc.grid, points, &self.params, &self.newtonian_opts, false)?;
            for (a, b) in u.iter_mut().zip(plan.velocity(&fc.grid, &fc.f)?) {
                *a += b;
            }
        }
        Ok(u)
    }

    /// Pressure at interior points, before normalization.
    pub fn raw_pressure(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        let mut p = self.layer_pressure(points)?;
        if let Some(fc) = &self.forcing {
            let plan = NewtonianPlan::new(&fc.grid, points, &self.params, &self.newtonian_opts, false)?;
            for (a, b) in p.iter_mut().zip(plan.pressure(&fc.grid, &fc.f)?) {
                *a += b;
            }
        }
        Ok(p)
    }
}

/// Samples velocity and pressure; the pressure constant is fixed by zero mean
/// over the evaluation points.
pub fn evaluate_solution(handle: &SolutionHandle, points: &[Vec3]) -> Result<FieldSolution> {
    let velocity = handle.velocity(points)?;
    let mut pressure = handle.raw_pressure(points)?;
    let pressure_constant = if pressure.is_empty() { 0.0 } else { -pressure.iter().sum::<f64>() / pressure.len() as f64 };
    pressure.iter_mut().for_each(|p| *p += pressure_constant);
    Ok(FieldSolution { velocity, pressure, pressure_constant })
}

/// `V_α(t) - W_α(γu) - u` at interior points, for a solution `u` of the
/// homogeneous system with boundary trace `u_trace` and traction `traction`.
#[allow(clippy::too_many_arguments)]
pub fn greens_identity_residual(
    mesh: &SurfaceMesh,
    quad: &QuadratureSet,
    u_trace: &BoundaryField,
    traction: &BoundaryField,
    params: &BrinkmanParams,
    points: &[Vec3],
    u_exact: &[Vec3],
    opts: &LayerOptions,
) -> Result<Vec<Vec3>> {
    if u_exact.len() != points.len() {
        return Err(BbemError::Mismatch(format!("{} exact values for {} points", u_exact.len(), points.len())));
    }
    let sl = eval_single_layer(mesh, quad, traction, points, params, opts)?;
    let dl = eval_double_layer(mesh, quad, u_trace, points, params, opts)?;
    Ok(sl.iter().zip(&dl).zip(u_exact).map(|((s, d), u)| s - d - u).collect())
}
