//! Newtonian volume potentials `N_α f = -G^α ∗ f` and `Q f = -Π ∗ f` on voxel grids.
//!
//! Far cells use the midpoint rule. Cells close to a target are subdivided
//! 3×3×3 recursively; the sub-cell that contains the target is replaced by the
//! equal-volume ball, for which the Stokeslet integral is `(R²/3) I`.

use std::f64::consts::PI;

use super::{BoundaryField, VolumeField};
use crate::error::{BbemError, Result};
use crate::exec::{map_indexed, Exec};
use crate::geometry::{SurfaceMesh, VolumeGrid};
use crate::kernels::{
    brinkman_velocity_gradient, brinkman_velocity_tensor, pressure_vector, BrinkmanParams,
    Mat3, Tensor3, Vec3,
};

#[derive(Clone, Copy, Debug)]
pub struct NewtonianOptions {
    /// Levels of 3×3×3 subdivision applied to cells near a target (0 = plain midpoint rule).
    pub refine_depth: usize,
    /// A (sub)cell is refined when its centre is closer than `near_factor × side`.
    pub near_factor: f64,
    pub exec: Exec,
}

impl Default for NewtonianOptions {
    fn default() -> Self {
        NewtonianOptions { refine_depth: 2, near_factor: 2.5, exec: Exec::default() }
    }
}

/// Radius of the ball with the same volume as a cell.
pub fn equivalent_ball_radius(volume: f64) -> f64 {
    (3.0 * volume / (4.0 * PI)).cbrt()
}

/// Contribution of a cell of volume `volume` to `N_α f` at a target inside it,
/// with the cell replaced by the equal-volume ball centred at the target.
pub fn self_cell_correction(volume: f64, f: &Vec3, params: &BrinkmanParams) -> Vec3 {
    -(ball_velocity_integral(volume, params) * f)
}

/// `∫_{|y|<R} G^α(y) dy`. Isotropy makes it `(1/3)∫ tr G^α · I`, and taking the
/// trace of the kernel equation gives `tr G^α = 2e^{-kr}/(4πr)` with `k = √α`, so
/// the integral is `(2/(3k²))(1 − e^{-kR}(1 + kR)) I`, which tends to `(R²/3) I`.
fn ball_velocity_integral(volume: f64, params: &BrinkmanParams) -> Mat3 {
    let r = equivalent_ball_radius(volume);
    let t = params.sqrt_alpha() * r;
    // (1 − e^{-t}(1 + t)) / t² = Σ_{n≥2} (−1)^n (n−1) t^{n−2} / n!
    let g = if t < 0.1 {
        let (mut sum, mut term) = (0.0, 0.5);
        for n in 2..16 {
            sum += (n - 1) as f64 * term;
            term *= -t / (n + 1) as f64;
        }
        sum
    } else {
        (1.0 - (-t).exp() * (1.0 + t)) / (t * t)
    };
    Mat3::identity() * (2.0 * r * r * g / 3.0)
}

#[derive(Clone, Copy, Debug, Default)]
struct CellTerms {
    vel: Mat3,
    pres: Vec3,
    grad: Tensor3,
}

impl CellTerms {
    fn add_scaled(&mut self, o: &CellTerms) {
        self.vel += o.vel;
        self.pres += o.pres;
        for l in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    self.grad.0[l][j][k] += o.grad.0[l][j][k];
                }
            }
        }
    }
}

fn midpoint_terms(r: &Vec3, vol: f64, params: &BrinkmanParams, with_grad: bool) -> CellTerms {
    let vel = brinkman_velocity_tensor(r, params).map(|g| g * vol).unwrap_or_default();
    let pres = pressure_vector(r).map(|p| p * vol).unwrap_or_default();
    let mut grad = Tensor3::default();
    if with_grad {
        if let Ok(t) = brinkman_velocity_gradient(r, params) {
            for l in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        grad.0[l][j][k] = t.0[l][j][k] * vol;
                    }
                }
            }
        }
    }
    CellTerms { vel, pres, grad }
}

/// `∫_cell (G, Π, ∇G)(x - y) dy` for the cube of side `s` centred at `c`.
fn cell_terms(x: &Vec3, c: &Vec3, s: f64, depth: usize, params: &BrinkmanParams, opts: &NewtonianOptions, with_grad: bool) -> CellTerms {
    let r = x - c;
    let inside = r.iter().all(|v| v.abs() < 0.5 * s);
    if depth == 0 || (!inside && r.norm() >= opts.near_factor * s) {
        if inside {
            // Odd kernels integrate to zero over the ball.
            return CellTerms { vel: ball_velocity_integral(s * s * s, params), ..Default::default() };
        }
        return midpoint_terms(&r, s * s * s, params, with_grad);
    }
    let sub = s / 3.0;
    let mut acc = CellTerms::default();
    for a in -1..=1 {
        for b in -1..=1 {
            for d in -1..=1 {
                let cc = c + Vec3::new(a as f64, b as f64, d as f64) * sub;
                acc.add_scaled(&cell_terms(x, &cc, sub, depth - 1, params, opts, with_grad));
            }
        }
    }
    acc
}

/// Precomputed near-field cell integrals for a fixed grid and target set, so
/// that potentials of many forcings can be evaluated cheaply.
pub struct NewtonianPlan {
    points: Vec<Vec3>,
    near: Vec<Vec<(usize, CellTerms)>>,
    params: BrinkmanParams,
    with_grad: bool,
    n_cells: usize,
    exec: Exec,
}

impl NewtonianPlan {
    pub fn new(grid: &VolumeGrid, points: &[Vec3], params: &BrinkmanParams, opts: &NewtonianOptions, with_grad: bool) -> Result<NewtonianPlan> {
        params.validate()?;
        let s = grid.spacing;
        let reach = (opts.near_factor + 1.0).ceil() as isize;
        let near = map_indexed(opts.exec, points.len(), |k| {
            let x = points[k];
            let [i0, j0, k0] = grid.lattice_of(&x);
            let mut list = Vec::new();
            for i in i0 - reach..=i0 + reach {
                for j in j0 - reach..=j0 + reach {
                    for l in k0 - reach..=k0 + reach {
                        if let Some(c) = grid.cell_at(i, j, l) {
                            let r = x - grid.centers[c];
                            let inside = r.iter().all(|v| v.abs() < 0.5 * s);
                            if inside || r.norm() < opts.near_factor * s {
                                list.push((c, cell_terms(&x, &grid.centers[c], s, opts.refine_depth, params, opts, with_grad)));
                            }
                        }
                    }
                }
            }
            list.sort_by_key(|e| e.0);
            list
        });
        Ok(NewtonianPlan { points: points.to_vec(), near, params: *params, with_grad, n_cells: grid.len(), exec: opts.exec })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn check(&self, grid: &VolumeGrid, f: &VolumeField) -> Result<()> {
        if f.len() != grid.len() || grid.len() != self.n_cells {
            return Err(BbemError::Mismatch(format!("forcing on {} cells, grid of {}", f.len(), grid.len())));
        }
        Ok(())
    }

    /// Sums `near(terms)·f` over near cells and `far(r)·f` over the others.
    fn accumulate<T: Copy + Send + Sync>(
        &self,
        grid: &VolumeGrid,
        f: &VolumeField,
        zero: T,
        near: impl Fn(&CellTerms, &Vec3) -> T + Sync + Send,
        far: impl Fn(&Vec3, f64, &Vec3) -> T + Sync + Send,
        add: impl Fn(&mut T, T) + Sync + Send,
    ) -> Vec<T> {
        map_indexed(self.exec, self.points.len(), |k| {
            let x = self.points[k];
            let list = &self.near[k];
            let mut acc = zero;
            let mut next = 0;
            for c in 0..grid.len() {
                if next < list.len() && list[next].0 == c {
                    add(&mut acc, near(&list[next].1, &f.values[c]));
                    next += 1;
                    continue;
                }
                let fc = &f.values[c];
                if fc.norm_squared() == 0.0 {
                    continue;
                }
                add(&mut acc, far(&(x - grid.centers[c]), grid.volumes[c], fc));
            }
            acc
        })
    }

    /// `N_α f` at the plan's points.
    pub fn velocity(&self, grid: &VolumeGrid, f: &VolumeField) -> Result<Vec<Vec3>> {
        self.check(grid, f)?;
        let params = self.params;
        Ok(self.accumulate(
            grid,
            f,
            Vec3::zeros(),
            |t, fc| -(t.vel * fc),
            |r, vol, fc| brinkman_velocity_tensor(r, &params).map(|g| -(g * fc) * vol).unwrap_or_default(),
            |a, b| *a += b,
        ))
    }

    /// `Q f` at the plan's points.
    pub fn pressure(&self, grid: &VolumeGrid, f: &VolumeField) -> Result<Vec<f64>> {
        self.check(grid, f)?;
        Ok(self.accumulate(
            grid,
            f,
            0.0,
            |t, fc| -t.pres.dot(fc),
            |r, vol, fc| pressure_vector(r).map(|p| -p.dot(fc) * vol).unwrap_or_default(),
            |a, b| *a += b,
        ))
    }

    /// Velocity gradient `M[(j, l)] = ∂_l (N_α f)_j` at the plan's points.
    pub fn gradient(&self, grid: &VolumeGrid, f: &VolumeField) -> Result<Vec<Mat3>> {
        self.check(grid, f)?;
        if !self.with_grad {
            return Err(BbemError::Mismatch("plan was built without gradients".into()));
        }
        let params = self.params;
        let contract = |t: &Tensor3, fc: &Vec3| Mat3::from_fn(|j, l| -(0..3).map(|k| t.0[l][j][k] * fc[k]).sum::<f64>());
        Ok(self.accumulate(
            grid,
            f,
            Mat3::zeros(),
            |t, fc| contract(&t.grad, fc),
            |r, vol, fc| brinkman_velocity_gradient(r, &params).map(|t| contract(&t, fc) * vol).unwrap_or_default(),
            |a, b| *a += b,
        ))
    }
}

/// Velocity Newtonian potential `N_α f` at arbitrary points.
pub fn newtonian_velocity(
    grid: &VolumeGrid,
    f: &VolumeField,
    points: &[Vec3],
    params: &BrinkmanParams,
    opts: &NewtonianOptions,
) -> Result<Vec<Vec3>> {
    NewtonianPlan::new(grid, points, params, opts, false)?.velocity(grid, f)
}

/// Pressure Newtonian potential `Q f` at arbitrary points.
pub fn newtonian_pressure(grid: &VolumeGrid, f: &VolumeField, points: &[Vec3], opts: &NewtonianOptions) -> Result<Vec<f64>> {
    NewtonianPlan::new(grid, points, &BrinkmanParams::stokes(), opts, false)?.pressure(grid, f)
}

/// Boundary trace and interior traction `σ(N_α f, Q f) ν` at the panel centroids.
pub fn newtonian_boundary_data(
    grid: &VolumeGrid,
    f: &VolumeField,
    mesh: &SurfaceMesh,
    params: &BrinkmanParams,
    opts: &NewtonianOptions,
) -> Result<(BoundaryField, BoundaryField)> {
    let plan = NewtonianPlan::new(grid, &mesh.centroids(), params, opts, true)?;
    boundary_data_from_plan(&plan, grid, f, mesh)
}

pub fn boundary_data_from_plan(
    plan: &NewtonianPlan,
    grid: &VolumeGrid,
    f: &VolumeField,
    mesh: &SurfaceMesh,
) -> Result<(BoundaryField, BoundaryField)> {
    if plan.points().len() != mesh.len() {
        return Err(BbemError::Mismatch("plan points are not the mesh centroids".into()));
    }
    let u = plan.velocity(grid, f)?;
    let p = plan.pressure(grid, f)?;
    let du = plan.gradient(grid, f)?;
    let normals = mesh.normals();
    let traction = (0..mesh.len())
        .map(|i| {
            let sym = du[i] + du[i].transpose();
            sym * normals[i] - normals[i] * p[i]
        })
        .collect();
    Ok((BoundaryField::new(u, mesh.areas())?, BoundaryField::new(traction, mesh.areas())?))
}
