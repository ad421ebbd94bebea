use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BbemError, Result};
use crate::geometry::SurfaceMesh;
use crate::kernels::{brinkman_velocity_tensor, pressure_vector, stress_tensor_at, BrinkmanParams, Mat3, Vec3};
use crate::potentials::BoundaryField;

/// Smallest accepted source distance, as a fraction of the domain diameter.
pub const SOURCE_CLEARANCE: f64 = 0.25;

/// The exact pair `(G^α(· - x₀) e_k, Π_k(· - x₀))` of a point force outside the domain.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedSolution {
    source: Vec3,
    column: usize,
    params: BrinkmanParams,
}

/// Builds the exact pair for the force direction `column ∈ {1, 2, 3}`.
pub fn manufactured_solution(
    mesh: &SurfaceMesh,
    source: Vec3,
    column: usize,
    params: &BrinkmanParams,
) -> Result<ManufacturedSolution> {
    params.validate()?;
    if !(1..=3).contains(&column) {
        return Err(BbemError::InvalidSource(format!("column must be 1, 2 or 3, got {column}")));
    }
    if !source.iter().all(|c| c.is_finite()) {
        return Err(BbemError::InvalidSource("source point is not finite".into()));
    }
    if mesh.contains(&source) {
        return Err(BbemError::InvalidSource(format!("source point {:?} lies inside the domain", source.as_slice())));
    }
    let dist = mesh.distance_to(&source);
    let need = SOURCE_CLEARANCE * mesh.diameter();
    if dist < need {
        return Err(BbemError::InvalidSource(format!(
            "source point is {dist:.4} from the boundary, needs at least {need:.4}"
        )));
    }
    Ok(ManufacturedSolution { source, column: column - 1, params: *params })
}

impl ManufacturedSolution {
    pub fn source(&self) -> Vec3 {
        self.source
    }

    /// Force direction, 1-based.
    pub fn column(&self) -> usize {
        self.column + 1
    }

    pub fn params(&self) -> &BrinkmanParams {
        &self.params
    }

    pub fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        Ok(brinkman_velocity_tensor(&(x - self.source), &self.params)?.column(self.column).into())
    }

    pub fn pressure(&self, x: &Vec3) -> Result<f64> {
        Ok(pressure_vector(&(x - self.source))?[self.column])
    }

    /// Cauchy stress `σ(u*, π*)`.
    pub fn stress(&self, x: &Vec3) -> Result<Mat3> {
        let s = stress_tensor_at(&(x - self.source), &self.params)?;
        Ok(Mat3::from_fn(|i, l| s.get(i, self.column, l)))
    }

    pub fn traction(&self, x: &Vec3, normal: &Vec3) -> Result<Vec3> {
        Ok(self.stress(x)? * normal)
    }

    pub fn velocities(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        points.iter().map(|p| self.velocity(p)).collect()
    }

    pub fn pressures(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.pressure(p)).collect()
    }

    /// Velocity trace sampled at the panel centroids.
    pub fn trace(&self, mesh: &SurfaceMesh) -> Result<BoundaryField> {
        BoundaryField::new(self.velocities(&mesh.centroids())?, mesh.areas())
    }

    /// Traction `σ ν` sampled at the panel centroids.
    pub fn traction_field(&self, mesh: &SurfaceMesh) -> Result<BoundaryField> {
        let values =
            mesh.centroids().iter().zip(mesh.normals()).map(|(c, n)| self.traction(c, &n)).collect::<Result<Vec<_>>>()?;
        BoundaryField::new(values, mesh.areas())
    }
}

/// `count` seeded points inside `mesh`, each at least `margin × diameter` from the boundary.
pub fn interior_points(mesh: &SurfaceMesh, count: usize, margin: f64, seed: u64) -> Result<Vec<Vec3>> {
    let (lo, hi) = mesh.bounding_box();
    let clearance = margin * mesh.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let max_tries = 10_000 * count.max(1);
    for _ in 0..max_tries {
        if points.len() == count {
            break;
        }
        let p = Vec3::from_fn(|i, _| rng.gen_range(lo[i]..hi[i]));
        if mesh.contains(&p) && mesh.distance_to(&p) >= clearance {
            points.push(p);
        }
    }
    if points.len() < count {
        return Err(BbemError::Domain(format!("found only {} of {count} interior points at margin {margin}", points.len())));
    }
    Ok(points)
}

/// Relative discrete L² distance `‖a - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_l2(a: &[Vec3], b: &[Vec3]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let den: f64 = b.iter().map(|y| y.norm_squared()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative L² distance of two pressure samples after removing their means.
pub fn relative_pressure_l2(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let (ma, mb) = (mean(a), mean(b));
    let num: f64 = a.iter().zip(b).map(|(x, y)| ((x - ma) - (y - mb)).powi(2)).sum();
    let den: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
