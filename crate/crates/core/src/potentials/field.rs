use serde::{Deserialize, Serialize};

use crate::error::{BbemError, Result};
use crate::geometry::{SurfaceMesh, VolumeGrid};
use crate::kernels::Vec3;

/// Vector samples at panel centroids together with the panel areas used for
/// the discrete pairing `⟨u, v⟩ = Σ w_i u_i·v_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField {
    pub values: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl BoundaryField {
    pub fn new(values: Vec<Vec3>, weights: Vec<f64>) -> Result<BoundaryField> {
        if values.len() != weights.len() {
            return Err(BbemError::Mismatch(format!("{} values but {} weights", values.len(), weights.len())));
        }
        Ok(BoundaryField { values, weights })
    }

    pub fn zeros(mesh: &SurfaceMesh) -> BoundaryField {
        BoundaryField { values: vec![Vec3::zeros(); mesh.len()], weights: mesh.areas() }
    }

    /// Samples `f(centroid, normal)` on every panel.
    pub fn from_fn(mesh: &SurfaceMesh, f: impl Fn(&Vec3, &Vec3) -> Vec3) -> BoundaryField {
        let values = mesh.panels().iter().map(|p| f(&p.centroid, &p.normal)).collect();
        BoundaryField { values, weights: mesh.areas() }
    }

    /// The outward normal field.
    pub fn normals(mesh: &SurfaceMesh) -> BoundaryField {
        BoundaryField { values: mesh.normals(), weights: mesh.areas() }
    }

    pub fn from_flat(flat: &[f64], weights: Vec<f64>) -> Result<BoundaryField> {
        if flat.len() != 3 * weights.len() {
            return Err(BbemError::Mismatch(format!("{} coefficients for {} panels", flat.len(), weights.len())));
        }
        let values = flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        Ok(BoundaryField { values, weights })
    }

    /// Coefficient vector ordered `(panel, component)`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &BoundaryField) -> Result<()> {
        if self.len() != other.len() {
            return Err(BbemError::Mismatch(format!("fields on {} and {} panels", self.len(), other.len())));
        }
        Ok(())
    }

    pub fn pairing(&self, other: &BoundaryField) -> Result<f64> {
        self.check(other)?;
        Ok(self.values.iter().zip(&other.values).zip(&self.weights).map(|((a, b), w)| w * a.dot(b)).sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> BoundaryField {
        BoundaryField { values: self.values.iter().map(|v| v * s).collect(), weights: self.weights.clone() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &BoundaryField, b: f64) -> Result<BoundaryField> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(u, v)| u * a + v * b).collect();
        Ok(BoundaryField { values, weights: self.weights.clone() })
    }

    /// Removes the component along `direction` in the weighted pairing.
    pub fn project_out(&self, direction: &BoundaryField) -> Result<BoundaryField> {
        let dd = direction.pairing(direction)?;
        if dd == 0.0 {
            return Ok(self.clone());
        }
        let c = self.pairing(direction)? / dd;
        self.combine(1.0, direction, -c)
    }

    /// Keeps the values on panels where `keep` is true and zeroes the rest.
    pub fn masked(&self, keep: impl Fn(usize) -> bool) -> BoundaryField {
        let values = self.values.iter().enumerate().map(|(i, v)| if keep(i) { *v } else { Vec3::zeros() }).collect();
        BoundaryField { values, weights: self.weights.clone() }
    }
}

/// Vector samples at volume-grid cell centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeField {
    pub values: Vec<Vec3>,
}

impl VolumeField {
    pub fn new(grid: &VolumeGrid, values: Vec<Vec3>) -> Result<VolumeField> {
        if values.len() != grid.len() {
            return Err(BbemError::Mismatch(format!("{} values for {} cells", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(BbemError::Domain("volume field has non-finite values".into()));
        }
        Ok(VolumeField { values })
    }

    pub fn zeros(grid: &VolumeGrid) -> VolumeField {
        VolumeField { values: vec![Vec3::zeros(); grid.len()] }
    }

    pub fn from_fn(grid: &VolumeGrid, f: impl Fn(&Vec3) -> Vec3) -> VolumeField {
        VolumeField { values: grid.centers.iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm_squared() == 0.0)
    }

    pub fn scaled(&self, s: f64) -> VolumeField {
        VolumeField { values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn l2_norm(&self, grid: &VolumeGrid) -> f64 {
        grid.l2_norm(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosphere;

    #[test]
    fn pairing_and_flat_round_trip() {
        let m = build_icosphere(1, 1.0).unwrap();
        let nu = BoundaryField::normals(&m);
        assert!((nu.pairing(&nu).unwrap() - m.total_area()).abs() < 1e-12);
        let u = BoundaryField::from_fn(&m, |c, _| Vec3::new(c.z, 1.0, -c.x));
        let back = BoundaryField::from_flat(&u.to_flat(), u.weights.clone()).unwrap();
        assert_eq!(back, u);
        let p = u.project_out(&nu).unwrap();
        assert!(p.pairing(&nu).unwrap().abs() < 1e-12);
        assert!(BoundaryField::from_flat(&[1.0, 2.0], vec![1.0]).is_err());
    }
}
