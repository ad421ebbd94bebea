use serde::{Deserialize, Serialize};

use super::SurfaceMesh;
use crate::error::{BbemError, Result};
use crate::kernels::Vec3;

/// Interior region sampled by a [`VolumeGrid`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VolumeDomain {
    /// Axis-aligned cube of side `side` centred at the origin.
    Cube { side: f64 },
    /// Ball of radius `radius` centred at the origin.
    Sphere { radius: f64 },
    /// Region enclosed by a closed mesh, classified by winding number.
    #[serde(skip)]
    Mesh(Box<SurfaceMesh>),
}

impl VolumeDomain {
    fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            VolumeDomain::Cube { side } => (Vec3::repeat(-side / 2.0), Vec3::repeat(side / 2.0)),
            VolumeDomain::Sphere { radius } => (Vec3::repeat(-radius), Vec3::repeat(*radius)),
            VolumeDomain::Mesh(m) => m.bounding_box(),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            VolumeDomain::Cube { side } => p.iter().all(|c| c.abs() < side / 2.0),
            VolumeDomain::Sphere { radius } => p.norm() < *radius,
            VolumeDomain::Mesh(m) => m.contains(p),
        }
    }

    pub fn exact_volume(&self) -> Option<f64> {
        match self {
            VolumeDomain::Cube { side } => Some(side.powi(3)),
            VolumeDomain::Sphere { radius } => Some(4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)),
            VolumeDomain::Mesh(m) => Some(m.enclosed_volume()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VolumeDomain::Cube { .. } => "cube",
            VolumeDomain::Sphere { .. } => "sphere",
            VolumeDomain::Mesh(_) => "mesh",
        }
    }
}

/// Uniform voxel cells whose centres lie strictly inside the domain.
#[derive(Clone, Debug)]
pub struct VolumeGrid {
    pub centers: Vec<Vec3>,
    pub volumes: Vec<f64>,
    pub spacing: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
    /// Inside test used to keep cells (`"cube"`, `"sphere"` or `"mesh"`).
    pub provenance: &'static str,
    lookup: Vec<Option<usize>>,
    index: Vec<[usize; 3]>,
}

impl VolumeGrid {
    /// A grid made of one cube cell of side `side` centred at `center`.
    pub fn single_cell(center: Vec3, side: f64) -> VolumeGrid {
        VolumeGrid {
            centers: vec![center],
            volumes: vec![side * side * side],
            spacing: side,
            origin: center - Vec3::repeat(side / 2.0),
            dims: [1, 1, 1],
            provenance: "cell",
            lookup: vec![Some(0)],
            index: vec![[0, 0, 0]],
        }
    }

    /// Cell containing `p` in the lattice sense, if it is part of the grid.
    pub fn locate(&self, p: &Vec3) -> Option<usize> {
        let q = (p - self.origin) / self.spacing;
        self.cell_at(q.x.floor() as isize, q.y.floor() as isize, q.z.floor() as isize)
    }

    /// Lattice coordinates (possibly out of range) of the cell containing `p`.
    pub fn lattice_of(&self, p: &Vec3) -> [isize; 3] {
        let q = (p - self.origin) / self.spacing;
        [q.x.floor() as isize, q.y.floor() as isize, q.z.floor() as isize]
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Cell index at integer lattice position, if that cell is part of the grid.
    pub fn cell_at(&self, i: isize, j: isize, k: isize) -> Option<usize> {
        let [nx, ny, nz] = self.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= nx || j as usize >= ny || k as usize >= nz {
            return None;
        }
        self.lookup[(i as usize * ny + j as usize) * nz + k as usize]
    }

    /// Lattice position of a cell.
    pub fn lattice(&self, cell: usize) -> [usize; 3] {
        self.index[cell]
    }

    /// Cells whose full `radius`-cell stencil neighbourhood is inside the grid.
    pub fn interior_cells(&self, radius: usize) -> Vec<usize> {
        let r = radius as isize;
        (0..self.len())
            .filter(|&c| {
                let [i, j, k] = self.index[c].map(|v| v as isize);
                (-r..=r).all(|d| {
                    self.cell_at(i + d, j, k).is_some()
                        && self.cell_at(i, j + d, k).is_some()
                        && self.cell_at(i, j, k + d).is_some()
                })
            })
            .collect()
    }

    /// Discrete L² norm of a vector field sampled at the cell centres.
    pub fn l2_norm(&self, values: &[Vec3]) -> f64 {
        values.iter().zip(&self.volumes).map(|(v, w)| w * v.norm_squared()).sum::<f64>().sqrt()
    }
}

pub fn build_volume_grid(domain: &VolumeDomain, resolution: usize) -> Result<VolumeGrid> {
    if resolution < 2 {
        return Err(BbemError::Domain(format!("volume resolution must be >= 2, got {resolution}")));
    }
    let (lo, hi) = domain.bounds();
    let extent = (hi - lo).max();
    let h = extent / resolution as f64;
    let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / h).round() as usize).max(1));
    let mut centers = Vec::new();
    let mut index = Vec::new();
    let mut lookup = vec![None; dims[0] * dims[1] * dims[2]];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let c = lo + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h;
                if domain.contains(&c) {
                    lookup[(i * dims[1] + j) * dims[2] + k] = Some(centers.len());
                    centers.push(c);
                    index.push([i, j, k]);
                }
            }
        }
    }
    let volumes = vec![h * h * h; centers.len()];
    Ok(VolumeGrid { centers, volumes, spacing: h, origin: lo, dims, provenance: domain.name(), lookup, index })
}
