//! Boundary meshes, Dirichlet/Neumann patch labels, surface quadrature and
//! interior voxel grids.

mod mesh;
mod off;
mod patches;
mod quadrature;
mod volume;

pub use mesh::{build_cube, build_icosphere, Panel, SurfaceMesh, MAX_ICOSPHERE_LEVEL};
pub use off::{read_off, read_off_file, write_off};
pub use patches::{label_patches, PatchLabel, PatchLabeling, PatchRule};
pub use quadrature::{
    duffy_singular_rule, gauss_legendre, near_singular_rule, panel_quadrature, triangle_rule, LocalRule,
    QuadratureSet,
};
pub use volume::{build_volume_grid, VolumeDomain, VolumeGrid};
