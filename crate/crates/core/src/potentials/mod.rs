//! Boundary operators, layer potentials and Newtonian volume potentials.

mod field;
mod layer;
mod newtonian;
mod operator;

pub use field::{BoundaryField, VolumeField};
pub use layer::{
    adjoint_double_layer, assemble_double_layer, assemble_single_layer, check_off_boundary, eval_double_layer,
    eval_double_layer_pressure, eval_harmonic_single_layer, eval_single_layer, eval_single_layer_pressure,
    eval_single_layer_traction, single_layer_eval_matrix, stokeslet_panel_integral, LayerOptions,
};
pub use newtonian::*;
pub use operator::{DenseOperator, OperatorKind};
