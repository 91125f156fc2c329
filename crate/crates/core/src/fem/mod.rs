//! P1 finite elements on triangles and interface polygons, coefficient and
//! reaction models, and the discrete ε-weighted norms.

mod assembly;
mod dofmap;
pub mod model;
mod norms;
pub mod quadrature;
pub mod trace;

pub use assembly::{
    assemble_bulk_mass, assemble_bulk_stiffness, assemble_side_surface_mass,
    assemble_side_surface_stiffness, assemble_surface_mass, assemble_surface_stiffness,
    interpolate,
};
pub(crate) use assembly::p1_gradients;
pub use dofmap::{CoupledDofMap, PeriodicReduction};
pub use model::{
    DiffusionSpec, Kinetics, LipschitzReport, ReactionModel, ReactionSpec, ScalarField, Tensor,
    TensorField,
};
pub use norms::NormOperators;
pub use trace::{calibrate_trace_constant, TraceInequality, TraceReport};
