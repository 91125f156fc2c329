//! Numerical homogenization of reaction–diffusion systems with dynamic
//! Wentzell interface conditions on periodically perforated domains.

pub mod cell;
pub mod cli;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod macroscopic;
pub mod microscopic;
pub mod sparse;
pub mod two_scale;

pub use error::{Error, Result};
