//! Numerical laboratory for the Neumann–Poincaré operator on closed curves
//! and surfaces.

pub mod assembly;
pub mod cli;
pub mod cyclic;
pub mod error;
pub mod geometry;
pub mod perturbation;
pub mod spectral;

pub use error::{Error, Result};
