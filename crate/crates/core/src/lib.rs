//! Numerical laboratory for doubling Fock spaces.
//!
//! Starting from a radial subharmonic weight `φ`, the crate computes the
//! induced radius `ρ`, `r`-lattices and the metric `d_φ`, reproducing kernels,
//! Berezin transforms, and finite-section probes of Toeplitz and Hankel
//! operators on `F²_φ`.

pub mod cli;
pub mod error;
pub mod export;
pub mod geometry;
pub mod numerics;
pub mod operators;
pub mod transforms;
pub mod kernels;
pub mod weights;

pub use error::{FockError, Result};
