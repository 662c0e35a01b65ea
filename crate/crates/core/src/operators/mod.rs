//! Toeplitz and Hankel operators on the doubling Fock space.

mod engine;
mod fredholm;
mod hankel;
mod toeplitz;

pub use engine::{certified_rule, direct_entry, radial_diagonal, PolarGrid, RadialRule};
pub use fredholm::{fredholm_probe, FredholmProbeReport, FredholmThresholds, Verdict, SUP_GROWTH_LIMIT};
pub use hankel::{
    default_family_points, default_test_family, hankel_apply, hankel_norm_probe, kernel_family, regularizer_residual,
    HankelProbe, RegularizerResidual, TestFunction,
};
pub use toeplitz::{smallest_singular_value, spectral_norm, toeplitz_matrix, ToeplitzTruncation, RADIAL_OFF_DIAGONAL_TOL};
