//! Symbols and the transforms built from them: the Berezin transform, disk
//! averages, mean and metric oscillation, class diagnostics, the cutoff
//! `h_R` and the regularizer symbol.

mod berezin;
mod oscillation;
mod symbol;

pub use berezin::{berezin, berezin_density, berezin_with, build_regularizer_symbol, BerezinField, FieldLayout, DIVISION_FLOOR};
pub use oscillation::{
    annulus_samples, average_hat, average_hat_p, build_cutoff, classify_symbol, mean_oscillation, omega_oscillation, oscillation_report,
    AnnulusSummary, OmegaValue, OscillationReport, SymbolDiagnostics, DECAY_FACTOR, GROWTH_FACTOR,
};
pub use symbol::{parse_symbol, SymbolFunction};
