use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, FockError>;

#[derive(Debug, Clone, Error)]
pub enum FockError {
    #[error("point {point} is outside the working domain ({detail})")]
    OutOfDomain { point: Complex64, detail: String },

    #[error("negative Laplacian density {density} at r = {radius}")]
    SubharmonicityViolation { radius: f64, density: f64 },

    #[error("quadrature did not converge: best estimate {best} with error {error}")]
    Convergence { best: f64, error: f64 },

    #[error("cannot resolve the induced radius at {point}: {detail}")]
    UnresolvableRadius { point: Complex64, detail: String },

    #[error("kernel series truncation budget exhausted at degree {degree} (partial sum {partial}, tail bound {bound})")]
    TruncationBudget {
        degree: usize,
        partial: Complex64,
        bound: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimate violated: {0}")]
    EstimateViolation(String),

    #[error("Berezin transform too small ({value:e}) at {point} to invert")]
    DivisionDomain { point: Complex64, value: f64 },

    #[error("integrand does not decay inside the quadrature domain: {0}")]
    Divergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid weight specification: {0}")]
    WeightSpec(String),

    #[error("invalid symbol specification: {0}")]
    SymbolSpec(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl FockError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        FockError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the run configuration rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            FockError::Config { .. } | FockError::WeightSpec(_) | FockError::SymbolSpec(_)
        )
    }
}

impl From<std::io::Error> for FockError {
    fn from(e: std::io::Error) -> Self {
        FockError::Io(e.to_string())
    }
}

impl From<csv::Error> for FockError {
    fn from(e: csv::Error) -> Self {
        FockError::Io(e.to_string())
    }
}
