use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::transforms::SymbolFunction;
use crate::weights::WeightModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    WeightInfo,
    RhoMap,
    Lattice,
    DistanceField,
    KernelCheck,
    BerezinField,
    Classify,
    Toeplitz,
    FredholmProbe,
    HankelProbe,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::WeightInfo => "weight-info",
            Command::RhoMap => "rho-map",
            Command::Lattice => "lattice",
            Command::DistanceField => "distance-field",
            Command::KernelCheck => "kernel-check",
            Command::BerezinField => "berezin-field",
            Command::Classify => "classify",
            Command::Toeplitz => "toeplitz",
            Command::FredholmProbe => "fredholm-probe",
            Command::HankelProbe => "hankel-probe",
            Command::VerifyAll => "verify-all",
        }
    }

    fn needs_symbol(self) -> bool {
        matches!(
            self,
            Command::BerezinField | Command::Classify | Command::Toeplitz | Command::FredholmProbe
        )
    }
}

fn default_weight() -> String {
    "kind=gaussian alpha=1".into()
}
fn default_out() -> String {
    "fockprobe".into()
}
fn default_sizes() -> Vec<usize> {
    vec![16, 32, 64]
}
fn default_annuli() -> Vec<[f64; 2]> {
    vec![[2.0, 3.0], [3.0, 4.0], [4.0, 5.0]]
}
fn default_classify_annuli() -> Vec<[f64; 2]> {
    vec![[0.5, 1.0], [1.0, 1.5], [1.5, 2.0], [2.0, 2.5]]
}
fn c_low() -> f64 {
    0.1
}
fn stabilization() -> f64 {
    0.1
}
fn angular_samples() -> usize {
    64
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn five() -> f64 {
    5.0
}
fn packing() -> f64 {
    0.2
}
fn grid_points() -> usize {
    9
}
fn graph_half_width() -> f64 {
    4.0
}
fn graph_spacing() -> f64 {
    0.05
}
fn size() -> usize {
    16
}
fn per_annulus() -> usize {
    16
}
fn kernel_tolerance() -> f64 {
    1e-12
}
fn pairs() -> usize {
    50
}

/// Flat run configuration. Every key except `command` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_weight")]
    pub weight: String,
    /// Output path prefix; files are written as `<out>_<command>.<ext>`.
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub symbol: Option<String>,
    /// Hankel probe on the cutoff `h_R` instead of `symbol`.
    #[serde(default)]
    pub cutoff_radius: Option<f64>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_annuli")]
    pub annuli: Vec<[f64; 2]>,
    #[serde(default = "default_classify_annuli")]
    pub classify_annuli: Vec<[f64; 2]>,
    #[serde(default = "c_low")]
    pub c_low: f64,
    #[serde(default = "stabilization")]
    pub stabilization: f64,
    #[serde(default = "angular_samples")]
    pub angular_samples: usize,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "five")]
    pub domain_radius: f64,
    #[serde(default = "packing")]
    pub lattice_packing: f64,
    /// Half width of the square sample grid (rho-map, kernel-check,
    /// berezin-field).
    #[serde(default = "three")]
    pub grid_extent: f64,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "graph_half_width")]
    pub graph_half_width: f64,
    #[serde(default = "graph_spacing")]
    pub graph_spacing: f64,
    /// Section size of the `toeplitz` command.
    #[serde(default = "size")]
    pub size: usize,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "per_annulus")]
    pub per_annulus: usize,
    #[serde(default = "one")]
    pub regularizer_radius: f64,
    #[serde(default = "kernel_tolerance")]
    pub kernel_tolerance: f64,
    /// Random pairs drawn by verify-all.
    #[serde(default = "pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

/// First backquoted token of a serde message: the offending key.
fn key_of(message: &str) -> String {
    message.split('`').nth(1).unwrap_or("<document>").to_string()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        FockError::config(key_of(&message), message)
    })?;
    config.validate()?;
    Ok(config)
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FockError::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn check_annuli(key: &str, annuli: &[[f64; 2]]) -> Result<()> {
    for a in annuli {
        if !(a[0] >= 0.0 && a[1] > a[0] && a[1].is_finite()) {
            return Err(FockError::config(key, format!("annulus [{}, {}] needs 0 ≤ inner < outer", a[0], a[1])));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        WeightModel::parse(&self.weight).map_err(|e| FockError::config("weight", e.to_string()))?;
        if let Some(s) = &self.symbol {
            SymbolFunction::parse(s).map_err(|e| FockError::config("symbol", e.to_string()))?;
        } else if self.command.needs_symbol() {
            return Err(FockError::config("symbol", format!("required by `{}`", self.command.name())));
        }
        if self.command == Command::HankelProbe && self.symbol.is_none() && self.cutoff_radius.is_none() {
            return Err(FockError::config("symbol", "hankel-probe needs `symbol` or `cutoff_radius`"));
        }
        if let Some(r) = self.cutoff_radius {
            check_positive("cutoff_radius", r)?;
        }
        for (key, v) in [
            ("c_low", self.c_low),
            ("stabilization", self.stabilization),
            ("r", self.r),
            ("domain_radius", self.domain_radius),
            ("grid_extent", self.grid_extent),
            ("graph_half_width", self.graph_half_width),
            ("graph_spacing", self.graph_spacing),
            ("p", self.p),
            ("regularizer_radius", self.regularizer_radius),
            ("kernel_tolerance", self.kernel_tolerance),
        ] {
            check_positive(key, v)?;
        }
        if self.lattice_packing < 0.2 || !self.lattice_packing.is_finite() {
            return Err(FockError::config("lattice_packing", "must be at least 0.2"));
        }
        if self.graph_spacing > self.graph_half_width {
            return Err(FockError::config("graph_spacing", "exceeds graph_half_width"));
        }
        for (key, v) in [
            ("angular_samples", self.angular_samples),
            ("grid_points", self.grid_points),
            ("size", self.size),
            ("per_annulus", self.per_annulus),
            ("pairs", self.pairs),
        ] {
            if v == 0 {
                return Err(FockError::config(key, "must be at least 1"));
            }
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(FockError::config("sizes", "must be a non-empty list of positive sizes"));
        }
        check_annuli("annuli", &self.annuli)?;
        check_annuli("classify_annuli", &self.classify_annuli)?;
        Ok(())
    }

    pub fn weight_model(&self) -> Result<WeightModel> {
        WeightModel::parse(&self.weight)
    }

    pub fn symbol_function(&self) -> Result<SymbolFunction> {
        match &self.symbol {
            Some(s) => SymbolFunction::parse(s),
            None => Err(FockError::config("symbol", "not set")),
        }
    }

    pub fn annulus_pairs(&self) -> Vec<(f64, f64)> {
        self.annuli.iter().map(|a| (a[0], a[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"weight":"kind=gaussian alpha=1.0","command":"weight-info"}"#).unwrap();
        assert_eq!(c.command, Command::WeightInfo);
        assert_eq!(c.sizes, vec![16, 32, 64]);
    }

    #[test]
    fn missing_command_names_key() {
        match parse_config(r#"{"weight":"kind=gaussian alpha=1.0"}"#) {
            Err(FockError::Config { key, .. }) => assert_eq!(key, "command"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        match parse_config(r#"{"command":"lattice","colour":"red"}"#) {
            Err(FockError::Config { key, message }) => {
                assert_eq!(key, "colour");
                assert!(message.contains("line 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fredholm_config_keeps_sizes() {
        let c = parse_config(r#"{"command":"fredholm-probe","symbol":"indicator_outside:1","sizes":[16,32,64],"annuli":[[2,3],[3,4],[4,5]]}"#).unwrap();
        assert_eq!(c.sizes.len(), 3);
        assert_eq!(c.annulus_pairs()[2], (4.0, 5.0));
    }

    #[test]
    fn validation_errors_are_config_errors() {
        for text in [
            r#"{"command":"toeplitz"}"#,
            r#"{"command":"toeplitz","symbol":"bogus"}"#,
            r#"{"command":"lattice","weight":"kind=nope"}"#,
            r#"{"command":"lattice","r":-1}"#,
            r#"{"command":"lattice","annuli":[[3,2]]}"#,
            r#"{"command":"lattice","lattice_packing":0.1}"#,
            r#"{"command":"hankel-probe"}"#,
            r#"not json"#,
        ] {
            let err = parse_config(text).unwrap_err();
            assert!(err.is_config_error(), "{text}: {err}");
        }
    }
}
