//! Radial subharmonic weights `φ`, their Laplacian measure `ν = Δφ dA`, and
//! disk measures `ν(D(z, r))`.
//!
//! The Laplacian is the flat one, `∂²/∂x² + ∂²/∂y²`, so `Δ|z|² = 4`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::numerics::{integrate_with_breaks, QuadOptions};

mod rho;

pub use rho::{fit_growth_exponent, rho_equivalence_constants, InducedRadiusField, RhoProfile};

/// Sampled radial weight: `φ` and `Δφ` given on a strictly increasing grid
/// starting at `r = 0`, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    r: Vec<f64>,
    phi: Vec<f64>,
    laplacian: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RadialTable {
    pub fn new(r: Vec<f64>, phi: Vec<f64>, laplacian: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != phi.len() || r.len() != laplacian.len() {
            return Err(FockError::WeightSpec(
                "custom radial table needs at least two rows of (r, phi, laplacian)".into(),
            ));
        }
        if r[0] != 0.0 {
            return Err(FockError::WeightSpec("custom radial grid must start at r = 0".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FockError::WeightSpec("custom radial grid must be strictly increasing".into()));
        }
        if let Some(i) = laplacian.iter().position(|&l| !(l >= 0.0)) {
            return Err(FockError::SubharmonicityViolation {
                radius: r[i],
                density: laplacian[i],
            });
        }
        if laplacian.iter().all(|&l| l == 0.0) {
            return Err(FockError::WeightSpec("Laplacian is identically zero".into()));
        }
        // ν(D(0, t)) = 2π ∫₀ᵗ s Δφ(s) ds, exact for the piecewise linear density.
        let mut cumulative = vec![0.0; r.len()];
        for i in 1..r.len() {
            let (a, b) = (r[i - 1], r[i]);
            let slope = (laplacian[i] - laplacian[i - 1]) / (b - a);
            let c0 = laplacian[i - 1] - slope * a;
            let seg = c0 * (b * b - a * a) / 2.0 + slope * (b * b * b - a * a * a) / 3.0;
            cumulative[i] = cumulative[i - 1] + 2.0 * PI * seg;
        }
        Ok(Self {
            r,
            phi,
            laplacian,
            cumulative,
        })
    }

    /// Reads a CSV file with header `r,phi,laplacian`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["r", "phi", "laplacian"] {
            return Err(FockError::WeightSpec(format!(
                "{}: expected header `r,phi,laplacian`, found `{}`",
                path.display(),
                names.join(",")
            )));
        }
        let (mut r, mut phi, mut lap) = (Vec::new(), Vec::new(), Vec::new());
        for (line, row) in reader.records().enumerate() {
            let row = row?;
            let parse = |i: usize| -> Result<f64> {
                row.get(i).map(str::trim).unwrap_or("").parse::<f64>().map_err(|e| {
                    FockError::WeightSpec(format!("{} row {}: {e}", path.display(), line + 2))
                })
            };
            r.push(parse(0)?);
            phi.push(parse(1)?);
            lap.push(parse(2)?);
        }
        Self::new(r, phi, lap)
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("table has rows")
    }

    fn locate(&self, r: f64) -> Result<(usize, f64)> {
        if !(r >= 0.0) || r > self.r_max() {
            return Err(FockError::OutOfDomain {
                point: Complex64::new(r, 0.0),
                detail: format!("custom weight sampled only on [0, {}]", self.r_max()),
            });
        }
        let i = match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(self.r.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.r.len() - 2),
        };
        let t = (r - self.r[i]) / (self.r[i + 1] - self.r[i]);
        Ok((i, t))
    }

    fn interp(values: &[f64], i: usize, t: f64) -> f64 {
        values[i] + t * (values[i + 1] - values[i])
    }

    fn phi(&self, r: f64) -> Result<f64> {
        let (i, t) = self.locate(r)?;
        Ok(Self::interp(&self.phi, i, t))
    }

    fn laplacian(&self, r: f64) -> Result<f64> {
        let (i, t) = self.locate(r)?;
        Ok(Self::interp(&self.laplacian, i, t))
    }

    fn cumulative(&self, t: f64) -> Result<f64> {
        let (i, _) = self.locate(t)?;
        let a = self.r[i];
        let slope = (self.laplacian[i + 1] - self.laplacian[i]) / (self.r[i + 1] - a);
        let c0 = self.laplacian[i] - slope * a;
        let seg = c0 * (t * t - a * a) / 2.0 + slope * (t * t * t - a * a * a) / 3.0;
        Ok(self.cumulative[i] + 2.0 * PI * seg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// `φ = (α/2)|z|²`.
    Gaussian { alpha: f64 },
    /// `φ = |z|^m`.
    Power { m: f64 },
    /// `φ = m log|z| + |z|²`, with a point mass `2πm` of `Δφ` at the origin.
    FockSobolev { m: f64 },
    CustomRadial(Arc<RadialTable>),
}

/// A radial subharmonic weight. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    kind: WeightKind,
    source: String,
}

impl WeightModel {
    pub fn gaussian(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self {
            kind: WeightKind::Gaussian { alpha },
            source: format!("kind=gaussian alpha={alpha}"),
        })
    }

    pub fn power(m: f64) -> Result<Self> {
        positive("m", m)?;
        Ok(Self {
            kind: WeightKind::Power { m },
            source: format!("kind=power m={m}"),
        })
    }

    pub fn fock_sobolev(m: f64) -> Result<Self> {
        positive("m", m)?;
        Ok(Self {
            kind: WeightKind::FockSobolev { m },
            source: format!("kind=fock_sobolev m={m}"),
        })
    }

    pub fn custom(table: RadialTable, source: impl Into<String>) -> Self {
        Self {
            kind: WeightKind::CustomRadial(Arc::new(table)),
            source: source.into(),
        }
    }

    /// Parses `kind=gaussian alpha=1.0`, `kind=power m=2`, `kind=fock_sobolev m=1`
    /// or `kind=custom_radial file=<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut kind = None;
        let mut params: Vec<(&str, &str)> = Vec::new();
        for token in spec.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| FockError::WeightSpec(format!("expected key=value, found `{token}`")))?;
            if key == "kind" {
                kind = Some(value);
            } else {
                params.push((key, value));
            }
        }
        let kind = kind.ok_or_else(|| FockError::WeightSpec("missing `kind=`".into()))?;
        let take = |name: &str| -> Result<f64> {
            let raw = params
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| FockError::WeightSpec(format!("kind={kind} needs `{name}=`")))?;
            raw.parse::<f64>()
                .map_err(|e| FockError::WeightSpec(format!("{name}={raw}: {e}")))
        };
        let allowed: &[&str] = match kind {
            "gaussian" => &["alpha"],
            "power" | "fock_sobolev" => &["m"],
            "custom_radial" => &["file"],
            other => return Err(FockError::WeightSpec(format!("unknown weight kind `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(FockError::WeightSpec(format!("unexpected parameter `{k}` for kind={kind}")));
        }
        match kind {
            "gaussian" => Self::gaussian(take("alpha")?),
            "power" => Self::power(take("m")?),
            "fock_sobolev" => Self::fock_sobolev(take("m")?),
            _ => {
                let file = params
                    .iter()
                    .find(|(k, _)| *k == "file")
                    .map(|(_, v)| *v)
                    .ok_or_else(|| FockError::WeightSpec("kind=custom_radial needs `file=`".into()))?;
                Ok(Self::custom(RadialTable::from_csv(Path::new(file))?, spec.trim()))
            }
        }
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, WeightKind::Gaussian { .. })
    }

    /// Mass of the point part of `ν` at the origin.
    pub fn atom_mass_at_origin(&self) -> f64 {
        match self.kind {
            WeightKind::FockSobolev { m } => 2.0 * PI * m,
            _ => 0.0,
        }
    }

    /// Largest radius where the weight is defined (∞ for closed forms).
    pub fn r_max(&self) -> f64 {
        match &self.kind {
            WeightKind::CustomRadial(t) => t.r_max(),
            _ => f64::INFINITY,
        }
    }

    /// Sample radii of a tabulated weight (empty for closed forms).
    pub fn radial_nodes(&self) -> &[f64] {
        match &self.kind {
            WeightKind::CustomRadial(t) => &t.r,
            _ => &[],
        }
    }

    pub fn phi_radial(&self, r: f64) -> Result<f64> {
        Ok(match &self.kind {
            WeightKind::Gaussian { alpha } => 0.5 * alpha * r * r,
            WeightKind::Power { m } => r.powf(*m),
            WeightKind::FockSobolev { m } => m * r.ln() + r * r,
            WeightKind::CustomRadial(t) => t.phi(r)?,
        })
    }

    pub fn phi(&self, z: Complex64) -> Result<f64> {
        self.phi_radial(z.norm())
    }

    /// Absolutely continuous density of `ν` at radius `r`; for radial weights
    /// `Δφ = φ'' + φ'/r`.
    pub fn laplacian_radial(&self, r: f64) -> Result<f64> {
        let value = match &self.kind {
            WeightKind::Gaussian { alpha } => 2.0 * alpha,
            WeightKind::Power { m } => m * m * r.powf(m - 2.0),
            WeightKind::FockSobolev { .. } => 4.0,
            WeightKind::CustomRadial(t) => t.laplacian(r)?,
        };
        if value < -1e-12 {
            return Err(FockError::SubharmonicityViolation { radius: r, density: value });
        }
        Ok(value.max(0.0))
    }

    pub fn laplacian(&self, z: Complex64) -> Result<f64> {
        self.laplacian_radial(z.norm())
    }

    /// `ν(D(0, t))` without the atom at the origin.
    pub fn centered_measure(&self, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            WeightKind::Gaussian { alpha } => 2.0 * PI * alpha * t * t,
            WeightKind::Power { m } => 2.0 * PI * m * t.powf(*m),
            WeightKind::FockSobolev { .. } => 4.0 * PI * t * t,
            WeightKind::CustomRadial(table) => table.cumulative(t)?,
        })
    }

    /// `ν(D(z, r))`, including the atom at the origin when `|z| < r`.
    ///
    /// By rotation invariance the measure is reduced to a 1-D integral over
    /// circles `|w| = t` about the origin, weighted by the angular measure of
    /// the arc inside `D(z, r)`; a cosine substitution removes the square-root
    /// endpoint behaviour of the arc length.
    pub fn measure_of_disk(&self, z: Complex64, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(FockError::Numerical(format!("disk radius must be positive, got {r}")));
        }
        let a = z.norm();
        if a + r > self.r_max() {
            return Err(FockError::OutOfDomain {
                point: z,
                detail: format!("disk of radius {r} leaves the sampled weight range"),
            });
        }
        let atom = if a < r { self.atom_mass_at_origin() } else { 0.0 };
        if a <= r * 1e-14 {
            return Ok(self.centered_measure(r)? + atom);
        }
        let full = if r > a { self.centered_measure(r - a)? } else { 0.0 };
        let (t_lo, t_hi) = ((a - r).abs(), a + r);
        let half = 0.5 * (t_hi - t_lo);
        let mut failure = None;
        let arc = |u: f64| -> f64 {
            let t = t_lo + half * (1.0 - u.cos());
            if t <= 0.0 {
                return 0.0;
            }
            let cos_psi = ((t * t + a * a - r * r) / (2.0 * t * a)).clamp(-1.0, 1.0);
            let theta = 2.0 * cos_psi.acos();
            match self.laplacian_radial(t) {
                Ok(density) => density * t * theta * half * u.sin(),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let est = integrate_with_breaks(arc, 0.0, PI, &[], &QuadOptions::relative(1e-11).with_budget(4000))?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(full + est.value + atom)
    }

    /// Largest sampled ratio `ν(D(z, 2r)) / ν(D(z, r))`: a lower bound for the
    /// doubling constant.
    pub fn doubling_constant_estimate(&self, samples: &[Complex64], radii: &[f64]) -> Result<f64> {
        if samples.is_empty() || radii.is_empty() {
            return Err(FockError::InsufficientData("doubling estimate needs samples and radii".into()));
        }
        let mut best: f64 = 0.0;
        for &z in samples {
            for &r in radii {
                let small = self.measure_of_disk(z, r)?;
                let large = self.measure_of_disk(z, 2.0 * r)?;
                best = best.max(large / small);
            }
        }
        Ok(best)
    }
}

impl fmt::Display for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FockError::WeightSpec(format!("`{name}` must be positive and finite, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_disk;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_examples() {
        let g = WeightModel::gaussian(1.0).unwrap();
        assert_eq!(g.phi(c(0.0, 0.0)).unwrap(), 0.0);
        assert!((g.phi(c(0.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        let p = WeightModel::power(2.0).unwrap();
        assert!((p.phi(c(0.0, 2.0)).unwrap() - 4.0).abs() < 1e-14);
    }

    fn fd_laplacian(w: &WeightModel, z: Complex64) -> f64 {
        let h = 1e-4;
        let f = |dz: Complex64| w.phi(z + dz).unwrap();
        (f(c(h, 0.0)) + f(c(-h, 0.0)) + f(c(0.0, h)) + f(c(0.0, -h)) - 4.0 * f(c(0.0, 0.0))) / (h * h)
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let cases = [
            (WeightModel::gaussian(1.0).unwrap(), c(0.3, -0.8), 2.0),
            (WeightModel::power(2.0).unwrap(), c(3.0, 0.0), 4.0),
            (WeightModel::power(1.0).unwrap(), c(0.0, 2.0), 0.5),
        ];
        for (w, z, expected) in cases {
            let fd = fd_laplacian(&w, z);
            assert!((fd - expected).abs() < 1e-5, "{w}: fd {fd} vs {expected}");
            assert!((w.laplacian(z).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_measure_closed_forms() {
        let g = WeightModel::gaussian(1.0).unwrap();
        for z in [c(0.0, 0.0), c(1.3, -0.4), c(-5.0, 2.0)] {
            let m = g.measure_of_disk(z, 1.0).unwrap();
            assert!((m - 2.0 * PI).abs() < 1e-9, "{z}: {m}");
        }
        let p = WeightModel::power(2.0).unwrap();
        assert!((p.measure_of_disk(c(0.0, 0.0), 1.0).unwrap() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn disk_measure_agrees_with_polar_quadrature_about_center() {
        // Independent route: 2-D quadrature of Δφ in polar coordinates about z.
        for w in [WeightModel::power(4.0).unwrap(), WeightModel::power(1.5).unwrap()] {
            for (z, r) in [(c(0.8, 0.3), 0.5), (c(2.0, -1.0), 0.2), (c(0.1, 0.0), 0.7)] {
                let fast = w.measure_of_disk(z, r).unwrap();
                let slow = integrate_disk(
                    &|p: Complex64| w.laplacian(p).unwrap(),
                    z,
                    r,
                    &[],
                    &QuadOptions::relative(1e-10).with_budget(20_000),
                )
                .unwrap()
                .value;
                assert!((fast - slow).abs() < 1e-7 * slow, "{w} z={z} r={r}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn disk_measure_vanishes_as_radius_shrinks() {
        let w = WeightModel::power(3.0).unwrap();
        let z = c(1.0, 1.0);
        let vals: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&r| w.measure_of_disk(z, r).unwrap()).collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] < 1e-4);
    }

    #[test]
    fn disk_measure_strictly_increasing() {
        for w in [WeightModel::gaussian(1.0).unwrap(), WeightModel::power(4.0).unwrap(), WeightModel::fock_sobolev(1.0).unwrap()] {
            let z = c(0.6, -0.2);
            let mut last = 0.0;
            for i in 1..60 {
                let m = w.measure_of_disk(z, 0.05 * i as f64).unwrap();
                assert!(m > last, "{w} not increasing at step {i}");
                last = m;
            }
        }
    }

    #[test]
    fn fock_sobolev_atom_counts_only_when_origin_inside() {
        let w = WeightModel::fock_sobolev(1.0).unwrap();
        let z = c(0.5, 0.0);
        let inside = w.measure_of_disk(z, 0.6).unwrap();
        let outside = w.measure_of_disk(z, 0.4).unwrap();
        assert!((outside - 4.0 * PI * 0.16).abs() < 1e-9);
        assert!((inside - (4.0 * PI * 0.36 + 2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn doubling_estimates() {
        let g = WeightModel::gaussian(1.0).unwrap();
        let est = g
            .doubling_constant_estimate(&[c(0.0, 0.0), c(2.0, 1.0)], &[0.3, 1.0])
            .unwrap();
        assert!((est - 4.0).abs() < 1e-6);
        let p = WeightModel::power(2.0).unwrap();
        assert!((p.doubling_constant_estimate(&[c(0.0, 0.0)], &[0.7]).unwrap() - 4.0).abs() < 1e-9);
        let single = p.doubling_constant_estimate(&[c(1.0, 0.0)], &[0.5]).unwrap();
        let direct = p.measure_of_disk(c(1.0, 0.0), 1.0).unwrap() / p.measure_of_disk(c(1.0, 0.0), 0.5).unwrap();
        assert_eq!(single, direct);
        assert!(p.doubling_constant_estimate(&[], &[1.0]).is_err());
    }

    #[test]
    fn parse_weight_specs() {
        assert_eq!(WeightModel::parse("kind=gaussian alpha=1.0").unwrap(), WeightModel::gaussian(1.0).unwrap());
        assert_eq!(WeightModel::parse("kind=power m=2.0").unwrap(), WeightModel::power(2.0).unwrap());
        assert!(WeightModel::parse("kind=gaussian").is_err());
        assert!(WeightModel::parse("kind=gaussian alpha=-1").is_err());
        assert!(WeightModel::parse("kind=lorentz a=1").is_err());
        assert!(WeightModel::parse("kind=power m=2 alpha=3").is_err());
    }

    #[test]
    fn custom_table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let mut text = String::from("r,phi,laplacian\n");
        for i in 0..=400 {
            let r = i as f64 * 0.025;
            text.push_str(&format!("{r},{},{}\n", 0.5 * r * r, 2.0));
        }
        std::fs::write(&path, text).unwrap();
        let w = WeightModel::parse(&format!("kind=custom_radial file={}", path.display())).unwrap();
        let m = w.measure_of_disk(c(1.0, 0.5), 1.0).unwrap();
        assert!((m - 2.0 * PI).abs() < 1e-8);
        assert!(w.phi(c(20.0, 0.0)).is_err());
        assert!(w.measure_of_disk(c(9.5, 0.0), 1.0).is_err());
    }

    #[test]
    fn custom_table_rejects_bad_input() {
        assert!(RadialTable::new(vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![1.0; 3]).is_err());
        assert!(matches!(
            RadialTable::new(vec![0.0, 1.0], vec![0.0; 2], vec![1.0, -1.0]),
            Err(FockError::SubharmonicityViolation { .. })
        ));
        assert!(RadialTable::new(vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }
}
