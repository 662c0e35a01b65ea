use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::SymbolFunction;
use crate::error::{FockError, Result};
use crate::geometry::MetricGraph;
use crate::numerics::{integrate_annulus_split, linear_fit, QuadOptions, QuadValue};
use crate::weights::InducedRadiusField;

fn disk_mean<T, F>(field: &InducedRadiusField, f: &SymbolFunction, z: Complex64, g: F) -> Result<T>
where
    T: QuadValue,
    F: Fn(Complex64) -> T,
{
    let rho = field.rho(z)?;
    let breaks: Vec<f64> = f.radial_breaks_about(z).into_iter().filter(|&s| s < rho).collect();
    let angles = |s: f64| f.angle_breaks_about(z, s);
    let est = integrate_annulus_split(&g, z, 0.0, rho, &breaks, &angles, &QuadOptions::relative(1e-8).l1())?;
    Ok(est.value * (1.0 / (std::f64::consts::PI * rho * rho)))
}

/// `f̂(z)`: the mean of `f` over `D(z) = D(z, ρ(z))`.
pub fn average_hat(field: &InducedRadiusField, f: &SymbolFunction, z: Complex64) -> Result<Complex64> {
    disk_mean(field, f, z, |w| f.eval(w))
}

/// Mean of `|f|^p` over `D(z)`.
pub fn average_hat_p(field: &InducedRadiusField, f: &SymbolFunction, z: Complex64, p: f64) -> Result<f64> {
    disk_mean(field, f, z, |w| f.eval(w).norm().powf(p))
}

/// `MO_p(f)(z) = (mean over D(z) of |f − f̂(z)|^p)^{1/p}`.
pub fn mean_oscillation(field: &InducedRadiusField, f: &SymbolFunction, z: Complex64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(FockError::Numerical(format!("mean oscillation needs p ≥ 1, got {p}")));
    }
    let hat = average_hat(field, f, z)?;
    let m: f64 = disk_mean(field, f, z, |w| (f.eval(w) - hat).norm().powf(p))?;
    Ok(m.max(0.0).powf(1.0 / p))
}

/// `ω(f)(z)` with a flag for balls cut off by the graph box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaValue {
    pub value: f64,
    pub truncated: bool,
}

/// `ω(f)(z) = sup{|f(z) − f(w)| : d_φ(z, w) < r}` on the graph.
pub fn omega_oscillation(graph: &MetricGraph, f: &SymbolFunction, z: Complex64, r: f64) -> Result<OmegaValue> {
    if !(r > 0.0) {
        return Err(FockError::Numerical(format!("ω needs r > 0, got {r}")));
    }
    let (value, truncated) = graph.ball_oscillation(|w| f.eval(w), z, r)?;
    Ok(OmegaValue { value, truncated })
}

/// Per-annulus suprema of the sampled quantities.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AnnulusSummary {
    pub inner: f64,
    pub outer: f64,
    pub sup_omega: f64,
    pub sup_hat_p: f64,
    pub sup_mo: f64,
}

/// `ω(f)`, `MO_p(f)` and `(|f|^p)^` at sample points grouped by annulus.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    pub symbol: String,
    pub p: f64,
    pub r: f64,
    /// `β` is replaced by `beta_proxy_scale · d_φ`.
    pub beta_proxy_scale: f64,
    pub points: Vec<[f64; 2]>,
    pub annulus_index: Vec<usize>,
    pub omega: Vec<f64>,
    pub omega_truncated: Vec<bool>,
    pub mean_oscillation: Vec<f64>,
    pub hat_p: Vec<f64>,
    pub annuli: Vec<AnnulusSummary>,
}

/// `n` deterministic sample points in the annulus `a ≤ |z| < b`: radii
/// evenly spread across the annulus, angles advancing by the golden angle.
pub fn annulus_samples(a: f64, b: f64, n: usize) -> Vec<Complex64> {
    const GOLDEN: f64 = 2.399_963_229_728_653;
    (0..n)
        .map(|j| Complex64::from_polar(a + (b - a) * (j as f64 + 0.5) / n as f64, 0.3 + GOLDEN * j as f64))
        .collect()
}

pub fn oscillation_report(
    field: &InducedRadiusField,
    graph: &MetricGraph,
    f: &SymbolFunction,
    annuli: &[(f64, f64)],
    per_annulus: usize,
    p: f64,
    r: f64,
) -> Result<OscillationReport> {
    if per_annulus == 0 {
        return Err(FockError::InsufficientData("no samples per annulus".into()));
    }
    let mut samples = Vec::new();
    for (k, &(a, b)) in annuli.iter().enumerate() {
        if !(b > a) || a < 0.0 {
            return Err(FockError::Numerical(format!("bad annulus ({a}, {b})")));
        }
        samples.extend(annulus_samples(a, b, per_annulus).into_iter().map(|z| (k, z)));
    }
    let rows: Vec<(f64, bool, f64, f64)> = samples
        .par_iter()
        .map(|&(_, z)| -> Result<(f64, bool, f64, f64)> {
            let om = omega_oscillation(graph, f, z, r)?;
            Ok((om.value, om.truncated, mean_oscillation(field, f, z, p)?, average_hat_p(field, f, z, p)?))
        })
        .collect::<Result<_>>()?;
    let summaries = annuli
        .iter()
        .enumerate()
        .map(|(k, &(inner, outer))| {
            let sup = |pick: fn(&(f64, bool, f64, f64)) -> f64| {
                samples
                    .iter()
                    .zip(&rows)
                    .filter(|((a, _), _)| *a == k)
                    .map(|(_, row)| pick(row))
                    .fold(0.0, f64::max)
            };
            AnnulusSummary {
                inner,
                outer,
                sup_omega: sup(|r| r.0),
                sup_hat_p: sup(|r| r.3),
                sup_mo: sup(|r| r.2),
            }
        })
        .collect();
    Ok(OscillationReport {
        symbol: f.name().to_string(),
        p,
        r,
        beta_proxy_scale: 1.0,
        points: samples.iter().map(|(_, z)| [z.re, z.im]).collect(),
        annulus_index: samples.iter().map(|(k, _)| *k).collect(),
        omega: rows.iter().map(|r| r.0).collect(),
        omega_truncated: rows.iter().map(|r| r.1).collect(),
        mean_oscillation: rows.iter().map(|r| r.2).collect(),
        hat_p: rows.iter().map(|r| r.3).collect(),
        annuli: summaries,
    })
}

/// Trend diagnostics and advisory class tags for a symbol.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SymbolDiagnostics {
    pub sup_omega: f64,
    pub omega_decay_slope: f64,
    pub sup_hat_p: f64,
    pub hat_decay_slope: f64,
    #[serde(rename = "sup_MO")]
    pub sup_mo: f64,
    #[serde(rename = "MO_decay_slope")]
    pub mo_decay_slope: f64,
    pub advisory_tags: Vec<String>,
}

/// Relative drop from the first to the last annulus that counts as decay.
pub const DECAY_FACTOR: f64 = 0.2;
/// Relative growth from the first to the last annulus still counted as bounded.
pub const GROWTH_FACTOR: f64 = 2.0;
const ZERO: f64 = 1e-12;

fn trend(values: &[f64]) -> (bool, bool) {
    let (first, last) = (values[0], values[values.len() - 1]);
    let decays = last <= ZERO || last < DECAY_FACTOR * first;
    let bounded = decays || last <= GROWTH_FACTOR * first + ZERO;
    (bounded, decays)
}

/// Advisory classification from annulus trends. The tags are heuristics on
/// finite data, not membership certificates.
pub fn classify_symbol(report: &OscillationReport) -> Result<SymbolDiagnostics> {
    if report.annuli.len() < 4 {
        return Err(FockError::InsufficientData(format!(
            "classification needs at least 4 annuli, got {}",
            report.annuli.len()
        )));
    }
    let mids: Vec<f64> = report.annuli.iter().map(|a| 0.5 * (a.inner + a.outer)).collect();
    let series = |pick: fn(&AnnulusSummary) -> f64| -> Vec<f64> { report.annuli.iter().map(pick).collect() };
    let (omega, hat, mo) = (series(|a| a.sup_omega), series(|a| a.sup_hat_p), series(|a| a.sup_mo));
    let slope = |v: &[f64]| linear_fit(&mids, v).map(|(_, b)| b).unwrap_or(0.0);
    let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut tags = Vec::new();
    for (values, bounded_tag, vanishing_tag) in [(&omega, "BO", "VO"), (&hat, "BA^p", "VA^p"), (&mo, "BMO^p", "VMO^p")] {
        let (bounded, decays) = trend(values);
        if bounded {
            tags.push(bounded_tag.to_string());
        }
        if decays {
            tags.push(vanishing_tag.to_string());
        }
    }
    Ok(SymbolDiagnostics {
        sup_omega: sup(&omega),
        omega_decay_slope: slope(&omega),
        sup_hat_p: sup(&hat),
        hat_decay_slope: slope(&hat),
        sup_mo: sup(&mo),
        mo_decay_slope: slope(&mo),
        advisory_tags: tags,
    })
}

/// The cutoff `h_R(z) = min(1, max(0, 2 − d_φ(z, 0)/R))`, with `d_φ` taken
/// from the graph. Points outside the graph box get `0`.
pub fn build_cutoff(graph: MetricGraph, r: f64) -> Result<SymbolFunction> {
    if !(r > 0.0) {
        return Err(FockError::Numerical(format!("cutoff radius must be positive, got {r}")));
    }
    let field = graph.owned_distance_field()?;
    let reach = field.boundary_distance();
    if reach < 2.0 * r {
        return Err(FockError::OutOfDomain {
            point: Complex64::new(0.0, 0.0),
            detail: format!("graph box reaches d_φ = {reach:.4} from the origin, the cutoff needs {}", 2.0 * r),
        });
    }
    Ok(SymbolFunction::real(format!("cutoff:{r}"), move |z| {
        if !field.graph().contains(z) {
            return 0.0;
        }
        match field.eval(z) {
            Ok(d) => (2.0 - d / r).clamp(0.0, 1.0),
            Err(_) => 0.0,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Connectivity;
    use crate::weights::WeightModel;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian_field() -> InducedRadiusField {
        InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap())
    }

    #[test]
    fn averages_match_closed_forms() {
        let field = gaussian_field();
        let origin = c(0.0, 0.0);
        let abs_sq = SymbolFunction::parse("abs_sq").unwrap();
        assert!((average_hat(&field, &abs_sq, origin).unwrap().re - 1.0 / (4.0 * PI)).abs() < 1e-9);
        let re = SymbolFunction::parse("re").unwrap();
        assert!(average_hat(&field, &re, origin).unwrap().norm() < 1e-12);
        let rho = (2.0 * PI).powf(-0.5);
        assert!((mean_oscillation(&field, &re, origin, 2.0).unwrap() - rho / 2.0).abs() < 1e-8);
        let k = SymbolFunction::constant(3.0);
        assert!((average_hat(&field, &k, c(1.0, -2.0)).unwrap().re - 3.0).abs() < 1e-12);
        assert!(mean_oscillation(&field, &k, c(1.0, -2.0), 1.0).unwrap() < 1e-12);
        assert!(mean_oscillation(&field, &k, origin, 0.5).is_err());
    }

    #[test]
    fn indicator_average_vanishes_far_out() {
        let field = InducedRadiusField::new(WeightModel::power(2.0).unwrap());
        let f = SymbolFunction::indicator_inside(1.0);
        assert_eq!(average_hat(&field, &f, c(3.0, 0.5)).unwrap().re, 0.0);
        let v = average_hat(&field, &f, c(1.0, 0.0)).unwrap().re;
        assert!(v > 0.3 && v < 0.7, "{v}");
    }

    #[test]
    fn omega_of_real_part_and_monotonicity() {
        let field = gaussian_field();
        let graph = MetricGraph::new(&field, 2.0, 0.02, Connectivity::Sixteen).unwrap();
        let re = SymbolFunction::parse("re").unwrap();
        let z = c(0.3, -0.2);
        let om = omega_oscillation(&graph, &re, z, 1.0).unwrap();
        let rho = (2.0 * PI).powf(-0.5);
        assert!((om.value / rho - 1.0).abs() < 0.05, "{}", om.value);
        assert!(!om.truncated);
        for w in [c(0.0, 0.0), c(1.0, 1.0), c(-1.5, 0.2)] {
            let small = omega_oscillation(&graph, &re, w, 0.5).unwrap().value;
            let big = omega_oscillation(&graph, &re, w, 1.0).unwrap().value;
            assert!(small <= big);
        }
        assert_eq!(omega_oscillation(&graph, &SymbolFunction::constant(1.0), z, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn cutoff_profile() {
        let field = gaussian_field();
        let graph = MetricGraph::new(&field, 2.0, 0.05, Connectivity::Sixteen).unwrap();
        let h = build_cutoff(graph.clone(), 2.0).unwrap();
        assert_eq!(h.eval(c(0.0, 0.0)).re, 1.0);
        // d_φ(x, 0) = x √(2π) on the axis, so 1.5R is reached at x = 3/√(2π).
        let x = 3.0 / (2.0 * PI).sqrt();
        assert!((h.eval(c(x, 0.0)).re - 0.5).abs() < 1e-6);
        assert_eq!(h.eval(c(5.0, 0.0)).re, 0.0);
        assert!(build_cutoff(graph, 4.0).is_err());
    }

    #[test]
    fn classification_tags() {
        let field = gaussian_field();
        let graph = MetricGraph::new(&field, 6.0, 0.05, Connectivity::Sixteen).unwrap();
        let annuli = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0)];
        let tags = |f: &SymbolFunction| {
            let report = oscillation_report(&field, &graph, f, &annuli, 6, 1.0, 1.0).unwrap();
            classify_symbol(&report).unwrap().advisory_tags
        };
        let one = tags(&SymbolFunction::constant(1.0));
        assert!(one.contains(&"BO".to_string()) && one.contains(&"VO".to_string()));
        let wave = tags(&SymbolFunction::parse("sin_abs").unwrap());
        assert!(wave.contains(&"BO".to_string()) && !wave.contains(&"VO".to_string()));
        let bump = tags(&SymbolFunction::indicator_inside(1.0));
        assert!(bump.contains(&"VA^p".to_string()));
        let report = oscillation_report(&field, &graph, &SymbolFunction::constant(1.0), &annuli[..3], 2, 1.0, 1.0).unwrap();
        assert!(matches!(classify_symbol(&report), Err(FockError::InsufficientData(_))));
    }
}
