//! Reproducing kernel of `F²_φ` through its monomial expansion, kernel
//! `p`-norms, the Bergman projection, and empirical checks of the pointwise
//! kernel estimates.

mod series;

use num_complex::Complex64;
use serde::Serialize;

pub use series::{closed_form_log_norm, quadrature_log_norm, KernelSeries, KernelValue, NormSource};

use crate::error::{FockError, Result};
use crate::numerics::{integrate_disk, truncation_radius, QuadOptions};
use crate::weights::InducedRadiusField;

fn first_error(slot: &std::sync::Mutex<Option<FockError>>, e: FockError) {
    let mut guard = slot.lock().expect("error slot poisoned");
    if guard.is_none() {
        *guard = Some(e);
    }
}

/// Relative level below which `|K|^p` is lost in the series' rounding noise,
/// which sits near `ε` relative to the peak of `|K|` far from the diagonal.
pub fn noise_cutoff(p: f64) -> f64 {
    1e-14f64.max((1e3 * f64::EPSILON).powf(p))
}

/// `‖K(·, z)‖_{p,φ} e^{−φ(z)}`: the kernel norm with the factor `e^{φ(z)}`
/// removed, which keeps it finite for large `|z|`. Kernel values below their
/// rounding floor count as zero.
pub fn weighted_kernel_norm_p(series: &KernelSeries, z: Complex64, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(FockError::Numerical(format!("p must be positive, got {p}")));
    }
    let failure = std::sync::Mutex::new(None);
    let integrand = |w: Complex64| -> f64 {
        match series.weighted_kernel_with_floor(w, z) {
            Ok((k, floor)) if k.norm() <= floor => 0.0,
            Ok((k, _)) => k.norm().powf(p),
            Err(e) => {
                first_error(&failure, e);
                0.0
            }
        }
    };
    let diag = series.weighted_diagonal(z)?;
    let rho_guess = diag.powf(-0.5);
    let radius = truncation_radius(&integrand, z, 0.05 * rho_guess, noise_cutoff(p))?;
    // Peak times the area of D(z) sets the scale of the integral. Far rings
    // carry series rounding noise, so they are resolved to an absolute floor.
    let scale = diag.powf(p) * std::f64::consts::PI * rho_guess * rho_guess;
    let opts = QuadOptions::relative(1e-8).with_abs(1e-7 * scale).with_budget(4000);
    let est = integrate_disk(&integrand, z, radius, &[], &opts)?;
    if let Some(e) = failure.into_inner().expect("error slot poisoned") {
        return Err(e);
    }
    Ok(est.value.powf(1.0 / p))
}

/// `‖K(·, z)‖_{p,φ} = (∫ |K(w, z)|^p e^{−pφ(w)} dA(w))^{1/p}`.
pub fn kernel_norm_p(series: &KernelSeries, z: Complex64, p: f64) -> Result<f64> {
    Ok(weighted_kernel_norm_p(series, z, p)? * series.weight().phi(z)?.exp())
}

/// `P f(z) = ∫ K(z, w) f(w) e^{−2φ(w)} dA(w)` by adaptive polar quadrature
/// about the origin, truncated where `|K(z, w) f(w)| e^{−2φ(w)}` has decayed
/// below `1e−16` of its peak.
pub fn bergman_project<F>(series: &KernelSeries, f: F, z: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    bergman_project_with(series, f, z, &QuadOptions::relative(1e-11).l1().with_budget(4000))
}

pub fn bergman_project_with<F>(series: &KernelSeries, f: F, z: Complex64, opts: &QuadOptions) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let weight = series.weight();
    let failure = std::sync::Mutex::new(None);
    // K(z, w) f(w) e^{−2φ(w)} = e^{φ(z)} · [K(z, w) e^{−φ(z)−φ(w)}] · f(w) e^{−φ(w)}.
    let integrand = |w: Complex64| -> Complex64 {
        let value = series
            .weighted_kernel(z, w)
            .and_then(|k| Ok(k * f(w) * (-weight.phi(w)?).exp()));
        match value {
            Ok(v) if v.re.is_finite() && v.im.is_finite() => v,
            Ok(v) => {
                first_error(&failure, FockError::Divergence(format!("integrand {v} at {w}")));
                Complex64::new(0.0, 0.0)
            }
            Err(e) => {
                first_error(&failure, e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let origin = Complex64::new(0.0, 0.0);
    let radius = truncation_radius(|w| integrand(w).norm(), origin, 0.05, 1e-16)?;
    let radius = radius.max(z.norm() + 1.0);
    let est = integrate_disk(&integrand, origin, radius, &[z.norm()], opts)?;
    if let Some(e) = failure.into_inner().expect("error slot poisoned") {
        return Err(e);
    }
    Ok(est.value * weight.phi(z)?.exp())
}

/// Fitted constants of the pointwise kernel estimates.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct KernelBoundsReport {
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub eps_fit: f64,
    /// Rate `c` in `e^{−c x^ε}` attached to `eps_fit`.
    pub decay_rate: f64,
    pub r0_fit: f64,
    pub near_diag_ratio_range: (f64, f64),
    pub violations: usize,
    pub pairs_used: usize,
}

/// Grid of exponents searched by [`verify_kernel_bounds`].
pub fn epsilon_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.05).collect()
}

/// Fits `|K(w, z)| ρ(w) ρ(z) e^{−φ(w)−φ(z)} ≤ C e^{−c x^ε}` with
/// `x = |z − w| / ρ(z)` over the sampled pairs, and the near-diagonal range of
/// `|K(w, z)| ρ(z)² e^{−φ(w)−φ(z)}`.
///
/// With `F` the scaled kernel and `F₀` its largest sampled value, `ε` is the
/// slope of `ln ln(F₀/F)` against `ln x` over the far pairs (`x ≥ 1`),
/// rounded down to the search grid (with slack `1e−3`); the rate `c = min ln(F₀/F)/x^ε` must be
/// positive, and `C` is the envelope over all pairs, so the fitted bound has
/// no violations on the sample. Pairs whose kernel value is below its
/// rounding floor are skipped. `r0` is the largest grid radius `≤ 1` whose
/// near-diagonal ratio range stays within a factor 10.
pub fn verify_kernel_bounds(
    series: &KernelSeries,
    field: &InducedRadiusField,
    grid: &[(Complex64, Complex64)],
) -> Result<KernelBoundsReport> {
    struct Sample {
        x: f64,
        f: f64,
        g: f64,
    }
    let mut samples = Vec::with_capacity(grid.len());
    for &(z, w) in grid {
        let (k, floor) = series.weighted_kernel_with_floor(w, z)?;
        let modulus = k.norm();
        if modulus <= floor {
            continue;
        }
        let (rz, rw) = (field.rho(z)?, field.rho(w)?);
        samples.push(Sample {
            x: (z - w).norm() / rz,
            f: modulus * rz * rw,
            g: modulus * rz * rz,
        });
    }
    if !samples.iter().any(|s| s.x < 1.0) {
        return Err(FockError::InsufficientData("no near-diagonal pairs with |z − w| < ρ(z)".into()));
    }
    let f0 = samples.iter().map(|s| s.f).fold(0.0, f64::max);
    let far: Vec<&Sample> = samples.iter().filter(|s| s.x >= 1.0).collect();
    if let Some(bad) = far.iter().find(|s| s.f >= f0) {
        return Err(FockError::EstimateViolation(format!(
            "far pair at scaled distance {} attains the maximal scaled kernel value",
            bad.x
        )));
    }

    let grid_eps = epsilon_grid();
    let slope = if far.len() >= 2 {
        let lx: Vec<f64> = far.iter().map(|s| s.x.ln()).collect();
        let ly: Vec<f64> = far.iter().map(|s| (f0 / s.f).ln().ln()).collect();
        crate::numerics::linear_fit(&lx, &ly).map(|(s, _)| s).unwrap_or(2.0)
    } else {
        2.0
    };
    let rate = |eps: f64| -> f64 {
        far.iter()
            .map(|s| (f0 / s.f).ln() / s.x.powf(eps))
            .fold(f64::INFINITY, f64::min)
    };
    let mut chosen = None;
    for &eps in grid_eps.iter().rev() {
        if eps > slope + 1e-3 {
            continue;
        }
        let c = if far.is_empty() { 1.0 } else { rate(eps) };
        if c > 0.0 && c.is_finite() {
            chosen = Some((eps, c));
            break;
        }
    }
    let (eps_fit, decay_rate) = chosen.ok_or_else(|| {
        FockError::EstimateViolation(format!("no exponent on the grid admits a decaying envelope (slope {slope})"))
    })?;
    let c_fit = samples
        .iter()
        .map(|s| s.f * (decay_rate * s.x.powf(eps_fit)).exp())
        .fold(0.0, f64::max);
    let violations = samples
        .iter()
        .filter(|s| s.f > c_fit * (-decay_rate * s.x.powf(eps_fit)).exp() * (1.0 + 1e-12))
        .count();

    let range_within = |r0: f64| -> Option<(f64, f64)> {
        let near: Vec<f64> = samples.iter().filter(|s| s.x < r0).map(|s| s.g).collect();
        if near.is_empty() {
            return None;
        }
        let lo = near.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = near.iter().copied().fold(0.0, f64::max);
        Some((lo, hi))
    };
    let mut r0_fit = 0.0;
    let mut range = (f64::NAN, f64::NAN);
    for i in 1..=20 {
        let r0 = i as f64 * 0.05;
        match range_within(r0) {
            Some((lo, hi)) if hi <= 10.0 * lo => {
                r0_fit = r0;
                range = (lo, hi);
            }
            Some(_) => break,
            None => {}
        }
    }
    Ok(KernelBoundsReport {
        c_fit,
        eps_fit,
        decay_rate,
        r0_fit,
        near_diag_ratio_range: range,
        violations,
        pairs_used: samples.len(),
    })
}
