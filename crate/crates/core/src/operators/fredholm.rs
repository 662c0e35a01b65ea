use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::toeplitz::{smallest_singular_value, toeplitz_matrix};
use crate::error::{FockError, Result};
use crate::kernels::KernelSeries;
use crate::transforms::{annulus_samples, berezin, SymbolFunction};

/// Decision thresholds of [`fredholm_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FredholmThresholds {
    pub c_low: f64,
    pub stabilization: f64,
    /// Berezin samples per annulus.
    pub angular_samples: usize,
}

impl Default for FredholmThresholds {
    fn default() -> Self {
        Self {
            c_low: 0.1,
            stabilization: 0.1,
            angular_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Fredholm,
    NotFredholm,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Fredholm => "fredholm",
            Verdict::NotFredholm => "not_fredholm",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FredholmProbeReport {
    pub symbol: String,
    pub weight: String,
    pub sizes: Vec<usize>,
    pub sigma_min: Vec<f64>,
    pub annuli: Vec<(f64, f64)>,
    pub berezin_inf: Vec<f64>,
    pub berezin_sup: Vec<f64>,
    pub thresholds: FredholmThresholds,
    pub verdict: Verdict,
    /// How far the deciding quantities clear their thresholds: the smallest
    /// ratio among the fredholm conditions, or the largest among the
    /// not_fredholm conditions; 0 when inconclusive.
    pub margin: f64,
    pub assumptions: String,
}

/// Sup values count as bounded when non-increasing or when the last is at
/// most this multiple of the first.
pub const SUP_GROWTH_LIMIT: f64 = 4.0;

struct Decision {
    verdict: Verdict,
    margin: f64,
}

fn decide(sigma: &[f64], inf: &[f64], sup: &[f64], t: &FredholmThresholds) -> Decision {
    let inf_outer = *inf.last().expect("annuli checked");
    let s_last = *sigma.last().expect("sizes checked");
    let s_prev = sigma[sigma.len() - 2];
    let sups_finite = sup.iter().all(|s| s.is_finite());
    let non_increasing = sup.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let bounded = sups_finite && (non_increasing || sup[sup.len() - 1] <= SUP_GROWTH_LIMIT * sup[0]);
    let delta = (s_last - s_prev).abs();

    let a = inf_outer / t.c_low;
    let c1 = s_last / (0.5 * t.c_low);
    let c2 = if delta == 0.0 { f64::INFINITY } else { t.stabilization * s_last / delta };
    if a >= 1.0 && bounded && c1 >= 1.0 && c2 >= 1.0 {
        return Decision {
            verdict: Verdict::Fredholm,
            margin: a.min(c1).min(c2),
        };
    }
    let n1 = if inf_outer == 0.0 { f64::INFINITY } else { 0.25 * t.c_low / inf_outer };
    let n2 = if s_last == 0.0 { f64::INFINITY } else { t.stabilization * t.c_low / s_last };
    if n1 > 1.0 || n2 > 1.0 {
        return Decision {
            verdict: Verdict::NotFredholm,
            margin: n1.max(n2),
        };
    }
    Decision {
        verdict: Verdict::Inconclusive,
        margin: 0.0,
    }
}

/// Finite-section test of the Fredholm criterion: `σ_min(T_{f,N})` across
/// sizes and the range of `|f̃|` on annuli.
///
/// The verdict is `fredholm` when `inf |f̃| ≥ c_low` on the outermost
/// annulus, the annulus suprema of `|f̃|` stay bounded, and `σ_min` has
/// stabilized at or above `c_low/2`; it is `not_fredholm` when the outer
/// infimum is below `c_low/4` or `σ_min(N_last) < stabilization·c_low`.
pub fn fredholm_probe(
    series: &KernelSeries,
    f: &SymbolFunction,
    sizes: &[usize],
    annuli: &[(f64, f64)],
    thresholds: &FredholmThresholds,
) -> Result<FredholmProbeReport> {
    if sizes.len() < 3 || annuli.len() < 3 {
        return Err(FockError::InsufficientData(format!(
            "the probe needs at least 3 sizes and 3 annuli, got {} and {}",
            sizes.len(),
            annuli.len()
        )));
    }
    if !(thresholds.c_low > 0.0) || !(thresholds.stabilization > 0.0) || thresholds.angular_samples == 0 {
        return Err(FockError::Numerical("thresholds must be positive".into()));
    }
    let sigma_min = sizes
        .iter()
        .map(|&n| smallest_singular_value(&toeplitz_matrix(series, f, n)?))
        .collect::<Result<Vec<f64>>>()?;
    let mut berezin_inf = Vec::new();
    let mut berezin_sup = Vec::new();
    for &(a, b) in annuli {
        let points = annulus_samples(a, b, thresholds.angular_samples);
        let values: Vec<f64> = points
            .par_iter()
            .map(|&z| berezin(series, f, z).map(|v: Complex64| v.norm()))
            .collect::<Result<_>>()?;
        berezin_inf.push(values.iter().copied().fold(f64::INFINITY, f64::min));
        berezin_sup.push(values.iter().copied().fold(0.0, f64::max));
    }
    let decision = decide(&sigma_min, &berezin_inf, &berezin_sup, thresholds);
    let assumptions = format!(
        "finite sections N = {sizes:?} in the monomial basis from degree {}; liminf/limsup of |f̃| replaced by min/max over {} samples per annulus; \
         annulus sups count as bounded when non-increasing or growing at most {SUP_GROWTH_LIMIT}x",
        series.valid_from(),
        thresholds.angular_samples
    );
    Ok(FredholmProbeReport {
        symbol: f.name().to_string(),
        weight: series.weight().to_string(),
        sizes: sizes.to_vec(),
        sigma_min,
        annuli: annuli.to_vec(),
        berezin_inf,
        berezin_sup,
        thresholds: *thresholds,
        verdict: decision.verdict,
        margin: decision.margin,
        assumptions,
    })
}
