use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::numerics::ddouble::{CDd, Dd};
use crate::numerics::{integrate_with_breaks, ln_gamma, QuadOptions};
use crate::weights::{WeightKind, WeightModel};

/// Where the basis norms came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormSource {
    ClosedForm,
    Quadrature,
}

/// Squared norms `n_k = ‖z^k‖²` of the monomials in `F²_φ`, stored as
/// logarithms together with the ratios `r_k = n_k / n_{k−1}`.
///
/// For radial weights the monomials are orthogonal and
/// `K(z, w) = Σ_k (z w̄)^k / n_k`.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    weight: WeightModel,
    valid_from: usize,
    log_norms: Vec<f64>,
    ratios: Vec<f64>,
    source: NormSource,
    failed_from: Option<usize>,
}

/// Result of a certified kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub truncation_bound: f64,
    pub degree_used: usize,
}

/// `ln n_k` in closed form for the built-in weights.
pub fn closed_form_log_norm(weight: &WeightModel, k: usize) -> Option<f64> {
    let kf = k as f64;
    match *weight.kind() {
        WeightKind::Gaussian { alpha } => Some(PI.ln() + ln_gamma(kf + 1.0) - (kf + 1.0) * alpha.ln()),
        WeightKind::Power { m } => {
            let s = 2.0 * (kf + 1.0) / m;
            Some((2.0 * PI / m).ln() - s * LN_2 + ln_gamma(s))
        }
        WeightKind::FockSobolev { m } => {
            let s = kf - m + 1.0;
            (s > 0.0).then(|| PI.ln() + ln_gamma(s) - s * LN_2)
        }
        WeightKind::CustomRadial(_) => None,
    }
}

/// `n_k / n_{k−1}` in closed form, exact in floating point where possible.
fn closed_form_ratio(weight: &WeightModel, k: usize) -> Option<f64> {
    let kf = k as f64;
    match *weight.kind() {
        WeightKind::Gaussian { alpha } => Some(kf / alpha),
        WeightKind::Power { m } if m == 2.0 => Some(kf / 2.0),
        WeightKind::Power { m } => {
            let s = 2.0 * kf / m;
            Some((ln_gamma(s + 2.0 / m) - ln_gamma(s) - 2.0 / m * LN_2).exp())
        }
        WeightKind::FockSobolev { m } => Some((kf - m) / 2.0),
        WeightKind::CustomRadial(_) => None,
    }
}

/// `ln n_k` by adaptive quadrature of `π ∫ t^k e^{−2φ(√t)} dt` (the
/// substitution `t = r²`), with the integrand rescaled by its peak.
pub fn quadrature_log_norm(weight: &WeightModel, k: usize) -> Result<f64> {
    let kf = k as f64;
    let g = |t: f64| -> Result<f64> {
        if t <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(kf * t.ln() - 2.0 * weight.phi_radial(t.sqrt())?)
    };
    let t_cap = weight.r_max().powi(2);
    // Locate the peak of the log-integrand on a geometric scan.
    let mut t_hi = 1.0f64.min(t_cap);
    let mut scan: Vec<(f64, f64)> = Vec::new();
    let mut t = 1e-8f64.min(t_hi);
    let mut best = (0.0, f64::NEG_INFINITY);
    loop {
        let v = g(t)?;
        if v > best.1 {
            best = (t, v);
        }
        scan.push((t, v));
        if t >= t_cap {
            break;
        }
        if t >= t_hi {
            if v < best.1 - 60.0 {
                break;
            }
            t_hi *= 2.0;
        }
        t = (t * 1.05).min(t_cap);
    }
    let (mut t_peak, g_peak) = best;
    if scan.first().map_or(false, |p| p.0 == t_peak) {
        // The integrand is largest at the left end: the peak is the origin.
        t_peak = 0.0;
    }
    let hi = scan
        .iter()
        .find(|(t, v)| *t > t_peak && *v < g_peak - 46.0)
        .map(|p| p.0)
        .unwrap_or(t_cap);
    if hi >= t_cap && g(t_cap)? > g_peak - 32.0 {
        return Err(FockError::Divergence(format!(
            "norm integrand of degree {k} has not decayed at the end of the sampled weight"
        )));
    }
    let lo = scan
        .iter()
        .rev()
        .find(|(t, v)| *t < t_peak && *v < g_peak - 46.0)
        .map(|p| p.0)
        .unwrap_or(0.0);
    // Tabulated weights are only piecewise smooth: split at the nodes.
    let mut breaks: Vec<f64> = weight.radial_nodes().iter().map(|r| r * r).filter(|&t| t > lo && t < hi).collect();
    breaks.push(t_peak);
    let mut failure = None;
    let est = integrate_with_breaks(
        |t: f64| match g(t) {
            Ok(v) => (v - g_peak).exp(),
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        lo,
        hi,
        &breaks,
        &QuadOptions::relative(1e-12).with_budget(4000 + 4 * breaks.len()),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PI.ln() + g_peak + est.value.ln())
}

impl KernelSeries {
    /// Norms `n_k` for `k ≤ max_degree`; closed forms for the built-in
    /// weights, quadrature for tabulated ones.
    pub fn basis_norms(weight: &WeightModel, max_degree: usize) -> Result<Self> {
        let valid_from = match *weight.kind() {
            WeightKind::FockSobolev { m } => (0..).find(|&k| k as f64 > m - 1.0).unwrap_or(0),
            _ => 0,
        };
        if valid_from > max_degree {
            return Err(FockError::InsufficientData(format!(
                "no admissible monomial up to degree {max_degree} (first is {valid_from})"
            )));
        }
        let closed = closed_form_log_norm(weight, valid_from).is_some();
        let mut log_norms = vec![f64::NAN; max_degree + 1];
        let mut ratios = vec![f64::NAN; max_degree + 1];
        let mut failed_from = None;
        for k in valid_from..=max_degree {
            let entry = if closed {
                Ok(closed_form_log_norm(weight, k).expect("closed form"))
            } else {
                quadrature_log_norm(weight, k)
            };
            match entry {
                Ok(v) if v.is_finite() => log_norms[k] = v,
                _ => {
                    failed_from = Some(k);
                    break;
                }
            }
            if k > valid_from {
                ratios[k] = if closed {
                    closed_form_ratio(weight, k).expect("closed form")
                } else {
                    (log_norms[k] - log_norms[k - 1]).exp()
                };
            }
        }
        if failed_from == Some(valid_from) {
            return Err(FockError::Divergence(format!("norm of z^{valid_from} could not be computed")));
        }
        if let Some(k) = failed_from {
            log_norms.truncate(k);
            ratios.truncate(k);
        }
        Ok(Self {
            weight: weight.clone(),
            valid_from,
            log_norms,
            ratios,
            source: if closed { NormSource::ClosedForm } else { NormSource::Quadrature },
            failed_from,
        })
    }

    /// Series long enough to evaluate `K(z, w)` for `|z|, |w| ≤ radius`.
    pub fn for_radius(weight: &WeightModel, radius: f64) -> Result<Self> {
        let target = 4.0 * radius * radius;
        let degree = match *weight.kind() {
            WeightKind::CustomRadial(_) => 400,
            _ => {
                let below = |k: usize| closed_form_ratio(weight, k).map_or(false, |r| !(r >= target));
                let mut hi = 16usize;
                while below(hi) && hi < 1 << 24 {
                    hi *= 2;
                }
                let mut lo = hi / 2;
                while lo + 1 < hi {
                    let mid = (lo + hi) / 2;
                    if below(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi + 64
            }
        };
        Self::basis_norms(weight, degree)
    }

    pub fn weight(&self) -> &WeightModel {
        &self.weight
    }

    pub fn max_degree(&self) -> usize {
        self.log_norms.len() - 1
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    pub fn source(&self) -> NormSource {
        self.source
    }

    /// First degree whose norm integral failed, if the series was cut short.
    pub fn failed_from(&self) -> Option<usize> {
        self.failed_from
    }

    pub fn log_norm(&self, k: usize) -> f64 {
        self.log_norms[k]
    }

    pub fn log_norms(&self) -> &[f64] {
        &self.log_norms
    }

    /// `n_k`, or `NaN` below `valid_from`; overflows to `∞` for huge degrees.
    pub fn squared_norm(&self, k: usize) -> f64 {
        self.log_norms[k].exp()
    }

    pub fn squared_norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|v| v.exp()).collect()
    }

    fn ratio(&self, k: usize) -> f64 {
        self.ratios[k]
    }

    /// Degree where `|c|^k / n_k` is largest.
    fn peak_degree(&self, modulus: f64) -> usize {
        // Ratios are non-decreasing (log-convexity), so binary search.
        let (mut lo, mut hi) = (self.valid_from, self.max_degree());
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.ratios[mid] <= modulus {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// `K(z, w)` summed in double-double arithmetic until the certified tail
    /// bound drops below `tol · |partial sum|`.
    ///
    /// Once five consecutive term ratios `|c|/r_k` (with `c = z w̄`) are below
    /// one, the monotonicity of `r_k` makes every later ratio at most
    /// `q = |c|/r_{k+1}`, so the tail is bounded by `|t_k| q / (1 − q)`.
    pub fn kernel_eval(&self, z: Complex64, w: Complex64, tol: f64) -> Result<KernelValue> {
        let c = z * w.conj();
        let v0 = self.valid_from;
        if c == Complex64::new(0.0, 0.0) {
            let value = if v0 == 0 { (-self.log_norms[0]).exp() } else { 0.0 };
            return Ok(KernelValue {
                value: Complex64::new(value, 0.0),
                truncation_bound: 0.0,
                degree_used: v0,
            });
        }
        let modulus = c.norm();
        // Leading term c^{v0} / n_{v0}, carried as mantissa · 2^exponent.
        let mut exponent: i32 = 0;
        let lead = (v0 as f64 * modulus.ln() - self.log_norms[v0]) / LN_2;
        let shift = lead.floor() as i32;
        exponent += shift;
        let phase = Complex64::from_polar(1.0, v0 as f64 * c.arg());
        let mut term = if v0 == 0 {
            CDd {
                re: Dd::new(1.0).div_f64(self.log_norms[0].exp()).scale(2f64.powi(-shift)),
                im: Dd::new(0.0),
            }
        } else {
            CDd::from_c64(phase * 2f64.powf(lead - shift as f64))
        };
        let mut sum = term;
        let mut below_one = 0usize;
        const RESCALE: i32 = 512;
        for k in v0 + 1..=self.max_degree() {
            let r = self.ratio(k);
            term = term.mul_c64(c).div_f64(r);
            sum = sum.add(term);
            if sum.approx_norm() > 2f64.powi(RESCALE) {
                let f = 2f64.powi(-RESCALE);
                term = term.scale(f);
                sum = sum.scale(f);
                exponent += RESCALE;
            }
            below_one = if modulus < r { below_one + 1 } else { 0 };
            if below_one >= 5 && k < self.max_degree() {
                let q = modulus / self.ratio(k + 1);
                let bound = term.approx_norm() * q / (1.0 - q);
                let partial = sum.approx_norm();
                if bound <= tol * partial {
                    return Ok(KernelValue {
                        value: sum.to_c64() * ldexp(1.0, exponent),
                        truncation_bound: ldexp(bound, exponent),
                        degree_used: k,
                    });
                }
            }
        }
        let scale = ldexp(1.0, exponent);
        let last = self.max_degree();
        let q = modulus / self.ratio(last);
        Err(FockError::TruncationBudget {
            degree: last,
            partial: sum.to_c64() * scale,
            bound: if q < 1.0 { term.approx_norm() * scale * q / (1.0 - q) } else { f64::INFINITY },
        })
    }

    /// `Σ_k c^k / n_k` for `c = z w̄`, returned as `(S, L, E)` with the sum
    /// equal to `S · e^L` and `E` a rounding-error estimate for `S` (term
    /// magnitudes times recurrence length times machine epsilon). Summation
    /// runs outward from the largest term.
    fn scaled_sum(&self, c: Complex64) -> Result<(Complex64, f64, f64)> {
        let v0 = self.valid_from;
        let modulus = c.norm();
        if modulus == 0.0 {
            return Ok(if v0 == 0 {
                (Complex64::new(1.0, 0.0), -self.log_norms[0], 4.0 * f64::EPSILON)
            } else {
                (Complex64::new(0.0, 0.0), 0.0, 0.0)
            });
        }
        let kp = self.peak_degree(modulus);
        let log_peak = kp as f64 * modulus.ln() - self.log_norms[kp];
        let theta = c.arg();
        let start = Complex64::from_polar(1.0, (kp as f64 * theta) % (2.0 * PI));
        const CUT: f64 = 1e-17;
        let mut sum = start;
        let mut mag = 1.0;
        let mut term = start;
        let mut k = kp;
        loop {
            if k == self.max_degree() {
                let q = modulus / self.ratio(k);
                if term.norm() * q / (1.0 - q).max(0.0) > CUT * mag || q >= 1.0 {
                    return Err(FockError::TruncationBudget {
                        degree: k,
                        partial: sum * log_peak.exp(),
                        bound: term.norm() * log_peak.exp(),
                    });
                }
                break;
            }
            k += 1;
            term = term * c / self.ratio(k);
            let t = term.norm();
            sum += term;
            mag += t;
            if t < CUT * mag {
                break;
            }
        }
        let k_hi = k;
        let mut back = Complex64::new(0.0, 0.0);
        let mut term = start;
        let mut k = kp;
        while k > v0 {
            term = term * self.ratio(k) / c;
            k -= 1;
            let t = term.norm();
            back += term;
            mag += t;
            if t < CUT * mag {
                break;
            }
        }
        let steps = (k_hi - k + 16) as f64;
        Ok((sum + back, log_peak, 2.0 * steps * mag * f64::EPSILON))
    }

    /// `K(z, w) e^{−φ(z) − φ(w)}` in plain floating point, free of overflow
    /// for any `|z|, |w|` the series covers.
    pub fn weighted_kernel(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        Ok(self.weighted_kernel_with_floor(z, w)?.0)
    }

    /// Weighted kernel together with a rounding floor: values whose magnitude
    /// is below the floor carry no significant digits.
    pub fn weighted_kernel_with_floor(&self, z: Complex64, w: Complex64) -> Result<(Complex64, f64)> {
        let (s, l, m) = self.scaled_sum(z * w.conj())?;
        let e = l - self.weight.phi(z)? - self.weight.phi(w)?;
        if s == Complex64::new(0.0, 0.0) {
            return Ok((s, 0.0));
        }
        let scale = e.exp();
        Ok((s * scale, m * scale))
    }

    /// `K(z, w)` in plain floating point (may overflow for large arguments).
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let (s, l, _) = self.scaled_sum(z * w.conj())?;
        Ok(s * l.exp())
    }

    /// `ln K(z, z)`.
    pub fn log_diagonal(&self, z: Complex64) -> Result<f64> {
        let (s, l, _) = self.scaled_sum(Complex64::new(z.norm_sqr(), 0.0))?;
        Ok(s.re.ln() + l)
    }

    /// `K(z, z) e^{−2φ(z)}`. When the series starts above degree zero both
    /// factors degenerate at the origin; the value there is the limit, taken
    /// from the leading term at a radius where the next one is below rounding.
    pub fn weighted_diagonal(&self, z: Complex64) -> Result<f64> {
        if z.norm() == 0.0 && self.valid_from > 0 {
            let r: f64 = 1e-9;
            let k = self.valid_from as f64;
            return Ok((2.0 * k * r.ln() - self.log_norms[self.valid_from] - 2.0 * self.weight.phi_radial(r)?).exp());
        }
        Ok((self.log_diagonal(z)? - 2.0 * self.weight.phi(z)?).exp())
    }

    /// Orthonormal basis function `e_k(z) = z^k / √n_k` times `e^{−φ(z)}`.
    pub fn weighted_basis(&self, k: usize, z: Complex64) -> Result<Complex64> {
        if k < self.valid_from || k > self.max_degree() {
            return Err(FockError::InsufficientData(format!("basis index {k} outside the series")));
        }
        let r = z.norm();
        if r == 0.0 {
            return Ok(if k == 0 {
                Complex64::new((-0.5 * self.log_norms[0] - self.weight.phi_radial(0.0)?).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        let log_mag = k as f64 * r.ln() - 0.5 * self.log_norms[k] - self.weight.phi_radial(r)?;
        Ok(Complex64::from_polar(log_mag.exp(), k as f64 * z.arg()))
    }
}

/// `x · 2^e` without intermediate overflow.
fn ldexp(x: f64, e: i32) -> f64 {
    let half = e / 2;
    x * 2f64.powi(half) * 2f64.powi(e - half)
}
