use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{FockError, Result};
use crate::kernels::KernelSeries;
use crate::transforms::SymbolFunction;

/// 16-point Gauss–Legendre nodes and weights on `[−1, 1]` (positive half).
const GL_X: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// Levels of geometric refinement toward `r = 0`.
const ORIGIN_LEVELS: i32 = 10;
/// Log-magnitude drop that ends the radial range.
const TAIL_DROP: f64 = 60.0;

/// Radial quadrature nodes for `∫_0^∞ g(r) r^{j+k+1} e^{−2φ(r)} dr` over a
/// range of degrees: composite Gauss–Legendre panels whose widths follow
/// the local scale `Δφ^{−1/2}`, graded geometrically toward the origin and
/// split at the symbol's jump radii.
#[derive(Debug, Clone)]
pub struct RadialRule {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub log_r: Vec<f64>,
    pub two_phi: Vec<f64>,
}

fn push_panel(rule: &mut (Vec<f64>, Vec<f64>), a: f64, b: f64) {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    for i in (0..8).rev() {
        rule.0.push(mid - half * GL_X[i]);
        rule.1.push(half * GL_W[i]);
    }
    for i in 0..8 {
        rule.0.push(mid + half * GL_X[i]);
        rule.1.push(half * GL_W[i]);
    }
}

impl RadialRule {
    /// Nodes covering degrees up to `max_degree` with panel widths scaled by
    /// `refine` (1 = default, 0.5 = twice as many panels).
    pub fn new(series: &KernelSeries, max_degree: usize, breaks: &[f64], refine: f64) -> Result<Self> {
        let weight = series.weight();
        let width = |r: f64| -> Result<f64> {
            let lap = weight.laplacian_radial(r)?;
            Ok(refine * (0.5 / lap.max(1e-12).sqrt()).clamp(1e-3, 0.25))
        };
        // Upper end: beyond the peak of the highest-degree integrand, where
        // it has dropped by TAIL_DROP in log scale.
        let k = max_degree as f64;
        let log_mass = |r: f64| -> Result<f64> { Ok((2.0 * k + 1.0) * r.ln() - 2.0 * weight.phi_radial(r)?) };
        let mut r = 1e-3;
        let mut best = log_mass(r)?;
        let mut prev = best;
        loop {
            r += width(r)?;
            let v = log_mass(r)?;
            if !v.is_finite() {
                return Err(FockError::Numerical(format!("log density not finite at r = {r}")));
            }
            best = best.max(v);
            if v < best - TAIL_DROP && v < prev {
                break;
            }
            prev = v;
            if r > 1e6 {
                return Err(FockError::Divergence("radial integrand does not decay".into()));
            }
        }
        let r_max = r;
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < r_max).collect();
        cuts.sort_by(f64::total_cmp);
        let mut nodes = (Vec::new(), Vec::new());
        let h0 = width(0.0)?.min(r_max);
        for level in (1..=ORIGIN_LEVELS).rev() {
            let (a, b) = (h0 * 2f64.powi(-level), h0 * 2f64.powi(1 - level));
            let mut lo = a;
            for &c in cuts.iter().filter(|&&c| c > a && c < b) {
                push_panel(&mut nodes, lo, c);
                lo = c;
            }
            push_panel(&mut nodes, lo, b);
        }
        push_panel(&mut nodes, 0.0, h0 * 2f64.powi(-ORIGIN_LEVELS));
        let mut lo = h0;
        let mut next_cut = cuts.iter().copied().filter(|&c| c > h0).peekable();
        while lo < r_max {
            let mut hi = (lo + width(lo)?).min(r_max);
            if let Some(&c) = next_cut.peek() {
                if c <= hi {
                    hi = c;
                    next_cut.next();
                }
            }
            if hi > lo {
                push_panel(&mut nodes, lo, hi);
            }
            lo = hi;
        }
        let (r, w) = nodes;
        let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let two_phi = r.iter().map(|&x| Ok(2.0 * weight.phi_radial(x)?)).collect::<Result<Vec<f64>>>()?;
        Ok(Self { r, w, log_r, two_phi })
    }

    /// `ln` of the Gram factor `r^{j+k+1} e^{−2φ(r)} / √(n_j n_k)` at node `i`.
    #[inline]
    fn log_factor(&self, series: &KernelSeries, i: usize, j: usize, k: usize) -> f64 {
        (j + k + 1) as f64 * self.log_r[i] - self.two_phi[i] - 0.5 * (series.log_norm(j) + series.log_norm(k))
    }

    /// Largest `|2π ∫ r^{2k+1} e^{−2φ} dr / n_k − 1|` for degrees `from..=to`.
    pub fn normalization_defect(&self, series: &KernelSeries, from: usize, to: usize) -> f64 {
        (from..=to)
            .map(|k| {
                let s: f64 = (0..self.r.len()).map(|i| self.w[i] * self.log_factor(series, i, k, k).exp()).sum();
                (2.0 * PI * s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Radial rule refined until the basis normalization is reproduced to `1e−11`.
pub fn certified_rule(series: &KernelSeries, first: usize, last: usize, breaks: &[f64]) -> Result<RadialRule> {
    let mut refine = 1.0;
    let mut defect = f64::INFINITY;
    for _ in 0..4 {
        let rule = RadialRule::new(series, last, breaks, refine)?;
        defect = rule.normalization_defect(series, first, last);
        if defect <= 1e-11 {
            return Ok(rule);
        }
        refine *= 0.5;
    }
    Err(FockError::Convergence { best: defect, error: defect })
}

/// Gram-type integrals `∫ f(w) e_k(w) conj(e_j(w)) e^{−2φ(w)} dA(w)` on a
/// polar grid: Gauss–Legendre in the radius, FFT in the angle.
pub struct PolarGrid<'a> {
    series: &'a KernelSeries,
    rule: RadialRule,
    max_shift: usize,
    /// `angular[i][m + max_shift] = ∫ f(r_i e^{iθ}) e^{imθ} dθ`.
    angular: Vec<Vec<Complex64>>,
    pub n_theta: usize,
}

impl<'a> PolarGrid<'a> {
    /// Prepares entries with basis degrees in `first..=last`.
    pub fn new(series: &'a KernelSeries, f: &SymbolFunction, first: usize, last: usize) -> Result<Self> {
        if last > series.max_degree() || first < series.valid_from() || first > last {
            return Err(FockError::InsufficientData(format!(
                "degrees {first}..={last} outside the series range {}..={}",
                series.valid_from(),
                series.max_degree()
            )));
        }
        let rule = certified_rule(series, first, last, f.jump_circles())?;
        let max_shift = last - first;
        let n_theta = (4 * (max_shift + 1)).max(128).next_power_of_two();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n_theta);
        let angular: Vec<Vec<Complex64>> = rule
            .r
            .par_iter()
            .map(|&r| {
                let mut buf: Vec<Complex64> = (0..n_theta)
                    .map(|l| f.eval(Complex64::from_polar(r, 2.0 * PI * l as f64 / n_theta as f64)))
                    .collect();
                fft.process(&mut buf);
                let scale = 2.0 * PI / n_theta as f64;
                (0..=2 * max_shift)
                    .map(|idx| {
                        let m = idx as i64 - max_shift as i64;
                        buf[((n_theta as i64 - m).rem_euclid(n_theta as i64)) as usize] * scale
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            series,
            rule,
            max_shift,
            angular,
            n_theta,
        })
    }

    /// `⟨f e_k, e_j⟩` for basis degrees `j`, `k`.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        let m = k as i64 - j as i64;
        debug_assert!(m.unsigned_abs() as usize <= self.max_shift);
        let idx = (m + self.max_shift as i64) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.rule.r.len() {
            let g = self.rule.log_factor(self.series, i, j, k);
            if g < -745.0 {
                continue;
            }
            acc += self.angular[i][idx] * (self.rule.w[i] * g.exp());
        }
        acc
    }

    pub fn rule(&self) -> &RadialRule {
        &self.rule
    }
}

/// Diagonal entries `2π ∫ f(r) r^{2k+1} e^{−2φ(r)} dr / n_k` of a radial symbol.
pub fn radial_diagonal(series: &KernelSeries, f: &SymbolFunction, first: usize, last: usize) -> Result<Vec<Complex64>> {
    let rule = certified_rule(series, first, last, f.jump_circles())?;
    let values: Vec<Complex64> = rule.r.iter().map(|&r| f.eval(Complex64::new(r, 0.0))).collect();
    Ok((first..=last)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..rule.r.len() {
                let g = rule.log_factor(series, i, k, k);
                if g < -745.0 {
                    continue;
                }
                acc += values[i] * (rule.w[i] * g.exp());
            }
            acc * (2.0 * PI)
        })
        .collect())
}

/// A single entry `⟨f e_k, e_j⟩` by direct angular sums on `n_theta`
/// points; used to spot-check radial symbols.
pub fn direct_entry(series: &KernelSeries, f: &SymbolFunction, j: usize, k: usize, n_theta: usize) -> Result<Complex64> {
    let rule = certified_rule(series, j.min(k), j.max(k), f.jump_circles())?;
    let m = k as f64 - j as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..rule.r.len() {
        let g = rule.log_factor(series, i, j, k);
        if g < -745.0 {
            continue;
        }
        let mut ring = Complex64::new(0.0, 0.0);
        for l in 0..n_theta {
            let theta = 2.0 * PI * l as f64 / n_theta as f64;
            ring += f.eval(Complex64::from_polar(rule.r[i], theta)) * Complex64::from_polar(1.0, m * theta);
        }
        acc += ring * (2.0 * PI / n_theta as f64) * (rule.w[i] * g.exp());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightModel;

    #[test]
    fn rule_reproduces_norms() {
        for weight in [
            WeightModel::gaussian(1.0).unwrap(),
            WeightModel::power(4.0).unwrap(),
            WeightModel::power(1.3).unwrap(),
            WeightModel::fock_sobolev(1.5).unwrap(),
        ] {
            let series = KernelSeries::basis_norms(&weight, 100).unwrap();
            let rule = certified_rule(&series, series.valid_from(), 80, &[]).unwrap();
            assert!(rule.normalization_defect(&series, series.valid_from(), 80) < 1e-11, "{weight}");
        }
    }

    #[test]
    fn constant_symbol_gives_identity_block() {
        let series = KernelSeries::basis_norms(&WeightModel::power(2.0).unwrap(), 40).unwrap();
        let grid = PolarGrid::new(&series, &SymbolFunction::constant(1.0), 0, 12).unwrap();
        for j in 0..=12 {
            for k in 0..=12 {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((grid.entry(j, k) - Complex64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn shift_symbol_moves_one_degree() {
        // ⟨z e_k, e_{k+1}⟩ = √(n_{k+1}/n_k) for the Gaussian: √(k+1).
        let series = KernelSeries::basis_norms(&WeightModel::gaussian(1.0).unwrap(), 40).unwrap();
        let grid = PolarGrid::new(&series, &SymbolFunction::parse("z").unwrap(), 0, 10).unwrap();
        for k in 0..10 {
            assert!((grid.entry(k + 1, k).re - ((k + 1) as f64).sqrt()).abs() < 1e-10);
            assert!(grid.entry(k, k + 1).norm() < 1e-10);
        }
    }
}
