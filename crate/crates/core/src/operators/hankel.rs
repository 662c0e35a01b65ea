use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::engine::{PolarGrid, RadialRule};
use super::toeplitz::{spectral_norm, toeplitz_matrix};
use crate::error::{FockError, Result};
use crate::geometry::MetricGraph;
use crate::kernels::{bergman_project, KernelSeries};
use crate::transforms::{build_regularizer_symbol, omega_oscillation, BerezinField, SymbolFunction};

/// `H_f g(z) = f(z) g(z) − P(fg)(z)`.
pub fn hankel_apply<G>(series: &KernelSeries, f: &SymbolFunction, g: G, z: Complex64) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    let projected = bergman_project(series, |w| f.eval(w) * g(w), z)?;
    Ok(f.eval(z) * g(z) - projected)
}

/// A holomorphic test function given by its coefficients in the basis
/// `e_k`, starting at the series' first admissible degree.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub label: String,
    pub coefficients: Vec<Complex64>,
}

/// `e_k(w) e^{−φ(w)}` for `k = first .. first + count`.
fn weighted_basis_row(series: &KernelSeries, w: Complex64, first: usize, count: usize) -> Result<Vec<Complex64>> {
    let r = w.norm();
    if r == 0.0 {
        return (first..first + count).map(|k| series.weighted_basis(k, w)).collect();
    }
    let (ln_r, theta, phi) = (r.ln(), w.arg(), series.weight().phi_radial(r)?);
    Ok((first..first + count)
        .map(|k| {
            let log_mag = k as f64 * ln_r - 0.5 * series.log_norm(k) - phi;
            Complex64::from_polar(log_mag.exp(), k as f64 * theta)
        })
        .collect())
}

impl TestFunction {
    /// The reproducing kernel at `z` (unnormalized; probe ratios do not
    /// depend on the scale), truncated where the remaining coefficients
    /// carry less than `1e−15` of `K(z, z)`.
    pub fn kernel_at(series: &KernelSeries, z: Complex64) -> Result<Self> {
        let first = series.valid_from();
        let count = series.max_degree() + 1 - first;
        let row = weighted_basis_row(series, z, first, count)?;
        let total: f64 = row.iter().map(|c| c.norm_sqr()).sum();
        let mut acc = 0.0;
        let mut len = count;
        for (i, c) in row.iter().enumerate() {
            acc += c.norm_sqr();
            if total - acc <= 1e-15 * total {
                len = i + 1;
                break;
            }
        }
        if len == count && total - acc > 1e-15 * total {
            return Err(FockError::InsufficientData(format!("series too short for the kernel at {z}")));
        }
        let scale = total.sqrt();
        Ok(Self {
            label: format!("k({:.4},{:.4})", z.re, z.im),
            coefficients: row[..len].iter().map(|c| c.conj() / scale).collect(),
        })
    }

    /// `e_k`.
    pub fn monomial(series: &KernelSeries, k: usize) -> Result<Self> {
        let first = series.valid_from();
        if k < first {
            return Err(FockError::InsufficientData(format!("degree {k} is below the first admissible degree {first}")));
        }
        let mut coefficients = vec![Complex64::new(0.0, 0.0); k - first + 1];
        coefficients[k - first] = Complex64::new(1.0, 0.0);
        Ok(Self {
            label: format!("e_{k}"),
            coefficients,
        })
    }
}

/// Centres of the default test family: the origin, five points on `|z| = 1`
/// and six on `|z| = 2`.
pub fn default_family_points() -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    pts.extend((0..5).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 5.0)));
    pts.extend((0..6).map(|j| Complex64::from_polar(2.0, 2.0 * PI * j as f64 / 6.0 + PI / 6.0)));
    pts
}

pub fn kernel_family(series: &KernelSeries, points: &[Complex64]) -> Result<Vec<TestFunction>> {
    points.iter().map(|&z| TestFunction::kernel_at(series, z)).collect()
}

/// The 12 normalized kernels at [`default_family_points`].
pub fn default_test_family(series: &KernelSeries) -> Result<Vec<TestFunction>> {
    kernel_family(series, &default_family_points())
}

#[derive(Debug, Clone, Serialize)]
pub struct HankelProbe {
    pub sup_ratio: f64,
    pub bo_seminorm: f64,
    pub ratios: Vec<f64>,
    pub p: f64,
    /// Size of the section used to represent `P(fg)`.
    pub projection_size: usize,
}

/// `‖H_f g‖_{p,φ} / ‖g‖_{p,φ}` over the family, with `P(fg)` expanded in
/// the first `M` basis functions (`M = max(2L, L + 48)` for coefficient
/// length `L`), both norms by polar quadrature; and the sampled seminorm
/// `sup ω(f)(z)` (with `r = 1`) over `bo_samples`.
pub fn hankel_norm_probe(
    series: &KernelSeries,
    graph: &MetricGraph,
    f: &SymbolFunction,
    p: f64,
    family: &[TestFunction],
    bo_samples: &[Complex64],
) -> Result<HankelProbe> {
    if !(p > 0.0) {
        return Err(FockError::Numerical(format!("p must be positive, got {p}")));
    }
    if family.is_empty() {
        return Err(FockError::InsufficientData("empty test family".into()));
    }
    let first = series.valid_from();
    let len = family.iter().map(|t| t.coefficients.len()).max().unwrap_or(1);
    let size = (2 * len).max(len + 48);
    if first + size > series.max_degree() + 1 {
        return Err(FockError::InsufficientData(format!("the probe needs degrees up to {}", first + size - 1)));
    }
    let grid = PolarGrid::new(series, f, first, first + size - 1)?;
    let projections: Vec<Vec<Complex64>> = family
        .iter()
        .map(|t| {
            (0..size)
                .map(|j| {
                    t.coefficients
                        .iter()
                        .enumerate()
                        .map(|(l, c)| grid.entry(first + j, first + l) * c)
                        .sum()
                })
                .collect()
        })
        .collect();
    let rule = RadialRule::new(series, first + size - 1, f.jump_circles(), 1.0)?;
    let n_theta = grid.n_theta.max((first + size).next_power_of_two());
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_theta);
    // Per radial node: ring sums of |f g − P(fg)|^p e^{−pφ} and |g|^p e^{−pφ}.
    // On a ring, Σ a_k e_k e^{−φ} is a trigonometric polynomial in θ, so its
    // values at the n_θ equispaced angles come from one inverse FFT.
    let rings: Vec<Vec<(f64, f64)>> = (0..rule.r.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64)>> {
            let mags: Vec<f64> = weighted_basis_row(series, Complex64::new(rule.r[i], 0.0), first, size)?
                .iter()
                .map(|c| c.re)
                .collect();
            let fw: Vec<Complex64> = (0..n_theta)
                .map(|l| f.eval(Complex64::from_polar(rule.r[i], 2.0 * PI * l as f64 / n_theta as f64)))
                .collect();
            let ring = |coefficients: &[Complex64]| {
                let mut buf = vec![Complex64::new(0.0, 0.0); n_theta];
                for (k, (c, m)) in coefficients.iter().zip(&mags).enumerate() {
                    buf[first + k] = c * m;
                }
                ifft.process(&mut buf);
                buf
            };
            let pow = |x: Complex64| if p == 2.0 { x.norm_sqr() } else { x.norm().powf(p) };
            let mut sums = vec![(0.0, 0.0); family.len()];
            for (t, test) in family.iter().enumerate() {
                let g = ring(&test.coefficients);
                let b = ring(&projections[t]);
                for l in 0..n_theta {
                    sums[t].0 += pow(fw[l] * g[l] - b[l]);
                    sums[t].1 += pow(g[l]);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let dtheta = 2.0 * PI / n_theta as f64;
    let ratios: Vec<f64> = (0..family.len())
        .map(|t| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..rule.r.len() {
                let jac = rule.w[i] * rule.r[i] * dtheta;
                num += rings[i][t].0 * jac;
                den += rings[i][t].1 * jac;
            }
            (num / den).powf(1.0 / p)
        })
        .collect();
    let bo_seminorm = bo_samples
        .par_iter()
        .map(|&z| omega_oscillation(graph, f, z, 1.0).map(|o| o.value))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(HankelProbe {
        sup_ratio: ratios.iter().copied().fold(0.0, f64::max),
        bo_seminorm,
        ratios,
        p,
        projection_size: size,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RegularizerResidual {
    pub size: usize,
    pub corner_norm: f64,
    pub tail_norm: f64,
}

/// `M = T_{f̃,N} T_{g,N} − I_N` with `g` the regularizer symbol of the field;
/// spectral norms of the leading `⌈N/2⌉` block and the trailing `⌈N/4⌉`
/// block.
pub fn regularizer_residual(series: &KernelSeries, bfield: &BerezinField, r: f64, n: usize) -> Result<RegularizerResidual> {
    let g = build_regularizer_symbol(bfield, r)?;
    let t_hat = toeplitz_matrix(series, &bfield.to_symbol(), n)?;
    let t_g = toeplitz_matrix(series, &g, n)?;
    let m = &t_hat.entries * &t_g.entries - DMatrix::<Complex64>::identity(n, n);
    let corner = n.div_ceil(2);
    let tail = n.div_ceil(4);
    Ok(RegularizerResidual {
        size: n,
        corner_norm: spectral_norm(&m.view((0, 0), (corner, corner)).into_owned())?,
        tail_norm: spectral_norm(&m.view((n - tail, n - tail), (tail, tail)).into_owned())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Connectivity;
    use crate::transforms::FieldLayout;
    use crate::weights::{InducedRadiusField, WeightModel};
    use statrs::function::gamma::gamma_lr;

    fn gaussian(max: usize) -> KernelSeries {
        KernelSeries::basis_norms(&WeightModel::gaussian(1.0).unwrap(), max).unwrap()
    }

    #[test]
    fn hankel_of_holomorphic_symbol_vanishes() {
        let series = KernelSeries::for_radius(&WeightModel::gaussian(1.0).unwrap(), 12.0).unwrap();
        let z = Complex64::new(1.0, 0.0);
        let f = SymbolFunction::parse("z").unwrap();
        assert!(hankel_apply(&series, &f, |_| Complex64::new(1.0, 0.0), z).unwrap().norm() < 1e-5);
        let c = SymbolFunction::constant(2.0);
        assert!(hankel_apply(&series, &c, |w| w * w, z).unwrap().norm() < 1e-6);
        let conj = SymbolFunction::parse("conj_z").unwrap();
        let z = Complex64::new(0.4, -0.7);
        assert!((hankel_apply(&series, &conj, |_| Complex64::new(1.0, 0.0), z).unwrap() - z.conj()).norm() < 1e-6);
    }

    #[test]
    fn kernel_test_function_reproduces_kernel() {
        let series = gaussian(120);
        let z = Complex64::new(1.0, 1.0);
        let t = TestFunction::kernel_at(&series, z).unwrap();
        assert!(t.coefficients.len() < 60);
        let norm: f64 = t.coefficients.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-13);
    }

    #[test]
    fn constant_symbol_has_zero_ratio() {
        let series = gaussian(200);
        let field = InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap());
        let graph = MetricGraph::new(&field, 3.0, 0.1, Connectivity::Sixteen).unwrap();
        let family = default_test_family(&series).unwrap();
        let probe = hankel_norm_probe(&series, &graph, &SymbolFunction::constant(1.0), 2.0, &family, &[Complex64::new(0.0, 0.0)]).unwrap();
        assert!(probe.sup_ratio < 1e-6, "{}", probe.sup_ratio);
        assert_eq!(probe.bo_seminorm, 0.0);
    }

    #[test]
    fn conj_z_ratio_matches_closed_form() {
        // H_{w̄} e_k = w̄ e_k − P(w̄ e_k); for the Gaussian ‖H_{w̄} e_k‖² = 1.
        let series = gaussian(200);
        let field = InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap());
        let graph = MetricGraph::new(&field, 3.0, 0.1, Connectivity::Sixteen).unwrap();
        let family = vec![TestFunction::monomial(&series, 0).unwrap(), TestFunction::monomial(&series, 5).unwrap()];
        let probe = hankel_norm_probe(&series, &graph, &SymbolFunction::parse("conj_z").unwrap(), 2.0, &family, &[]).unwrap();
        for r in &probe.ratios {
            assert!((r - 1.0).abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn residual_of_constant_two() {
        // T_{2} T_{χ/2} − I is diagonal with entries −P(k + 1, 1).
        let series = gaussian(200);
        let layout = FieldLayout::Radial { moduli: vec![0.0, 5.0, 20.0] };
        let field = BerezinField::from_samples(layout, vec![Complex64::new(2.0, 0.0); 3], "const:2", "gaussian").unwrap();
        for n in [2usize, 16, 64] {
            let res = regularizer_residual(&series, &field, 1.0, n).unwrap();
            assert!((res.corner_norm - (1.0 - (-1.0f64).exp())).abs() < 1e-10, "{n}");
            let k = n - n.div_ceil(4);
            assert!((res.tail_norm - gamma_lr(k as f64 + 1.0, 1.0)).abs() < 1e-10, "{n}");
        }
    }
}
