use nalgebra::DMatrix;
use num_complex::Complex64;

use super::engine::{direct_entry, radial_diagonal, PolarGrid};
use crate::error::{FockError, Result};
use crate::kernels::KernelSeries;
use crate::transforms::SymbolFunction;

/// Off-diagonal magnitude below which a radial symbol's matrix is taken as
/// diagonal.
pub const RADIAL_OFF_DIAGONAL_TOL: f64 = 1e-8;

/// `N × N` section of `T_f` in the basis `e_k = z^k/‖z^k‖`, rows and columns
/// indexed from `first_degree`.
#[derive(Debug, Clone)]
pub struct ToeplitzTruncation {
    pub symbol: String,
    pub size: usize,
    pub first_degree: usize,
    /// `entries[(j, k)] = ⟨f e_k, e_j⟩`.
    pub entries: DMatrix<Complex64>,
    /// Diagonal from the radial rule, off-diagonal entries spot-checked.
    pub diagonal_only: bool,
    pub complete: bool,
    pub failed_entries: Vec<(usize, usize)>,
}

fn spot_check_pairs(n: usize) -> Vec<(usize, usize)> {
    // xorshift64 seeded from n.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15 ^ n as u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % n as u64) as usize
    };
    let want = 3.min(n * (n - 1));
    let mut out = Vec::new();
    while out.len() < want {
        let (j, k) = (next(), next());
        if j != k && !out.contains(&(j, k)) {
            out.push((j, k));
        }
    }
    out
}

/// Builds `T_{f,N}`. Radial symbols use the one-dimensional diagonal rule
/// after three off-diagonal entries are confirmed below `1e−8`; otherwise
/// every entry comes from the polar grid.
pub fn toeplitz_matrix(series: &KernelSeries, f: &SymbolFunction, n: usize) -> Result<ToeplitzTruncation> {
    let first = series.valid_from();
    if n == 0 || first + n > series.max_degree() + 1 {
        return Err(FockError::InsufficientData(format!(
            "size {n} needs degrees up to {}, the series stops at {}",
            first + n - 1,
            series.max_degree()
        )));
    }
    let last = first + n - 1;
    let mut diagonal_only = false;
    let entries = if f.is_radial() && n > 1 && radial_spot_check(series, f, first, n)? {
        diagonal_only = true;
        let d = radial_diagonal(series, f, first, last)?;
        DMatrix::from_fn(n, n, |j, k| if j == k { d[j] } else { Complex64::new(0.0, 0.0) })
    } else if f.is_radial() && n == 1 {
        diagonal_only = true;
        DMatrix::from_element(1, 1, radial_diagonal(series, f, first, last)?[0])
    } else {
        let grid = PolarGrid::new(series, f, first, last)?;
        DMatrix::from_fn(n, n, |j, k| grid.entry(first + j, first + k))
    };
    let failed_entries: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .filter(|&(j, k)| !(entries[(j, k)].re.is_finite() && entries[(j, k)].im.is_finite()))
        .collect();
    Ok(ToeplitzTruncation {
        symbol: f.name().to_string(),
        size: n,
        first_degree: first,
        entries,
        diagonal_only,
        complete: failed_entries.is_empty(),
        failed_entries,
    })
}

fn radial_spot_check(series: &KernelSeries, f: &SymbolFunction, first: usize, n: usize) -> Result<bool> {
    for (j, k) in spot_check_pairs(n) {
        if direct_entry(series, f, first + j, first + k, 64)?.norm() > RADIAL_OFF_DIAGONAL_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| FockError::Numerical("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().fold(0.0, f64::max))
}

/// `σ_min(T_{f,N})`: the minimum `|d_k|` for diagonal sections, a dense SVD
/// otherwise.
pub fn smallest_singular_value(trunc: &ToeplitzTruncation) -> Result<f64> {
    if !trunc.complete {
        return Err(FockError::Numerical(format!(
            "truncation of `{}` has {} failed entries",
            trunc.symbol,
            trunc.failed_entries.len()
        )));
    }
    if trunc.diagonal_only {
        return Ok(trunc.entries.diagonal().iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min));
    }
    Ok(singular_values(&trunc.entries)?.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightModel;
    use statrs::function::gamma::gamma_lr;

    fn gaussian(max: usize) -> KernelSeries {
        KernelSeries::basis_norms(&WeightModel::gaussian(1.0).unwrap(), max).unwrap()
    }

    #[test]
    fn constant_one_is_identity() {
        let t = toeplitz_matrix(&gaussian(40), &SymbolFunction::constant(1.0), 8).unwrap();
        assert!(t.diagonal_only);
        assert!((t.entries.clone() - DMatrix::<Complex64>::identity(8, 8)).norm() < 1e-12);
        assert!((smallest_singular_value(&t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_diagonal_is_incomplete_gamma() {
        let series = gaussian(60);
        let t = toeplitz_matrix(&series, &SymbolFunction::indicator_inside(1.0), 16).unwrap();
        for k in 0..16 {
            let exact = gamma_lr(k as f64 + 1.0, 1.0);
            assert!((t.entries[(k, k)].re - exact).abs() < 1e-10, "{k}");
        }
        assert!((t.entries[(0, 0)].re - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let sigma = smallest_singular_value(&t).unwrap();
        assert!((sigma - gamma_lr(16.0, 1.0)).abs() < 1e-16 && sigma < 1e-12);
        let out = toeplitz_matrix(&series, &SymbolFunction::indicator_outside(1.0), 9).unwrap();
        assert!(out.entries[(8, 8)].re >= 0.999);
    }

    #[test]
    fn diagonal_svd() {
        let entries = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.0),
        ]));
        let t = ToeplitzTruncation {
            symbol: "d".into(),
            size: 3,
            first_degree: 0,
            entries,
            diagonal_only: false,
            complete: true,
            failed_entries: Vec::new(),
        };
        assert!((smallest_singular_value(&t).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn real_symbol_gives_hermitian_matrix() {
        let t = toeplitz_matrix(&gaussian(60), &SymbolFunction::parse("sin_re").unwrap(), 12).unwrap();
        assert!(!t.diagonal_only);
        let diff = (t.entries.clone() - t.entries.adjoint()).camax();
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn size_beyond_series_is_rejected() {
        assert!(toeplitz_matrix(&gaussian(10), &SymbolFunction::constant(1.0), 12).is_err());
    }
}
