use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::SymbolFunction;
use crate::error::{FockError, Result};
use crate::kernels::KernelSeries;
use crate::numerics::{integrate_annulus_split, truncation_radius, QuadOptions};

fn first_error(slot: &std::sync::Mutex<Option<FockError>>, e: FockError) {
    let mut guard = slot.lock().expect("error slot poisoned");
    if guard.is_none() {
        *guard = Some(e);
    }
}

/// `|k_z(w)|² e^{−2φ(w)}`, the probability density the Berezin transform
/// averages against.
pub fn berezin_density(series: &KernelSeries, z: Complex64, w: Complex64) -> Result<f64> {
    if z.norm() == 0.0 {
        return Ok(series.weighted_basis(series.valid_from(), w)?.norm_sqr());
    }
    let diag = series.weighted_diagonal(z)?;
    Ok(series.weighted_kernel(w, z)?.norm_sqr() / diag)
}

/// `f̃(z) = ∫ f(w) |k_z(w)|² e^{−2φ(w)} dA(w)` to relative accuracy `1e−6`
/// (measured against `∫|f| |k_z|² e^{−2φ}`).
pub fn berezin(series: &KernelSeries, f: &SymbolFunction, z: Complex64) -> Result<Complex64> {
    berezin_with(series, f, z, &QuadOptions::relative(1e-7).l1().with_budget(4000))
}

pub fn berezin_with(series: &KernelSeries, f: &SymbolFunction, z: Complex64, opts: &QuadOptions) -> Result<Complex64> {
    let diag = series.weighted_diagonal(z)?;
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(FockError::Numerical(format!("kernel diagonal {diag} at {z}")));
    }
    let failure = std::sync::Mutex::new(None);
    let density = |w: Complex64| -> f64 {
        let value = if z.norm() == 0.0 {
            series.weighted_basis(series.valid_from(), w).map(|e| e.norm_sqr())
        } else {
            series.weighted_kernel(w, z).map(|k| k.norm_sqr() / diag)
        };
        match value {
            Ok(d) => d,
            Err(e) => {
                first_error(&failure, e);
                0.0
            }
        }
    };
    let scale = diag.powf(-0.5);
    let radius = truncation_radius(&density, z, 0.05 * scale, 1e-15)?;
    if let Some(e) = failure.lock().expect("error slot poisoned").take() {
        return Err(e);
    }
    let integrand = |w: Complex64| -> Complex64 {
        let d = density(w);
        if d == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        f.eval(w) * d
    };
    let breaks = f.radial_breaks_about(z);
    let angles = |s: f64| f.angle_breaks_about(z, s);
    let est = integrate_annulus_split(&integrand, z, 0.0, radius, &breaks, &angles, opts)?;
    if let Some(e) = failure.into_inner().expect("error slot poisoned") {
        return Err(e);
    }
    if !(est.value.re.is_finite() && est.value.im.is_finite()) {
        return Err(FockError::Divergence(format!("Berezin integral of `{}` at {z} is not finite", f.name())));
    }
    Ok(est.value)
}

/// Sample layout of a [`BerezinField`].
#[derive(Debug, Clone, PartialEq)]
pub enum FieldLayout {
    /// Tensor grid, values stored with the real index running fastest.
    Grid { re: Vec<f64>, im: Vec<f64> },
    /// Samples on the positive real axis of a radial transform.
    Radial { moduli: Vec<f64> },
}

/// Samples of `f̃` with interpolation between them: bilinear on a grid,
/// linear in `|z|` for radial layouts. Queries outside the sampled region
/// use the nearest boundary value.
#[derive(Debug, Clone)]
pub struct BerezinField {
    layout: FieldLayout,
    points: Vec<Complex64>,
    values: Vec<Complex64>,
    symbol: String,
    weight: String,
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FockError::Numerical(format!("{name} axis must be non-empty and strictly increasing")));
    }
    Ok(())
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

impl BerezinField {
    fn compute(series: &KernelSeries, f: &SymbolFunction, points: &[Complex64]) -> Result<Vec<Complex64>> {
        points.par_iter().map(|&z| berezin(series, f, z)).collect()
    }

    pub fn on_grid(series: &KernelSeries, f: &SymbolFunction, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        check_axis("real", &re)?;
        check_axis("imaginary", &im)?;
        let points: Vec<Complex64> = im.iter().flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y))).collect();
        let values = Self::compute(series, f, &points)?;
        Ok(Self {
            layout: FieldLayout::Grid { re, im },
            points,
            values,
            symbol: f.name().to_string(),
            weight: series.weight().to_string(),
        })
    }

    /// Radial layout; requires a radial symbol.
    pub fn radial(series: &KernelSeries, f: &SymbolFunction, moduli: Vec<f64>) -> Result<Self> {
        if !f.is_radial() {
            return Err(FockError::SymbolSpec(format!("`{}` is not radial", f.name())));
        }
        check_axis("modulus", &moduli)?;
        if moduli[0] < 0.0 {
            return Err(FockError::Numerical("moduli must be non-negative".into()));
        }
        let points: Vec<Complex64> = moduli.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        let values = Self::compute(series, f, &points)?;
        Ok(Self {
            layout: FieldLayout::Radial { moduli },
            points,
            values,
            symbol: f.name().to_string(),
            weight: series.weight().to_string(),
        })
    }

    /// A field from precomputed samples.
    pub fn from_samples(layout: FieldLayout, values: Vec<Complex64>, symbol: &str, weight: &str) -> Result<Self> {
        let points: Vec<Complex64> = match &layout {
            FieldLayout::Grid { re, im } => {
                check_axis("real", re)?;
                check_axis("imaginary", im)?;
                im.iter().flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y))).collect()
            }
            FieldLayout::Radial { moduli } => {
                check_axis("modulus", moduli)?;
                moduli.iter().map(|&m| Complex64::new(m, 0.0)).collect()
            }
        };
        if points.len() != values.len() || values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(FockError::Numerical("field values must be finite and match the layout".into()));
        }
        Ok(Self {
            layout,
            points,
            values,
            symbol: symbol.to_string(),
            weight: weight.to_string(),
        })
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn symbol_name(&self) -> &str {
        &self.symbol
    }

    pub fn weight_name(&self) -> &str {
        &self.weight
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.layout, FieldLayout::Radial { .. })
    }

    /// The interpolant as a symbol (radial for radial layouts).
    pub fn to_symbol(&self) -> SymbolFunction {
        let field = Arc::new(self.clone());
        let name = format!("berezin({})", self.symbol);
        let real_valued = self.values.iter().all(|v| v.im == 0.0);
        let s = if real_valued {
            let f = field.clone();
            SymbolFunction::real(name, move |z| f.eval(z).re)
        } else {
            let f = field.clone();
            SymbolFunction::new(name, move |z| f.eval(z))
        };
        if self.is_radial() {
            s.assert_radial().expect("radial layouts interpolate in |z| only")
        } else {
            s
        }
    }

    /// Interpolated `f̃(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.layout {
            FieldLayout::Radial { moduli } => {
                if moduli.len() == 1 {
                    return self.values[0];
                }
                let (i, t) = bracket(moduli, z.norm());
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
            FieldLayout::Grid { re, im } => {
                let nx = re.len();
                let (i, s) = bracket(re, z.re);
                let (j, t) = bracket(im, z.im);
                let at = |a: usize, b: usize| self.values[b.min(im.len() - 1) * nx + a.min(nx - 1)];
                at(i, j) * ((1.0 - s) * (1.0 - t)) + at(i + 1, j) * (s * (1.0 - t)) + at(i, j + 1) * ((1.0 - s) * t) + at(i + 1, j + 1) * (s * t)
            }
        }
    }
}

/// Smallest `|f̃|` accepted by [`build_regularizer_symbol`].
pub const DIVISION_FLOOR: f64 = 1e-9;

/// `g = χ_{|z| ≥ R} / f̃`, with `f̃` interpolated from the field samples.
///
/// Every sample with `|z| ≥ R` must have `|f̃| ≥ 1e−9`; interpolated values
/// between samples are floored at that magnitude.
pub fn build_regularizer_symbol(bfield: &BerezinField, r: f64) -> Result<SymbolFunction> {
    let mut needed = 0;
    for (&z, &v) in bfield.points().iter().zip(bfield.values()) {
        if z.norm() >= r {
            needed += 1;
            if v.norm() < DIVISION_FLOOR {
                return Err(FockError::DivisionDomain { point: z, value: v.norm() });
            }
        }
    }
    if needed == 0 {
        return Err(FockError::InsufficientData(format!("no field samples with |z| ≥ {r}")));
    }
    let field = Arc::new(bfield.clone());
    let real_valued = bfield.values().iter().all(|v| v.im == 0.0);
    let name = format!("regularizer({}, R={r})", bfield.symbol_name());
    let eval = move |z: Complex64| -> Complex64 {
        if z.norm() < r {
            return Complex64::new(0.0, 0.0);
        }
        let v = field.eval(z);
        let m = v.norm();
        if m < DIVISION_FLOOR {
            if m == 0.0 {
                return Complex64::new(1.0 / DIVISION_FLOOR, 0.0);
            }
            return (v / m * DIVISION_FLOOR).inv();
        }
        v.inv()
    };
    let g = if real_valued {
        SymbolFunction::real(name.clone(), move |z| eval(z).re)
    } else {
        SymbolFunction::new(name.clone(), eval)
    };
    let g = g.with_jump(r);
    if bfield.is_radial() {
        g.assert_radial()
    } else {
        Ok(g)
    }
}
