use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use super::WeightModel;
use crate::error::{FockError, Result};
use crate::numerics::linear_fit;

const CACHE_QUANTUM: f64 = 1e-6;
const BISECTION_WIDTH: f64 = 1e-8;
const MAX_BRACKET_STEPS: usize = 200;

struct FieldInner {
    weight: WeightModel,
    solver_tolerance: f64,
    cache: RwLock<HashMap<i64, f64>>,
}

/// Cached evaluator of the induced radius `ρ(z)`, the radius with
/// `ν(D(z, ρ(z))) = 1`.
///
/// Cloning is cheap and shares the cache. Since every supported weight is
/// radial, the cache is keyed by `|z|` snapped to a `1e-6` grid and the radius
/// is solved at the snapped modulus, so repeated queries are bit-identical.
#[derive(Clone)]
pub struct InducedRadiusField {
    inner: Arc<FieldInner>,
}

impl std::fmt::Debug for InducedRadiusField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InducedRadiusField")
            .field("weight", &self.inner.weight)
            .field("solver_tolerance", &self.inner.solver_tolerance)
            .field("cached", &self.cache_len())
            .finish()
    }
}

impl InducedRadiusField {
    pub fn new(weight: WeightModel) -> Self {
        Self::with_tolerance(weight, 1e-7)
    }

    pub fn with_tolerance(weight: WeightModel, solver_tolerance: f64) -> Self {
        Self {
            inner: Arc::new(FieldInner {
                weight,
                solver_tolerance,
                cache: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn weight(&self) -> &WeightModel {
        &self.inner.weight
    }

    pub fn solver_tolerance(&self) -> f64 {
        self.inner.solver_tolerance
    }

    pub fn cache_len(&self) -> usize {
        self.inner.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// Snapshot of the cache as `(modulus, ρ)` pairs sorted by modulus.
    pub fn cached_values(&self) -> Vec<(f64, f64)> {
        let cache = self.inner.cache.read().expect("rho cache poisoned");
        let mut out: Vec<(f64, f64)> = cache.iter().map(|(&k, &v)| (k as f64 * CACHE_QUANTUM, v)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    pub fn rho(&self, z: Complex64) -> Result<f64> {
        self.rho_at_modulus(z.norm())
    }

    pub fn rho_at_modulus(&self, modulus: f64) -> Result<f64> {
        if !modulus.is_finite() {
            return Err(FockError::OutOfDomain {
                point: Complex64::new(modulus, 0.0),
                detail: "non-finite point".into(),
            });
        }
        let key = (modulus / CACHE_QUANTUM).round() as i64;
        if let Some(&v) = self.inner.cache.read().expect("rho cache poisoned").get(&key) {
            return Ok(v);
        }
        let value = self.solve(key as f64 * CACHE_QUANTUM)?;
        self.inner.cache.write().expect("rho cache poisoned").insert(key, value);
        Ok(value)
    }

    fn solve(&self, a: f64) -> Result<f64> {
        let weight = &self.inner.weight;
        let tol = self.inner.solver_tolerance;
        let z = Complex64::new(a, 0.0);
        let mu = |r: f64| weight.measure_of_disk(z, r);

        let density = weight.laplacian_radial(a).unwrap_or(0.0);
        let mut guess = 1.0 / (PI * density).sqrt();
        if !guess.is_finite() || guess <= 0.0 {
            guess = 1.0;
        }
        guess = guess.min(0.5 * (weight.r_max() - a)).max(CACHE_QUANTUM);

        let unresolvable = |detail: String| FockError::UnresolvableRadius { point: z, detail };
        let (mut lo, mut hi);
        let m0 = mu(guess)?;
        if m0 < 1.0 {
            lo = guess;
            hi = 2.0 * guess;
            let mut steps = 0;
            while mu(hi)? < 1.0 {
                lo = hi;
                hi *= 2.0;
                steps += 1;
                if steps > MAX_BRACKET_STEPS || a + hi > weight.r_max() {
                    return Err(unresolvable(format!("measure stays below 1 up to radius {hi}")));
                }
            }
        } else {
            hi = guess;
            lo = 0.5 * guess;
            let mut steps = 0;
            while mu(lo)? >= 1.0 {
                hi = lo;
                lo *= 0.5;
                steps += 1;
                if lo < CACHE_QUANTUM || steps > MAX_BRACKET_STEPS {
                    // Only an atom can hold unit mass in an arbitrarily small
                    // disk; the radius then collapses onto the atom.
                    return if weight.atom_mass_at_origin() >= 1.0 {
                        Ok(a.max(CACHE_QUANTUM))
                    } else {
                        Err(unresolvable(format!("measure exceeds 1 down to radius {lo}")))
                    };
                }
            }
        }

        let mut m_lo = mu(lo)?;
        let mut m_hi = mu(hi)?;
        while hi - lo > BISECTION_WIDTH * hi {
            let mid = 0.5 * (lo + hi);
            let m = mu(mid)?;
            if m < 1.0 {
                lo = mid;
                m_lo = m;
            } else {
                hi = mid;
                m_hi = m;
            }
        }
        let mid = 0.5 * (lo + hi);
        let m_mid = mu(mid)?;
        if (m_mid - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if (m_hi - 1.0).abs() <= tol {
            return Ok(hi);
        }
        if (m_lo - 1.0).abs() <= tol {
            return Ok(lo);
        }
        if m_hi - m_lo > 10.0 * tol {
            // Jump of the disk measure (the disk boundary crosses the atom):
            // return the generalized inverse inf{r : μ(D(z, r)) ≥ 1}.
            return Ok(hi);
        }
        Err(FockError::Convergence {
            best: mid,
            error: (m_mid - 1.0).abs(),
        })
    }

    /// Tabulates `ρ` on `[0, r_max]` for fast interpolated lookups.
    pub fn profile(&self, r_max: f64, step: f64) -> Result<RhoProfile> {
        RhoProfile::build(self.clone(), r_max, step)
    }
}

/// Radial table of `ρ` with cubic interpolation; points beyond the table
/// fall back to exact solves.
#[derive(Debug, Clone)]
pub struct RhoProfile {
    field: InducedRadiusField,
    step: f64,
    values: Vec<f64>,
}

impl RhoProfile {
    fn build(field: InducedRadiusField, r_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(r_max >= 0.0) {
            return Err(FockError::Numerical(format!("bad profile range [0, {r_max}] with step {step}")));
        }
        let n = (r_max / step).ceil() as usize + 1;
        let values = (0..n)
            .map(|i| field.rho_at_modulus(i as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { field, step, values })
    }

    pub fn r_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn field(&self) -> &InducedRadiusField {
        &self.field
    }

    pub fn eval_modulus(&self, r: f64) -> Result<f64> {
        let x = r / self.step;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return if r <= self.r_max() {
                Ok(*self.values.last().expect("nonempty profile"))
            } else {
                self.field.rho_at_modulus(r)
            };
        }
        // Four-point Lagrange interpolation; ρ is even in the modulus, which
        // supplies the ghost node left of the origin.
        let t = x - i as f64;
        let n = self.values.len() as isize;
        let at = |j: isize| self.values[j.unsigned_abs().min(n as usize - 1)];
        let j = (i as isize).min(n - 3);
        let t = t + (i as isize - j) as f64;
        let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        Ok(-p0 * t * (t - 1.0) * (t - 2.0) / 6.0 + p1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
            - p2 * (t + 1.0) * t * (t - 2.0) / 2.0
            + p3 * (t + 1.0) * t * (t - 1.0) / 6.0)
    }

    pub fn eval(&self, z: Complex64) -> Result<f64> {
        self.eval_modulus(z.norm())
    }

    /// Smallest tabulated `ρ` on `[0, r]`.
    pub fn min_on(&self, r: f64) -> f64 {
        let last = ((r / self.step).ceil() as usize + 1).min(self.values.len());
        self.values[..last].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest tabulated `ρ` on `[0, r]`.
    pub fn max_on(&self, r: f64) -> f64 {
        let last = ((r / self.step).ceil() as usize + 1).min(self.values.len());
        self.values[..last].iter().copied().fold(0.0, f64::max)
    }
}

/// Equivalence constants `α_r`: the largest ratio `max(ρ(w)/ρ(z), ρ(z)/ρ(w))`
/// over sampled `w ∈ D^r(z)`. One sample set is shared by all `r`, so the
/// returned constants are non-decreasing in `r`.
pub fn rho_equivalence_constants(field: &InducedRadiusField, centers: &[Complex64], rs: &[f64]) -> Result<Vec<f64>> {
    let r_top = rs.iter().copied().fold(0.0, f64::max);
    let rings: Vec<f64> = (1..=24).map(|i| r_top * i as f64 / 24.0).collect();
    let mut alphas = vec![1.0f64; rs.len()];
    for &z in centers {
        let rho_z = field.rho(z)?;
        for &t in &rings {
            for j in 0..12 {
                let angle = 2.0 * PI * j as f64 / 12.0;
                // Stay strictly inside the open disk.
                let w = z + Complex64::from_polar(0.999 * t * rho_z, angle);
                let rho_w = field.rho(w)?;
                let ratio = (rho_w / rho_z).max(rho_z / rho_w);
                for (alpha, &r) in alphas.iter_mut().zip(rs) {
                    if t <= r {
                        *alpha = alpha.max(ratio);
                    }
                }
            }
        }
    }
    Ok(alphas)
}

/// Fits `ρ(z) ≤ C|z|^s` on the given moduli: `s` from a log-log least-squares
/// fit and `C` as the envelope, so no sample violates the bound.
pub fn fit_growth_exponent(field: &InducedRadiusField, moduli: &[f64]) -> Result<(f64, f64)> {
    let mut lx = Vec::with_capacity(moduli.len());
    let mut ly = Vec::with_capacity(moduli.len());
    for &r in moduli.iter().filter(|&&r| r > 0.0) {
        lx.push(r.ln());
        ly.push(field.rho_at_modulus(r)?.ln());
    }
    let (s, _) = linear_fit(&lx, &ly).ok_or_else(|| FockError::InsufficientData("growth fit needs two distinct radii".into()))?;
    let c = lx.iter().zip(&ly).map(|(x, y)| (y - s * x).exp()).fold(0.0, f64::max);
    Ok((c, s))
}
