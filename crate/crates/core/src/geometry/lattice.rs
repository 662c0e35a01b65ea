use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::weights::{InducedRadiusField, RhoProfile};

/// Point index bucketed by the scale of `ρ`: points whose `ρ` lies in
/// `[2^L, 2^{L+1})` share a uniform grid whose cell size is proportional to
/// `2^L`, so neighbourhood queries scan only a few cells per level.
#[derive(Debug, Default, Clone)]
struct ScaleIndex {
    unit: f64,
    levels: BTreeMap<i32, Level>,
}

#[derive(Debug, Default, Clone)]
struct Level {
    cell: f64,
    min_modulus: f64,
    max_modulus: f64,
    members: Vec<usize>,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl ScaleIndex {
    fn new(unit: f64) -> Self {
        Self {
            unit,
            levels: BTreeMap::new(),
        }
    }

    fn level_of(rho: f64) -> i32 {
        rho.log2().floor() as i32
    }

    fn insert(&mut self, idx: usize, p: Complex64, rho: f64) {
        let level = Self::level_of(rho);
        let cell = self.unit * 2f64.powi(level + 1);
        let entry = self.levels.entry(level).or_insert_with(|| Level {
            cell,
            min_modulus: f64::INFINITY,
            max_modulus: 0.0,
            ..Level::default()
        });
        let m = p.norm();
        entry.min_modulus = entry.min_modulus.min(m);
        entry.max_modulus = entry.max_modulus.max(m);
        entry.members.push(idx);
        let key = ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
        entry.cells.entry(key).or_default().push(idx);
    }

    /// Calls `visit` on every stored point `a` that may satisfy
    /// `|a − w| < k (ρ_a + ρ_w)`; the caller applies the exact test.
    fn for_each_candidate<F: FnMut(usize) -> bool>(&self, w: Complex64, rho_w: f64, k: f64, mut visit: F) -> bool {
        let m = w.norm();
        for (key, level) in &self.levels {
            let reach = k * (2f64.powi(key + 1) + rho_w);
            if m + reach < level.min_modulus || m - reach > level.max_modulus {
                continue;
            }
            let span = (reach / level.cell).ceil() as i64;
            if ((2 * span + 1) * (2 * span + 1)) as usize > level.members.len() {
                for &idx in &level.members {
                    if visit(idx) {
                        return true;
                    }
                }
                continue;
            }
            let (ci, cj) = ((w.re / level.cell).floor() as i64, (w.im / level.cell).floor() as i64);
            for i in ci - span..=ci + span {
                for j in cj - span..=cj + span {
                    if let Some(bucket) = level.cells.get(&(i, j)) {
                        for &idx in bucket {
                            if visit(idx) {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

/// An `r`-lattice on `D(0, domain_radius)`: the disks `D^{r/5}(a_j)` are
/// pairwise disjoint and the disks `D^r(a_j)` cover the domain.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub points: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub r: f64,
    pub domain_radius: f64,
    /// Coefficient `s` of the acceptance rule `|a_i − a_j| ≥ s·r·(ρ_i + ρ_j)`.
    pub packing: f64,
    /// Candidate spacing divisor used in the successful pass.
    pub candidate_divisor: f64,
    index: ScaleIndex,
}

/// Options for [`build_lattice`].
#[derive(Debug, Clone, Copy)]
pub struct LatticeOptions {
    /// Separation coefficient `s` (acceptance iff `|a − b| ≥ s·r·(ρ_a + ρ_b)`);
    /// must be at least `1/5` for the disjointness invariant.
    pub packing: f64,
    /// Candidates are spaced `ρ·r / candidate_divisor`.
    pub candidate_divisor: f64,
    /// Covering probes are spaced `ρ·r / probe_divisor`.
    pub probe_divisor: f64,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            packing: 0.2,
            candidate_divisor: 20.0,
            probe_divisor: 10.0,
        }
    }
}

/// Radial bands `[lo, hi)` with a common grid spacing `r·min ρ / divisor`.
fn bands(profile: &RhoProfile, r: f64, domain_radius: f64, divisor: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    let mut lo = 0.0;
    while lo <= domain_radius {
        let rho_lo = profile.eval_modulus(lo)?;
        let hi = (lo + 2.0 * r * rho_lo).min(domain_radius);
        let mut rho_min = rho_lo;
        for i in 1..=8 {
            rho_min = rho_min.min(profile.eval_modulus(lo + (hi - lo) * i as f64 / 8.0)?);
        }
        let spacing = r * rho_min / divisor;
        if hi <= lo {
            out.push((lo, lo + spacing, spacing));
            break;
        }
        out.push((lo, hi, spacing));
        lo = hi;
    }
    Ok(out)
}

/// Grid points `spacing·(i, j)` with `lo ≤ |z| < hi` (and `|z| ≤ cap`), sorted
/// by modulus, then by angle in `[0, 2π)`.
fn band_points(lo: f64, hi: f64, spacing: f64, cap: f64) -> Vec<(f64, f64, Complex64)> {
    let n = (hi / spacing).ceil() as i64;
    let mut pts = Vec::new();
    let mut visit = |i: i64, j: i64| {
        let p = Complex64::new(i as f64 * spacing, j as f64 * spacing);
        let m = p.norm();
        if m >= lo && m < hi && m <= cap {
            let mut angle = p.im.atan2(p.re);
            if angle < 0.0 {
                angle += std::f64::consts::TAU;
            }
            pts.push((m, angle, p));
        }
    };
    for j in -n..=n {
        let y = j as f64 * spacing;
        let outer = ((hi * hi - y * y).max(0.0).sqrt() / spacing).ceil() as i64 + 1;
        let inner = if lo > y.abs() {
            ((lo * lo - y * y).sqrt() / spacing).floor() as i64 - 1
        } else {
            -1
        };
        for i in (inner.max(0))..=outer {
            visit(i, j);
            if i != 0 {
                visit(-i, j);
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

impl Lattice {
    fn empty(r: f64, domain_radius: f64, opts: &LatticeOptions, divisor: f64) -> Self {
        Self {
            points: Vec::new(),
            rho: Vec::new(),
            r,
            domain_radius,
            packing: opts.packing,
            candidate_divisor: divisor,
            index: ScaleIndex::new(r.max(opts.packing * r)),
        }
    }

    fn push(&mut self, p: Complex64, rho: f64) {
        let idx = self.points.len();
        self.points.push(p);
        self.rho.push(rho);
        self.index.insert(idx, p, rho);
    }

    /// True if some accepted point violates the acceptance rule with `w`.
    fn conflicts(&self, w: Complex64, rho_w: f64, slack: f64) -> bool {
        let s = self.packing * self.r;
        self.index.for_each_candidate(w, rho_w * (1.0 + slack), s, |idx| {
            (self.points[idx] - w).norm() < s * (self.rho[idx] + rho_w) * (1.0 + slack)
        })
    }

    /// Index of a lattice point whose `D^r` disk contains `w`.
    pub fn covering_point(&self, w: Complex64) -> Option<usize> {
        let mut found = None;
        self.index.for_each_candidate(w, 0.0, self.r, |idx| {
            if (self.points[idx] - w).norm() < self.r * self.rho[idx] {
                found = Some(idx);
                true
            } else {
                false
            }
        });
        found
    }

    /// Exact pairwise check of `|a_i − a_j| ≥ (r/5)(ρ_i + ρ_j)`; returns the
    /// number of violating pairs.
    pub fn disjointness_violations(&self) -> usize {
        let s = self.r / 5.0;
        let mut count = 0;
        for (i, &p) in self.points.iter().enumerate() {
            self.index.for_each_candidate(p, self.rho[i], s, |j| {
                if j > i && (self.points[j] - p).norm() < s * (self.rho[i] + self.rho[j]) {
                    count += 1;
                }
                false
            });
        }
        count
    }

    /// Covering probes that no `D^r(a_j)` contains, on a grid of spacing
    /// `ρ·r / probe_divisor`.
    pub fn uncovered_probes(&self, field: &InducedRadiusField, probe_divisor: f64) -> Result<Vec<Complex64>> {
        let profile = field.profile(self.domain_radius + 1e-9, 0.01_f64.min(self.domain_radius.max(1e-3) / 4.0))?;
        let mut missing = Vec::new();
        for (lo, hi, spacing) in bands(&profile, self.r, self.domain_radius, probe_divisor)? {
            for (_, _, p) in band_points(lo, hi, spacing, self.domain_radius) {
                if self.covering_point(p).is_none() {
                    missing.push(p);
                }
            }
        }
        Ok(missing)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of lattice points with `lo ≤ |a| < hi`.
    pub fn count_in_annulus(&self, lo: f64, hi: f64) -> usize {
        self.points.iter().filter(|p| (lo..hi).contains(&p.norm())).count()
    }
}

/// Greedy `r`-lattice on `D(0, domain_radius)`.
///
/// Candidates on a grid of spacing `ρ·r/20` (per radial band) are visited by
/// increasing modulus, then angle; a candidate is accepted when it keeps the
/// separation rule against every accepted point. Covering is checked on a
/// probe grid of spacing `ρ·r/10`; on failure the candidate grid is refined
/// once before giving up.
pub fn build_lattice(field: &InducedRadiusField, r: f64, domain_radius: f64) -> Result<Lattice> {
    build_lattice_with(field, r, domain_radius, &LatticeOptions::default())
}

pub fn build_lattice_with(field: &InducedRadiusField, r: f64, domain_radius: f64, opts: &LatticeOptions) -> Result<Lattice> {
    if !(r > 0.0) || !(domain_radius > 0.0) {
        return Err(FockError::Numerical(format!("lattice needs r > 0 and a positive domain, got {r}, {domain_radius}")));
    }
    if opts.packing < 0.2 {
        return Err(FockError::Numerical(format!("packing {} is below 1/5", opts.packing)));
    }
    let profile = field.profile(domain_radius + 1e-9, 0.01_f64.min(domain_radius / 4.0))?;
    let mut divisor = opts.candidate_divisor;
    for attempt in 0..2 {
        let mut lattice = Lattice::empty(r, domain_radius, opts, divisor);
        for (lo, hi, spacing) in bands(&profile, r, domain_radius, divisor)? {
            for (m, _, p) in band_points(lo, hi, spacing, domain_radius) {
                let rho_approx = profile.eval_modulus(m)?;
                if lattice.conflicts(p, rho_approx, -1e-4) {
                    continue;
                }
                let rho = field.rho(p)?;
                if !lattice.conflicts(p, rho, 0.0) {
                    lattice.push(p, rho);
                }
            }
        }
        let missing = lattice.uncovered_probes(field, opts.probe_divisor)?;
        if missing.is_empty() {
            return Ok(lattice);
        }
        if attempt == 1 {
            return Err(FockError::Numerical(format!(
                "lattice leaves {} probes uncovered (first at {}) after refinement",
                missing.len(),
                missing[0]
            )));
        }
        divisor *= 2.0;
    }
    unreachable!("loop returns on its second pass")
}

/// Largest number of lattice disks `D^r(a_j)` meeting `D^{mr}(z)` over the
/// probes (0 for no probes).
pub fn covering_multiplicity(lattice: &Lattice, field: &InducedRadiusField, m: f64, probes: &[Complex64]) -> Result<usize> {
    let mut best = 0;
    let k = lattice.r * m.max(1.0);
    for &z in probes {
        let rho_z = field.rho(z)?;
        let mut count = 0;
        lattice.index.for_each_candidate(z, rho_z, k, |j| {
            if (lattice.points[j] - z).norm() < lattice.r * lattice.rho[j] + m * lattice.r * rho_z {
                count += 1;
            }
            false
        });
        best = best.max(count);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightModel;

    #[test]
    fn gaussian_lattice_invariants() {
        let field = InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 2.0).unwrap();
        assert_eq!(lattice.disjointness_violations(), 0);
        let rho = (2.0 * std::f64::consts::PI).powf(-0.5);
        let mut nearest = f64::INFINITY;
        for (i, p) in lattice.points.iter().enumerate() {
            for q in &lattice.points[i + 1..] {
                nearest = nearest.min((p - q).norm());
            }
        }
        assert!(nearest >= 2.0 * rho / 5.0 * (1.0 - 1e-7), "{nearest}");
        assert!(lattice.uncovered_probes(&field, 10.0).unwrap().is_empty());
    }

    #[test]
    fn tiny_domain_gives_single_point() {
        let field = InducedRadiusField::new(WeightModel::power(2.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 0.01).unwrap();
        assert_eq!(lattice.points, vec![Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn multiplicity_edge_cases() {
        let field = InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 0.01).unwrap();
        assert_eq!(covering_multiplicity(&lattice, &field, 1.0, &[]).unwrap(), 0);
        assert_eq!(covering_multiplicity(&lattice, &field, 3.0, &[Complex64::new(0.001, 0.0)]).unwrap(), 1);
    }

    #[test]
    fn index_query_matches_brute_force() {
        let field = InducedRadiusField::new(WeightModel::power(4.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 1.5).unwrap();
        let probes: Vec<Complex64> = (0..40).map(|i| Complex64::from_polar(0.035 * i as f64, 0.7 * i as f64)).collect();
        for &z in &probes {
            let rho_z = field.rho(z).unwrap();
            let brute = lattice
                .points
                .iter()
                .zip(&lattice.rho)
                .filter(|(a, ra)| (*a - z).norm() < *ra + rho_z)
                .count();
            assert_eq!(covering_multiplicity(&lattice, &field, 1.0, &[z]).unwrap(), brute);
        }
    }

    #[test]
    fn power_two_density_decreases_outward() {
        let field = InducedRadiusField::new(WeightModel::power(2.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 4.0).unwrap();
        let density = |lo: f64, hi: f64| lattice.count_in_annulus(lo, hi) as f64 / (std::f64::consts::PI * (hi * hi - lo * lo));
        assert!(density(0.0, 1.0) > density(3.0, 4.0), "{} vs {}", density(0.0, 1.0), density(3.0, 4.0));
    }

    #[test]
    fn gaussian_multiplicity_is_stable_under_probe_refinement() {
        let field = InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap());
        let lattice = build_lattice(&field, 1.0, 3.0).unwrap();
        let grid = |n: usize| -> Vec<Complex64> {
            let mut out = Vec::new();
            for i in 0..=n {
                for j in 0..=n {
                    out.push(Complex64::new(-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64));
                }
            }
            out
        };
        let coarse = covering_multiplicity(&lattice, &field, 1.0, &grid(40)).unwrap();
        let fine = covering_multiplicity(&lattice, &field, 1.0, &grid(80)).unwrap();
        assert!(coarse > 0);
        assert!(fine >= coarse && fine - coarse <= 2, "{coarse} vs {fine}");
    }
}
