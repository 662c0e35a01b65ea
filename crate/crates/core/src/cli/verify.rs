use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{series_for, RunConfig};
use crate::error::Result;
use crate::geometry::{build_lattice, Connectivity, MetricGraph};
use crate::kernels::bergman_project;
use crate::operators::{fredholm_probe, toeplitz_matrix, FredholmThresholds, Verdict};
use crate::transforms::{berezin, SymbolFunction};
use crate::weights::InducedRadiusField;

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub pass: bool,
    /// Worst observed deviation (or count) compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub weight: String,
    pub seed: u64,
    pub invariants: BTreeMap<String, InvariantResult>,
    pub passed: usize,
    pub failed: usize,
}

fn within(value: f64, tolerance: f64, detail: impl Into<String>) -> InvariantResult {
    InvariantResult {
        pass: value <= tolerance,
        value,
        tolerance,
        detail: detail.into(),
    }
}

fn max_entry_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn point(rng: &mut ChaCha8Rng, half: f64) -> Complex64 {
    Complex64::new(rng.random_range(-half..half), rng.random_range(-half..half))
}

type Check = Box<dyn FnOnce(&mut ChaCha8Rng) -> Result<InvariantResult>>;

/// Desk-scale invariant suite on the configured weight. Random points come
/// from a ChaCha8 stream seeded with `config.seed`, so the summary is a
/// function of the configuration alone.
pub fn verify_all(config: &RunConfig) -> Result<VerifySummary> {
    let weight = config.weight_model()?;
    let field = InducedRadiusField::new(weight.clone());
    let series = series_for(&weight, 8.0, 32)?;
    let pairs = config.pairs;

    let mut checks: Vec<(&str, Check)> = Vec::new();
    {
        let field = field.clone();
        checks.push((
            "rho_unit_mass",
            Box::new(move |rng| {
                let mut worst: f64 = 0.0;
                for _ in 0..6 {
                    let z = point(rng, 3.0);
                    let rho = field.rho(z)?;
                    worst = worst.max((field.weight().measure_of_disk(z, rho)? - 1.0).abs());
                }
                Ok(within(worst, 1e-6, "|ν(D(z, ρ(z))) − 1| at 6 random points"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "kernel_hermitian",
            Box::new(move |rng| {
                let mut worst: f64 = 0.0;
                for _ in 0..pairs {
                    let (z, w) = (point(rng, 3.0), point(rng, 3.0));
                    let a = series.weighted_kernel(z, w)?;
                    let b = series.weighted_kernel(w, z)?.conj();
                    worst = worst.max((a - b).norm() / a.norm().max(1e-300));
                }
                Ok(within(worst, 1e-12, "relative |K(z,w) − conj K(w,z)|"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "kernel_reproducing",
            Box::new(move |rng| {
                let first = series.valid_from() as i32;
                let mut worst: f64 = 0.0;
                for k in [first, first + 1, first + 3] {
                    let z = point(rng, 1.0);
                    let got = bergman_project(&series, |w| w.powi(k), z)?;
                    let want = z.powi(k);
                    worst = worst.max((got - want).norm() / want.norm().max(1e-3));
                }
                Ok(within(worst, 1e-5, "relative |P(w^k)(z) − z^k|"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "berezin_constant",
            Box::new(move |rng| {
                let one = SymbolFunction::constant(1.0);
                let mut worst: f64 = 0.0;
                for _ in 0..5 {
                    worst = worst.max((berezin(&series, &one, point(rng, 2.0))? - 1.0).norm());
                }
                Ok(within(worst, 1e-5, "|berezin(1)(z) − 1| at 5 random points"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "berezin_range",
            Box::new(move |rng| {
                let f = SymbolFunction::indicator_inside(1.0);
                let mut worst: f64 = 0.0;
                for _ in 0..5 {
                    let v = berezin(&series, &f, point(rng, 2.0))?;
                    worst = worst.max((-v.re).max(v.re - 1.0).max(v.im.abs()).max(0.0));
                }
                Ok(within(worst, 1e-9, "excursion of berezin(indicator_inside:1) outside [0, 1]"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "toeplitz_linearity",
            Box::new(move |_| {
                let f = SymbolFunction::parse("sin_re")?;
                let g = SymbolFunction::indicator_inside(1.0);
                let h = SymbolFunction::parse("2*sin_re+indicator_inside:1")?;
                let n = 8;
                let tf = toeplitz_matrix(&series, &f, n)?.entries;
                let tg = toeplitz_matrix(&series, &g, n)?.entries;
                let th = toeplitz_matrix(&series, &h, n)?.entries;
                let combo = tf * Complex64::new(2.0, 0.0) + tg;
                Ok(within(max_entry_diff(&th, &combo), 1e-8, "T_{2f+g} against 2T_f + T_g, N = 8"))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "toeplitz_adjoint",
            Box::new(move |_| {
                let t = toeplitz_matrix(&series, &SymbolFunction::parse("z")?, 8)?.entries;
                let tc = toeplitz_matrix(&series, &SymbolFunction::parse("conj_z")?, 8)?.entries;
                Ok(within(max_entry_diff(&tc, &t.adjoint()), 1e-8, "T_{conj f} against T_f^*, f = z, N = 8"))
            }),
        ));
    }
    {
        let field = field.clone();
        checks.push((
            "metric_symmetry_triangle",
            Box::new(move |rng| {
                let graph = MetricGraph::new(&field, 3.0, 0.1, Connectivity::Sixteen)?;
                let tol = graph.grid_tolerance();
                let mut worst: f64 = 0.0;
                for _ in 0..pairs {
                    let (a, b, c) = (point(rng, 2.5), point(rng, 2.5), point(rng, 2.5));
                    let ab = graph.metric_distance(a, b)?;
                    let ba = graph.metric_distance(b, a)?;
                    let bc = graph.metric_distance(b, c)?;
                    let ac = graph.metric_distance(a, c)?;
                    worst = worst.max((ab - ba).abs()).max(ac - ab - bc);
                }
                Ok(within(worst, tol, "max of |d(a,b) − d(b,a)| and d(a,c) − d(a,b) − d(b,c), tolerance one grid edge"))
            }),
        ));
    }
    {
        let field = field.clone();
        checks.push((
            "lattice_certified",
            Box::new(move |_| {
                let lattice = build_lattice(&field, 1.0, 2.0)?;
                let bad = lattice.disjointness_violations() + lattice.uncovered_probes(&field, 10.0)?.len();
                Ok(within(bad as f64, 0.0, format!("disjointness violations plus uncovered probes, {} points", lattice.len())))
            }),
        ));
    }
    {
        let series = series.clone();
        checks.push((
            "fredholm_constant_one",
            Box::new(move |_| {
                let report = fredholm_probe(
                    &series,
                    &SymbolFunction::constant(1.0),
                    &[4, 8, 16],
                    &[(1.0, 1.5), (1.5, 2.0), (2.0, 2.5)],
                    &FredholmThresholds::default(),
                )?;
                let wrong = if report.verdict == Verdict::Fredholm { 0.0 } else { 1.0 };
                Ok(within(wrong, 0.0, format!("verdict {}", report.verdict.as_str())))
            }),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut invariants = BTreeMap::new();
    for (name, check) in checks {
        let result = check(&mut rng).unwrap_or_else(|e| InvariantResult {
            pass: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: format!("error: {e}"),
        });
        invariants.insert(name.to_string(), result);
    }
    let passed = invariants.values().filter(|r| r.pass).count();
    Ok(VerifySummary {
        weight: weight.to_string(),
        seed: config.seed,
        failed: invariants.len() - passed,
        passed,
        invariants,
    })
}
