use std::f64::consts::PI;

use doubling_fock::geometry::{Connectivity, MetricGraph};
use doubling_fock::kernels::KernelSeries;
use doubling_fock::operators::{direct_entry, radial_diagonal, toeplitz_matrix};
use doubling_fock::transforms::{annulus_samples, average_hat_p, berezin, omega_oscillation, SymbolFunction};
use doubling_fock::weights::{fit_growth_exponent, rho_equivalence_constants, InducedRadiusField, WeightModel};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn weights() -> Vec<WeightModel> {
    vec![WeightModel::gaussian(1.0).unwrap(), WeightModel::power(2.0).unwrap()]
}

#[test]
fn rho_equivalence_constants_are_finite_and_ordered() {
    let centers = annulus_samples(0.0, 3.0, 12);
    for w in [WeightModel::gaussian(1.0).unwrap(), WeightModel::power(2.0).unwrap(), WeightModel::power(4.0).unwrap()] {
        let field = InducedRadiusField::new(w.clone());
        let alphas = rho_equivalence_constants(&field, &centers, &[0.5, 1.0, 2.0]).unwrap();
        assert!(alphas.iter().all(|a| a.is_finite() && *a >= 1.0), "{w}: {alphas:?}");
        assert!(alphas.windows(2).all(|p| p[0] <= p[1]), "{w}: {alphas:?}");
    }
}

#[test]
fn rho_growth_is_sublinear_without_violations() {
    let fit: Vec<f64> = (0..12).map(|i| 1.0 + 0.5 * i as f64).collect();
    for w in [WeightModel::power(1.0).unwrap(), WeightModel::power(2.0).unwrap(), WeightModel::power(4.0).unwrap(), WeightModel::fock_sobolev(1.0).unwrap()] {
        let field = InducedRadiusField::new(w.clone());
        let (constant, exponent) = fit_growth_exponent(&field, &fit).unwrap();
        assert!(constant > 0.0 && exponent < 1.0, "{w}: C = {constant}, s = {exponent}");
        for &r in &fit {
            let rho = field.rho_at_modulus(r).unwrap();
            assert!(rho <= constant * r.powf(exponent) * (1.0 + 1e-12), "{w}: ρ({r}) = {rho}");
        }
    }
}

#[test]
fn refining_the_graph_never_lengthens_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for w in weights() {
        let field = InducedRadiusField::new(w.clone());
        let coarse = MetricGraph::new(&field, 3.0, 0.1, Connectivity::Sixteen).unwrap();
        let fine = MetricGraph::new(&field, 3.0, 0.05, Connectivity::Sixteen).unwrap();
        let tol = coarse.grid_tolerance();
        for _ in 0..40 {
            let z = c(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
            let u = c(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
            let dc = coarse.metric_distance(z, u).unwrap();
            let df = fine.metric_distance(z, u).unwrap();
            assert!(df <= dc + tol, "{w}: {z} to {u}: coarse {dc}, fine {df}");
        }
    }
}

/// Envelopes of `sup_w ρ(w)^s |K(w,z)| e^{−φ(w)}` against `ρ(z)^{s−2} e^{φ(z)}`
/// (upper) and against `e^{φ(z)}` (lower), the supremum taken over a square
/// sample grid of the given spacing.
fn sup_norm_envelopes(series: &KernelSeries, field: &InducedRadiusField, s: f64, spacing: f64) -> (f64, f64) {
    let n = (6.0 / spacing).round() as usize;
    let axis: Vec<f64> = (0..=n).map(|i| -3.0 + i as f64 * spacing).collect();
    let rho_w: Vec<Vec<f64>> = axis
        .iter()
        .map(|&y| axis.iter().map(|&x| field.rho(c(x, y)).unwrap()).collect())
        .collect();
    let mut upper: f64 = 0.0;
    let mut lower = f64::INFINITY;
    for z in annulus_samples(0.0, 2.0, 10) {
        let mut sup: f64 = 0.0;
        for (iy, &y) in axis.iter().enumerate() {
            for (ix, &x) in axis.iter().enumerate() {
                let k = series.weighted_kernel(c(x, y), z).unwrap().norm();
                sup = sup.max(rho_w[iy][ix].powf(s) * k);
            }
        }
        upper = upper.max(sup / field.rho(z).unwrap().powf(s - 2.0));
        lower = lower.min(sup);
    }
    (upper, lower)
}

#[test]
fn kernel_sup_norm_bracket_is_stable_under_refinement() {
    for w in weights() {
        let field = InducedRadiusField::new(w.clone());
        let series = KernelSeries::for_radius(&w, 6.0).unwrap();
        for s in [0.0, 1.0] {
            let (u1, l1) = sup_norm_envelopes(&series, &field, s, 0.2);
            let (u2, l2) = sup_norm_envelopes(&series, &field, s, 0.1);
            assert!(u1.is_finite() && u2.is_finite() && l1 > 0.0 && l2 > 0.0, "{w}, s = {s}");
            assert!((u2 / u1 - 1.0).abs() <= 0.1, "{w}, s = {s}: upper {u1} then {u2}");
            assert!((l2 / l1 - 1.0).abs() <= 0.1, "{w}, s = {s}: lower {l1} then {l2}");
        }
    }
}

#[test]
fn weighted_kernel_integrals_are_bounded() {
    // Midpoint polar rule centred at z: 170 radii on [0, 8.5] by 48 angles.
    let (radii, angles, outer) = (170, 48, 8.5);
    let dr = outer / radii as f64;
    let dt = 2.0 * PI / angles as f64;
    for w in weights() {
        let field = InducedRadiusField::new(w.clone());
        let series = KernelSeries::for_radius(&w, 16.0).unwrap();
        let graph = MetricGraph::new(&field, 13.0, 0.1, Connectivity::Sixteen).unwrap();
        let centers = [c(0.0, 0.0), c(1.5, -1.0), c(-2.0, 3.0), c(4.0, 0.0), c(0.0, -4.0)];
        // (|K| e^{-φ(ξ)-φ(z)}, β(ξ, z), area element) per node, below-floor values zeroed
        let samples: Vec<Vec<(f64, f64, f64)>> = centers
            .iter()
            .map(|&z| {
                let beta = graph.distance_field_from(z).unwrap();
                let mut nodes = Vec::with_capacity(radii * angles);
                for i in 0..radii {
                    let s = (i as f64 + 0.5) * dr;
                    for j in 0..angles {
                        let xi = z + Complex64::from_polar(s, (j as f64 + 0.5) * dt);
                        let (k, floor) = series.weighted_kernel_with_floor(xi, z).unwrap();
                        let k = if k.norm() <= floor { 0.0 } else { k.norm() };
                        nodes.push((k, beta.eval(xi).unwrap(), s * dr * dt));
                    }
                }
                nodes
            })
            .collect();
        for p in [0.5, 1.0, 2.0] {
            for l in [0, 1] {
                let ratios: Vec<f64> = centers
                    .iter()
                    .zip(&samples)
                    .map(|(&z, nodes)| {
                        let value: f64 = nodes
                            .iter()
                            .map(|&(k, b, da)| k.powf(p) * if l == 0 { 1.0 } else { b + 1.0 } * da)
                            .sum();
                        value / field.rho(z).unwrap().powf(2.0 * (1.0 - p))
                    })
                    .collect();
                let hi = ratios.iter().copied().fold(0.0, f64::max);
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(lo > 0.0 && hi.is_finite(), "{w}, p = {p}, l = {l}: {ratios:?}");
                assert!(hi / lo <= 10.0, "{w}, p = {p}, l = {l}: {ratios:?}");
            }
        }
    }
}

#[test]
fn holomorphic_functions_satisfy_sub_mean_value() {
    for w in weights() {
        let field = InducedRadiusField::new(w.clone());
        let fs: [(&str, fn(Complex64) -> Complex64); 4] = [
            ("1", |_| c(1.0, 0.0)),
            ("w", |z| z),
            ("w^2", |z| z * z),
            ("exp(w/4)", |z| (z / 4.0).exp()),
        ];
        let grid = annulus_samples(0.0, 3.0, 16);
        let holdout = annulus_samples(0.25, 2.75, 16);
        for p in [0.5, 1.0, 2.0] {
            let ratio = |f: fn(Complex64) -> Complex64, z: Complex64| -> f64 {
                let wt = w.clone();
                let g = SymbolFunction::new("f e^{-φ}", move |u| f(u) * (-wt.phi(u).unwrap()).exp());
                let mean = average_hat_p(&field, &g, z, p).unwrap();
                g.eval(z).norm().powf(p) / mean
            };
            let c_fit = fs
                .iter()
                .flat_map(|(_, f)| grid.iter().map(move |&z| (f, z)))
                .map(|(f, z)| ratio(*f, z))
                .fold(0.0, f64::max);
            assert!(c_fit.is_finite() && c_fit > 0.0, "{w}, p = {p}");
            for (name, f) in &fs {
                for &z in &holdout {
                    let r = ratio(*f, z);
                    assert!(r <= c_fit * 1.05, "{w}, p = {p}, f = {name}, z = {z}: {r} against C = {c_fit}");
                }
            }
        }
    }
}

#[test]
fn berezin_transform_approaches_vanishing_oscillation_symbols() {
    let w = WeightModel::gaussian(1.0).unwrap();
    let series = KernelSeries::for_radius(&w, 14.0).unwrap();
    for spec in ["sin_log_abs", "arctan_re"] {
        let f = SymbolFunction::parse(spec).unwrap();
        let sups: Vec<f64> = [(2.0, 3.0), (4.0, 5.0), (6.0, 7.0), (8.0, 9.0)]
            .iter()
            .map(|&(a, b)| {
                let pts: Vec<Complex64> = (0..12)
                    .map(|i| Complex64::from_polar(0.5 * (a + b), 2.0 * PI * (i as f64 + 0.5) / 12.0))
                    .collect();
                pts.iter()
                    .map(|&z| (f.eval(z) - berezin(&series, &f, z).unwrap()).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(sups.windows(2).all(|p| p[1] <= p[0]), "{spec}: {sups:?}");
        assert!(sups[3] < 0.3 * sups[0], "{spec}: {sups:?}");
    }
}

#[test]
fn bounded_oscillation_controls_increments() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for w in weights() {
        let field = InducedRadiusField::new(w.clone());
        let graph = MetricGraph::new(&field, 4.0, 0.1, Connectivity::Sixteen).unwrap();
        let f = SymbolFunction::parse("sin_re").unwrap();
        let centres: Vec<Complex64> = (0..=24)
            .flat_map(|i| (0..=24).map(move |j| c(-3.0 + 0.25 * i as f64, -3.0 + 0.25 * j as f64)))
            .collect();
        let norm = centres
            .iter()
            .map(|&z| omega_oscillation(&graph, &f, z, 1.0).unwrap().value)
            .fold(0.0, f64::max);
        let mut violations = 0;
        for _ in 0..200 {
            let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let xi = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let beta = graph.metric_distance(z, xi).unwrap();
            if (f.eval(z) - f.eval(xi)).norm() > norm * (beta + 1.0) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "{w}: BO envelope {norm}");
    }
}

#[test]
fn toeplitz_corner_matches_berezin_at_origin() {
    for w in weights() {
        let series = KernelSeries::basis_norms(&w, 80).unwrap();
        for spec in ["indicator_inside:1", "sin_log_abs", "2+sin_abs"] {
            let f = SymbolFunction::parse(spec).unwrap();
            let t = toeplitz_matrix(&series, &f, 32).unwrap();
            let want = berezin(&series, &f, c(0.0, 0.0)).unwrap();
            let got = t.entries[(0, 0)];
            assert!((got - want).norm() <= 1e-4, "{w}, {spec}: {got} against {want}");
        }
    }
}

#[test]
fn radial_diagonal_matches_direct_quadrature() {
    for w in [WeightModel::gaussian(1.0).unwrap(), WeightModel::power(2.0).unwrap(), WeightModel::fock_sobolev(1.0).unwrap()] {
        let series = KernelSeries::basis_norms(&w, 40).unwrap();
        let first = series.valid_from();
        for spec in ["indicator_outside:1.5", "sin_log_abs"] {
            let f = SymbolFunction::parse(spec).unwrap();
            let diag = radial_diagonal(&series, &f, first, first + 11).unwrap();
            for (i, d) in diag.iter().enumerate() {
                let k = first + i;
                let direct = direct_entry(&series, &f, k, k, 8).unwrap();
                assert!((d - direct).norm() <= 1e-8, "{w}, {spec}, k = {k}: {d} against {direct}");
            }
        }
    }
}
