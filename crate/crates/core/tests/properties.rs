use std::sync::OnceLock;

use doubling_fock::export::round_significant;
use doubling_fock::geometry::{Connectivity, MetricGraph};
use doubling_fock::kernels::KernelSeries;
use doubling_fock::operators::toeplitz_matrix;
use doubling_fock::transforms::{berezin, mean_oscillation, SymbolFunction};
use doubling_fock::weights::{InducedRadiusField, WeightModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian_field() -> &'static InducedRadiusField {
    static FIELD: OnceLock<InducedRadiusField> = OnceLock::new();
    FIELD.get_or_init(|| InducedRadiusField::new(WeightModel::gaussian(1.0).unwrap()))
}

fn power_field() -> &'static InducedRadiusField {
    static FIELD: OnceLock<InducedRadiusField> = OnceLock::new();
    FIELD.get_or_init(|| InducedRadiusField::new(WeightModel::power(2.0).unwrap()))
}

fn power_graph() -> &'static MetricGraph {
    static GRAPH: OnceLock<MetricGraph> = OnceLock::new();
    GRAPH.get_or_init(|| MetricGraph::new(power_field(), 3.0, 0.1, Connectivity::Sixteen).unwrap())
}

fn gaussian_series() -> &'static KernelSeries {
    static SERIES: OnceLock<KernelSeries> = OnceLock::new();
    SERIES.get_or_init(|| KernelSeries::for_radius(&WeightModel::gaussian(1.0).unwrap(), 8.0).unwrap())
}

fn power_series() -> &'static KernelSeries {
    static SERIES: OnceLock<KernelSeries> = OnceLock::new();
    SERIES.get_or_init(|| KernelSeries::for_radius(&WeightModel::power(2.0).unwrap(), 8.0).unwrap())
}

fn point(half: f64) -> impl Strategy<Value = Complex64> {
    (-half..half, -half..half).prop_map(|(x, y)| c(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_is_symmetric_and_satisfies_triangle(a in point(2.5), b in point(2.5), u in point(2.5)) {
        let g = power_graph();
        let tol = g.grid_tolerance();
        let ab = g.metric_distance(a, b).unwrap();
        prop_assert!((ab - g.metric_distance(b, a).unwrap()).abs() <= tol);
        let au = g.metric_distance(a, u).unwrap();
        let ub = g.metric_distance(u, b).unwrap();
        prop_assert!(ab <= au + ub + tol, "d(a,b) = {ab}, d(a,u) + d(u,b) = {}", au + ub);
        prop_assert!(g.metric_distance(a, a).unwrap() <= tol);
    }

    #[test]
    fn kernel_is_hermitian_with_positive_diagonal(z in point(3.0), w in point(3.0)) {
        for s in [gaussian_series(), power_series()] {
            let a = s.weighted_kernel(z, w).unwrap();
            let b = s.weighted_kernel(w, z).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
            prop_assert!(s.weighted_diagonal(z).unwrap() > 0.0);
            let cs = a.norm_sqr();
            prop_assert!(cs <= s.weighted_diagonal(z).unwrap() * s.weighted_diagonal(w).unwrap() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn disk_measure_increases_with_radius(z in point(3.0), r in 0.05f64..2.0, dr in 0.01f64..1.0) {
        for field in [gaussian_field(), power_field()] {
            let w = field.weight();
            let small = w.measure_of_disk(z, r).unwrap();
            let large = w.measure_of_disk(z, r + dr).unwrap();
            prop_assert!(large > small, "{}: ν(D({z}, {r})) = {small}, ν(D({z}, {})) = {large}", w, r + dr);
        }
    }

    #[test]
    fn induced_radius_has_unit_mass(z in point(4.0)) {
        for field in [gaussian_field(), power_field()] {
            let rho = field.rho(z).unwrap();
            let mass = field.weight().measure_of_disk(z, rho).unwrap();
            prop_assert!((mass - 1.0).abs() <= field.solver_tolerance().max(1e-8), "mass {mass} at {z}");
        }
    }

    #[test]
    fn mean_oscillation_ignores_added_constants(z in point(2.0), k in -3.0f64..3.0) {
        let f = SymbolFunction::parse("sin_re").unwrap();
        let shifted = f.add(&SymbolFunction::constant(k));
        let a = mean_oscillation(power_field(), &f, z, 2.0).unwrap();
        let b = mean_oscillation(power_field(), &shifted, z, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a));
    }

    #[test]
    fn rounding_is_idempotent(x in prop::num::f64::NORMAL) {
        let once = round_significant(x);
        prop_assert_eq!(round_significant(once), once);
        prop_assert!((once - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn radial_symbols_depend_on_modulus_only(r in 0.0f64..6.0, t in 0.0f64..std::f64::consts::TAU) {
        for spec in ["sin_log_abs", "abs_sq", "indicator_inside:2", "2+sin_abs"] {
            let f = SymbolFunction::parse(spec).unwrap();
            prop_assert!(f.is_radial());
            let a = f.eval(c(r, 0.0));
            let b = f.eval(Complex64::from_polar(r, t));
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{spec} at |z| = {r}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn berezin_preserves_order(z in point(2.0), r1 in 0.3f64..2.0, dr in 0.1f64..1.5) {
        let s = power_series();
        let small = berezin(s, &SymbolFunction::indicator_inside(r1), z).unwrap();
        let large = berezin(s, &SymbolFunction::indicator_inside(r1 + dr), z).unwrap();
        prop_assert!(small.re >= -1e-6);
        prop_assert!(small.re <= large.re + 1e-6, "R = {r1}: {small}, R = {}: {large}", r1 + dr);
        prop_assert!(large.re <= 1.0 + 1e-6);
    }

    #[test]
    fn toeplitz_is_linear_and_adjoint_respecting(a in -2.0f64..2.0, b in -2.0f64..2.0, bi in -1.0f64..1.0) {
        let s = gaussian_series();
        let n = 6;
        let f = SymbolFunction::parse("z").unwrap();
        let g = SymbolFunction::indicator_inside(1.5);
        let (ca, cb) = (c(a, 0.0), c(b, bi));
        let h = f.scale(ca).add(&g.scale(cb));
        let tf = toeplitz_matrix(s, &f, n).unwrap().entries;
        let tg = toeplitz_matrix(s, &g, n).unwrap().entries;
        let th = toeplitz_matrix(s, &h, n).unwrap().entries;
        let combo = tf.clone() * ca + tg.clone() * cb;
        let diff = th.iter().zip(combo.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-8, "linearity defect {diff}");
        let th_conj = toeplitz_matrix(s, &h.conj(), n).unwrap().entries;
        let adj = th.adjoint();
        let diff = th_conj.iter().zip(adj.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-8, "adjoint defect {diff}");
    }
}
