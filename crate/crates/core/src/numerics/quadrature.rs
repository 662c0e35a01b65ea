//! Globally adaptive Gauss–Kronrod quadrature in one dimension and nested
//! polar quadrature over disks and annuli.
//!
//! The 1-D driver follows the QUADPACK `qag` scheme: a 21-point Kronrod rule
//! with its embedded 10-point Gauss rule, error estimates scaled the QUADPACK
//! way, and bisection of the interval with the largest error until the global
//! error meets the requested tolerance. Integrands may be real or complex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{FockError, Result};

/// Values that can be integrated: real or complex scalars.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
    fn real_part(&self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn real_part(&self) -> f64 {
        *self
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn real_part(&self) -> f64 {
        self.re
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Measure the relative tolerance against `∫|f|` instead of `|∫f|`.
    /// Needed for oscillatory integrals whose value may cancel to zero.
    pub relative_to_l1: bool,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            relative_to_l1: false,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn l1(mut self) -> Self {
        self.relative_to_l1 = true;
        self
    }

    pub fn with_budget(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn target(&self, value: f64, l1: f64) -> f64 {
        let scale = if self.relative_to_l1 { l1 } else { value };
        self.abs_tol.max(self.rel_tol * scale)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate<T> {
    pub value: T,
    pub error: f64,
    /// Integral of the magnitude of the integrand.
    pub l1: f64,
    pub intervals: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_994_581_339,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    l1: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Panel<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::default();
    let mut abs_sum = fc.magnitude() * WGK[10];
    let mut values = [(T::default(), T::default()); 10];
    for (j, &x) in XGK[..10].iter().enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        values[j] = (f1, f2);
        kronrod = kronrod + (f1 + f2) * WGK[j];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = (fc - mean).magnitude() * WGK[10];
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += ((*f1 - mean).magnitude() + (*f2 - mean).magnitude()) * WGK[j];
    }
    let width = half.abs();
    let value = kronrod * half;
    let asc = asc * width;
    let l1 = abs_sum * width;
    let mut error = ((kronrod - gauss) * half).magnitude();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if l1 > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * l1);
    }
    Panel {
        a,
        b,
        value,
        error,
        l1,
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Integrate `f` over `[a, b]`, starting with one panel per sub-interval cut
/// by `breaks` (points outside the interval are ignored).
pub fn integrate_with_breaks<T, F>(mut f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(FockError::Numerical("integration needs finite end points".into()));
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    let (lo, hi) = (a, b);
    let sign = if hi < lo { -1.0 } else { 1.0 };
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    pts.retain(|&x| x >= lo && x <= hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 || lo == hi {
        return Ok(QuadEstimate {
            value: T::default(),
            error: 0.0,
            l1: 0.0,
            intervals: 0,
        });
    }

    let mut heap = BinaryHeap::new();
    let (mut value, mut error, mut l1) = (T::default(), 0.0, 0.0);
    for w in pts.windows(2) {
        let p = kronrod21(&mut f, w[0], w[1]);
        value = value + p.value;
        error += p.error;
        l1 += p.l1;
        heap.push(p);
    }
    loop {
        let target = opts.target(value.magnitude(), l1);
        if error <= target || !error.is_finite() {
            let (value, error, l1) = totals(&heap);
            if !value.magnitude().is_finite() || !error.is_finite() {
                return Err(FockError::Convergence {
                    best: value.real_part(),
                    error,
                });
            }
            return Ok(QuadEstimate {
                value: value * sign,
                error,
                l1,
                intervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_intervals {
            let (value, error, _) = totals(&heap);
            return Err(FockError::Convergence {
                best: value.real_part() * sign,
                error,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution; accept what we have.
            heap.push(worst);
            let (value, error, l1) = totals(&heap);
            return Ok(QuadEstimate {
                value: value * sign,
                error,
                l1,
                intervals: heap.len(),
            });
        }
        let left = kronrod21(&mut f, worst.a, mid);
        let right = kronrod21(&mut f, mid, worst.b);
        value = value - worst.value + left.value + right.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }
}

fn totals<T: QuadValue>(heap: &BinaryHeap<Panel<T>>) -> (T, f64, f64) {
    // Sum in a fixed (left-endpoint) order so results do not depend on heap layout.
    let mut panels: Vec<&Panel<T>> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = T::default();
    let (mut error, mut l1) = (0.0, 0.0);
    for p in panels {
        value = value + p.value;
        error += p.error;
        l1 += p.l1;
    }
    (value, error, l1)
}

/// Integrate `f(w) dA(w)` over the annulus `r_inner ≤ |w − center| ≤ r_outer`
/// in polar coordinates about `center`: an adaptive outer integral in the
/// radius of an adaptive angular integral. `radial_breaks` are radii (about
/// `center`) where the integrand is known to jump.
pub fn integrate_annulus<T, F>(
    f: &F,
    center: Complex64,
    r_inner: f64,
    r_outer: f64,
    radial_breaks: &[f64],
    opts: &QuadOptions,
) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(Complex64) -> T,
{
    integrate_annulus_split(f, center, r_inner, r_outer, radial_breaks, &|_| Vec::new(), opts)
}

/// [`integrate_annulus`] with angular break points: `angle_breaks(s)` lists
/// the angles in `[0, 2π)` where the integrand jumps on the ring of radius
/// `s` about `center`.
pub fn integrate_annulus_split<T, F>(
    f: &F,
    center: Complex64,
    r_inner: f64,
    r_outer: f64,
    radial_breaks: &[f64],
    angle_breaks: &dyn Fn(f64) -> Vec<f64>,
    opts: &QuadOptions,
) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(Complex64) -> T,
{
    if opts.relative_to_l1 {
        // The outer integral only sees ring integrals, whose cancellation
        // hides the size of |f|; measure it first and convert to an absolute
        // tolerance.
        let scale = annulus_core(
            &|w: Complex64| f(w).magnitude(),
            center,
            r_inner,
            r_outer,
            radial_breaks,
            angle_breaks,
            &QuadOptions::relative(1e-3).with_budget(opts.max_intervals),
        )?;
        let opts = QuadOptions {
            abs_tol: opts.abs_tol.max(opts.rel_tol * scale.value),
            relative_to_l1: false,
            ..*opts
        };
        let mut est = annulus_core(f, center, r_inner, r_outer, radial_breaks, angle_breaks, &opts)?;
        est.l1 = scale.value;
        return Ok(est);
    }
    annulus_core(f, center, r_inner, r_outer, radial_breaks, angle_breaks, opts)
}

fn annulus_core<T, F>(
    f: &F,
    center: Complex64,
    r_inner: f64,
    r_outer: f64,
    radial_breaks: &[f64],
    angle_breaks: &dyn Fn(f64) -> Vec<f64>,
    opts: &QuadOptions,
) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(Complex64) -> T,
{
    let inner_opts = QuadOptions {
        rel_tol: opts.rel_tol * 0.1,
        abs_tol: opts.abs_tol * 0.1 / (2.0 * PI * r_outer.max(1e-300)),
        relative_to_l1: opts.relative_to_l1,
        max_intervals: opts.max_intervals,
    };
    let mut failure: Option<FockError> = None;
    let outer = integrate_with_breaks(
        |s: f64| -> T {
            if failure.is_some() {
                return T::default();
            }
            if s == 0.0 {
                return T::default();
            }
            let ring = integrate_with_breaks(
                |theta: f64| f(center + Complex64::from_polar(s, theta)),
                0.0,
                2.0 * PI,
                &angle_breaks(s),
                &inner_opts,
            );
            match ring {
                Ok(est) => est.value * s,
                Err(e) => {
                    failure = Some(e);
                    T::default()
                }
            }
        },
        r_inner,
        r_outer,
        radial_breaks,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    outer
}

/// Integrate over the disk `|w − center| < radius`; see [`integrate_annulus`].
pub fn integrate_disk<T, F>(
    f: &F,
    center: Complex64,
    radius: f64,
    radial_breaks: &[f64],
    opts: &QuadOptions,
) -> Result<QuadEstimate<T>>
where
    T: QuadValue,
    F: Fn(Complex64) -> T,
{
    integrate_annulus(f, center, 0.0, radius, radial_breaks, opts)
}

/// Integrate `f` over `[0, ∞)` where `f` is concentrated around `peak` with a
/// characteristic `width`. The domain is extended outward in steps of `width`
/// until the integrand drops below `cutoff` relative to its peak value.
pub fn integrate_semi_infinite<F>(f: F, peak: f64, width: f64, cutoff: f64, opts: &QuadOptions) -> Result<QuadEstimate<f64>>
where
    F: Fn(f64) -> f64,
{
    let peak = peak.max(0.0);
    let width = width.max(1e-12);
    let top = f(peak).abs().max(f64::MIN_POSITIVE);
    let mut hi = peak + width;
    let mut step = width;
    let mut guard = 0;
    while f(hi).abs() > cutoff * top {
        hi += step;
        step *= 1.5;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(FockError::Divergence(format!(
                "integrand still {:e} of its peak at {hi}",
                f(hi).abs() / top
            )));
        }
    }
    let mut lo = (peak - width).max(0.0);
    let mut step = width;
    let mut guard = 0;
    while lo > 0.0 && f(lo).abs() > cutoff * top {
        lo = (lo - step).max(0.0);
        step *= 1.5;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    integrate_with_breaks(f, lo, hi, &[peak], opts)
}

/// Radius about `center` beyond which the magnitude `g` has decayed below
/// `cutoff` times its largest sampled value. Rings of 16 angles are probed
/// at radii growing geometrically from `start`; the search stops on the first
/// ring that is both below the cutoff and lower than the previous ring.
pub fn truncation_radius<G>(g: G, center: Complex64, start: f64, cutoff: f64) -> Result<f64>
where
    G: Fn(Complex64) -> f64,
{
    let ring_max = |r: f64| -> f64 {
        (0..16)
            .map(|j| g(center + Complex64::from_polar(r, (j as f64 + 0.5) * PI / 8.0)))
            .fold(0.0, f64::max)
    };
    let mut peak = g(center);
    let mut previous = peak;
    let mut r = start;
    for _ in 0..400 {
        let m = ring_max(r);
        if !m.is_finite() {
            return Err(FockError::Divergence(format!("integrand is not finite at distance {r}")));
        }
        peak = peak.max(m);
        if peak > 0.0 && m < cutoff * peak && m <= previous {
            return Ok(r);
        }
        if peak == 0.0 && r > 1e3 * start {
            return Ok(r);
        }
        previous = m;
        r *= 1.25;
    }
    Err(FockError::Divergence(format!(
        "integrand has not decayed to {cutoff:e} of its peak by distance {r}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &QuadOptions::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((est.value - exact).abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let est = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &QuadOptions::relative(1e-12)).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn jump_located_by_break_point() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let est = integrate_with_breaks(f, 0.0, 1.0, &[0.3], &QuadOptions::default()).unwrap();
        assert!((est.value - 0.3).abs() < 1e-14);
        let est = integrate(f, 0.0, 1.0, &QuadOptions::relative(1e-9).with_budget(10_000)).unwrap();
        assert!((est.value - 0.3).abs() < 1e-8);
    }

    #[test]
    fn complex_oscillatory_with_l1_tolerance() {
        let est: QuadEstimate<Complex64> = integrate(
            |t: f64| Complex64::from_polar(1.0, 3.0 * t),
            0.0,
            2.0 * PI,
            &QuadOptions::relative(1e-10).l1(),
        )
        .unwrap();
        assert!(est.value.norm() < 1e-12);
        assert!((est.l1 - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn disk_area_and_second_moment() {
        let c = Complex64::new(0.7, -1.1);
        let area = integrate_disk(&|_w: Complex64| 1.0, c, 2.0, &[], &QuadOptions::relative(1e-10)).unwrap();
        assert!((area.value - 4.0 * PI).abs() < 1e-10);
        let m2 = integrate_disk(&|w: Complex64| (w - c).norm_sqr(), c, 2.0, &[], &QuadOptions::relative(1e-10)).unwrap();
        assert!((m2.value - PI * 16.0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let est = integrate(|x: f64| x, 1.0, 0.0, &QuadOptions::default()).unwrap();
        assert!((est.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let opts = QuadOptions::relative(1e-15).with_budget(2);
        match integrate(|x: f64| (1.0 / x.max(1e-300)).sqrt(), 0.0, 1.0, &opts) {
            Err(FockError::Convergence { best, .. }) => assert!(best > 1.0),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
