//! Lattices and the metric `d_φ`.

mod graph;
mod lattice;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{FockError, Result};
use crate::weights::InducedRadiusField;

pub use graph::{Connectivity, DistanceField, MetricGraph, OwnedDistanceField};
pub use lattice::{build_lattice, build_lattice_with, covering_multiplicity, Lattice, LatticeOptions};

/// Empirical envelope for `d_φ` against `x = |z − w| / ρ(z)`.
///
/// Near pairs (`x < r`) satisfy `x / C ≤ d ≤ C·x`; far pairs satisfy
/// `x^δ / C ≤ d ≤ C·x^{2−δ}`.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceBoundsReport {
    pub delta_fit: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub c_near: f64,
    pub near_pairs: usize,
    pub far_pairs: usize,
    pub violations: usize,
}

const DELTA_GRID: usize = 99;

fn far_constant(pairs: &[(f64, f64)], delta: f64) -> f64 {
    pairs
        .iter()
        .map(|&(x, d)| (x.powf(delta) / d).max(d / x.powf(2.0 - delta)))
        .fold(1.0, f64::max)
}

/// Fits the near and far envelopes and counts violations against the
/// fitted constants (with a `1e-12` relative slack for rounding).
pub fn verify_distance_bounds(
    graph: &MetricGraph,
    field: &InducedRadiusField,
    samples: &[(Complex64, Complex64)],
    r: f64,
) -> Result<DistanceBoundsReport> {
    let mut near = Vec::new();
    let mut far = Vec::new();
    for &(z, w) in samples {
        if z == w {
            continue;
        }
        let x = (z - w).norm() / field.rho(z)?;
        let d = graph.metric_distance(z, w)?;
        if x < r {
            near.push((x, d));
        } else {
            far.push((x, d));
        }
    }
    if far.len() < 10 {
        return Err(FockError::InsufficientData(format!(
            "distance bounds need at least 10 far pairs, got {}",
            far.len()
        )));
    }
    let c_near = near.iter().map(|&(x, d)| (d / x).max(x / d)).fold(1.0, f64::max);
    let (delta_fit, c_far) = (1..=DELTA_GRID)
        .map(|i| {
            let delta = i as f64 / (DELTA_GRID + 1) as f64;
            (delta, far_constant(&far, delta))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .expect("delta grid is non-empty");
    let c_fit = c_near.max(c_far);
    let slack = 1.0 + 1e-12;
    let near_bad = near.iter().filter(|&&(x, d)| d > c_fit * x * slack || x > c_fit * d * slack).count();
    let far_bad = far
        .iter()
        .filter(|&&(x, d)| d > c_fit * x.powf(2.0 - delta_fit) * slack || x.powf(delta_fit) > c_fit * d * slack)
        .count();
    Ok(DistanceBoundsReport {
        delta_fit,
        c_fit,
        c_near,
        near_pairs: near.len(),
        far_pairs: far.len(),
        violations: near_bad + far_bad,
    })
}
