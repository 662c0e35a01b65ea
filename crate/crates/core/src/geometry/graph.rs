use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::weights::{InducedRadiusField, RhoProfile};

/// Off-node points link to every node within this many cells of their own
/// cell, so the first and last segments of a path are not tied to the grid
/// directions.
const ANCHOR_REACH: usize = 2;

/// Neighbour stencils for the grid graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Axis and diagonal neighbours.
    Eight,
    /// Adds the knight moves `(±1, ±2)`, `(±2, ±1)`.
    Sixteen,
    /// Adds `(±1, ±3)`, `(±3, ±1)`, `(±2, ±3)`, `(±3, ±2)` as well.
    ThirtyTwo,
}

impl Connectivity {
    fn offsets(self) -> Vec<(i64, i64)> {
        let mut base: Vec<(i64, i64)> = vec![(1, 0), (1, 1)];
        if matches!(self, Connectivity::Sixteen | Connectivity::ThirtyTwo) {
            base.extend([(2, 1), (1, 2)]);
        }
        if self == Connectivity::ThirtyTwo {
            base.extend([(3, 1), (1, 3), (3, 2), (2, 3)]);
        }
        let mut out = Vec::new();
        for (a, b) in base {
            for (x, y) in [(a, b), (-b, a), (-a, -b), (b, -a)] {
                if !out.contains(&(x, y)) {
                    out.push((x, y));
                }
            }
        }
        out.sort();
        out
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "8" => Some(Connectivity::Eight),
            "16" => Some(Connectivity::Sixteen),
            "32" => Some(Connectivity::ThirtyTwo),
            _ => None,
        }
    }
}

/// Grid discretization of the metric `d_φ` with density `ρ^{−1}`: nodes on a
/// square `[−L, L]²`, edges weighted by Euclidean length over `ρ` at the
/// edge midpoint.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    half_width: f64,
    spacing: f64,
    n: usize,
    offsets: Vec<(i64, i64)>,
    /// `edge_cost[node * offsets.len() + o]`; infinite when the neighbour is off-grid.
    edge_cost: Vec<f64>,
    profile: RhoProfile,
    rho_min: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MetricGraph {
    pub fn new(field: &InducedRadiusField, half_width: f64, spacing: f64, connectivity: Connectivity) -> Result<Self> {
        if !(half_width > 0.0) || !(spacing > 0.0) || spacing > half_width {
            return Err(FockError::Numerical(format!(
                "graph needs 0 < spacing ≤ half width, got {spacing} and {half_width}"
            )));
        }
        let steps = (2.0 * half_width / spacing).round() as usize;
        let spacing = 2.0 * half_width / steps as f64;
        let n = steps + 1;
        let profile = field.profile(half_width * std::f64::consts::SQRT_2 + spacing, spacing.min(0.02))?;
        let offsets = Connectivity::offsets(connectivity);
        let mut edge_cost = vec![f64::INFINITY; n * n * offsets.len()];
        for i in 0..n {
            for j in 0..n {
                let p = Self::coord(half_width, spacing, i, j);
                for (o, &(di, dj)) in offsets.iter().enumerate() {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    let q = Self::coord(half_width, spacing, a as usize, b as usize);
                    let rho = profile.eval(0.5 * (p + q))?;
                    edge_cost[(i * n + j) * offsets.len() + o] = (q - p).norm() / rho;
                }
            }
        }
        let rho_min = profile.min_on(half_width * std::f64::consts::SQRT_2);
        Ok(Self {
            half_width,
            spacing,
            n,
            offsets,
            edge_cost,
            profile,
            rho_min,
        })
    }

    fn coord(half_width: f64, spacing: f64, i: usize, j: usize) -> Complex64 {
        Complex64::new(-half_width + i as f64 * spacing, -half_width + j as f64 * spacing)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn node(&self, idx: usize) -> Complex64 {
        Self::coord(self.half_width, self.spacing, idx / self.n, idx % self.n)
    }

    pub fn profile(&self) -> &RhoProfile {
        &self.profile
    }

    /// Discretization tolerance `h / min ρ` on the box.
    pub fn grid_tolerance(&self) -> f64 {
        self.spacing / self.rho_min
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re.abs() <= self.half_width && z.im.abs() <= self.half_width
    }

    fn check(&self, z: Complex64) -> Result<()> {
        if self.contains(z) && z.re.is_finite() && z.im.is_finite() {
            Ok(())
        } else {
            Err(FockError::OutOfDomain {
                point: z,
                detail: format!("outside the graph box [−{0}, {0}]²", self.half_width),
            })
        }
    }

    fn cell(&self, z: Complex64) -> (usize, usize) {
        let f = |x: f64| (((x + self.half_width) / self.spacing).floor().max(0.0) as usize).min(self.n - 2);
        (f(z.re), f(z.im))
    }

    /// Straight-segment cost from `z` to `w`, with `ρ` taken at the midpoint.
    fn link(&self, z: Complex64, w: Complex64) -> Result<f64> {
        let len = (w - z).norm();
        if len == 0.0 {
            return Ok(0.0);
        }
        Ok(len / self.profile.eval(0.5 * (z + w))?)
    }

    /// Nodes within `ANCHOR_REACH` cells of the cell holding `z`, with
    /// straight link costs.
    fn anchors(&self, z: Complex64) -> Result<Vec<(usize, f64)>> {
        let (i, j) = self.cell(z);
        let span = |c: usize| c.saturating_sub(ANCHOR_REACH)..=(c + 1 + ANCHOR_REACH).min(self.n - 1);
        let mut out = Vec::with_capacity((2 * ANCHOR_REACH + 2).pow(2));
        for a in span(i) {
            for b in span(j) {
                let idx = a * self.n + b;
                out.push((idx, self.link(z, self.node(idx))?));
            }
        }
        Ok(out)
    }

    fn neighbours(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (i, j) = ((node / self.n) as i64, (node % self.n) as i64);
        let k = self.offsets.len();
        self.offsets.iter().enumerate().filter_map(move |(o, &(di, dj))| {
            let cost = self.edge_cost[node * k + o];
            cost.is_finite().then(|| (((i + di) as usize) * self.n + (j + dj) as usize, cost))
        })
    }

    /// Dijkstra from the anchors of `source`; stops once every node in
    /// `targets` is settled or the frontier passes `limit`.
    fn dijkstra(&self, source: Complex64, targets: &[usize], limit: f64) -> Result<Vec<f64>> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut settled = vec![false; self.node_count()];
        let mut heap = BinaryHeap::new();
        for (idx, cost) in self.anchors(source)? {
            if cost < dist[idx] {
                dist[idx] = cost;
                heap.push(State { dist: cost, node: idx });
            }
        }
        let mut remaining = targets.len();
        while let Some(State { dist: d, node }) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            if d > limit {
                break;
            }
            if remaining > 0 && targets.contains(&node) {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            for (next, cost) in self.neighbours(node) {
                let nd = d + cost;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(State { dist: nd, node: next });
                }
            }
        }
        Ok(dist)
    }

    /// Shortest-path approximation of `d_φ(z, w)`.
    ///
    /// The path search always starts from the lexicographically smaller
    /// endpoint, so the result is exactly symmetric.
    pub fn metric_distance(&self, z: Complex64, w: Complex64) -> Result<f64> {
        self.check(z)?;
        self.check(w)?;
        if z == w {
            return Ok(0.0);
        }
        let (a, b) = match (z.re, z.im).partial_cmp(&(w.re, w.im)) {
            Some(Ordering::Greater) => (w, z),
            _ => (z, w),
        };
        let ends = self.anchors(b)?;
        let targets: Vec<usize> = ends.iter().map(|e| e.0).collect();
        let dist = self.dijkstra(a, &targets, f64::INFINITY)?;
        let mut best = ends.iter().map(|&(idx, c)| dist[idx] + c).fold(f64::INFINITY, f64::min);
        let (ca, cb) = (self.cell(a), self.cell(b));
        if ca.0.abs_diff(cb.0) <= ANCHOR_REACH && ca.1.abs_diff(cb.1) <= ANCHOR_REACH {
            best = best.min(self.link(a, b)?);
        }
        Ok(best)
    }

    /// Distances from `source` to every node, with the search cut at `limit`.
    pub fn distances_from(&self, source: Complex64, limit: f64) -> Result<Vec<f64>> {
        self.check(source)?;
        self.dijkstra(source, &[], limit)
    }

    /// Full distance field from the origin.
    pub fn distance_field(&self) -> Result<DistanceField<'_>> {
        self.distance_field_from(Complex64::new(0.0, 0.0))
    }

    /// Full distance field `d_φ(source, ·)`.
    pub fn distance_field_from(&self, source: Complex64) -> Result<DistanceField<'_>> {
        Ok(DistanceField {
            graph: self,
            source,
            dist: self.distances_from(source, f64::INFINITY)?,
        })
    }

    /// Owned distance field from the origin, for use inside symbols.
    pub fn owned_distance_field(self) -> Result<OwnedDistanceField> {
        let dist = self.distances_from(Complex64::new(0.0, 0.0), f64::INFINITY)?;
        Ok(OwnedDistanceField { graph: self, dist })
    }

    fn eval_from(&self, origin: Complex64, dist: &[f64], z: Complex64) -> Result<f64> {
        self.check(z)?;
        if z == origin {
            return Ok(0.0);
        }
        let mut best = self
            .anchors(z)?
            .iter()
            .map(|&(idx, c)| dist[idx] + c)
            .fold(f64::INFINITY, f64::min);
        let (ca, cb) = (self.cell(origin), self.cell(z));
        if ca.0.abs_diff(cb.0) <= ANCHOR_REACH && ca.1.abs_diff(cb.1) <= ANCHOR_REACH {
            best = best.min(self.link(origin, z)?);
        }
        Ok(best)
    }

    /// Supremum of `|f(z) − f(w)|` over the metric ball `d_φ(z, w) < r`,
    /// sampled at grid nodes and at the points where the ball boundary cuts
    /// the graph edges. The flag reports whether the ball reached the box edge.
    pub fn ball_oscillation<F>(&self, f: F, z: Complex64, r: f64) -> Result<(f64, bool)>
    where
        F: Fn(Complex64) -> Complex64,
    {
        self.check(z)?;
        let fz = f(z);
        let dist = self.dijkstra(z, &[], r)?;
        let mut sup: f64 = 0.0;
        let mut truncated = false;
        for (idx, cost) in self.anchors(z)? {
            if cost >= r {
                let p = z + (self.node(idx) - z) * (r / cost);
                sup = sup.max((f(p) - fz).norm());
            }
        }
        for (node, &d) in dist.iter().enumerate() {
            if !(d < r) {
                continue;
            }
            let p = self.node(node);
            sup = sup.max((f(p) - fz).norm());
            let (i, j) = (node / self.n, node % self.n);
            if i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1 {
                truncated = true;
            }
            for (next, cost) in self.neighbours(node) {
                if d + cost >= r {
                    let q = self.node(next);
                    let t = (r - d) / cost;
                    sup = sup.max((f(p + (q - p) * t) - fz).norm());
                }
            }
        }
        Ok((sup, truncated))
    }
}

/// `d_φ(source, ·)` on the graph box.
pub struct DistanceField<'a> {
    graph: &'a MetricGraph,
    source: Complex64,
    dist: Vec<f64>,
}

impl DistanceField<'_> {
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        self.graph.eval_from(self.source, &self.dist, z)
    }

    pub fn source(&self) -> Complex64 {
        self.source
    }

    /// `(node, distance)` for every grid node.
    pub fn nodes(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.dist.iter().enumerate().map(|(i, &d)| (self.graph.node(i), d))
    }
}

/// Owning variant of [`DistanceField`].
pub struct OwnedDistanceField {
    graph: MetricGraph,
    dist: Vec<f64>,
}

impl OwnedDistanceField {
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        self.graph.eval_from(Complex64::new(0.0, 0.0), &self.dist, z)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    /// Smallest distance from the origin to the box boundary.
    pub fn boundary_distance(&self) -> f64 {
        let n = self.graph.n;
        let mut best = f64::INFINITY;
        for k in 0..n {
            for idx in [k, (n - 1) * n + k, k * n, k * n + n - 1] {
                best = best.min(self.dist[idx]);
            }
        }
        best
    }
}
