//! Discretized domains: tensor grids on intervals, radially reduced balls and
//! annuli, and 2D boxes, together with node masks for compact subsets and
//! exhaustions.
//!
//! All functionals in this crate are evaluated with midpoint quadrature per
//! cell and piecewise-linear nodal fields. A radial geometry with ambient
//! dimension `N` reduces integrals over balls/annuli to weighted 1D sums with
//! the volume weight `omega_{N-1} r^{N-1}`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A point in the plane; 1D geometries use `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Interval,
    Radial,
    Box2d,
}

/// Descriptor from which a [`Geometry`] is built. Construction is
/// deterministic: identical descriptors give bit-identical geometries.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    /// Interval `(start, end)` split into `cells` uniform cells. Both
    /// endpoints carry Dirichlet conditions.
    Interval { start: f64, end: f64, cells: usize },
    /// Radial reduction of a ball or annulus in dimension `dim` (1..=4).
    /// With `inner == 0` the origin node is interior (a full ball) unless
    /// `origin_excluded` marks it as boundary, as in punctured-domain
    /// scenarios.
    Radial {
        dim: u32,
        inner: f64,
        outer: f64,
        cells: usize,
        origin_excluded: bool,
    },
    /// Axis-aligned box `(x0,x1) x (y0,y1)` with a tensor grid.
    Box2d {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        cells_x: usize,
        cells_y: usize,
    },
}

#[derive(Debug, Clone)]
enum Grid {
    /// 1D line of nodes (interval or radial coordinate).
    Line { coords: Vec<f64> },
    /// Tensor grid; node index is `j * (nx + 1) + i`.
    Tensor2 { xs: Vec<f64>, ys: Vec<f64> },
}

/// Corner node ids of one cell.
#[derive(Debug, Clone, Copy)]
pub enum CellCorners {
    Two([usize; 2]),
    Four([usize; 4]),
}

impl CellCorners {
    pub fn as_slice(&self) -> &[usize] {
        match self {
            CellCorners::Two(n) => n,
            CellCorners::Four(n) => n,
        }
    }
}

/// An immutable discretized domain. Safe to share across threads.
#[derive(Debug)]
pub struct Geometry {
    kind: GeometryKind,
    dim: u32,
    grid: Grid,
    interior: Vec<bool>,
    cell_measures: Vec<f64>,
    cell_midpoints: Vec<Point>,
    spacing: f64,
}

/// Surface area of the unit sphere `S^{n-1}`, via the Gamma function at
/// half-integer arguments: `omega_{n-1} = 2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: u32) -> f64 {
    let half = f64::from(n) / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n)
}

/// Gamma(n/2) for positive integer n, by the recursion Gamma(z+1) = z Gamma(z)
/// from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
fn gamma_half_integer(n: u32) -> f64 {
    let mut z = f64::from(n) / 2.0;
    let mut acc = 1.0;
    while z > 1.5 {
        z -= 1.0;
        acc *= z;
    }
    if (z - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        // z == 1 or z == 1.5
        if (z - 1.5).abs() < 1e-12 {
            acc * 0.5 * std::f64::consts::PI.sqrt()
        } else {
            acc
        }
    }
}

/// Build a geometry from its descriptor.
pub fn build_geometry(spec: &GeometrySpec) -> Result<Arc<Geometry>> {
    match spec {
        GeometrySpec::Interval { start, end, cells } => {
            if *cells < 2 {
                return Err(Error::config(format!(
                    "interval resolution must be at least 2 cells, got {cells}"
                )));
            }
            if !(end > start) || !start.is_finite() || !end.is_finite() {
                return Err(Error::config(format!(
                    "degenerate interval bounds ({start}, {end})"
                )));
            }
            let n = *cells;
            let h = (end - start) / n as f64;
            let coords: Vec<f64> = (0..=n).map(|i| start + i as f64 * h).collect();
            let mut interior = vec![true; n + 1];
            interior[0] = false;
            interior[n] = false;
            let cell_measures: Vec<f64> =
                coords.windows(2).map(|w| w[1] - w[0]).collect();
            let cell_midpoints: Vec<Point> = coords
                .windows(2)
                .map(|w| Point::new(0.5 * (w[0] + w[1]), 0.0))
                .collect();
            Ok(Arc::new(Geometry {
                kind: GeometryKind::Interval,
                dim: 1,
                grid: Grid::Line { coords },
                interior,
                cell_measures,
                cell_midpoints,
                spacing: h,
            }))
        }
        GeometrySpec::Radial {
            dim,
            inner,
            outer,
            cells,
            origin_excluded,
        } => {
            if *cells < 2 {
                return Err(Error::config(format!(
                    "radial resolution must be at least 2 cells, got {cells}"
                )));
            }
            if !(*dim >= 1 && *dim <= 4) {
                return Err(Error::config(format!(
                    "radial ambient dimension must be 1..=4, got {dim}"
                )));
            }
            if !(outer > inner) || *inner < 0.0 || !outer.is_finite() {
                return Err(Error::config(format!(
                    "degenerate radial bounds ({inner}, {outer})"
                )));
            }
            let n = *cells;
            let h = (outer - inner) / n as f64;
            let coords: Vec<f64> = (0..=n).map(|i| inner + i as f64 * h).collect();
            let omega = unit_sphere_area(*dim);
            let cell_measures: Vec<f64> = coords
                .windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    omega * mid.powi(*dim as i32 - 1) * (w[1] - w[0])
                })
                .collect();
            let cell_midpoints: Vec<Point> = coords
                .windows(2)
                .map(|w| Point::new(0.5 * (w[0] + w[1]), 0.0))
                .collect();
            let mut interior = vec![true; n + 1];
            interior[n] = false;
            // The inner endpoint is boundary for annuli; for a full ball
            // (inner == 0) the origin node stays interior unless the
            // scenario excludes the origin from the domain.
            interior[0] = *inner == 0.0 && !origin_excluded;
            Ok(Arc::new(Geometry {
                kind: GeometryKind::Radial,
                dim: *dim,
                grid: Grid::Line { coords },
                interior,
                cell_measures,
                cell_midpoints,
                spacing: h,
            }))
        }
        GeometrySpec::Box2d {
            x0,
            x1,
            y0,
            y1,
            cells_x,
            cells_y,
        } => {
            if *cells_x < 2 || *cells_y < 2 {
                return Err(Error::config(format!(
                    "box resolution must be at least 2 cells per axis, got {cells_x}x{cells_y}"
                )));
            }
            if !(x1 > x0) || !(y1 > y0) {
                return Err(Error::config(format!(
                    "degenerate box bounds ({x0},{x1})x({y0},{y1})"
                )));
            }
            let (nx, ny) = (*cells_x, *cells_y);
            let hx = (x1 - x0) / nx as f64;
            let hy = (y1 - y0) / ny as f64;
            let xs: Vec<f64> = (0..=nx).map(|i| x0 + i as f64 * hx).collect();
            let ys: Vec<f64> = (0..=ny).map(|j| y0 + j as f64 * hy).collect();
            let mut interior = vec![false; (nx + 1) * (ny + 1)];
            for j in 1..ny {
                for i in 1..nx {
                    interior[j * (nx + 1) + i] = true;
                }
            }
            let mut cell_measures = Vec::with_capacity(nx * ny);
            let mut cell_midpoints = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    cell_measures.push((xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]));
                    cell_midpoints.push(Point::new(
                        0.5 * (xs[i] + xs[i + 1]),
                        0.5 * (ys[j] + ys[j + 1]),
                    ));
                }
            }
            Ok(Arc::new(Geometry {
                kind: GeometryKind::Box2d,
                dim: 2,
                grid: Grid::Tensor2 { xs, ys },
                interior,
                cell_measures,
                cell_midpoints,
                spacing: (hx * hx + hy * hy).sqrt(),
            }))
        }
    }
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    /// Ambient dimension `N` entering volume weights and Morrey moduli.
    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        match &self.grid {
            Grid::Line { coords } => coords.len(),
            Grid::Tensor2 { xs, ys } => xs.len() * ys.len(),
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cell_measures.len()
    }

    pub fn node_coord(&self, i: usize) -> Point {
        match &self.grid {
            Grid::Line { coords } => Point::new(coords[i], 0.0),
            Grid::Tensor2 { xs, ys } => {
                let nx = xs.len();
                Point::new(xs[i % nx], ys[i / nx])
            }
        }
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.cell_measures[c]
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    pub fn cell_midpoint(&self, c: usize) -> Point {
        self.cell_midpoints[c]
    }

    pub fn cell_corners(&self, c: usize) -> CellCorners {
        match &self.grid {
            Grid::Line { .. } => CellCorners::Two([c, c + 1]),
            Grid::Tensor2 { xs, .. } => {
                let nx = xs.len() - 1;
                let (i, j) = (c % nx, c / nx);
                let base = j * (nx + 1) + i;
                CellCorners::Four([base, base + 1, base + nx + 1, base + nx + 2])
            }
        }
    }

    /// Average of the corner nodal values; equals the bilinear interpolant at
    /// the cell midpoint.
    pub fn cell_average(&self, values: &[f64], c: usize) -> f64 {
        match self.cell_corners(c) {
            CellCorners::Two([a, b]) => 0.5 * (values[a] + values[b]),
            CellCorners::Four([a, b, d, e]) => {
                0.25 * (values[a] + values[b] + values[d] + values[e])
            }
        }
    }

    /// Cell-average gradient of the piecewise-(bi)linear nodal field.
    /// 1D geometries return the derivative in the first component.
    pub fn cell_gradient(&self, values: &[f64], c: usize) -> [f64; 2] {
        match &self.grid {
            Grid::Line { coords } => {
                let d = (values[c + 1] - values[c]) / (coords[c + 1] - coords[c]);
                [d, 0.0]
            }
            Grid::Tensor2 { xs, ys } => {
                let nx = xs.len() - 1;
                let (i, j) = (c % nx, c / nx);
                let base = j * (nx + 1) + i;
                let (v00, v10) = (values[base], values[base + 1]);
                let (v01, v11) = (values[base + nx + 1], values[base + nx + 2]);
                let hx = xs[i + 1] - xs[i];
                let hy = ys[j + 1] - ys[j];
                [
                    ((v10 + v11) - (v00 + v01)) / (2.0 * hx),
                    ((v01 + v11) - (v00 + v10)) / (2.0 * hy),
                ]
            }
        }
    }

    /// Maximum cell diameter.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total discrete measure (sum of cell measures).
    pub fn total_measure(&self) -> f64 {
        self.cell_measures.iter().sum()
    }

    /// Diameter of the node cloud.
    pub fn diameter(&self) -> f64 {
        match &self.grid {
            Grid::Line { coords } => coords[coords.len() - 1] - coords[0],
            Grid::Tensor2 { xs, ys } => {
                let dx = xs[xs.len() - 1] - xs[0];
                let dy = ys[ys.len() - 1] - ys[0];
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Structural compatibility check used to detect mixed-geometry usage.
    pub fn compatible(&self, other: &Geometry) -> bool {
        self.kind == other.kind
            && self.dim == other.dim
            && self.num_nodes() == other.num_nodes()
            && self.num_cells() == other.num_cells()
            && self.node_coord(0) == other.node_coord(0)
            && self.node_coord(self.num_nodes() - 1)
                == other.node_coord(other.num_nodes() - 1)
    }

    /// Distance from each node to the nearest boundary (non-interior) node.
    pub fn distance_to_boundary(&self) -> Vec<f64> {
        let boundary: Vec<Point> = (0..self.num_nodes())
            .filter(|&i| !self.interior[i])
            .map(|i| self.node_coord(i))
            .collect();
        (0..self.num_nodes())
            .map(|i| {
                let p = self.node_coord(i);
                boundary
                    .iter()
                    .map(|b| p.dist(b))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// A set of flagged nodes representing a compact subset of the domain.
/// A node belongs to the continuum set iff its coordinate lies in it; no
/// sub-cell geometry is tracked.
#[derive(Debug, Clone)]
pub struct SubsetMask {
    geom: Arc<Geometry>,
    flags: Vec<bool>,
    descriptor: String,
}

impl SubsetMask {
    pub fn new(geom: Arc<Geometry>, flags: Vec<bool>, descriptor: impl Into<String>) -> Self {
        assert_eq!(flags.len(), geom.num_nodes());
        SubsetMask {
            geom,
            flags,
            descriptor: descriptor.into(),
        }
    }

    pub fn empty(geom: Arc<Geometry>) -> Self {
        let n = geom.num_nodes();
        SubsetMask::new(geom, vec![false; n], "empty")
    }

    /// Nodes of the interior whose coordinate lies in the closed ball.
    pub fn ball(geom: &Arc<Geometry>, center: Point, radius: f64) -> Self {
        let flags: Vec<bool> = (0..geom.num_nodes())
            .map(|i| geom.is_interior(i) && geom.node_coord(i).dist(&center) <= radius)
            .collect();
        SubsetMask::new(
            Arc::clone(geom),
            flags,
            format!("ball(({:.6},{:.6}),{:.6})", center.x, center.y, radius),
        )
    }

    /// Interior nodes with radial coordinate in `[r0, r1]` (1D geometries).
    pub fn annulus(geom: &Arc<Geometry>, r0: f64, r1: f64) -> Self {
        let flags: Vec<bool> = (0..geom.num_nodes())
            .map(|i| {
                let r = geom.node_coord(i).x;
                geom.is_interior(i) && r >= r0 && r <= r1
            })
            .collect();
        SubsetMask::new(Arc::clone(geom), flags, format!("annulus({r0:.6},{r1:.6})"))
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn contains(&self, node: usize) -> bool {
        self.flags[node]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.iter().all(|&f| !f)
    }

    /// True when every flagged node is interior.
    pub fn inside_interior(&self) -> bool {
        self.flags
            .iter()
            .enumerate()
            .all(|(i, &f)| !f || self.geom.is_interior(i))
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.flags
            .iter()
            .zip(&other.flags)
            .all(|(&a, &b)| !a || b)
    }

    /// Node-wise complement within the interior.
    pub fn interior_complement(&self) -> SubsetMask {
        let flags: Vec<bool> = (0..self.geom.num_nodes())
            .map(|i| self.geom.is_interior(i) && !self.flags[i])
            .collect();
        SubsetMask::new(
            Arc::clone(&self.geom),
            flags,
            format!("complement({})", self.descriptor),
        )
    }

    pub fn intersect(&self, other: &SubsetMask, descriptor: impl Into<String>) -> SubsetMask {
        let flags: Vec<bool> = self
            .flags
            .iter()
            .zip(&other.flags)
            .map(|(&a, &b)| a && b)
            .collect();
        SubsetMask::new(Arc::clone(&self.geom), flags, descriptor)
    }

    /// Cells whose corner nodes all lie in the mask; the inner cell
    /// approximation used for integrals over the set.
    pub fn cell_flags(&self) -> Vec<bool> {
        (0..self.geom.num_cells())
            .map(|c| {
                self.geom
                    .cell_corners(c)
                    .as_slice()
                    .iter()
                    .all(|&n| self.flags[n])
            })
            .collect()
    }

    /// Discrete measure of the set (sum of measures of fully contained cells).
    pub fn measure(&self) -> f64 {
        self.cell_flags()
            .iter()
            .zip(self.geom.cell_measures())
            .filter(|(&inside, _)| inside)
            .map(|(_, &m)| m)
            .sum()
    }
}

/// Nested compact subsets growing toward the full domain. Element `k` keeps a
/// margin of `span / 2^(k+1)` from the boundary (a full radial ball instead
/// grows as balls of radius `outer / 2^(count+1-k)`).
pub fn exhaustion(geom: &Arc<Geometry>, count: usize) -> Result<Vec<SubsetMask>> {
    if count < 2 {
        return Err(Error::config(format!(
            "exhaustion needs at least 2 elements, got {count}"
        )));
    }
    let masks: Vec<SubsetMask> = match geom.kind() {
        GeometryKind::Radial if geom.is_interior(0) => {
            // Full ball: grow balls toward the outer radius.
            let outer = geom.node_coord(geom.num_nodes() - 1).x;
            (1..=count)
                .map(|k| {
                    let r = outer / 2f64.powi((count + 1 - k) as i32);
                    let mut m = SubsetMask::ball(geom, Point::new(0.0, 0.0), r);
                    m.descriptor = format!("exhaustion[{k}]=ball({r:.6})");
                    m
                })
                .collect()
        }
        _ => {
            let dist = geom.distance_to_boundary();
            let span = geom.diameter();
            (1..=count)
                .map(|k| {
                    let margin = span / 2f64.powi(k as i32 + 1);
                    let flags: Vec<bool> = (0..geom.num_nodes())
                        .map(|i| geom.is_interior(i) && dist[i] >= margin)
                        .collect();
                    SubsetMask::new(
                        Arc::clone(geom),
                        flags,
                        format!("exhaustion[{k}]=margin({margin:.6})"),
                    )
                })
                .collect()
        }
    };
    for (k, m) in masks.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::config(format!(
                "geometry too coarse to nest {count} exhaustion levels (level {} empty)",
                k + 1
            )));
        }
        if !m.inside_interior() {
            return Err(Error::config(
                "exhaustion element touches the boundary".to_string(),
            ));
        }
    }
    for w in masks.windows(2) {
        if !w[0].is_subset_of(&w[1]) || w[0].count() >= w[1].count() {
            return Err(Error::config(format!(
                "geometry too coarse to nest {count} exhaustion levels (levels not strictly nested)"
            )));
        }
    }
    Ok(masks)
}

/// Strategy descriptor for a finite family of compact sets. The family is a
/// documented finite surrogate for a supremum over all compact subsets; it
/// only lower-bounds that supremum.
#[derive(Debug, Clone)]
pub enum FamilyStrategy {
    /// Cartesian product of ball centers and radii.
    Balls { centers: Vec<Point>, radii: Vec<f64> },
    /// Regions where a nodal field is at least its q-quantile (computed over
    /// interior nodes), one mask per listed quantile.
    SublevelOfField { values: Vec<f64>, quantiles: Vec<f64> },
    /// Radial annuli given by (inner, outer) radius pairs.
    Annuli { pairs: Vec<(f64, f64)> },
}

/// Build a finite, deterministic, duplicate-free family of compact node masks
/// inside the interior.
pub fn set_family(geom: &Arc<Geometry>, strategy: &FamilyStrategy) -> Result<Vec<SubsetMask>> {
    let mut family: Vec<SubsetMask> = Vec::new();
    match strategy {
        FamilyStrategy::Balls { centers, radii } => {
            for c in centers {
                for &r in radii {
                    family.push(SubsetMask::ball(geom, *c, r));
                }
            }
        }
        FamilyStrategy::SublevelOfField { values, quantiles } => {
            if values.len() != geom.num_nodes() {
                return Err(Error::usage(
                    "field length does not match geometry".to_string(),
                ));
            }
            let mut interior_vals: Vec<f64> = (0..geom.num_nodes())
                .filter(|&i| geom.is_interior(i))
                .map(|i| values[i])
                .collect();
            interior_vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &q in quantiles {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::config(format!("quantile {q} outside [0,1]")));
                }
                let idx = ((interior_vals.len() - 1) as f64 * q).round() as usize;
                let level = interior_vals[idx];
                let flags: Vec<bool> = (0..geom.num_nodes())
                    .map(|i| geom.is_interior(i) && values[i] >= level)
                    .collect();
                family.push(SubsetMask::new(
                    Arc::clone(geom),
                    flags,
                    format!("levelset(q={q:.3},level={level:.6})"),
                ));
            }
        }
        FamilyStrategy::Annuli { pairs } => {
            for &(r0, r1) in pairs {
                if !(r1 > r0) {
                    return Err(Error::config(format!(
                        "annulus radii must satisfy r0 < r1, got ({r0}, {r1})"
                    )));
                }
                family.push(SubsetMask::annulus(geom, r0, r1));
            }
        }
    }
    family.retain(|m| !m.is_empty());
    // Deduplicate by flag pattern, keeping the first occurrence.
    let mut seen: Vec<Vec<bool>> = Vec::new();
    family.retain(|m| {
        if seen.iter().any(|s| s == m.flags()) {
            false
        } else {
            seen.push(m.flags().to_vec());
            true
        }
    });
    if family.is_empty() {
        return Err(Error::config("set family is empty".to_string()));
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_uniform_partition() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 4,
        })
        .unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_cells(), 4);
        for c in 0..4 {
            assert!((g.cell_measure(c) - 0.25).abs() < 1e-15);
        }
        assert!(!g.is_interior(0) && !g.is_interior(4));
        assert!(g.is_interior(2));
    }

    #[test]
    fn radial_shell_measures_match_midpoint_rule() {
        let g = build_geometry(&GeometrySpec::Radial {
            dim: 3,
            inner: 0.5,
            outer: 1.0,
            cells: 2,
            origin_excluded: false,
        })
        .unwrap();
        let om = unit_sphere_area(3);
        assert!((om - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        for (c, rbar) in [(0usize, 0.625f64), (1usize, 0.875f64)] {
            let expect = om * rbar * rbar * 0.25;
            assert!(
                (g.cell_measure(c) - expect).abs() < 1e-12,
                "cell {c}: {} vs {expect}",
                g.cell_measure(c)
            );
        }
    }

    #[test]
    fn radial_total_measure_converges_to_shell_volume() {
        // Exact volume of the shell 0.5 < r < 1 in R^3.
        let exact = 4.0 * std::f64::consts::PI / 3.0 * (1.0f64.powi(3) - 0.5f64.powi(3));
        let mut errs = Vec::new();
        for cells in [64usize, 128, 256] {
            let g = build_geometry(&GeometrySpec::Radial {
                dim: 3,
                inner: 0.5,
                outer: 1.0,
                cells,
                origin_excluded: false,
            })
            .unwrap();
            errs.push((g.total_measure() - exact).abs());
        }
        // Midpoint rule: error shrinks at least linearly under refinement.
        assert!(errs[1] <= errs[0] * 0.6 + 1e-14);
        assert!(errs[2] <= errs[1] * 0.6 + 1e-14);
    }

    #[test]
    fn box2d_partition() {
        let g = build_geometry(&GeometrySpec::Box2d {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
            cells_x: 2,
            cells_y: 2,
        })
        .unwrap();
        assert_eq!(g.num_nodes(), 9);
        assert_eq!(g.num_cells(), 4);
        for c in 0..4 {
            assert!((g.cell_measure(c) - 0.25).abs() < 1e-15);
        }
        let interior: Vec<usize> = (0..9).filter(|&i| g.is_interior(i)).collect();
        assert_eq!(interior, vec![4]);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(build_geometry(&GeometrySpec::Interval {
            start: 1.0,
            end: 1.0,
            cells: 4
        })
        .is_err());
        assert!(build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 1
        })
        .is_err());
        assert!(build_geometry(&GeometrySpec::Radial {
            dim: 3,
            inner: -0.5,
            outer: 1.0,
            cells: 4,
            origin_excluded: false
        })
        .is_err());
    }

    #[test]
    fn flat_total_measure_exact_under_refinement() {
        let coarse = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 8,
        })
        .unwrap();
        let fine = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 16,
        })
        .unwrap();
        assert_eq!(coarse.total_measure(), fine.total_measure());
        assert!((fine.spacing() - coarse.spacing() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn determinism_identical_specs() {
        let spec = GeometrySpec::Radial {
            dim: 2,
            inner: 0.0,
            outer: 1.0,
            cells: 32,
            origin_excluded: false,
        };
        let a = build_geometry(&spec).unwrap();
        let b = build_geometry(&spec).unwrap();
        assert_eq!(a.num_nodes(), b.num_nodes());
        for i in 0..a.num_nodes() {
            assert_eq!(a.node_coord(i).x.to_bits(), b.node_coord(i).x.to_bits());
        }
        for c in 0..a.num_cells() {
            assert_eq!(a.cell_measure(c).to_bits(), b.cell_measure(c).to_bits());
        }
    }

    #[test]
    fn exhaustion_interval_margins() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 16,
        })
        .unwrap();
        let ms = exhaustion(&g, 2).unwrap();
        // Level 1 covers [0.25, 0.75], level 2 covers [0.125, 0.875].
        for i in 0..g.num_nodes() {
            let x = g.node_coord(i).x;
            assert_eq!(ms[0].contains(i), (0.25..=0.75).contains(&x) && g.is_interior(i));
            assert_eq!(
                ms[1].contains(i),
                (0.125..=0.875).contains(&x) && g.is_interior(i)
            );
        }
        assert!(ms[0].is_subset_of(&ms[1]));
    }

    #[test]
    fn exhaustion_radial_ball_radii() {
        let g = build_geometry(&GeometrySpec::Radial {
            dim: 2,
            inner: 0.0,
            outer: 1.0,
            cells: 64,
            origin_excluded: false,
        })
        .unwrap();
        let ms = exhaustion(&g, 3).unwrap();
        let radii = [1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0];
        for (m, &r) in ms.iter().zip(&radii) {
            for i in 0..g.num_nodes() {
                let x = g.node_coord(i).x;
                assert_eq!(m.contains(i), x <= r && g.is_interior(i), "r={r} x={x}");
            }
        }
        for w in ms.windows(2) {
            assert!(w[0].is_subset_of(&w[1]) && w[0].count() < w[1].count());
        }
    }

    #[test]
    fn exhaustion_too_coarse_errors() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 2,
        })
        .unwrap();
        assert!(exhaustion(&g, 4).is_err());
    }

    #[test]
    fn family_balls_cardinality() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 64,
        })
        .unwrap();
        let fam = set_family(
            &g,
            &FamilyStrategy::Balls {
                centers: vec![
                    Point::new(0.25, 0.0),
                    Point::new(0.5, 0.0),
                    Point::new(0.75, 0.0),
                ],
                radii: vec![0.05, 0.1],
            },
        )
        .unwrap();
        assert_eq!(fam.len(), 6);
        for m in &fam {
            assert!(m.inside_interior());
        }
    }

    #[test]
    fn family_levelset_inner_half() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 64,
        })
        .unwrap();
        let dist = g.distance_to_boundary();
        let fam = set_family(
            &g,
            &FamilyStrategy::SublevelOfField {
                values: dist.clone(),
                quantiles: vec![0.5],
            },
        )
        .unwrap();
        assert_eq!(fam.len(), 1);
        // The q = 0.5 level set of the distance field keeps about half of the
        // interior nodes (brute-force count).
        let interior_count = (0..g.num_nodes()).filter(|&i| g.is_interior(i)).count();
        let kept = fam[0].count();
        assert!(
            kept * 2 >= interior_count - 2 && kept * 2 <= interior_count + 4,
            "kept {kept} of {interior_count}"
        );
    }

    #[test]
    fn family_annuli_cardinality() {
        let g = build_geometry(&GeometrySpec::Radial {
            dim: 3,
            inner: 0.0,
            outer: 1.0,
            cells: 64,
            origin_excluded: false,
        })
        .unwrap();
        let fam = set_family(
            &g,
            &FamilyStrategy::Annuli {
                pairs: vec![(0.2, 0.4), (0.5, 0.7)],
            },
        )
        .unwrap();
        assert_eq!(fam.len(), 2);
    }

    #[test]
    fn empty_family_rejected() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 8,
        })
        .unwrap();
        let res = set_family(
            &g,
            &FamilyStrategy::Balls {
                centers: vec![Point::new(10.0, 0.0)],
                radii: vec![0.01],
            },
        );
        assert!(res.is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-12);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area(4) - 2.0 * pi * pi).abs() < 1e-12);
    }
}
