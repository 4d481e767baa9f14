//! Computational domain and frequency lattice.
//!
//! The domain is the axis-aligned square (d=2) or cube (d=3) of side `side`
//! centered at the origin, split into `n` cells per axis. Interior unknowns
//! live at cell centers; boundary functions live at face midpoints and are
//! integrated with the midpoint rule. The polygonal boundary stands in for a
//! smooth one: corners change constants, not the structure of the pipeline.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Coordinates in up to three dimensions; components past `dim` are zero.
pub type Point = [f64; 3];

pub const MIN_RESOLUTION: usize = 8;

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Low,
    High,
}

/// A boundary face midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub position: Point,
    pub normal: Point,
    pub weight: f64,
    pub axis: usize,
    pub side: Side,
    /// Interior cell adjacent to the face (center at distance h/2).
    pub cell: usize,
    /// Next cell inward along the normal (center at distance 3h/2).
    pub inner: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub dimension: usize,
    pub resolution: usize,
    pub side: f64,
}

impl Default for DomainParams {
    fn default() -> Self {
        Self {
            dimension: 2,
            resolution: 64,
            side: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    n: usize,
    side: f64,
    h: f64,
    /// Cell-center coordinate along one axis, shared by all axes.
    axis: Vec<f64>,
    boundary: Vec<BoundaryNode>,
    radius_bound: f64,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.side == other.side
    }
}

impl Domain {
    pub fn new(params: DomainParams) -> Result<Self> {
        build_square_domain(params.dimension, params.resolution, params.side)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> DomainParams {
        DomainParams {
            dimension: self.dim,
            resolution: self.n,
            side: self.side,
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn axis_coords(&self) -> &[f64] {
        &self.axis
    }

    /// Multi-index of a cell (unused components are zero).
    pub fn cell_index(&self, cell: usize) -> [usize; 3] {
        let n = self.n;
        let mut idx = [0usize; 3];
        let mut rest = cell;
        for slot in idx.iter_mut().take(self.dim) {
            *slot = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn cell_at(&self, idx: [usize; 3]) -> usize {
        let n = self.n;
        (0..self.dim).rev().fold(0, |acc, a| acc * n + idx[a])
    }

    /// Linear stride of axis `a` in the cell numbering.
    pub fn stride(&self, a: usize) -> usize {
        self.n.pow(a as u32)
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let idx = self.cell_index(cell);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.axis[idx[a]];
        }
        x
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        (0..self.num_cells()).map(|c| self.cell_center(c)).collect()
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_weights(&self) -> Vec<f64> {
        self.boundary.iter().map(|b| b.weight).collect()
    }

    /// Midpoint-rule measure of the boundary.
    pub fn boundary_measure(&self) -> f64 {
        self.boundary.iter().map(|b| b.weight).sum()
    }

    /// L = max |x| over the interior nodes.
    pub fn radius_bound(&self) -> f64 {
        self.radius_bound
    }

    /// Number of cell layers between a cell and the nearest face
    /// (0 for a cell touching the boundary).
    pub fn depth(&self, cell: usize) -> usize {
        let idx = self.cell_index(cell);
        (0..self.dim)
            .map(|a| idx[a].min(self.n - 1 - idx[a]))
            .min()
            .unwrap_or(0)
    }

    /// Integrate a boundary function sampled at the face midpoints.
    pub fn integrate_boundary(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.boundary.iter().map(|b| b.weight * f(&b.position)).sum()
    }

    /// Short stable fingerprint of the discretization.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{}|{}|{:016x}", self.dim, self.n, self.side.to_bits()));
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Axis-aligned square/cube of side `side` centered at the origin.
pub fn build_square_domain(d: usize, n: usize, side: f64) -> Result<Domain> {
    if d != 2 && d != 3 {
        return Err(LabError::Dimension(d));
    }
    if n < MIN_RESOLUTION {
        return Err(LabError::Resolution {
            got: n,
            min: MIN_RESOLUTION,
        });
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(LabError::param("side", format!("must be positive, got {side}")));
    }
    let h = side / n as f64;
    let half = side / 2.0;
    let axis: Vec<f64> = (0..n).map(|i| -half + (i as f64 + 0.5) * h).collect();
    let radius_bound = axis[n - 1] * (d as f64).sqrt();

    let mut dom = Domain {
        dim: d,
        n,
        side,
        h,
        axis,
        boundary: Vec::with_capacity(2 * d * n.pow(d as u32 - 1)),
        radius_bound,
    };
    let weight = h.powi(d as i32 - 1);
    let others = n.pow(d as u32 - 1);
    for a in 0..d {
        for side_tag in [Side::Low, Side::High] {
            for t in 0..others {
                // enumerate the remaining axes in increasing order
                let mut idx = [0usize; 3];
                let mut rest = t;
                for b in (0..d).filter(|&b| b != a) {
                    idx[b] = rest % n;
                    rest /= n;
                }
                let (edge, next, sign) = match side_tag {
                    Side::Low => (0, 1, -1.0),
                    Side::High => (n - 1, n - 2, 1.0),
                };
                idx[a] = edge;
                let cell = dom.cell_at(idx);
                idx[a] = next;
                let inner = dom.cell_at(idx);
                let mut position = dom.cell_center(cell);
                position[a] = sign * half;
                let mut normal = [0.0; 3];
                normal[a] = sign;
                dom.boundary.push(BoundaryNode {
                    position,
                    normal,
                    weight,
                    axis: a,
                    side: side_tag,
                    cell,
                    inner,
                });
            }
        }
    }
    Ok(dom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierParams {
    pub p_max: f64,
    pub n_p: usize,
}

/// Symmetric product lattice of frequencies with spacing `2 p_max / n_p`.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    dim: usize,
    p_max: f64,
    n_p: usize,
    dp: f64,
    axis: Vec<f64>,
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.p_max == other.p_max && self.n_p == other.n_p
    }
}

impl FourierGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn spacing(&self) -> f64 {
        self.dp
    }

    pub fn weight(&self) -> f64 {
        self.dp.powi(self.dim as i32)
    }

    pub fn axis_coords(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.n_p.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice node by linear index; axis 0 varies fastest.
    pub fn node(&self, i: usize) -> Point {
        let mut p = [0.0; 3];
        let mut rest = i;
        for slot in p.iter_mut().take(self.dim) {
            *slot = self.axis[rest % self.n_p];
            rest /= self.n_p;
        }
        p
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Index of the node -p.
    pub fn mirror(&self, i: usize) -> usize {
        let np = self.n_p;
        let mut rest = i;
        let mut out = 0;
        let mut stride = 1;
        for _ in 0..self.dim {
            let j = rest % np;
            rest /= np;
            out += (np - 1 - j) * stride;
            stride *= np;
        }
        out
    }

    pub fn origin(&self) -> usize {
        let c = (self.n_p - 1) / 2;
        (0..self.dim).fold(0, |acc, _| acc * self.n_p + c)
    }
}

pub fn fourier_grid(dom: &Domain, p_max: f64, n_p: usize) -> Result<FourierGrid> {
    fourier_grid_dim(dom.dim(), p_max, n_p)
}

pub fn fourier_grid_dim(dim: usize, p_max: f64, n_p: usize) -> Result<FourierGrid> {
    if dim != 2 && dim != 3 {
        return Err(LabError::Dimension(dim));
    }
    if n_p % 2 == 0 || n_p == 0 {
        return Err(LabError::param("n_p", format!("must be odd, got {n_p}")));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(LabError::param("p_max", format!("must be positive, got {p_max}")));
    }
    let dp = 2.0 * p_max / n_p as f64;
    let c = (n_p as f64 - 1.0) / 2.0;
    let axis = (0..n_p).map(|j| (j as f64 - c) * dp).collect();
    Ok(FourierGrid {
        dim,
        p_max,
        n_p,
        dp,
        axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_boundary_counts_and_weights() {
        let dom = build_square_domain(2, 16, 1.0).unwrap();
        assert_eq!(dom.boundary().len(), 64);
        assert!(dom.boundary().iter().all(|b| b.weight == 1.0 / 16.0));
        assert_abs_diff_eq!(dom.boundary_measure(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn radius_bound_matches_corner_cell() {
        let dom = build_square_domain(2, 16, 1.0).unwrap();
        let h = dom.h();
        let expect = std::f64::consts::FRAC_1_SQRT_2 * (1.0 - h);
        assert_abs_diff_eq!(dom.radius_bound(), expect, epsilon = 1e-14);
        assert!(dom.radius_bound() < std::f64::consts::FRAC_1_SQRT_2);
        let max = dom
            .cell_centers()
            .iter()
            .map(norm)
            .fold(0.0_f64, f64::max);
        assert_eq!(max, dom.radius_bound());
    }

    #[test]
    fn cube_surface() {
        let dom = build_square_domain(3, 8, 1.0).unwrap();
        assert_eq!(dom.boundary().len(), 384);
        assert_abs_diff_eq!(dom.boundary_measure(), 6.0, epsilon = 1e-13);
    }

    #[test]
    fn normals_unit_and_inner_cells_adjacent() {
        for d in [2, 3] {
            let dom = build_square_domain(d, 8, 2.0).unwrap();
            for b in dom.boundary() {
                assert_abs_diff_eq!(norm(&b.normal), 1.0, epsilon = 1e-15);
                let xc = dom.cell_center(b.cell);
                let xi = dom.cell_center(b.inner);
                let h = dom.h();
                // adjacent cell center at h/2 inward, inner one at 3h/2
                for a in 0..d {
                    let along = (b.position[a] - xc[a]) * b.normal[a];
                    let along_inner = (b.position[a] - xi[a]) * b.normal[a];
                    if a == b.axis {
                        assert_abs_diff_eq!(along, h / 2.0, epsilon = 1e-14);
                        assert_abs_diff_eq!(along_inner, 1.5 * h, epsilon = 1e-14);
                    } else {
                        assert_eq!(b.position[a], xc[a]);
                    }
                }
            }
        }
    }

    #[test]
    fn odd_boundary_integral_vanishes() {
        let dom = build_square_domain(2, 32, 1.0).unwrap();
        let v = dom.integrate_boundary(|x| x[0]);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_square_domain(4, 16, 1.0), Err(LabError::Dimension(4))));
        assert!(matches!(
            build_square_domain(2, 4, 1.0),
            Err(LabError::Resolution { got: 4, .. })
        ));
        assert!(build_square_domain(2, 16, 0.0).is_err());
    }

    #[test]
    fn lattice_arithmetic() {
        let dom = build_square_domain(2, 16, 1.0).unwrap();
        let fg = fourier_grid(&dom, 10.0, 21).unwrap();
        assert_eq!(fg.len(), 441);
        assert_abs_diff_eq!(fg.spacing(), 20.0 / 21.0, epsilon = 1e-15);
        assert_eq!(fg.node(fg.origin()), [0.0; 3]);
        for i in 0..fg.len() {
            let p = fg.node(i);
            let q = fg.node(fg.mirror(i));
            for a in 0..3 {
                assert_eq!(p[a], -q[a]);
            }
        }
        assert_abs_diff_eq!(fg.weight(), (20.0_f64 / 21.0).powi(2), epsilon = 1e-15);
        let dom3 = build_square_domain(3, 8, 1.0).unwrap();
        assert_eq!(fourier_grid(&dom3, 6.0, 13).unwrap().len(), 2197);
        assert!(fourier_grid(&dom, 10.0, 20).is_err());
    }

    #[test]
    fn cell_numbering_roundtrip() {
        let dom = build_square_domain(3, 9, 1.0).unwrap();
        for c in [0, 5, 80, 400, dom.num_cells() - 1] {
            assert_eq!(dom.cell_at(dom.cell_index(c)), c);
        }
        assert_eq!(dom.stride(2), 81);
    }
}
