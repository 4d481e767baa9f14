//! Complex frequencies on `k·k = 0`, the Faddeev Green function, the
//! Lippmann–Schwinger equation for `μ = e^{-ikx}ψ`, and the generalized
//! scattering amplitude `h(k,l) = (2π)^{-d} ∫ e^{-ilx} v ψ(x,k) dx`.
//!
//! The Green function is synthesized from the lattice symbol
//! `σ_h(ξ) = (4/h²) Σ sin²((ξ_i + k_i)h/2)` on an offset frequency lattice
//! of a periodic box four times the domain, so that the five/seven-point
//! Laplacian of `G = e^{ikx} g` is the lattice delta.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{dot, norm, Domain, Point};
use crate::linalg::{fft_nd, gmres};
use crate::potentials::Potential;

pub const VARIETY_TOL: f64 = 1e-12;
pub const GREEN_TOL: f64 = 1e-3;
pub const LS_TOL: f64 = 1e-8;

const OFFSETS: [f64; 4] = [0.5, 0.3, 0.7, 0.15];
const TORUS_FACTOR: usize = 4;
const NEUMANN_MAX_ITER: usize = 400;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 3000;
/// Level used for the empirical uniform bound `sup|μ| ≤ c`.
pub const MU_BOUND_LEVEL: f64 = 1.5;

type C64 = Complex64;

fn to_point(v: &[f64]) -> Result<Point> {
    if v.len() < 2 || v.len() > 3 {
        return Err(LabError::Dimension(v.len()));
    }
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    Ok(p)
}

fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// `k = a + ib` with `k·k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexFrequency {
    dim: usize,
    re: Point,
    im: Point,
}

impl ComplexFrequency {
    pub fn new(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(LabError::Mismatch {
                what: "frequency dimensions",
            });
        }
        let k = Self {
            dim: re.len(),
            re: to_point(re)?,
            im: to_point(im)?,
        };
        let defect = k.variety_defect();
        if defect > VARIETY_TOL {
            return Err(LabError::NotOnVariety { defect });
        }
        Ok(k)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            re: [0.0; 3],
            im: [0.0; 3],
        }
    }

    /// `|k·k| / (|a|² + |b|²)`.
    pub fn variety_defect(&self) -> f64 {
        let aa = dot(&self.re, &self.re);
        let bb = dot(&self.im, &self.im);
        let ab = dot(&self.re, &self.im);
        let scale = aa + bb;
        if scale == 0.0 {
            return 0.0;
        }
        ((aa - bb).powi(2) + 4.0 * ab * ab).sqrt() / scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn re(&self) -> &[f64] {
        &self.re[..self.dim]
    }

    pub fn im(&self) -> &[f64] {
        &self.im[..self.dim]
    }

    pub fn component(&self, a: usize) -> C64 {
        C64::new(self.re[a], self.im[a])
    }

    /// `ρ = |Im k|`.
    pub fn rho(&self) -> f64 {
        norm(&self.im)
    }

    /// `k·x` for real `x`.
    pub fn dot_real(&self, x: &Point) -> C64 {
        C64::new(dot(&self.re, x), dot(&self.im, x))
    }

    /// `e^{ik·x}`.
    pub fn plane_wave(&self, x: &Point) -> C64 {
        (C64::i() * self.dot_real(x)).exp()
    }

    pub fn neg(&self) -> Self {
        Self {
            dim: self.dim,
            re: scale(&self.re, -1.0),
            im: scale(&self.im, -1.0),
        }
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        let scale = 1.0 + norm(&self.re) + norm(&self.im);
        self.dim == other.dim
            && (0..3).all(|a| {
                (self.re[a] - other.re[a]).abs() <= 1e-12 * scale
                    && (self.im[a] - other.im[a]).abs() <= 1e-12 * scale
            })
    }

    fn describe(&self) -> String {
        format!("{:?} + i{:?}", self.re(), self.im())
    }
}

/// `(k, l)` on Σ×Σ with `Im k = Im l`; `p = k - l` is real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    dim: usize,
    k_re: Point,
    l_re: Point,
    im: Point,
}

impl ThetaPair {
    pub fn k(&self) -> ComplexFrequency {
        ComplexFrequency {
            dim: self.dim,
            re: self.k_re,
            im: self.im,
        }
    }

    pub fn l(&self) -> ComplexFrequency {
        ComplexFrequency {
            dim: self.dim,
            re: self.l_re,
            im: self.im,
        }
    }

    pub fn p(&self) -> Point {
        [
            self.k_re[0] - self.l_re[0],
            self.k_re[1] - self.l_re[1],
            self.k_re[2] - self.l_re[2],
        ]
    }

    pub fn rho(&self) -> f64 {
        norm(&self.im)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Unit vector orthogonal to `p`: quarter turn in the plane, or
/// `normalize(e_j × p)` with `e_j` the basis vector least aligned with `p`.
pub fn gamma(p: &[f64]) -> Result<Point> {
    let q = to_point(p)?;
    let r = norm(&q);
    if r == 0.0 {
        return Err(LabError::param("p", "γ(p) needs p ≠ 0"));
    }
    let u = scale(&q, 1.0 / r);
    if p.len() == 2 {
        return Ok([-u[1], u[0], 0.0]);
    }
    let mut j = 0;
    for a in 1..3 {
        if u[a].abs() < u[j].abs() {
            j = a;
        }
    }
    let mut e = [0.0; 3];
    e[j] = 1.0;
    let c = [
        e[1] * q[2] - e[2] * q[1],
        e[2] * q[0] - e[0] * q[2],
        e[0] * q[1] - e[1] * q[0],
    ];
    Ok(scale(&c, 1.0 / norm(&c)))
}

/// `k = p/2 + i(|p|/2)γ(p)`, `l = -p/2 + i(|p|/2)γ(p)`; `p = 0` gives `k = l = 0`.
pub fn born_pair(p: &[f64]) -> Result<ThetaPair> {
    let q = to_point(p)?;
    let dim = p.len();
    let r = norm(&q);
    if r == 0.0 {
        return Ok(ThetaPair {
            dim,
            k_re: [0.0; 3],
            l_re: [0.0; 3],
            im: [0.0; 3],
        });
    }
    let g = gamma(p)?;
    let pair = ThetaPair {
        dim,
        k_re: scale(&q, 0.5),
        l_re: scale(&q, -0.5),
        im: scale(&g, r / 2.0),
    };
    Ok(pair)
}

/// Θ-pair with `|Im k| = ρ` in three dimensions, using the frame
/// `(η₁, η₂)`: `Im k = ρη₁`, `Re k = p/2 + tη₂`, `t = √(ρ² - |p|²/4)`.
pub fn theta_pair_3d(p: &[f64], rho: f64, eta1: &[f64], eta2: &[f64]) -> Result<ThetaPair> {
    let q = to_point(p)?;
    let half = norm(&q) / 2.0;
    if p.len() == 2 {
        if rho > half * (1.0 + 1e-12) {
            return Err(LabError::VarietyRigidity {
                forced: half,
                requested: rho,
            });
        }
        return Err(LabError::Dimension(2));
    }
    if rho < half * (1.0 - 1e-12) {
        return Err(LabError::param(
            "rho",
            format!("ρ = {rho} below |p|/2 = {half}"),
        ));
    }
    let e1 = to_point(eta1)?;
    let e2 = to_point(eta2)?;
    let frame_tol = 1e-12;
    if (norm(&e1) - 1.0).abs() > frame_tol
        || (norm(&e2) - 1.0).abs() > frame_tol
        || dot(&e1, &e2).abs() > frame_tol
        || dot(&e1, &q).abs() > frame_tol * (1.0 + norm(&q))
        || dot(&e2, &q).abs() > frame_tol * (1.0 + norm(&q))
    {
        return Err(LabError::param(
            "frame",
            "η₁, η₂ must be orthonormal and orthogonal to p",
        ));
    }
    let t = (rho * rho - half * half).max(0.0).sqrt();
    let pair = ThetaPair {
        dim: 3,
        k_re: add(&scale(&q, 0.5), &scale(&e2, t)),
        l_re: add(&scale(&q, -0.5), &scale(&e2, t)),
        im: scale(&e1, rho),
    };
    for f in [pair.k(), pair.l()] {
        let defect = f.variety_defect();
        if defect > VARIETY_TOL {
            return Err(LabError::NotOnVariety { defect });
        }
    }
    Ok(pair)
}

/// Default frame for [`theta_pair_3d`]: `η₁ = γ(p)`, `η₂ = p̂ × η₁`.
pub fn default_frame(p: &[f64]) -> Result<(Point, Point)> {
    let q = to_point(p)?;
    let e1 = gamma(p)?;
    let u = scale(&q, 1.0 / norm(&q));
    let e2 = [
        u[1] * e1[2] - u[2] * e1[1],
        u[2] * e1[0] - u[0] * e1[2],
        u[0] * e1[1] - u[1] * e1[0],
    ];
    Ok((e1, e2))
}

/// Largest `|Im k|` the grid resolves with six points per oscillation.
pub fn resolvable_bound(dom: &Domain) -> f64 {
    PI / (3.0 * dom.h())
}

/// Faddeev Green function `g(x,k)` on the half-step lattice `x = J h/2`,
/// `|J_a| ≤ 2n`, which covers cell-to-cell and boundary-to-cell offsets.
#[derive(Debug, Clone)]
pub struct GreenTable {
    domain: Arc<Domain>,
    k: ComplexFrequency,
    values: Vec<C64>,
    offset: f64,
    retries: usize,
    torus: usize,
    min_symbol: f64,
    residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenRecord {
    pub offset: f64,
    pub retries: usize,
    pub torus_cells: usize,
    pub truncation: f64,
    pub min_symbol: f64,
    pub residual: f64,
}

fn lattice_symbol(xi: &[f64], k: &ComplexFrequency, h: f64) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (a, x) in xi.iter().enumerate() {
        let z = (C64::new(*x, 0.0) + k.component(a)) * (h / 2.0);
        let sn = z.sin();
        s += sn * sn;
    }
    s * (4.0 / (h * h))
}

pub fn faddeev_green(k: &ComplexFrequency, dom: Arc<Domain>) -> Result<GreenTable> {
    let d = dom.dim();
    if k.dim() != d {
        return Err(LabError::Mismatch { what: "dimensions" });
    }
    let bound = resolvable_bound(&dom);
    if k.rho() > bound {
        return Err(LabError::Unresolvable {
            rho: k.rho(),
            bound,
        });
    }
    let n = dom.resolution();
    let h = dom.h();
    let big = TORUS_FACTOR * n;
    let m2 = 2 * big;
    let xi_max = PI / h;
    let denom_tol = 1e-8 * xi_max * xi_max;
    let shape = vec![m2; d];
    let total: usize = shape.iter().product();
    let dxi = 2.0 * PI / (big as f64 * h);
    let mut worst = f64::INFINITY;
    for (retries, &theta) in OFFSETS.iter().enumerate() {
        let mut data = vec![C64::new(0.0, 0.0); total];
        let mut min_symbol = f64::INFINITY;
        let count = big.pow(d as u32);
        for flat in 0..count {
            let mut rem = flat;
            let mut slot = 0;
            let mut stride = 1;
            let mut xi = [0.0; 3];
            for x in xi.iter_mut().take(d) {
                let m = (rem % big) as i64 - (big / 2) as i64;
                rem /= big;
                *x = (m as f64 + theta) * dxi;
                slot += m.rem_euclid(m2 as i64) as usize * stride;
                stride *= m2;
            }
            let s = lattice_symbol(&xi[..d], k, h);
            min_symbol = min_symbol.min(s.norm());
            data[slot] = s.inv();
        }
        if min_symbol < denom_tol {
            worst = worst.min(min_symbol);
            log::debug!("symbol near zero at offset {theta}, retrying");
            continue;
        }
        fft_nd(&mut data, &shape, true);
        let span = 4 * n + 1;
        let len = span.pow(d as u32);
        let norm_factor = -1.0 / (big as f64 * h).powi(d as i32);
        let values: Vec<C64> = (0..len)
            .map(|flat| {
                let mut rem = flat;
                let mut slot = 0;
                let mut stride = 1;
                let mut jsum = 0i64;
                for _ in 0..d {
                    let j = (rem % span) as i64 - 2 * n as i64;
                    rem /= span;
                    jsum += j;
                    slot += j.rem_euclid(m2 as i64) as usize * stride;
                    stride *= m2;
                }
                let phase = C64::from_polar(1.0, PI * theta * jsum as f64 / big as f64);
                data[slot] * phase * norm_factor
            })
            .collect();
        let mut table = GreenTable {
            domain: dom,
            k: *k,
            values,
            offset: theta,
            retries,
            torus: big,
            min_symbol,
            residual: f64::NAN,
        };
        table.residual = table.delta_residual();
        return Ok(table);
    }
    Err(LabError::SymbolZero { min_abs: worst })
}

impl GreenTable {
    pub fn k(&self) -> &ComplexFrequency {
        &self.k
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn record(&self) -> GreenRecord {
        GreenRecord {
            offset: self.offset,
            retries: self.retries,
            torus_cells: self.torus,
            truncation: PI / self.domain.h(),
            min_symbol: self.min_symbol,
            residual: self.residual,
        }
    }

    fn span(&self) -> usize {
        4 * self.domain.resolution() + 1
    }

    /// `g` at the half-step offset `J h/2`.
    pub fn at_half(&self, j: [i64; 3]) -> C64 {
        let n2 = 2 * self.domain.resolution() as i64;
        let span = self.span();
        let mut flat = 0;
        let mut stride = 1;
        for &ja in j.iter().take(self.domain.dim()) {
            assert!(ja.abs() <= n2, "offset outside the Green table");
            flat += (ja + n2) as usize * stride;
            stride *= span;
        }
        self.values[flat]
    }

    /// `g` at an integer cell offset.
    pub fn at_cells(&self, j: [i64; 3]) -> C64 {
        self.at_half([2 * j[0], 2 * j[1], 2 * j[2]])
    }

    /// `g(x - y)` for grid points whose difference is a half-step multiple.
    pub fn between(&self, x: &Point, y: &Point) -> C64 {
        let s = 2.0 / self.domain.h();
        let j = [
            ((x[0] - y[0]) * s).round() as i64,
            ((x[1] - y[1]) * s).round() as i64,
            ((x[2] - y[2]) * s).round() as i64,
        ];
        self.at_half(j)
    }

    /// `G(x) = e^{ik·x} g(x)` at an integer cell offset.
    pub fn full_at_cells(&self, j: [i64; 3]) -> C64 {
        let h = self.domain.h();
        let x = [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h];
        self.k.plane_wave(&x) * self.at_cells(j)
    }

    /// Largest `h^d |Δ_h G - δ/h^d|` over cell offsets in the domain window.
    pub fn delta_residual(&self) -> f64 {
        let dom = &self.domain;
        let d = dom.dim();
        let n = dom.resolution() as i64;
        let h2 = dom.h() * dom.h();
        let vol = dom.cell_volume();
        let reach = n - 1;
        let side = (2 * reach + 1) as usize;
        let count = side.pow(d as u32);
        let mut worst = 0.0_f64;
        for flat in 0..count {
            let mut rem = flat;
            let mut j = [0i64; 3];
            for ja in j.iter_mut().take(d) {
                *ja = (rem % side) as i64 - reach;
                rem /= side;
            }
            let centre = self.full_at_cells(j);
            let mut lap = -2.0 * d as f64 * centre;
            for a in 0..d {
                for s in [-1, 1] {
                    let mut q = j;
                    q[a] += s;
                    lap += self.full_at_cells(q);
                }
            }
            let mut r = lap / h2 * vol;
            if j == [0, 0, 0] {
                r -= 1.0;
            }
            worst = worst.max(r.norm());
        }
        worst
    }

    /// Largest `|g(x)|` over nonzero cell offsets inside the domain window.
    pub fn max_off_origin(&self) -> f64 {
        let n = self.domain.resolution() as i64 - 1;
        let d = self.domain.dim();
        let side = (2 * n + 1) as usize;
        (0..side.pow(d as u32))
            .filter_map(|flat| {
                let mut rem = flat;
                let mut j = [0i64; 3];
                for ja in j.iter_mut().take(d) {
                    *ja = (rem % side) as i64 - n;
                    rem /= side;
                }
                (j != [0, 0, 0]).then(|| self.at_cells(j).norm())
            })
            .fold(0.0, f64::max)
    }
}

/// `T f = h^d Σ_y g(x - y) v(y) f(y)` over the cells, via zero-padded FFT.
pub struct GreenConvolution<'a> {
    green: &'a GreenTable,
    potential: &'a [f64],
    kernel_hat: Vec<C64>,
    shape: Vec<usize>,
}

impl<'a> GreenConvolution<'a> {
    pub fn new(green: &'a GreenTable, v: &'a Potential) -> Result<Self> {
        if **green.domain() != **v.domain() {
            return Err(LabError::Mismatch { what: "domains" });
        }
        let dom = green.domain();
        let d = dom.dim();
        let n = dom.resolution();
        let m = 2 * n;
        let shape = vec![m; d];
        let total = m.pow(d as u32);
        let mut kernel = vec![C64::new(0.0, 0.0); total];
        for (flat, slot) in kernel.iter_mut().enumerate() {
            let mut rem = flat;
            let mut j = [0i64; 3];
            let mut inside = true;
            for ja in j.iter_mut().take(d) {
                let t = (rem % m) as i64;
                rem /= m;
                *ja = if t < n as i64 { t } else { t - m as i64 };
                inside &= ja.abs() < n as i64;
            }
            if inside {
                *slot = green.at_cells(j);
            }
        }
        fft_nd(&mut kernel, &shape, false);
        let scale = dom.cell_volume() / total as f64;
        kernel.iter_mut().for_each(|z| *z *= scale);
        Ok(Self {
            green,
            potential: v.values(),
            kernel_hat: kernel,
            shape,
        })
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let dom = self.green.domain();
        let d = dom.dim();
        let n = dom.resolution();
        let m = 2 * n;
        let mut buf = vec![C64::new(0.0, 0.0); self.kernel_hat.len()];
        for cell in 0..dom.num_cells() {
            let v = self.potential[cell];
            if v != 0.0 {
                buf[padded_index(dom.cell_index(cell), m, d)] = f[cell] * v;
            }
        }
        fft_nd(&mut buf, &self.shape, false);
        buf.iter_mut()
            .zip(&self.kernel_hat)
            .for_each(|(b, k)| *b *= k);
        fft_nd(&mut buf, &self.shape, true);
        (0..dom.num_cells())
            .map(|cell| buf[padded_index(dom.cell_index(cell), m, d)])
            .collect()
    }

    /// Upper bound `max_x h^d Σ_y |g(x-y)| |v(y)|` for the operator norm in L∞.
    pub fn contraction_estimate(&self) -> f64 {
        let dom = self.green.domain();
        let vol = dom.cell_volume();
        let support: Vec<usize> = (0..dom.num_cells())
            .filter(|&c| self.potential[c] != 0.0)
            .collect();
        if support.is_empty() {
            return 0.0;
        }
        let probe: Vec<usize> = (0..dom.num_cells()).collect();
        probe
            .iter()
            .map(|&x| {
                let ix = dom.cell_index(x);
                support
                    .iter()
                    .map(|&y| {
                        let iy = dom.cell_index(y);
                        let j = [
                            ix[0] as i64 - iy[0] as i64,
                            ix[1] as i64 - iy[1] as i64,
                            ix[2] as i64 - iy[2] as i64,
                        ];
                        self.green.at_cells(j).norm() * self.potential[y].abs()
                    })
                    .sum::<f64>()
                    * vol
            })
            .fold(0.0, f64::max)
    }
}

fn padded_index(idx: [usize; 3], m: usize, d: usize) -> usize {
    let mut flat = 0;
    let mut stride = 1;
    for &i in idx.iter().take(d) {
        flat += i * stride;
        stride *= m;
    }
    flat
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMethod {
    Trivial,
    Neumann,
    Gmres,
}

/// `μ(x,k)` on the cells with its solve record.
#[derive(Debug, Clone)]
pub struct FaddeevField {
    k: ComplexFrequency,
    values: Vec<C64>,
    pub method: LsMethod,
    pub iterations: usize,
    pub residual: f64,
    pub contraction: f64,
}

impl FaddeevField {
    pub fn k(&self) -> &ComplexFrequency {
        &self.k
    }

    pub fn mu(&self) -> &[C64] {
        &self.values
    }

    pub fn sup_mu(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn sup_mu_minus_one(&self) -> f64 {
        self.values
            .iter()
            .map(|z| (z - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// `ψ = e^{ik·x} μ` at the cells.
    pub fn psi(&self, dom: &Domain) -> Vec<C64> {
        self.values
            .iter()
            .enumerate()
            .map(|(c, m)| self.k.plane_wave(&dom.cell_center(c)) * m)
            .collect()
    }
}

/// Solve `u = f + T u` in L∞ with the Neumann series or GMRES.
pub(crate) fn solve_second_kind(
    t: &GreenConvolution,
    rhs: &[C64],
    contraction: f64,
) -> Result<(Vec<C64>, LsMethod, usize, f64)> {
    if t.potential.iter().all(|&v| v == 0.0) {
        return Ok((rhs.to_vec(), LsMethod::Trivial, 0, 0.0));
    }
    let residual_of = |u: &[C64]| -> f64 {
        let tu = t.apply(u);
        u.iter()
            .zip(&tu)
            .zip(rhs)
            .map(|((a, b), f)| (a - b - f).norm())
            .fold(0.0, f64::max)
    };
    if contraction < 0.5 {
        let mut u = rhs.to_vec();
        for it in 1..=NEUMANN_MAX_ITER {
            let tu = t.apply(&u);
            let next: Vec<C64> = tu.iter().zip(rhs).map(|(a, b)| a + b).collect();
            let step = u
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            u = next;
            if step <= LS_TOL * 0.1 {
                let res = residual_of(&u);
                if res <= LS_TOL {
                    return Ok((u, LsMethod::Neumann, it, res));
                }
            }
        }
        log::debug!("Neumann series stalled, switching to GMRES");
    }
    let op = |u: &[C64]| -> Vec<C64> {
        let tu = t.apply(u);
        u.iter().zip(&tu).map(|(a, b)| a - b).collect()
    };
    let (u, stats) = gmres(op, rhs, rhs.to_vec(), LS_TOL, GMRES_RESTART, GMRES_MAX_ITER)?;
    let res = residual_of(&u);
    if res > LS_TOL {
        return Err(LabError::NoConvergence {
            iterations: stats.iterations,
            residual: res,
        });
    }
    Ok((u, LsMethod::Gmres, stats.iterations, res))
}

/// `μ = 1 + h^d Σ_y g(x-y,k) v(y) μ(y)` on the cells.
pub fn lippmann_schwinger(v: &Potential, green: &GreenTable) -> Result<FaddeevField> {
    let t = GreenConvolution::new(green, v)?;
    let contraction = t.contraction_estimate();
    let ones = vec![C64::new(1.0, 0.0); v.domain().num_cells()];
    let (values, method, iterations, residual) = solve_second_kind(&t, &ones, contraction)?;
    Ok(FaddeevField {
        k: *green.k(),
        values,
        method,
        iterations,
        residual,
        contraction,
    })
}

/// `ψ(x_b) = e^{ik·x_b}(1 + h^d Σ_y g(x_b - y) v(y) μ(y))` at the boundary nodes.
pub fn boundary_psi(v: &Potential, field: &FaddeevField, green: &GreenTable) -> Result<Vec<C64>> {
    if !field.k().approx_eq(green.k()) {
        return Err(LabError::FrequencyMismatch {
            expected: green.k().describe(),
            got: field.k().describe(),
        });
    }
    let dom = v.domain();
    let support = v.support();
    let vol = dom.cell_volume();
    Ok(dom
        .boundary()
        .iter()
        .map(|b| {
            let s: C64 = support
                .iter()
                .map(|&y| green.between(&b.position, &dom.cell_center(y)) * v.values()[y] * field.mu()[y])
                .sum();
            field.k().plane_wave(&b.position) * (1.0 + s * vol)
        })
        .collect())
}

/// Residual of `(-Δ_h + v)ψ = -Δ_h e^{ik·x}` at cells whose stencil stays in D,
/// relative to `max |vψ|`. The right side is the lattice defect of the
/// incident wave, `O(h²|k|⁴)`.
pub fn pde_residual(v: &Potential, field: &FaddeevField) -> f64 {
    let dom = v.domain();
    let psi = field.psi(dom);
    let h2 = dom.h() * dom.h();
    let d = dom.dim();
    let mut worst = 0.0_f64;
    let scale = psi
        .iter()
        .zip(v.values())
        .map(|(p, q)| (p * q).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for cell in 0..dom.num_cells() {
        if dom.depth(cell) == 0 {
            continue;
        }
        let x = dom.cell_center(cell);
        let mut lap = -2.0 * d as f64 * psi[cell];
        let mut lap_inc = -2.0 * d as f64 * field.k().plane_wave(&x);
        for a in 0..d {
            let s = dom.stride(a);
            lap += psi[cell + s] + psi[cell - s];
            let mut xp = x;
            xp[a] += dom.h();
            let mut xm = x;
            xm[a] -= dom.h();
            lap_inc += field.k().plane_wave(&xp) + field.k().plane_wave(&xm);
        }
        let r = -(lap - lap_inc) / h2 + v.values()[cell] * psi[cell];
        worst = worst.max(r.norm() / scale);
    }
    worst
}

/// One value of `h(k,l)` at `p = k - l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSample {
    pub pair: ThetaPair,
    pub h: C64,
    pub vhat: Option<C64>,
}

impl ScatteringSample {
    pub fn p(&self) -> Point {
        self.pair.p()
    }
}

/// `h(k,l) = (2π)^{-d} h^d Σ_x e^{ip·x} v(x) μ(x,k)`.
pub fn amplitude_h(v: &Potential, field: &FaddeevField, pair: &ThetaPair) -> Result<ScatteringSample> {
    if !field.k().approx_eq(&pair.k()) {
        return Err(LabError::FrequencyMismatch {
            expected: pair.k().describe(),
            got: field.k().describe(),
        });
    }
    let dom = v.domain();
    let p = pair.p();
    let d = dom.dim();
    let s: C64 = v
        .support()
        .into_iter()
        .map(|c| C64::from_polar(1.0, dot(&p, &dom.cell_center(c))) * v.values()[c] * field.mu()[c])
        .sum();
    Ok(ScatteringSample {
        pair: *pair,
        h: s * dom.cell_volume() / (2.0 * PI).powi(d as i32),
        vhat: None,
    })
}

/// `v̂(p) = (2π)^{-d} h^d Σ_x e^{ip·x} v(x)` at one frequency.
pub fn vhat_at(v: &Potential, p: &Point) -> C64 {
    let dom = v.domain();
    let s: C64 = v
        .support()
        .into_iter()
        .map(|c| C64::from_polar(v.values()[c], dot(p, &dom.cell_center(c))))
        .sum();
    s * dom.cell_volume() / (2.0 * PI).powi(dom.dim() as i32)
}

/// Green table, μ and `h` at one pair.
pub fn scatter_direct(v: &Potential, pair: &ThetaPair) -> Result<ScatteringSample> {
    let k = pair.k();
    if v.is_zero() {
        return Ok(ScatteringSample {
            pair: *pair,
            h: C64::new(0.0, 0.0),
            vhat: Some(C64::new(0.0, 0.0)),
        });
    }
    let g = faddeev_green(&k, v.domain().clone())?;
    let field = lippmann_schwinger(v, &g)?;
    let mut s = amplitude_h(v, &field, pair)?;
    s.vhat = Some(vhat_at(v, &pair.p()));
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub rho: f64,
    pub sup_mu_minus_one: f64,
    pub sup_mu: f64,
    pub h_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub p: Vec<f64>,
    pub rows: Vec<DecayRow>,
    /// Smallest tested ρ from which on `sup|μ| ≤ 1.5`.
    pub rho_uniform: Option<f64>,
}

/// `(ρ, sup|μ-1|, |h - v̂(p)|)` along Θ-pairs with `k - l = p`, `|Im k| = ρ`.
pub fn asymptotic_diagnostic(v: &Potential, p: &[f64], rhos: &[f64]) -> Result<DecayTable> {
    let dom = v.domain();
    if dom.dim() != 3 {
        return Err(LabError::param(
            "dimension",
            "large-|Im k| limits at fixed p exist only for d = 3",
        ));
    }
    let q = to_point(p)?;
    let (e1, e2) = if norm(&q) == 0.0 {
        ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    } else {
        default_frame(p)?
    };
    let vhat = vhat_at(v, &q);
    let mut rows = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let pair = theta_pair_3d(p, rho, &e1, &e2)?;
        let row = if v.is_zero() {
            DecayRow {
                rho,
                sup_mu_minus_one: 0.0,
                sup_mu: 1.0,
                h_gap: 0.0,
            }
        } else {
            let g = faddeev_green(&pair.k(), dom.clone())?;
            let field = lippmann_schwinger(v, &g)?;
            let s = amplitude_h(v, &field, &pair)?;
            DecayRow {
                rho,
                sup_mu_minus_one: field.sup_mu_minus_one(),
                sup_mu: field.sup_mu(),
                h_gap: (s.h - vhat).norm(),
            }
        };
        rows.push(row);
    }
    let mut rho_uniform = None;
    for row in rows.iter().rev() {
        if row.sup_mu <= MU_BOUND_LEVEL {
            rho_uniform = Some(row.rho);
        } else {
            break;
        }
    }
    Ok(DecayTable {
        p: p.to_vec(),
        rows,
        rho_uniform,
    })
}

/// CSV with columns `p1..pd, rho, re_h, im_h, re_vhat, im_vhat`.
pub fn write_scattering_csv(path: &Path, dim: usize, samples: &[ScatteringSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=dim).map(|a| format!("p{a}")).collect();
    header.extend(["rho", "re_h", "im_h", "re_vhat", "im_vhat"].map(String::from));
    w.write_record(&header)?;
    for s in samples {
        let p = s.p();
        let mut row: Vec<String> = p[..dim].iter().map(|x| format!("{x:.17e}")).collect();
        let vh = s.vhat.unwrap_or(C64::new(f64::NAN, f64::NAN));
        for x in [s.pair.rho(), s.h.re, s.h.im, vh.re, vh.im] {
            row.push(format!("{x:.17e}"));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_square_domain;
    use crate::potentials::{sample_potential, PotentialSpec};

    #[test]
    fn planar_born_pair_example() {
        let pair = born_pair(&[1.0, 0.0]).unwrap();
        let k = pair.k();
        assert_eq!(k.re(), &[0.5, 0.0]);
        assert_eq!(k.im(), &[0.0, 0.5]);
        assert_eq!(pair.l().re(), &[-0.5, 0.0]);
        assert_eq!(k.variety_defect(), 0.0);
    }

    #[test]
    fn zero_frequency_pair() {
        let pair = born_pair(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pair.k(), ComplexFrequency::zero(3));
        assert_eq!(pair.l(), ComplexFrequency::zero(3));
    }

    #[test]
    fn gamma_is_orthogonal() {
        for p in [[0.3, -1.7, 2.2], [1.0, 1.0, 1.0], [0.0, 0.0, -4.0], [5.0, 1e-9, 0.2]] {
            let g = gamma(&p).unwrap();
            assert!(dot(&g, &to_point(&p).unwrap()).abs() <= 1e-15 * norm(&p));
            assert!((norm(&g) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spatial_pair_example() {
        let pair = theta_pair_3d(&[1.0, 0.0, 0.0], 1.0, &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        let k = pair.k();
        assert_eq!(k.re()[0], 0.5);
        assert_eq!(k.im(), &[0.0, 1.0, 0.0]);
        assert!((k.re()[2] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(k.variety_defect() < 1e-15);
    }

    #[test]
    fn theta_pair_reduces_to_born_pair() {
        let p = [0.4, -1.1, 0.7];
        let (e1, e2) = default_frame(&p).unwrap();
        let half = norm(&to_point(&p).unwrap()) / 2.0;
        let a = theta_pair_3d(&p, half, &e1, &e2).unwrap();
        let b = born_pair(&p).unwrap();
        assert!(a.k().approx_eq(&b.k()) && a.l().approx_eq(&b.l()));
    }

    #[test]
    fn planar_rigidity_and_low_rho_rejected() {
        assert!(matches!(
            theta_pair_3d(&[1.0, 0.0], 2.0, &[0.0, 1.0], &[1.0, 0.0]),
            Err(LabError::VarietyRigidity { .. })
        ));
        let (e1, e2) = default_frame(&[2.0, 0.0, 0.0]).unwrap();
        assert!(theta_pair_3d(&[2.0, 0.0, 0.0], 0.5, &e1, &e2).is_err());
    }

    #[test]
    fn off_variety_rejected() {
        assert!(matches!(
            ComplexFrequency::new(&[1.0, 0.0], &[0.0, 1.1]),
            Err(LabError::NotOnVariety { .. })
        ));
    }

    #[test]
    fn green_is_lattice_fundamental_solution() {
        let dom = Arc::new(build_square_domain(2, 16, 1.0).unwrap());
        let pair = born_pair(&[3.0, 1.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom).unwrap();
        assert!(g.record().residual < 1e-9, "{}", g.record().residual);
    }

    #[test]
    fn unresolvable_rejected() {
        let dom = Arc::new(build_square_domain(2, 8, 1.0).unwrap());
        let pair = born_pair(&[40.0, 0.0]).unwrap();
        assert!(matches!(
            faddeev_green(&pair.k(), dom),
            Err(LabError::Unresolvable { .. })
        ));
    }

    #[test]
    fn zero_potential_gives_unit_mu() {
        let dom = Arc::new(build_square_domain(2, 16, 1.0).unwrap());
        let v = Potential::zero(dom.clone(), 3).unwrap();
        let pair = born_pair(&[2.0, 0.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom).unwrap();
        let f = lippmann_schwinger(&v, &g).unwrap();
        assert!(f.mu().iter().all(|z| *z == C64::new(1.0, 0.0)));
        assert_eq!(amplitude_h(&v, &f, &pair).unwrap().h, C64::new(0.0, 0.0));
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let dom = Arc::new(build_square_domain(2, 12, 1.0).unwrap());
        let v = sample_potential(&PotentialSpec::compact(1.0, &[0.05, 0.0], 0.3), dom.clone(), 3)
            .unwrap();
        let pair = born_pair(&[2.0, 1.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom.clone()).unwrap();
        let t = GreenConvolution::new(&g, &v).unwrap();
        let f: Vec<C64> = (0..dom.num_cells())
            .map(|c| C64::new((c as f64).sin(), (c as f64 * 0.3).cos()))
            .collect();
        let fast = t.apply(&f);
        for x in (0..dom.num_cells()).step_by(11) {
            let direct: C64 = (0..dom.num_cells())
                .map(|y| g.between(&dom.cell_center(x), &dom.cell_center(y)) * v.values()[y] * f[y])
                .sum::<C64>()
                * dom.cell_volume();
            assert!((fast[x] - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn mismatched_frequency_rejected() {
        let dom = Arc::new(build_square_domain(2, 12, 1.0).unwrap());
        let v = sample_potential(&PotentialSpec::compact(0.1, &[0.0, 0.0], 0.2), dom.clone(), 3)
            .unwrap();
        let a = born_pair(&[2.0, 0.0]).unwrap();
        let b = born_pair(&[0.0, 2.0]).unwrap();
        let g = faddeev_green(&a.k(), dom).unwrap();
        let f = lippmann_schwinger(&v, &g).unwrap();
        assert!(matches!(
            amplitude_h(&v, &f, &b),
            Err(LabError::FrequencyMismatch { .. })
        ));
    }
}
