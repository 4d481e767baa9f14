//! Forward problem: Dirichlet solves for `-Δψ + vψ = 0`, the Dirichlet
//! eigenvalue guard, and the Dirichlet-to-Neumann map on the boundary nodes.
//!
//! Interior unknowns live at cell centers. Boundary data sits on face
//! midpoints, half a cell away from the first layer, so the rows next to the
//! boundary use the three-point non-uniform second difference
//! (exact on quadratics). Normal derivatives use the one-sided quadratic
//! through the boundary node and the two nearest cells.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{BoundaryNode, Domain, Side};
use crate::linalg::{BandLu, BandMatrix};
use crate::potentials::Potential;

/// Relative residual accepted for a Dirichlet solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Magic header of the binary kernel format.
pub const BINARY_MAGIC: &[u8; 8] = b"GDTN0001";

const GUARD_FACTOR: f64 = 10.0;
const GUARD_MAX_ITER: usize = 500;

/// Assembled discrete operator `-Δ_h + v` with its factorization.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    domain: Arc<Domain>,
    matrix: BandMatrix,
    lu: Option<BandLu>,
}

fn axis_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        0.75
    } else {
        1.0
    }
}

impl DirichletOperator {
    pub fn new(v: &Potential) -> Self {
        let dom = v.domain().clone();
        let (n, d) = (dom.resolution(), dom.dim());
        let h2 = dom.h() * dom.h();
        let band = dom.stride(d - 1);
        let mut m = BandMatrix::zeros(dom.num_cells(), band, band);
        for cell in 0..dom.num_cells() {
            let idx = dom.cell_index(cell);
            let mut diag = v.values()[cell];
            for a in 0..d {
                let s = dom.stride(a);
                let i = idx[a];
                if i == 0 {
                    diag += 4.0 / h2;
                    m.add(cell, cell + s, -4.0 / (3.0 * h2));
                } else if i == n - 1 {
                    diag += 4.0 / h2;
                    m.add(cell, cell - s, -4.0 / (3.0 * h2));
                } else {
                    diag += 2.0 / h2;
                    m.add(cell, cell + s, -1.0 / h2);
                    m.add(cell, cell - s, -1.0 / h2);
                }
            }
            m.add(cell, cell, diag);
        }
        let lu = m.factor().ok();
        Self {
            domain: dom,
            matrix: m,
            lu,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.matvec(u)
    }

    /// Weights `W` with `W·A` symmetric; the spectrum is therefore real.
    pub fn symmetrizer(&self) -> Vec<f64> {
        let dom = &self.domain;
        let n = dom.resolution();
        (0..dom.num_cells())
            .map(|c| {
                let idx = dom.cell_index(c);
                (0..dom.dim()).map(|a| axis_weight(idx[a], n)).product()
            })
            .collect()
    }

    fn factor(&self) -> Result<&BandLu> {
        self.lu.as_ref().ok_or_else(|| LabError::Singular {
            context: "Dirichlet operator".into(),
        })
    }

    /// Right-hand side contributed by boundary values `f`.
    pub fn boundary_rhs(&self, f: &[f64]) -> Vec<f64> {
        let dom = &self.domain;
        let h2 = dom.h() * dom.h();
        let mut rhs = vec![0.0; dom.num_cells()];
        for (b, fb) in dom.boundary().iter().zip(f) {
            rhs[b.cell] += 8.0 / (3.0 * h2) * fb;
        }
        rhs
    }

    /// Interior field with boundary values `f` (one value per boundary node).
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.domain.boundary().len() {
            return Err(LabError::Mismatch {
                what: "boundary vectors",
            });
        }
        let rhs = self.boundary_rhs(f);
        let lu = self.factor()?;
        let u = lu.solve(&rhs);
        let res = relative_residual(&self.matrix.matvec(&u), &rhs);
        if !(res <= SOLVE_RESIDUAL_TOL) {
            return Err(LabError::Singular {
                context: format!("Dirichlet residual {res:e}"),
            });
        }
        Ok(u)
    }

    /// Outward normal derivative at every boundary node.
    pub fn normal_derivative(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let h = self.domain.h();
        self.domain
            .boundary()
            .iter()
            .zip(f)
            .map(|(b, fb)| outward_derivative(b, *fb, u, h))
            .collect()
    }
}

fn outward_derivative(b: &BoundaryNode, f: f64, u: &[f64], h: f64) -> f64 {
    (8.0 / 3.0 * f - 3.0 * u[b.cell] + u[b.inner] / 3.0) / h
}

fn relative_residual(au: &[f64], rhs: &[f64]) -> f64 {
    let scale = rhs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let r = au
        .iter()
        .zip(rhs)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Solve the Dirichlet problem `-Δψ + vψ = 0`, `ψ = f` on the boundary.
pub fn solve_dirichlet(v: &Potential, f: &[f64]) -> Result<Vec<f64>> {
    let guard = dirichlet_guard(v);
    if !guard.passed {
        return Err(guard.failure());
    }
    DirichletOperator::new(v).solve(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    /// Smallest-magnitude eigenvalue of the discrete Dirichlet operator.
    pub eigenvalue: f64,
    pub threshold: f64,
    pub margin: f64,
    pub passed: bool,
    pub iterations: usize,
}

impl GuardReport {
    pub fn failure(&self) -> LabError {
        LabError::GuardFailure {
            eigenvalue: self.eigenvalue,
            threshold: self.threshold,
        }
    }
}

/// `10 h² λ₁`, with λ₁ = dπ²/side² the lowest Dirichlet eigenvalue of -Δ.
pub fn guard_threshold(dom: &Domain) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    GUARD_FACTOR * dom.h().powi(2) * dom.dim() as f64 * pi2 / dom.side().powi(2)
}

/// Inverse iteration for the eigenvalue of `-Δ_h + v` closest to zero.
pub fn dirichlet_guard(v: &Potential) -> GuardReport {
    guard_for(&DirichletOperator::new(v))
}

fn guard_for(op: &DirichletOperator) -> GuardReport {
    let threshold = guard_threshold(&op.domain);
    let report = |eigenvalue: f64, iterations| GuardReport {
        eigenvalue,
        threshold,
        margin: eigenvalue.abs() - threshold,
        passed: eigenvalue.abs() > threshold,
        iterations,
    };
    let Ok(lu) = op.factor() else {
        return report(0.0, 0);
    };
    let w = op.symmetrizer();
    let wdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&w).map(|((x, y), s)| x * y * s).sum() };
    // fixed start vector with components along every mode
    let mut x: Vec<f64> = (0..w.len())
        .map(|i| 1.0 + 0.1 * ((i as f64) * 0.7548776662).sin())
        .collect();
    let nx = wdot(&x, &x).sqrt();
    x.iter_mut().for_each(|t| *t /= nx);
    let mut lambda = f64::NAN;
    for it in 1..=GUARD_MAX_ITER {
        let y = lu.solve(&x);
        // Rayleigh quotient of A^{-1} in the W inner product
        let mu = wdot(&x, &y);
        let ny = wdot(&y, &y).sqrt();
        if !ny.is_finite() || ny == 0.0 {
            return report(0.0, it);
        }
        let next = 1.0 / mu;
        x = y.into_iter().map(|t| t / ny).collect();
        let converged = (next - lambda).abs() <= 1e-12 * next.abs();
        lambda = next;
        if converged {
            return report(lambda, it);
        }
    }
    report(lambda, GUARD_MAX_ITER)
}

/// Conditioning record of a kernel assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub pivot_ratio: f64,
    pub max_residual: f64,
}

/// Dense boundary kernel `K` with `(Φf)_i = Σ_j K_ij f_j w_j`.
#[derive(Debug, Clone)]
pub struct DtnMap {
    domain: Arc<Domain>,
    kernel: Vec<f64>,
    guard: Option<GuardReport>,
    record: Option<SolverRecord>,
}

pub fn dtn_map(v: &Potential) -> Result<DtnMap> {
    let op = DirichletOperator::new(v);
    let guard = guard_for(&op);
    if !guard.passed {
        return Err(guard.failure());
    }
    let dom = op.domain.clone();
    let lu = op.factor()?;
    let nb = dom.boundary().len();
    let h2 = dom.h() * dom.h();
    let column = |j: usize| -> (Vec<f64>, f64) {
        let b = &dom.boundary()[j];
        let mut rhs = vec![0.0; dom.num_cells()];
        rhs[b.cell] = 8.0 / (3.0 * h2) / b.weight;
        let u = lu.solve(&rhs);
        let res = relative_residual(&op.matrix.matvec(&u), &rhs);
        let mut f = vec![0.0; nb];
        f[j] = 1.0 / b.weight;
        (op.normal_derivative(&u, &f), res)
    };
    #[cfg(feature = "parallel")]
    let cols: Vec<(Vec<f64>, f64)> = (0..nb).into_par_iter().map(column).collect();
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<(Vec<f64>, f64)> = (0..nb).map(column).collect();

    let max_residual = cols.iter().fold(0.0_f64, |m, c| m.max(c.1));
    if !(max_residual <= SOLVE_RESIDUAL_TOL) {
        return Err(LabError::Singular {
            context: format!("DtN column residual {max_residual:e}"),
        });
    }
    let mut kernel = vec![0.0; nb * nb];
    for (j, (col, _)) in cols.iter().enumerate() {
        for (i, val) in col.iter().enumerate() {
            kernel[i * nb + j] = *val;
        }
    }
    Ok(DtnMap {
        domain: dom,
        kernel,
        guard: Some(guard),
        record: Some(SolverRecord {
            pivot_ratio: lu.pivot_ratio(),
            max_residual,
        }),
    })
}

impl DtnMap {
    /// Wrap a raw kernel (row-major, boundary nodes × boundary nodes).
    pub fn from_kernel(domain: Arc<Domain>, kernel: Vec<f64>) -> Result<Self> {
        let nb = domain.boundary().len();
        if kernel.len() != nb * nb {
            return Err(LabError::Mismatch {
                what: "boundary grids",
            });
        }
        Ok(Self {
            domain,
            kernel,
            guard: None,
            record: None,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.boundary().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.len() + j]
    }

    pub fn guard(&self) -> Option<&GuardReport> {
        self.guard.as_ref()
    }

    pub fn record(&self) -> Option<&SolverRecord> {
        self.record.as_ref()
    }

    /// `(Φf)_i = Σ_j K_ij f_j w_j`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let nb = self.len();
        let w = self.domain.boundary_weights();
        (0..nb)
            .map(|i| {
                let row = &self.kernel[i * nb..(i + 1) * nb];
                row.iter().zip(f).zip(&w).map(|((k, x), wj)| k * x * wj).sum()
            })
            .collect()
    }

    /// Kernel of `self - other`.
    pub fn difference(&self, other: &DtnMap) -> Result<DtnMap> {
        if self.domain != other.domain {
            return Err(LabError::Mismatch { what: "domains" });
        }
        let kernel = self
            .kernel
            .iter()
            .zip(&other.kernel)
            .map(|(a, b)| a - b)
            .collect();
        DtnMap::from_kernel(self.domain.clone(), kernel)
    }

    /// `L∞ → L∞` norm: `max_i Σ_j |K_ij| w_j`.
    pub fn linf_norm(&self) -> f64 {
        let nb = self.len();
        let w = self.domain.boundary_weights();
        (0..nb)
            .map(|i| {
                self.kernel[i * nb..(i + 1) * nb]
                    .iter()
                    .zip(&w)
                    .map(|(k, wj)| k.abs() * wj)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `max |K_ij - K_ji| / max |K|`. On a square this is set by the nodes
    /// beside each corner and stays near 5% as `h` shrinks.
    pub fn symmetry_defect(&self) -> f64 {
        let nb = self.len();
        let scale = self.kernel.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..nb {
            for j in i + 1..nb {
                worst = worst.max((self.entry(i, j) - self.entry(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Singular values of `W^{1/2} K W^{1/2}` in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let nb = self.len();
        let sw: Vec<f64> = self
            .domain
            .boundary_weights()
            .iter()
            .map(|w| w.sqrt())
            .collect();
        let m = nalgebra::DMatrix::from_fn(nb, nb, |i, j| sw[i] * self.entry(i, j) * sw[j]);
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Fraction of the singular value sum carried by indices ≥ `from`.
    pub fn singular_tail(&self, from: usize) -> f64 {
        let s = self.singular_values();
        let total: f64 = s.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        s.iter().skip(from).sum::<f64>() / total
    }

    pub fn write(&self, meta_path: &Path, format: KernelFormat) -> Result<()> {
        let data_path = meta_path.with_extension(format.extension());
        let meta = DtnMeta {
            domain_hash: self.domain.fingerprint(),
            n: self.domain.resolution(),
            d: self.domain.dim(),
            side: self.domain.side(),
            nodes: self.len(),
            format,
            data_file: data_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            guard: self.guard,
        };
        match format {
            KernelFormat::Csv => {
                let mut w = csv::Writer::from_path(&data_path)?;
                w.write_record(["row", "col", "value"])?;
                let nb = self.len();
                for i in 0..nb {
                    for j in 0..nb {
                        w.write_record(&[
                            i.to_string(),
                            j.to_string(),
                            format!("{:.17e}", self.entry(i, j)),
                        ])?;
                    }
                }
                w.flush()?;
            }
            KernelFormat::Binary => {
                let mut buf = Vec::with_capacity(8 + 8 * self.kernel.len());
                buf.extend_from_slice(BINARY_MAGIC);
                for k in &self.kernel {
                    buf.extend_from_slice(&k.to_le_bytes());
                }
                fs::File::create(&data_path)?.write_all(&buf)?;
            }
        }
        fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Read a kernel written by [`DtnMap::write`], checking the grid hash.
    pub fn read(meta_path: &Path) -> Result<DtnMap> {
        let meta: DtnMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
        let domain = Arc::new(crate::grid::build_square_domain(meta.d, meta.n, meta.side)?);
        let bad = |path: &Path, reason: String| LabError::Format {
            path: path.to_path_buf(),
            reason,
        };
        if domain.fingerprint() != meta.domain_hash {
            return Err(bad(meta_path, "domain hash does not match n, d, side".into()));
        }
        let nb = domain.boundary().len();
        if meta.nodes != nb {
            return Err(bad(meta_path, format!("expected {nb} nodes, header says {}", meta.nodes)));
        }
        let data_path: PathBuf = meta_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&meta.data_file);
        let mut kernel = vec![0.0; nb * nb];
        match meta.format {
            KernelFormat::Csv => {
                let mut filled = vec![false; nb * nb];
                let mut r = csv::Reader::from_path(&data_path)?;
                for rec in r.records() {
                    let rec = rec?;
                    if rec.len() != 3 {
                        return Err(bad(&data_path, "expected row,col,value".into()));
                    }
                    let parse_idx = |s: &str| -> Result<usize> {
                        s.trim()
                            .parse::<usize>()
                            .ok()
                            .filter(|&i| i < nb)
                            .ok_or_else(|| bad(&data_path, format!("bad index {s:?}")))
                    };
                    let (i, j) = (parse_idx(&rec[0])?, parse_idx(&rec[1])?);
                    let v: f64 = rec[2]
                        .trim()
                        .parse()
                        .map_err(|e| bad(&data_path, format!("{e}")))?;
                    kernel[i * nb + j] = v;
                    filled[i * nb + j] = true;
                }
                if filled.iter().any(|f| !f) {
                    return Err(bad(&data_path, "missing matrix entries".into()));
                }
            }
            KernelFormat::Binary => {
                let mut bytes = Vec::new();
                fs::File::open(&data_path)?.read_to_end(&mut bytes)?;
                if bytes.len() < 8 || &bytes[..8] != BINARY_MAGIC {
                    return Err(bad(&data_path, "missing GDTN0001 header".into()));
                }
                let body = &bytes[8..];
                if body.len() != 8 * nb * nb {
                    return Err(bad(
                        &data_path,
                        format!("expected {} bytes of data, found {}", 8 * nb * nb, body.len()),
                    ));
                }
                for (k, chunk) in kernel.iter_mut().zip(body.chunks_exact(8)) {
                    *k = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
                }
            }
        }
        let mut map = DtnMap::from_kernel(domain, kernel)?;
        map.guard = meta.guard;
        Ok(map)
    }
}

/// `δ = ‖Φ₁ - Φ₂‖_{L∞→L∞}`.
pub fn dtn_diff_norm(a: &DtnMap, b: &DtnMap) -> Result<f64> {
    Ok(a.difference(b)?.linf_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFormat {
    Csv,
    Binary,
}

impl KernelFormat {
    fn extension(self) -> &'static str {
        match self {
            KernelFormat::Csv => "csv",
            KernelFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DtnMeta {
    domain_hash: String,
    n: usize,
    d: usize,
    side: f64,
    nodes: usize,
    format: KernelFormat,
    data_file: String,
    #[serde(default)]
    guard: Option<GuardReport>,
}

/// Boundary trace of a function sampled at the boundary nodes.
pub fn boundary_trace(dom: &Domain, f: impl Fn(&crate::grid::Point) -> f64) -> Vec<f64> {
    dom.boundary().iter().map(|b| f(&b.position)).collect()
}

/// Outward normal component along `axis` at every boundary node.
pub fn normal_component(dom: &Domain, axis: usize) -> Vec<f64> {
    dom.boundary()
        .iter()
        .map(|b| match (b.axis == axis, b.side) {
            (false, _) => 0.0,
            (true, Side::Low) => -1.0,
            (true, Side::High) => 1.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_square_domain;
    use crate::potentials::{sample_potential, PotentialSpec};

    fn zero(d: usize, n: usize) -> Potential {
        Potential::zero(Arc::new(build_square_domain(d, n, 1.0).unwrap()), 4).unwrap()
    }

    #[test]
    fn affine_and_quadratic_are_reproduced() {
        let v = zero(2, 16);
        let dom = v.domain().clone();
        for f in [
            (|x: &crate::grid::Point| x[0]) as fn(&crate::grid::Point) -> f64,
            |x| x[0] * x[0] - x[1] * x[1],
            |x| x[0] * x[1] + 0.5,
        ] {
            let u = solve_dirichlet(&v, &boundary_trace(&dom, f)).unwrap();
            for (c, val) in u.iter().enumerate() {
                assert!((val - f(&dom.cell_center(c))).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn guard_matches_square_spectrum() {
        let g = dirichlet_guard(&zero(2, 64));
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        assert!(g.passed);
        assert!((g.eigenvalue - exact).abs() / exact < 0.03, "{}", g.eigenvalue);
    }

    #[test]
    fn symmetrizer_makes_operator_symmetric() {
        let dom = Arc::new(build_square_domain(3, 8, 1.0).unwrap());
        let v = sample_potential(&PotentialSpec::compact(3.0, &[0.0, 0.0, 0.0], 0.2), dom.clone(), 4)
            .unwrap();
        let op = DirichletOperator::new(&v);
        let w = op.symmetrizer();
        let n = dom.num_cells();
        for i in (0..n).step_by(7) {
            let mut ei = vec![0.0; n];
            ei[i] = 1.0;
            let col = op.apply(&ei);
            for j in 0..n {
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let aji = col[j];
                let aij = op.apply(&ej)[i];
                assert!((w[i] * aij - w[j] * aji).abs() < 1e-9 * (1.0 + aij.abs()));
            }
        }
    }

    #[test]
    fn free_dtn_on_linear_and_constant() {
        let v = zero(2, 16);
        let dom = v.domain().clone();
        let phi = dtn_map(&v).unwrap();
        let nu1 = normal_component(&dom, 0);
        let out = phi.apply(&boundary_trace(&dom, |x| x[0]));
        for (a, b) in out.iter().zip(&nu1) {
            assert!((a - b).abs() < 1e-8);
        }
        let out = phi.apply(&vec![1.0; phi.len()]);
        assert!(out.iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn single_entry_norm() {
        let dom = Arc::new(build_square_domain(2, 8, 1.0).unwrap());
        let nb = dom.boundary().len();
        let mut k = vec![0.0; nb * nb];
        k[3 * nb + 5] = -2.5;
        let a = DtnMap::from_kernel(dom.clone(), k).unwrap();
        let b = DtnMap::from_kernel(dom.clone(), vec![0.0; nb * nb]).unwrap();
        assert_eq!(dtn_diff_norm(&a, &b).unwrap(), 2.5 * dom.boundary()[5].weight);
        assert_eq!(dtn_diff_norm(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn domain_mismatch_rejected() {
        let a = dtn_map(&zero(2, 8)).unwrap();
        let b = dtn_map(&zero(2, 10)).unwrap();
        assert!(matches!(dtn_diff_norm(&a, &b), Err(LabError::Mismatch { .. })));
    }

    #[test]
    fn persistence_roundtrip() {
        let phi = dtn_map(&zero(2, 8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for fmt in [KernelFormat::Csv, KernelFormat::Binary] {
            let meta = dir.path().join(format!("phi_{fmt:?}.json"));
            phi.write(&meta, fmt).unwrap();
            let back = DtnMap::read(&meta).unwrap();
            assert_eq!(back.kernel(), phi.kernel());
        }
    }

    #[test]
    fn corrupt_binary_rejected() {
        let phi = dtn_map(&zero(2, 8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = dir.path().join("phi.json");
        phi.write(&meta, KernelFormat::Binary).unwrap();
        let bin = dir.path().join("phi.bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[0] = b'X';
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(DtnMap::read(&meta), Err(LabError::Format { .. })));
    }
}
