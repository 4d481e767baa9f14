//! Small numerical kernels: banded LU, restarted GMRES, n-dimensional FFT.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{LabError, Result};

/// LU factorization with partial pivoting of a real band matrix
/// (`kl` sub-diagonals, `ku` super-diagonals).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

/// Row-oriented band matrix builder.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // room for the fill-in produced by row interchanges
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside the band"
        );
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut a = self.data.clone();
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0_f64;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = a[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::Singular {
                    context: format!("zero pivot in column {k} of band LU"),
                });
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    a.swap(idx(k, c), idx(p, c));
                }
            }
            let pivot = a[idx(k, k)];
            for r in k + 1..=last_row {
                let m = a[idx(r, k)] / pivot;
                if m == 0.0 {
                    continue;
                }
                lower[k * kl + (r - k - 1)] = m;
                a[idx(r, k)] = 0.0;
                let (rk, rr) = (idx(k, k), idx(r, k));
                for off in 1..=(last_col - k) {
                    a[rr + off] -= m * a[rk + off];
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            width: w,
            upper: a,
            lower,
            pivots,
            min_pivot,
            max_pivot,
        })
    }
}

impl BandLu {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        self.max_pivot / self.min_pivot
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                let last_row = (k + kl).min(n - 1);
                for r in k + 1..=last_row {
                    x[r] -= self.lower[k * kl + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = k * w + kl;
            let last_col = (k + kl + ku).min(n - 1);
            let mut s = x[k];
            for c in k + 1..=last_col {
                s -= self.upper[row + (c - k)] * x[c];
            }
            x[k] = s / self.upper[row];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Restarted GMRES for `op(x) = b`. Stops when the max-norm of the true
/// residual falls below `tol`.
pub fn gmres(
    op: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Vec<Complex64>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<Complex64>, KrylovStats)> {
    let n = b.len();
    let mut x = x0;
    let mut total = 0;
    let max_norm = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let l2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    loop {
        let ax = op(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res_max = max_norm(&r);
        if res_max <= tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: total,
                    residual: res_max,
                },
            ));
        }
        if total >= max_iter {
            return Err(LabError::NoConvergence {
                iterations: total,
                residual: res_max,
            });
        }
        let beta = l2(&r);
        // inner tolerance in the 2-norm; the outer loop re-checks the max-norm
        let inner_tol = tol * 0.1;
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hess: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<Complex64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut steps = 0;
        for j in 0..restart {
            let mut w = op(&basis[j]);
            let mut hcol = vec![Complex64::new(0.0, 0.0); j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij: Complex64 = vi.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                hcol[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hnext = l2(&w);
            hcol[j + 1] = Complex64::new(hnext, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * hcol[i] + sn[i].conj() * hcol[i + 1];
                hcol[i + 1] = -sn[i] * hcol[i] + cs[i] * hcol[i + 1];
                hcol[i] = t;
            }
            let (a, bb) = (hcol[j], hcol[j + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
            } else {
                let c = a / denom;
                let s = bb / denom;
                (c, s)
            };
            hcol[j] = c.conj() * a + s.conj() * bb;
            hcol[j + 1] = Complex64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c.conj() * gj;
            g.push(-s * gj);
            hess.push(hcol);
            steps = j + 1;
            total += 1;
            if g[j + 1].norm() <= inner_tol || hnext == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|z| z / hnext).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![Complex64::new(0.0, 0.0); steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for k in i + 1..steps {
                s -= hess[k][i] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
        debug_assert_eq!(x.len(), n);
    }
}

/// Unnormalized n-dimensional FFT over a row-major array whose axis 0 is
/// the fastest varying. `inverse` selects the `e^{+i...}` sign.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len());
    let direction = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1;
    for &len in shape {
        let fft = planner.plan_fft(len, direction);
        if stride == 1 {
            fft.process(data);
        } else {
            let block = stride * len;
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            for outer in 0..total / block {
                let base = outer * block;
                for inner in 0..stride {
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + inner + t * stride];
                    }
                    fft.process(&mut line);
                    for (t, val) in line.iter().enumerate() {
                        data[base + inner + t * stride] = *val;
                    }
                }
            }
        }
        stride *= len;
    }
}

/// Contract one axis of a complex tensor (axis 0 fastest) with a matrix
/// `m[out][in]`, replacing that axis' length by `m.len()`.
pub fn contract_axis(
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    m: &[Vec<Complex64>],
) -> (Vec<Complex64>, Vec<usize>) {
    let len_in = shape[axis];
    let len_out = m.len();
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); inner * len_out * outer];
    for o in 0..outer {
        for (j, row) in m.iter().enumerate() {
            debug_assert_eq!(row.len(), len_in);
            let dst = &mut out[(o * len_out + j) * inner..(o * len_out + j + 1) * inner];
            for (i, &c) in row.iter().enumerate() {
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = &data[(o * len_in + i) * inner..(o * len_in + i + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = len_out;
    (out, new_shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.add(i, i, 2.5);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -0.7);
            }
        }
        m
    }

    #[test]
    fn band_lu_solves_tridiagonal() {
        let m = tridiag(40);
        let lu = m.factor().unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = m.matvec(&x);
        let y = lu.solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn band_lu_pivots_when_needed() {
        // zero diagonal forces row interchanges
        let n = 12;
        let mut m = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            if i > 0 {
                m.add(i, i - 1, 1.0 + i as f64 * 0.1);
            }
            if i + 1 < n {
                m.add(i, i + 1, -2.0);
            }
            if i + 2 < n {
                m.add(i, i + 2, 0.5);
            }
            if i >= 2 {
                m.add(i, i - 2, 0.25);
            }
        }
        let lu = m.factor().unwrap();
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let y = lu.solve(&m.matvec(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn band_lu_detects_singular() {
        let m = BandMatrix::zeros(5, 1, 1);
        assert!(m.factor().is_err());
    }

    #[test]
    fn gmres_matches_direct_solution() {
        let n = 30;
        let op = |x: &[Complex64]| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let mut s = x[i] * Complex64::new(3.0, 0.5);
                    if i > 0 {
                        s += x[i - 1] * Complex64::new(-1.0, 0.2);
                    }
                    if i + 1 < n {
                        s += x[i + 1] * Complex64::new(0.3, -1.0);
                    }
                    s
                })
                .collect()
        };
        let truth: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).cos(), (i as f64 * 0.5).sin()))
            .collect();
        let b = op(&truth);
        let (x, stats) = gmres(op, &b, vec![Complex64::new(0.0, 0.0); n], 1e-12, 10, 500).unwrap();
        assert!(stats.residual <= 1e-12);
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn fft_nd_matches_direct_dft() {
        let shape = [4usize, 6];
        let data: Vec<Complex64> = (0..24)
            .map(|i| Complex64::new(i as f64 * 0.1, (i as f64).sin()))
            .collect();
        let mut out = data.clone();
        fft_nd(&mut out, &shape, true);
        for k1 in 0..6 {
            for k0 in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for j1 in 0..6 {
                    for j0 in 0..4 {
                        let phase = 2.0 * std::f64::consts::PI
                            * (k0 as f64 * j0 as f64 / 4.0 + k1 as f64 * j1 as f64 / 6.0);
                        s += data[j0 + 4 * j1] * Complex64::from_polar(1.0, phase);
                    }
                }
                assert!((s - out[k0 + 4 * k1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_axis_is_matrix_product() {
        let shape = [2usize, 3];
        let data: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let m = vec![vec![Complex64::new(1.0, 0.0); 3]];
        let (out, s) = contract_axis(&data, &shape, 1, &m);
        assert_eq!(s, vec![2, 1]);
        assert_eq!(out[0].re, 0.0 + 2.0 + 4.0);
        assert_eq!(out[1].re, 1.0 + 3.0 + 5.0);
    }
}
