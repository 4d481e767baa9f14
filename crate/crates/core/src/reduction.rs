//! Boundary reduction from a DtN difference to scattering amplitude
//! differences:
//!
//! * `R₁(x,y,k) = G(x-y,k) + ∫ G(x-z,k) v₁(z) R₁(z,y,k) dz`
//! * `A(x,y,k) = ∫_{∂D} R₁(x,z,k) (Φ₂ - Φ₁)(z,y) dz`
//! * `ψ₂(x,k) = ψ₁(x,k) + ∫_{∂D} A(x,y,k) ψ₂(y,k) dy`
//! * `h₂ - h₁ = (2π)^{-d} ∫∫ ψ₁(x,-l) (Φ₂ - Φ₁)(x,y) ψ₂(y,k) dy dx`

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::faddeev::{
    amplitude_h, boundary_psi, faddeev_green, lippmann_schwinger, solve_second_kind, vhat_at,
    ComplexFrequency, GreenConvolution, GreenTable, ScatteringSample, ThetaPair,
};
use crate::forward::DtnMap;
use crate::grid::Domain;
use crate::potentials::Potential;

type C64 = Complex64;

/// Largest accepted 1-norm condition number of `I - A W`.
pub const MAX_CONDITION: f64 = 1e12;
pub const PSI2_RESIDUAL_TOL: f64 = 1e-10;

/// Complex kernel on boundary nodes, row-major.
#[derive(Debug, Clone)]
pub struct BoundaryKernel {
    domain: Arc<Domain>,
    k: ComplexFrequency,
    values: Vec<C64>,
    row_l1: Vec<f64>,
}

impl BoundaryKernel {
    fn new(domain: Arc<Domain>, k: ComplexFrequency, values: Vec<C64>) -> Result<Self> {
        let nb = domain.boundary().len();
        if let Some(bad) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::param(
                "kernel",
                format!("non-finite entry at ({}, {})", bad / nb, bad % nb),
            ));
        }
        let w = domain.boundary_weights();
        let row_l1 = (0..nb)
            .map(|i| {
                values[i * nb..(i + 1) * nb]
                    .iter()
                    .zip(&w)
                    .map(|(z, wj)| z.norm() * wj)
                    .sum()
            })
            .collect();
        Ok(Self {
            domain,
            k,
            values,
            row_l1,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn k(&self) -> &ComplexFrequency {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.domain.boundary().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.len() + j]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Weighted row L¹ norms `Σ_j |K_ij| w_j`.
    pub fn row_l1(&self) -> &[f64] {
        &self.row_l1
    }

    pub fn max_row_l1(&self) -> f64 {
        self.row_l1.iter().copied().fold(0.0, f64::max)
    }
}

/// Values of a field on the boundary nodes at a known frequency.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub k: ComplexFrequency,
    pub values: Vec<C64>,
}

impl BoundaryTrace {
    /// `e^{ik·x}` on the boundary.
    pub fn plane_wave(dom: &Domain, k: &ComplexFrequency) -> Self {
        Self {
            k: *k,
            values: dom.boundary().iter().map(|b| k.plane_wave(&b.position)).collect(),
        }
    }
}

/// `R₁(x_i, y_j, k)` for boundary nodes; `G(x - y, k)` when `v₁ = 0`.
pub fn background_r1(v1: &Potential, green: &GreenTable) -> Result<BoundaryKernel> {
    let dom = green.domain().clone();
    if *dom != **v1.domain() {
        return Err(LabError::Mismatch { what: "domains" });
    }
    let k = *green.k();
    let nodes = dom.boundary();
    let nb = nodes.len();
    let mut values = vec![C64::new(0.0, 0.0); nb * nb];
    for (i, x) in nodes.iter().enumerate() {
        for (j, y) in nodes.iter().enumerate() {
            let diff = [
                x.position[0] - y.position[0],
                x.position[1] - y.position[1],
                x.position[2] - y.position[2],
            ];
            values[i * nb + j] = k.plane_wave(&diff) * green.between(&x.position, &y.position);
        }
    }
    if v1.is_zero() {
        return BoundaryKernel::new(dom, k, values);
    }
    // r = e^{-ik(x-y)} R₁ solves r(·,y) = g(· - y) + T r(·,y)
    let t = GreenConvolution::new(green, v1)?;
    let contraction = t.contraction_estimate();
    let support = v1.support();
    let vol = dom.cell_volume();
    for (j, y) in nodes.iter().enumerate() {
        let rhs: Vec<C64> = (0..dom.num_cells())
            .map(|c| green.between(&dom.cell_center(c), &y.position))
            .collect();
        let (r, _, _, _) = solve_second_kind(&t, &rhs, contraction)?;
        for (i, x) in nodes.iter().enumerate() {
            let corr: C64 = support
                .iter()
                .map(|&z| green.between(&x.position, &dom.cell_center(z)) * v1.values()[z] * r[z])
                .sum();
            let diff = [
                x.position[0] - y.position[0],
                x.position[1] - y.position[1],
                x.position[2] - y.position[2],
            ];
            values[i * nb + j] += k.plane_wave(&diff) * corr * vol;
        }
    }
    BoundaryKernel::new(dom, k, values)
}

/// `A = R₁ W (K₂ - K₁)`.
pub fn kernel_a(dtn_diff: &DtnMap, r1: &BoundaryKernel) -> Result<BoundaryKernel> {
    if **dtn_diff.domain() != **r1.domain() {
        return Err(LabError::Mismatch { what: "domains" });
    }
    let nb = r1.len();
    let w = r1.domain().boundary_weights();
    let r = DMatrix::from_fn(nb, nb, |i, j| r1.entry(i, j) * w[j]);
    let dk = DMatrix::from_fn(nb, nb, |i, j| C64::new(dtn_diff.entry(i, j), 0.0));
    let a = r * dk;
    let values = (0..nb * nb).map(|f| a[(f / nb, f % nb)]).collect();
    BoundaryKernel::new(r1.domain().clone(), *r1.k(), values)
}

#[derive(Debug, Clone)]
pub struct Psi2Solution {
    pub trace: BoundaryTrace,
    pub condition: f64,
    pub residual: f64,
}

/// Dense solve of `(I - A W) ψ₂ = ψ₁` on the boundary nodes.
pub fn solve_psi2(a: &BoundaryKernel, psi1: &BoundaryTrace) -> Result<Psi2Solution> {
    if !a.k().approx_eq(&psi1.k) {
        return Err(LabError::FrequencyMismatch {
            expected: format!("{:?}", a.k()),
            got: format!("{:?}", psi1.k),
        });
    }
    let nb = a.len();
    if psi1.values.len() != nb {
        return Err(LabError::Mismatch {
            what: "boundary vectors",
        });
    }
    let w = a.domain().boundary_weights();
    let m = DMatrix::from_fn(nb, nb, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        C64::new(id, 0.0) - a.entry(i, j) * w[j]
    });
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| LabError::Singular {
        context: "I - A W".into(),
    })?;
    let one_norm = |x: &DMatrix<C64>| -> f64 {
        (0..x.ncols())
            .map(|j| x.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let condition = one_norm(&m) * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(LabError::Singular {
            context: format!("I - A W has condition {condition:e}"),
        });
    }
    let rhs = nalgebra::DVector::from_column_slice(&psi1.values);
    let mut x = &inv * &rhs;
    // one step of refinement against the explicit inverse
    let r = &rhs - &m * &x;
    x += &inv * r;
    let res = (&m * &x - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max)
        / rhs.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    if res > PSI2_RESIDUAL_TOL {
        return Err(LabError::NoConvergence {
            iterations: 1,
            residual: res,
        });
    }
    Ok(Psi2Solution {
        trace: BoundaryTrace {
            k: psi1.k,
            values: x.iter().copied().collect(),
        },
        condition,
        residual: res,
    })
}

/// `h₂ - h₁ = (2π)^{-d} Σ_i Σ_j ψ₁(x_i,-l) ΔK_ij ψ₂(y_j,k) w_i w_j`.
pub fn h_from_dtn(
    pair: &ThetaPair,
    dtn_diff: &DtnMap,
    psi1_minus_l: &BoundaryTrace,
    psi2_k: &BoundaryTrace,
) -> Result<C64> {
    let minus_l = pair.l().neg();
    if !psi1_minus_l.k.approx_eq(&minus_l) {
        return Err(LabError::FrequencyMismatch {
            expected: format!("-l = {minus_l:?}"),
            got: format!("{:?}", psi1_minus_l.k),
        });
    }
    if !psi2_k.k.approx_eq(&pair.k()) {
        return Err(LabError::FrequencyMismatch {
            expected: format!("k = {:?}", pair.k()),
            got: format!("{:?}", psi2_k.k),
        });
    }
    let dom = dtn_diff.domain();
    let nb = dtn_diff.len();
    if psi1_minus_l.values.len() != nb || psi2_k.values.len() != nb {
        return Err(LabError::Mismatch {
            what: "boundary vectors",
        });
    }
    let w = dom.boundary_weights();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..nb {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..nb {
            row += psi2_k.values[j] * (dtn_diff.entry(i, j) * w[j]);
        }
        s += psi1_minus_l.values[i] * row * w[i];
    }
    Ok(s / (2.0 * PI).powi(dom.dim() as i32))
}

/// Amplitudes of one pair by both routes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RouteComparison {
    /// `h₂` through the boundary reduction (`h₁ + Δh`).
    pub reduction: ScatteringSample,
    /// `h₂` from `v₂` directly.
    pub direct: ScatteringSample,
    pub condition: f64,
}

impl RouteComparison {
    pub fn relative_gap(&self) -> f64 {
        (self.reduction.h - self.direct.h).norm() / self.direct.h.norm().max(f64::MIN_POSITIVE)
    }
}

/// Background data shared across pairs: `v₁` and its DtN map.
pub struct Background<'a> {
    pub potential: &'a Potential,
    pub dtn: &'a DtnMap,
}

/// `h₂(k,l)` from `Φ₂ - Φ₁` and the background `v₁`.
pub fn scatter_reduction(
    background: &Background,
    phi2: &DtnMap,
    pair: &ThetaPair,
) -> Result<(ScatteringSample, f64)> {
    let v1 = background.potential;
    let dom = v1.domain().clone();
    let diff = phi2.difference(background.dtn)?;
    let k = pair.k();
    let minus_l = pair.l().neg();
    let green_k = faddeev_green(&k, dom.clone())?;
    let (psi1_k, psi1_ml, h1) = if v1.is_zero() {
        (
            BoundaryTrace::plane_wave(&dom, &k),
            BoundaryTrace::plane_wave(&dom, &minus_l),
            C64::new(0.0, 0.0),
        )
    } else {
        let field_k = lippmann_schwinger(v1, &green_k)?;
        let trace_k = boundary_psi(v1, &field_k, &green_k)?;
        let green_ml = faddeev_green(&minus_l, dom.clone())?;
        let field_ml = lippmann_schwinger(v1, &green_ml)?;
        let trace_ml = boundary_psi(v1, &field_ml, &green_ml)?;
        let h1 = amplitude_h(v1, &field_k, pair)?.h;
        (
            BoundaryTrace {
                k,
                values: trace_k,
            },
            BoundaryTrace {
                k: minus_l,
                values: trace_ml,
            },
            h1,
        )
    };
    let r1 = background_r1(v1, &green_k)?;
    let a = kernel_a(&diff, &r1)?;
    let psi2 = solve_psi2(&a, &psi1_k)?;
    let dh = h_from_dtn(pair, &diff, &psi1_ml, &psi2.trace)?;
    Ok((
        ScatteringSample {
            pair: *pair,
            h: h1 + dh,
            vhat: None,
        },
        psi2.condition,
    ))
}

/// Reduction route against the direct Faddeev route for `v₂`.
pub fn compare_routes(
    background: &Background,
    v2: &Potential,
    phi2: &DtnMap,
    pair: &ThetaPair,
) -> Result<RouteComparison> {
    let (mut reduction, condition) = scatter_reduction(background, phi2, pair)?;
    let vhat = vhat_at(v2, &pair.p());
    reduction.vhat = Some(vhat);
    let direct = crate::faddeev::scatter_direct(v2, pair)?;
    Ok(RouteComparison {
        reduction,
        direct,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faddeev::born_pair;
    use crate::forward::dtn_map;
    use crate::grid::build_square_domain;
    use crate::potentials::{sample_potential, PotentialSpec};

    fn setup(n: usize) -> (Arc<Domain>, Potential, DtnMap) {
        let dom = Arc::new(build_square_domain(2, n, 1.0).unwrap());
        let v0 = Potential::zero(dom.clone(), 3).unwrap();
        let phi0 = dtn_map(&v0).unwrap();
        (dom, v0, phi0)
    }

    #[test]
    fn zero_background_r1_is_green() {
        let (dom, v0, _) = setup(12);
        let pair = born_pair(&[2.0, 1.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom.clone()).unwrap();
        let r1 = background_r1(&v0, &g).unwrap();
        let b = &dom.boundary();
        let (i, j) = (3, 17);
        let mut diff = [0.0; 3];
        for a in 0..3 {
            diff[a] = b[i].position[a] - b[j].position[a];
        }
        let expect = pair.k().plane_wave(&diff) * g.between(&b[i].position, &b[j].position);
        assert_eq!(r1.entry(i, j), expect);
    }

    #[test]
    fn identical_maps_give_zero() {
        let (dom, v0, phi0) = setup(12);
        let pair = born_pair(&[2.0, 0.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom.clone()).unwrap();
        let r1 = background_r1(&v0, &g).unwrap();
        let diff = phi0.difference(&phi0).unwrap();
        let a = kernel_a(&diff, &r1).unwrap();
        assert!(a.values().iter().all(|z| z.norm() == 0.0));
        let psi1 = BoundaryTrace::plane_wave(&dom, &pair.k());
        let psi2 = solve_psi2(&a, &psi1).unwrap();
        for (x, y) in psi2.trace.values.iter().zip(&psi1.values) {
            assert!((x - y).norm() <= 1e-14 * y.norm());
        }
        let ml = BoundaryTrace::plane_wave(&dom, &pair.l().neg());
        assert_eq!(h_from_dtn(&pair, &diff, &ml, &psi2.trace).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn single_column_structure_and_scaling() {
        let (dom, v0, _) = setup(10);
        let nb = dom.boundary().len();
        let pair = born_pair(&[1.0, 1.0]).unwrap();
        let g = faddeev_green(&pair.k(), dom.clone()).unwrap();
        let r1 = background_r1(&v0, &g).unwrap();
        let mut k = vec![0.0; nb * nb];
        for i in 0..nb {
            k[i * nb + 7] = (i as f64).cos();
        }
        let d1 = DtnMap::from_kernel(dom.clone(), k.clone()).unwrap();
        let d2 = DtnMap::from_kernel(dom.clone(), k.iter().map(|x| 2.0 * x).collect()).unwrap();
        let a1 = kernel_a(&d1, &r1).unwrap();
        let a2 = kernel_a(&d2, &r1).unwrap();
        for i in 0..nb {
            for j in 0..nb {
                if j != 7 {
                    assert_eq!(a1.entry(i, j), C64::new(0.0, 0.0));
                }
                assert!((a2.entry(i, j) - 2.0 * a1.entry(i, j)).norm() <= 1e-13 * a1.entry(i, j).norm().max(1e-300));
            }
        }
    }

    #[test]
    fn frequency_mismatch_rejected() {
        let (dom, _, phi0) = setup(10);
        let pair = born_pair(&[1.0, 0.0]).unwrap();
        let diff = phi0.difference(&phi0).unwrap();
        let wrong = BoundaryTrace::plane_wave(&dom, &pair.l());
        let k = BoundaryTrace::plane_wave(&dom, &pair.k());
        assert!(matches!(
            h_from_dtn(&pair, &diff, &wrong, &k),
            Err(LabError::FrequencyMismatch { .. })
        ));
    }

    #[test]
    fn routes_agree_for_small_potential() {
        let (dom, v0, phi0) = setup(24);
        let v2 = sample_potential(&PotentialSpec::compact(1.0, &[0.05, -0.02], 0.25), dom, 3).unwrap();
        let phi2 = dtn_map(&v2).unwrap();
        let pair = born_pair(&[3.0, 1.0]).unwrap();
        let bg = Background {
            potential: &v0,
            dtn: &phi0,
        };
        let cmp = compare_routes(&bg, &v2, &phi2, &pair).unwrap();
        assert!(cmp.relative_gap() < 0.05, "gap {}", cmp.relative_gap());
    }
}
