//! Fast invariant suite: every closed-form example the library promises,
//! run at small sizes. Used by `dtnlab selftest` and the test suite.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::born::{error_split, reconstruct, vhat_from_dtn, Cutoff, CutoffRule};
use crate::faddeev::{
    amplitude_h, born_pair, faddeev_green, gamma, lippmann_schwinger, scatter_direct,
    theta_pair_3d, ComplexFrequency, LsMethod,
};
use crate::forward::{boundary_trace, dtn_diff_norm, dtn_map, normal_component, solve_dirichlet, DtnMap};
use crate::grid::{build_square_domain, dot, fourier_grid, fourier_grid_dim, Domain};
use crate::lab::{fit_exponent, run_sweep, verify_bounds, ExperimentConfig};
use crate::potentials::{
    fourier_transform, inverse_fourier, norm_w_m1, sample_potential, Potential, PotentialSpec,
};
use crate::reduction::{background_r1, kernel_a, solve_psi2, BoundaryTrace};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Probe = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Probe)] = &[
    ("square_boundary_weights", square_boundary_weights),
    ("square_radius_bound", square_radius_bound),
    ("cube_boundary_weights", cube_boundary_weights),
    ("fourier_lattice_2d", fourier_lattice_2d),
    ("fourier_lattice_mirror", fourier_lattice_mirror),
    ("fourier_lattice_3d", fourier_lattice_3d),
    ("zero_amplitude_bump", zero_amplitude_bump),
    ("gaussian_peak", gaussian_peak),
    ("sampling_linearity", sampling_linearity),
    ("norm_of_zero", norm_of_zero),
    ("norm_order_zero_is_l1", norm_order_zero_is_l1),
    ("spectrum_of_zero", spectrum_of_zero),
    ("spectrum_hermitian", spectrum_hermitian),
    ("inversion_empty_ball", inversion_empty_ball),
    ("inversion_real", inversion_real),
    ("dirichlet_affine", dirichlet_affine),
    ("dirichlet_quadratic", dirichlet_quadratic),
    ("dtn_free_normal", dtn_free_normal),
    ("dtn_free_constant", dtn_free_constant),
    ("dtn_diff_identical", dtn_diff_identical),
    ("dtn_diff_single_entry", dtn_diff_single_entry),
    ("born_pair_planar", born_pair_planar),
    ("born_pair_zero", born_pair_zero),
    ("gamma_orthogonal", gamma_orthogonal),
    ("theta_pair_born_limit", theta_pair_born_limit),
    ("theta_pair_example", theta_pair_example),
    ("theta_pair_construction", theta_pair_construction),
    ("faddeev_zero_potential", faddeev_zero_potential),
    ("amplitude_zero_potential", amplitude_zero_potential),
    ("scatter_zero_potential", scatter_zero_potential),
    ("r1_free_green", r1_free_green),
    ("r1_deterministic", r1_deterministic),
    ("kernel_a_identical", kernel_a_identical),
    ("kernel_a_single_column", kernel_a_single_column),
    ("kernel_a_linear", kernel_a_linear),
    ("psi2_zero_kernel", psi2_zero_kernel),
    ("born_estimate_zero", born_estimate_zero),
    ("born_estimate_linear", born_estimate_linear),
    ("cutoff_arithmetic", cutoff_arithmetic),
    ("cutoff_monotone", cutoff_monotone),
    ("cutoff_ten_lambda", cutoff_ten_lambda),
    ("reconstruct_zero_field", reconstruct_zero_field),
    ("split_identical", split_identical),
    ("split_empty_ball", split_empty_ball),
    ("sweep_exact_branch", sweep_exact_branch),
    ("fit_exact_power", fit_exact_power),
    ("fit_constant", fit_constant),
    ("bounds_identical_pair", bounds_identical_pair),
];

/// Runs every check; a failing or erroring check is reported, never panics.
pub fn run() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, probe)| match probe() {
            Ok((passed, detail)) => Check { name, passed, detail },
            Err(e) => Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn verdict(passed: bool, detail: impl Into<String>) -> Result<(bool, String)> {
    Ok((passed, detail.into()))
}

fn square(n: usize) -> Result<Arc<Domain>> {
    Ok(Arc::new(build_square_domain(2, n, 1.0)?))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn free_dtn(n: usize) -> Result<DtnMap> {
    dtn_map(&Potential::zero(square(n)?, 3)?)
}

fn small_bump(dom: &Arc<Domain>) -> Result<Potential> {
    sample_potential(&PotentialSpec::gaussian(0.1, &[0.05, -0.05], 0.12), dom.clone(), 3)
}

fn square_boundary_weights() -> Result<(bool, String)> {
    let d = build_square_domain(2, 16, 1.0)?;
    let w = d.boundary_weights();
    let ok = w.len() == 64
        && w.iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15)
        && (w.iter().sum::<f64>() - 4.0).abs() < 1e-12;
    verdict(ok, format!("{} faces, total {}", w.len(), w.iter().sum::<f64>()))
}

fn square_radius_bound() -> Result<(bool, String)> {
    let d = build_square_domain(2, 16, 1.0)?;
    let l = d.radius_bound();
    let target = std::f64::consts::FRAC_1_SQRT_2 * (1.0 - d.h());
    verdict(
        (l - target).abs() < 1e-12 && l < std::f64::consts::FRAC_1_SQRT_2,
        format!("L = {l}"),
    )
}

fn cube_boundary_weights() -> Result<(bool, String)> {
    let d = build_square_domain(3, 8, 1.0)?;
    let w = d.boundary_weights();
    let total: f64 = w.iter().sum();
    verdict(w.len() == 384 && (total - 6.0).abs() < 1e-12, format!("{} faces, total {total}", w.len()))
}

fn fourier_lattice_2d() -> Result<(bool, String)> {
    let fg = fourier_grid_dim(2, 10.0, 21)?;
    let origin = fg.node(fg.origin());
    let ok = fg.len() == 441
        && (fg.spacing() - 20.0 / 21.0).abs() < 1e-14
        && origin.iter().all(|&c| c == 0.0);
    verdict(ok, format!("{} nodes, spacing {}", fg.len(), fg.spacing()))
}

fn fourier_lattice_mirror() -> Result<(bool, String)> {
    let fg = fourier_grid_dim(2, 10.0, 21)?;
    let worst = (0..fg.len())
        .map(|i| {
            let (p, q) = (fg.node(i), fg.node(fg.mirror(i)));
            (0..3).map(|a| (p[a] + q[a]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    verdict(worst < 1e-13, format!("max |p + mirror(p)| = {worst:e}"))
}

fn fourier_lattice_3d() -> Result<(bool, String)> {
    let fg = fourier_grid_dim(3, 6.0, 13)?;
    verdict(fg.len() == 2197, format!("{} nodes", fg.len()))
}

fn zero_amplitude_bump() -> Result<(bool, String)> {
    let v = sample_potential(&PotentialSpec::gaussian(0.0, &[0.0, 0.0], 0.3), square(16)?, 3)?;
    verdict(v.is_zero(), format!("max |v| = {}", v.max_abs()))
}

fn gaussian_peak() -> Result<(bool, String)> {
    let dom = square(33)?;
    let v = sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.15), dom.clone(), 3)?;
    let centre = dom.cell_at([16, 16, 0]);
    let at = v.values()[centre];
    verdict((at - 1.0).abs() < 1e-12 && (v.max_abs() - at).abs() < 1e-15, format!("peak {at}"))
}

fn sampling_linearity() -> Result<(bool, String)> {
    let dom = square(24)?;
    let a = PotentialSpec::gaussian(0.3, &[0.1, 0.0], 0.1);
    let b = PotentialSpec::compact(-0.2, &[-0.1, 0.05], 0.2);
    let sum = sample_potential(&a.clone().plus(b.clone()), dom.clone(), 3)?;
    let va = sample_potential(&a, dom.clone(), 3)?;
    let vb = sample_potential(&b, dom, 3)?;
    let worst = sum
        .values()
        .iter()
        .zip(va.values().iter().zip(vb.values()))
        .map(|(s, (x, y))| (s - x - y).abs())
        .fold(0.0, f64::max);
    verdict(worst < 1e-15, format!("max defect {worst:e}"))
}

fn norm_of_zero() -> Result<(bool, String)> {
    let n = norm_w_m1(&Potential::zero(square(16)?, 3)?, 3)?;
    verdict(n == 0.0, format!("norm {n}"))
}

fn norm_order_zero_is_l1() -> Result<(bool, String)> {
    let dom = square(24)?;
    let v = small_bump(&dom)?;
    let l1: f64 = v.values().iter().map(|x| x.abs()).sum::<f64>() * dom.cell_volume();
    let n = norm_w_m1(&v, 0)?;
    verdict((n - l1).abs() <= 1e-14 * l1, format!("norm {n}, L1 {l1}"))
}

fn spectrum_of_zero() -> Result<(bool, String)> {
    let dom = square(16)?;
    let fg = Arc::new(fourier_grid(&dom, 10.0, 11)?);
    let s = fourier_transform(&Potential::zero(dom, 3)?, &fg)?;
    verdict(s.values().iter().all(|z| z.norm() == 0.0), "all zero")
}

fn spectrum_hermitian() -> Result<(bool, String)> {
    let dom = square(24)?;
    let fg = Arc::new(fourier_grid(&dom, 12.0, 25)?);
    let s = fourier_transform(&small_bump(&dom)?, &fg)?;
    let defect = s.hermitian_defect();
    verdict(defect <= 1e-12, format!("relative defect {defect:e}"))
}

fn inversion_empty_ball() -> Result<(bool, String)> {
    let dom = square(24)?;
    let fg = Arc::new(fourier_grid(&dom, 12.0, 25)?);
    let s = fourier_transform(&small_bump(&dom)?, &fg)?;
    let inv = inverse_fourier(&s, &dom, 0.0)?;
    verdict(sup(&inv.values) == 0.0 && inv.imag_max == 0.0, "identically zero")
}

fn inversion_real() -> Result<(bool, String)> {
    let dom = square(24)?;
    let fg = Arc::new(fourier_grid(&dom, 12.0, 25)?);
    let s = fourier_transform(&small_bump(&dom)?, &fg)?;
    let inv = inverse_fourier(&s, &dom, 12.0)?;
    let rel = inv.imag_max / sup(&inv.values);
    verdict(rel <= 1e-10, format!("imaginary / real = {rel:e}"))
}

fn dirichlet_affine() -> Result<(bool, String)> {
    let dom = square(16)?;
    let f = boundary_trace(&dom, |x| x[0]);
    let u = solve_dirichlet(&Potential::zero(dom.clone(), 3)?, &f)?;
    let worst = dom
        .cell_centers()
        .iter()
        .zip(&u)
        .map(|(x, u)| (u - x[0]).abs())
        .fold(0.0, f64::max);
    verdict(worst < 1e-12, format!("max |u - x1| = {worst:e}"))
}

fn dirichlet_quadratic() -> Result<(bool, String)> {
    let dom = square(16)?;
    let q = |x: &[f64; 3]| x[0] * x[0] - x[1] * x[1];
    let f = boundary_trace(&dom, q);
    let u = solve_dirichlet(&Potential::zero(dom.clone(), 3)?, &f)?;
    let worst = dom
        .cell_centers()
        .iter()
        .zip(&u)
        .map(|(x, u)| (u - q(x)).abs())
        .fold(0.0, f64::max);
    verdict(worst < 1e-12, format!("max |u - (x1² - x2²)| = {worst:e}"))
}

fn dtn_free_normal() -> Result<(bool, String)> {
    let phi = free_dtn(16)?;
    let dom = phi.domain().clone();
    let out = phi.apply(&boundary_trace(&dom, |x| x[0]));
    let nu = normal_component(&dom, 0);
    let worst = out.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(worst <= 5.0 * dom.h() * dom.h(), format!("max |Φ₀x₁ - ν₁| = {worst:e}"))
}

fn dtn_free_constant() -> Result<(bool, String)> {
    let phi = free_dtn(16)?;
    let dom = phi.domain().clone();
    let worst = sup(&phi.apply(&vec![1.0; dom.boundary().len()]));
    verdict(worst <= 5.0 * dom.h() * dom.h(), format!("max |Φ₀1| = {worst:e}"))
}

fn dtn_diff_identical() -> Result<(bool, String)> {
    let phi = free_dtn(12)?;
    let d = dtn_diff_norm(&phi, &phi)?;
    verdict(d == 0.0, format!("δ = {d}"))
}

fn dtn_diff_single_entry() -> Result<(bool, String)> {
    let dom = square(8)?;
    let nb = dom.boundary().len();
    let (i, j, c) = (3, 17, -2.5);
    let mut k = vec![0.0; nb * nb];
    k[i * nb + j] = c;
    let a = DtnMap::from_kernel(dom.clone(), k)?;
    let b = DtnMap::from_kernel(dom.clone(), vec![0.0; nb * nb])?;
    let d = dtn_diff_norm(&a, &b)?;
    let want = c.abs() * dom.boundary_weights()[j];
    verdict((d - want).abs() < 1e-15, format!("δ = {d}, expected {want}"))
}

fn born_pair_planar() -> Result<(bool, String)> {
    let t = born_pair(&[1.0, 0.0])?;
    let (k, l) = (t.k(), t.l());
    let ok = (k.re()[0] - 0.5).abs() < 1e-15
        && k.re()[1].abs() < 1e-15
        && k.im()[0].abs() < 1e-15
        && (k.im()[1] - 0.5).abs() < 1e-15
        && (l.re()[0] + 0.5).abs() < 1e-15
        && (l.im()[1] - 0.5).abs() < 1e-15
        && k.variety_defect() < 1e-15;
    verdict(ok, format!("k = {:?}+i{:?}", k.re(), k.im()))
}

fn born_pair_zero() -> Result<(bool, String)> {
    let t = born_pair(&[0.0, 0.0])?;
    let zero = ComplexFrequency::zero(2);
    let ok = t.k().approx_eq(&zero) && t.l().approx_eq(&zero);
    verdict(ok, "k = l = 0")
}

fn gamma_orthogonal() -> Result<(bool, String)> {
    let ps: [&[f64]; 4] = [&[1.0, 0.0], &[-3.0, 2.5], &[0.3, -1.0, 2.0], &[0.0, 0.0, -4.0]];
    let mut worst = 0.0_f64;
    for p in ps {
        let g = gamma(p)?;
        let mut q = [0.0; 3];
        q[..p.len()].copy_from_slice(p);
        worst = worst.max(dot(&g, &q).abs());
    }
    verdict(worst <= 1e-15, format!("max |γ·p| = {worst:e}"))
}

fn theta_pair_born_limit() -> Result<(bool, String)> {
    let p = [1.0, 0.5, -0.5];
    let r = (p.iter().map(|x| x * x).sum::<f64>()).sqrt() / 2.0;
    let g = gamma(&p)?;
    let e2 = cross(&p, &g);
    let t = theta_pair_3d(&p, r, &g, &e2)?;
    let b = born_pair(&p)?;
    verdict(
        t.k().approx_eq(&b.k()) && t.l().approx_eq(&b.l()),
        "ρ = |p|/2 reproduces the Born pair",
    )
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let n = (c.iter().map(|x| x * x).sum::<f64>()).sqrt();
    [c[0] / n, c[1] / n, c[2] / n]
}

fn theta_pair_example() -> Result<(bool, String)> {
    let t = theta_pair_3d(&[1.0, 0.0, 0.0], 1.0, &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0])?;
    let k = t.k();
    let want_re = [0.5, 0.0, 0.75f64.sqrt()];
    let want_im = [0.0, 1.0, 0.0];
    let ok = (0..3).all(|a| (k.re()[a] - want_re[a]).abs() < 1e-15 && (k.im()[a] - want_im[a]).abs() < 1e-15)
        && k.variety_defect() < 1e-15;
    verdict(ok, format!("k = {:?}+i{:?}", k.re(), k.im()))
}

fn theta_pair_construction() -> Result<(bool, String)> {
    let p = [0.7, -1.2, 0.4];
    let g = gamma(&p)?;
    let e2 = cross(&p, &g);
    let mut worst = 0.0_f64;
    for rho in [0.8, 2.0, 7.5] {
        let t = theta_pair_3d(&p, rho, &g, &e2)?;
        worst = worst.max((t.rho() - rho).abs());
        let q = t.p();
        worst = worst.max((0..3).map(|a| (q[a] - p[a]).abs()).fold(0.0, f64::max));
        worst = worst.max(t.k().variety_defect()).max(t.l().variety_defect());
    }
    verdict(worst < 1e-13, format!("max defect {worst:e}"))
}

fn faddeev_zero_potential() -> Result<(bool, String)> {
    let dom = square(16)?;
    let k = born_pair(&[2.0, 1.0])?.k();
    let green = faddeev_green(&k, dom.clone())?;
    let field = lippmann_schwinger(&Potential::zero(dom.clone(), 3)?, &green)?;
    let exact = field.mu().iter().all(|z| *z == C64::new(1.0, 0.0));
    let psi = field.psi(&dom);
    let wave = dom
        .cell_centers()
        .iter()
        .zip(&psi)
        .map(|(x, z)| (z - k.plane_wave(x)).norm())
        .fold(0.0, f64::max);
    verdict(
        exact && wave == 0.0 && field.method == LsMethod::Trivial,
        format!("sup |μ - 1| = {}", field.sup_mu_minus_one()),
    )
}

fn amplitude_zero_potential() -> Result<(bool, String)> {
    let dom = square(16)?;
    let pair = born_pair(&[3.0, 0.0])?;
    let v = Potential::zero(dom.clone(), 3)?;
    let green = faddeev_green(&pair.k(), dom)?;
    let field = lippmann_schwinger(&v, &green)?;
    let h = amplitude_h(&v, &field, &pair)?.h;
    verdict(h.norm() == 0.0, format!("h = {h}"))
}

fn scatter_zero_potential() -> Result<(bool, String)> {
    let v = Potential::zero(square(16)?, 3)?;
    let mut worst = 0.0_f64;
    for p in [[1.0, 0.0], [0.0, 2.0], [-1.5, 1.5]] {
        let s = scatter_direct(&v, &born_pair(&p)?)?;
        worst = worst.max(s.h.norm());
    }
    verdict(worst == 0.0, format!("max |h| = {worst}"))
}

fn r1_free_green() -> Result<(bool, String)> {
    let dom = square(12)?;
    let k = born_pair(&[2.0, 0.0])?.k();
    let green = faddeev_green(&k, dom.clone())?;
    let r1 = background_r1(&Potential::zero(dom.clone(), 3)?, &green)?;
    let b = dom.boundary();
    let mut worst = 0.0_f64;
    for (i, x) in b.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = [0, 1, 2].map(|a| x.position[a] - y.position[a]);
            let phase = k.plane_wave(&d);
            let g = phase * green.between(&x.position, &y.position);
            worst = worst.max((r1.entry(i, j) - g).norm());
        }
    }
    verdict(worst < 1e-14, format!("max deviation {worst:e}"))
}

fn r1_deterministic() -> Result<(bool, String)> {
    let dom = square(12)?;
    let v = sample_potential(&PotentialSpec::gaussian(0.1, &[0.0, 0.0], 0.1), dom.clone(), 3)?;
    let k = born_pair(&[2.0, 1.0])?.k();
    let green = faddeev_green(&k, dom)?;
    let a = background_r1(&v, &green)?;
    let b = background_r1(&v, &green)?;
    let worst = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    verdict(worst <= 1e-12, format!("max difference {worst:e}"))
}

fn kernel_fixture() -> Result<(DtnMap, crate::reduction::BoundaryKernel)> {
    let dom = square(8)?;
    let phi = dtn_map(&Potential::zero(dom.clone(), 3)?)?;
    let k = born_pair(&[1.0, 1.0])?.k();
    let green = faddeev_green(&k, dom.clone())?;
    let r1 = background_r1(&Potential::zero(dom, 3)?, &green)?;
    Ok((phi, r1))
}

fn kernel_a_identical() -> Result<(bool, String)> {
    let (phi, r1) = kernel_fixture()?;
    let a = kernel_a(&phi.difference(&phi)?, &r1)?;
    verdict(a.values().iter().all(|z| z.norm() == 0.0), "A ≡ 0")
}

fn single_column(dom: &Arc<Domain>, j: usize, c: f64) -> Result<DtnMap> {
    let nb = dom.boundary().len();
    let mut k = vec![0.0; nb * nb];
    for i in 0..nb {
        k[i * nb + j] = c * (1.0 + i as f64);
    }
    DtnMap::from_kernel(dom.clone(), k)
}

fn kernel_a_single_column() -> Result<(bool, String)> {
    let (phi, r1) = kernel_fixture()?;
    let dom = phi.domain().clone();
    let j = 5;
    let a = kernel_a(&single_column(&dom, j, 0.5)?, &r1)?;
    let nb = a.len();
    let stray = (0..nb)
        .flat_map(|r| (0..nb).map(move |c| (r, c)))
        .filter(|&(_, c)| c != j)
        .map(|(r, c)| a.entry(r, c).norm())
        .fold(0.0, f64::max);
    let col = (0..nb).map(|r| a.entry(r, j).norm()).fold(0.0, f64::max);
    verdict(stray == 0.0 && col > 0.0, format!("column {j} max {col:e}, elsewhere {stray}"))
}

fn kernel_a_linear() -> Result<(bool, String)> {
    let (phi, r1) = kernel_fixture()?;
    let dom = phi.domain().clone();
    let a1 = kernel_a(&single_column(&dom, 3, 0.5)?, &r1)?;
    let a2 = kernel_a(&single_column(&dom, 3, 1.0)?, &r1)?;
    let worst = a1
        .values()
        .iter()
        .zip(a2.values())
        .map(|(x, y)| (2.0 * x - y).norm())
        .fold(0.0, f64::max);
    verdict(worst <= 1e-14, format!("max |2A(Δ) - A(2Δ)| = {worst:e}"))
}

fn psi2_zero_kernel() -> Result<(bool, String)> {
    let (phi, r1) = kernel_fixture()?;
    let a = kernel_a(&phi.difference(&phi)?, &r1)?;
    let psi1 = BoundaryTrace::plane_wave(phi.domain(), r1.k());
    let sol = solve_psi2(&a, &psi1)?;
    let worst = sol
        .trace
        .values
        .iter()
        .zip(&psi1.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    verdict(worst == 0.0, format!("max |ψ₂ - ψ₁| = {worst:e}"))
}

fn born_estimate_zero() -> Result<(bool, String)> {
    let phi = free_dtn(12)?;
    let diff = phi.difference(&phi)?;
    let mut worst = 0.0_f64;
    for p in [[0.0, 0.0], [3.0, -1.0], [7.0, 2.0]] {
        worst = worst.max(vhat_from_dtn(&p, &diff)?.norm());
    }
    verdict(worst == 0.0, format!("max |v̂| = {worst}"))
}

fn born_estimate_linear() -> Result<(bool, String)> {
    let dom = square(8)?;
    let a = single_column(&dom, 7, 0.3)?;
    let b = single_column(&dom, 7, 0.3 * 2.5)?;
    let p = [2.0, 1.0];
    let (x, y) = (vhat_from_dtn(&p, &a)?, vhat_from_dtn(&p, &b)?);
    let defect = (2.5 * x - y).norm();
    verdict(defect <= 1e-13, format!("|c·est(Δ) - est(cΔ)| = {defect:e}"))
}

fn cutoff_arithmetic() -> Result<(bool, String)> {
    let rule = CutoffRule::new(0.5, std::f64::consts::FRAC_1_SQRT_2, 2)?;
    let rho = match rule.rho(1.0)? {
        Cutoff::Finite(r) => r,
        Cutoff::ExactData => return verdict(false, "unexpected exact branch"),
    };
    let ok = (rule.lambda() - 0.1847).abs() < 1e-4 && (rho - 0.1280).abs() < 1e-4;
    verdict(ok, format!("λ = {:.6}, ρ = {rho:.6}", rule.lambda()))
}

fn cutoff_monotone() -> Result<(bool, String)> {
    let rule = CutoffRule::new(0.5, 0.7, 2)?;
    let mut last = 0.0;
    for k in 0..12 {
        let Cutoff::Finite(r) = rule.rho(10f64.powi(-k))? else {
            return verdict(false, "unexpected exact branch");
        };
        if r <= last {
            return verdict(false, format!("ρ not increasing at δ = 1e-{k}"));
        }
        last = r;
    }
    verdict(rule.rho(0.0)? == Cutoff::ExactData, format!("ρ(1e-11) = {last:.4}"))
}

fn cutoff_ten_lambda() -> Result<(bool, String)> {
    let rule = CutoffRule::new(0.5, 0.7, 2)?;
    let delta = 1.0 / 10f64.exp_m1();
    let Cutoff::Finite(r) = rule.rho(delta)? else {
        return verdict(false, "unexpected exact branch");
    };
    let want = 10.0 * rule.lambda();
    verdict((r - want).abs() < 1e-12, format!("ρ = {r}, 10λ = {want}"))
}

fn reconstruct_zero_field() -> Result<(bool, String)> {
    let phi = free_dtn(12)?;
    let dom = phi.domain().clone();
    let fg = Arc::new(fourier_grid(&dom, 6.0, 13)?);
    let rec = reconstruct(&phi.difference(&phi)?, 6.0, &fg, &dom)?;
    verdict(rec.max_abs() == 0.0, format!("max |rec| = {}", rec.max_abs()))
}

fn split_identical() -> Result<(bool, String)> {
    let dom = square(16)?;
    let fg = Arc::new(fourier_grid(&dom, 10.0, 11)?);
    let s = fourier_transform(&small_bump(&dom)?, &fg)?;
    let e = error_split(&s, &s, 5.0)?;
    verdict(e.i1 == 0.0 && e.i2 == 0.0, format!("I₁ = {}, I₂ = {}", e.i1, e.i2))
}

fn split_empty_ball() -> Result<(bool, String)> {
    let dom = square(16)?;
    let fg = Arc::new(fourier_grid(&dom, 10.0, 11)?);
    let s1 = fourier_transform(&small_bump(&dom)?, &fg)?;
    let s0 = fourier_transform(&Potential::zero(dom, 3)?, &fg)?;
    let e = error_split(&s1, &s0, 0.0)?;
    let full: f64 = s1.values().iter().map(|z| z.norm()).sum::<f64>() * fg.weight();
    verdict(
        e.i1 == 0.0 && (e.i2 - full).abs() <= 1e-14 * full,
        format!("I₁ = {}, I₂ = {}, full {full}", e.i1, e.i2),
    )
}

fn identical_sweep() -> Result<crate::lab::StabilityReport> {
    let cfg = ExperimentConfig::from_json(
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},
            "fourier":{"p_max":10.0,"n_p":11},"order":3,
            "background":{"kind":"gaussian_bump","amplitude":0.1,"center":[0.0,0.0],"width":0.1},
            "perturbation":{"kind":"zero"},"amplitudes":[0.1]}"#,
    )?;
    run_sweep(&cfg)
}

fn sweep_exact_branch() -> Result<(bool, String)> {
    let report = identical_sweep()?;
    let r = &report.records[0];
    verdict(
        r.exact_data && r.delta == 0.0 && r.sup_err == 0.0,
        format!("δ = {}, error = {}", r.delta, r.sup_err),
    )
}

fn fit_exact_power() -> Result<(bool, String)> {
    let pts: Vec<(f64, f64)> = (1..=5)
        .map(|k| {
            let d = 10f64.powi(-k);
            (d, 0.7 * (1.0 / d).ln_1p().powi(-3))
        })
        .collect();
    let s = fit_exponent(&pts)?.slope;
    verdict((s + 3.0).abs() <= 1e-10, format!("slope {s}"))
}

fn fit_constant() -> Result<(bool, String)> {
    let s = fit_exponent(&[(1e-1, 4.0), (1e-3, 4.0), (1e-5, 4.0)])?.slope;
    verdict(s.abs() < 1e-12, format!("slope {s}"))
}

fn bounds_identical_pair() -> Result<(bool, String)> {
    let ledger = verify_bounds(&identical_sweep()?);
    let failed: Vec<_> = ledger.entries.iter().filter(|e| !e.passed).map(|e| e.name.clone()).collect();
    verdict(failed.is_empty(), format!("failed: {failed:?}"))
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        let failed: Vec<_> = super::run().into_iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
