//! Born-approximation reconstruction from a DtN difference with a
//! logarithmic frequency cutoff.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::faddeev::born_pair;
use crate::forward::DtnMap;
use crate::grid::{norm, Domain, FourierGrid};
use crate::potentials::{inverse_fourier, Spectrum};

type C64 = Complex64;

pub const DEFAULT_ALPHA: f64 = 0.5;

/// `ρ(δ) = λ ln(1 + 1/δ)` with `λ = (1-α)/(L + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffRule {
    alpha: f64,
    radius: f64,
    dim: usize,
}

/// Outcome of the cutoff rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "branch", content = "rho")]
pub enum Cutoff {
    /// `δ = 0`: the data are identical and so are the potentials.
    ExactData,
    Finite(f64),
}

impl CutoffRule {
    pub fn new(alpha: f64, radius: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(LabError::param("alpha", format!("must lie in (0,1), got {alpha}")));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(LabError::param("radius", "must be finite and non-negative"));
        }
        if !(2..=3).contains(&dim) {
            return Err(LabError::Dimension(dim));
        }
        Ok(Self { alpha, radius, dim })
    }

    pub fn for_domain(alpha: f64, dom: &Domain) -> Result<Self> {
        Self::new(alpha, dom.radius_bound(), dom.dim())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `L₁ = L + d`.
    pub fn l1(&self) -> f64 {
        self.radius + self.dim as f64
    }

    pub fn lambda(&self) -> f64 {
        (1.0 - self.alpha) / self.l1()
    }

    pub fn rho(&self, delta: f64) -> Result<Cutoff> {
        if delta == 0.0 {
            return Ok(Cutoff::ExactData);
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(LabError::param("delta", format!("must be positive, got {delta}")));
        }
        Ok(Cutoff::Finite(self.lambda() * (1.0 / delta).ln_1p()))
    }
}

/// `(2π)^{-d} Σ_i Σ_j e^{-il·x_i} ΔK_ij e^{ik·y_j} w_i w_j` at `(k,l) = born_pair(p)`.
pub fn vhat_from_dtn(p: &[f64], dtn_diff: &DtnMap) -> Result<C64> {
    let dom = dtn_diff.domain();
    if p.len() != dom.dim() {
        return Err(LabError::Mismatch { what: "dimensions" });
    }
    let pair = born_pair(p)?;
    let (k, l) = (pair.k(), pair.l());
    let nodes = dom.boundary();
    let nb = nodes.len();
    let left: Vec<C64> = nodes
        .iter()
        .map(|b| l.neg().plane_wave(&b.position) * b.weight)
        .collect();
    let right: Vec<C64> = nodes
        .iter()
        .map(|b| k.plane_wave(&b.position) * b.weight)
        .collect();
    let mut s = C64::new(0.0, 0.0);
    for (i, li) in left.iter().enumerate() {
        let row = &dtn_diff.kernel()[i * nb..(i + 1) * nb];
        let r: C64 = row.iter().zip(&right).map(|(kij, rj)| rj * *kij).sum();
        s += li * r;
    }
    Ok(s / (2.0 * PI).powi(dom.dim() as i32))
}

/// Born estimates on every lattice node with `|p| < ρ`, zero elsewhere.
pub fn born_spectrum(dtn_diff: &DtnMap, fg: &Arc<FourierGrid>, rho: f64) -> Result<Spectrum> {
    if rho > fg.p_max() {
        return Err(LabError::CutoffBeyondLattice {
            rho,
            p_max: fg.p_max(),
        });
    }
    let d = fg.dim();
    let one = |i: usize| -> Result<C64> {
        let p = fg.node(i);
        if norm(&p) < rho {
            vhat_from_dtn(&p[..d], dtn_diff)
        } else {
            Ok(C64::new(0.0, 0.0))
        }
    };
    #[cfg(feature = "parallel")]
    let values: Result<Vec<C64>> = (0..fg.len()).into_par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let values: Result<Vec<C64>> = (0..fg.len()).map(one).collect();
    Spectrum::new(fg.clone(), values?)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub spectrum: Spectrum,
    pub values: Vec<f64>,
    pub rho: f64,
    /// `max |Im| / max |Re|` of the truncated inversion.
    pub imag_residue: f64,
}

impl Reconstruction {
    pub fn zero(dom: &Domain, fg: &Arc<FourierGrid>) -> Self {
        Self {
            spectrum: Spectrum::new(fg.clone(), vec![C64::new(0.0, 0.0); fg.len()])
                .expect("lattice-sized spectrum"),
            values: vec![0.0; dom.num_cells()],
            rho: 0.0,
            imag_residue: 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_error(&self, truth: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(truth)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV columns `x1..xd, value[, truth]`.
    pub fn write_csv(&self, path: &Path, dom: &Domain, truth: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = dom.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        header.push("value".into());
        if truth.is_some() {
            header.push("truth".into());
        }
        w.write_record(&header)?;
        for (c, v) in self.values.iter().enumerate() {
            let x = dom.cell_center(c);
            let mut row: Vec<String> = x[..d].iter().map(|t| format!("{t:.17e}")).collect();
            row.push(format!("{v:.17e}"));
            if let Some(t) = truth {
                row.push(format!("{:.17e}", t[c]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Born spectrum on `|p| < ρ` followed by truncated inversion.
pub fn reconstruct(
    dtn_diff: &DtnMap,
    rho: f64,
    fg: &Arc<FourierGrid>,
    dom: &Domain,
) -> Result<Reconstruction> {
    if **dtn_diff.domain() != *dom {
        return Err(LabError::Mismatch { what: "domains" });
    }
    let spectrum = born_spectrum(dtn_diff, fg, rho)?;
    let inv = inverse_fourier(&spectrum, dom, rho)?;
    let peak = inv.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let imag_residue = if peak > 0.0 { inv.imag_max / peak } else { inv.imag_max };
    Ok(Reconstruction {
        spectrum,
        values: inv.values,
        rho,
        imag_residue,
    })
}

/// `I₁ = Σ_{|p|<ρ} |Δv̂| Δp^d`, `I₂ = Σ_{|p|≥ρ} |Δv̂| Δp^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    pub i1: f64,
    pub i2: f64,
    /// Largest `|Δv̂|` on the outermost lattice shell relative to the overall
    /// maximum; small values mean the tail beyond `p_max` is negligible.
    pub edge_ratio: f64,
}

pub fn error_split(s1: &Spectrum, s2: &Spectrum, rho: f64) -> Result<ErrorSplit> {
    let diff = s1.difference(s2)?;
    let fg = diff.grid();
    let w = fg.weight();
    let (mut i1, mut i2) = (0.0, 0.0);
    let mut peak = 0.0_f64;
    let mut edge = 0.0_f64;
    let shell = fg.p_max() - 1.5 * fg.spacing();
    for (i, z) in diff.values().iter().enumerate() {
        let p = fg.node(i);
        let a = z.norm();
        if norm(&p) < rho {
            i1 += a * w;
        } else {
            i2 += a * w;
        }
        peak = peak.max(a);
        if p.iter().any(|c| c.abs() > shell) {
            edge = edge.max(a);
        }
    }
    Ok(ErrorSplit {
        i1,
        i2,
        edge_ratio: if peak > 0.0 { edge / peak } else { 0.0 },
    })
}

/// JSON summary written next to the reconstruction field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub rho: f64,
    pub lambda: Option<f64>,
    pub delta: f64,
    pub sup_error: Option<f64>,
    pub relative_error: Option<f64>,
    pub i1: f64,
    pub i2: Option<f64>,
    pub imag_residue: f64,
    pub exact_data: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::dtn_map;
    use crate::grid::{build_square_domain, fourier_grid};
    use crate::potentials::{fourier_transform, Potential};

    #[test]
    fn cutoff_arithmetic() {
        let r = CutoffRule::new(0.5, 2f64.sqrt() / 2.0, 2).unwrap();
        assert!((r.lambda() - 0.184699).abs() < 1e-6);
        match r.rho(1.0).unwrap() {
            Cutoff::Finite(rho) => assert!((rho - r.lambda() * 2f64.ln()).abs() < 1e-15),
            _ => panic!(),
        }
        let delta = 1.0 / (10f64.exp() - 1.0);
        match r.rho(delta).unwrap() {
            Cutoff::Finite(rho) => assert!((rho - 10.0 * r.lambda()).abs() < 1e-12),
            _ => panic!(),
        }
        assert_eq!(r.rho(0.0).unwrap(), Cutoff::ExactData);
        assert!(r.rho(-1.0).is_err());
        assert!(CutoffRule::new(1.0, 0.5, 2).is_err());
    }

    #[test]
    fn cutoff_is_monotone() {
        let r = CutoffRule::new(0.3, 0.7, 3).unwrap();
        let mut last = 0.0;
        for e in 1..12 {
            let Cutoff::Finite(rho) = r.rho(10f64.powi(-e)).unwrap() else { panic!() };
            assert!(rho > last);
            last = rho;
        }
    }

    #[test]
    fn identical_maps_reconstruct_zero() {
        let dom = Arc::new(build_square_domain(2, 12, 1.0).unwrap());
        let phi = dtn_map(&Potential::zero(dom.clone(), 3).unwrap()).unwrap();
        let diff = phi.difference(&phi).unwrap();
        let fg = Arc::new(fourier_grid(&dom, 6.0, 13).unwrap());
        let rec = reconstruct(&diff, 5.0, &fg, &dom).unwrap();
        assert!(rec.values.iter().all(|&x| x == 0.0));
        assert!(matches!(
            reconstruct(&diff, 7.0, &fg, &dom),
            Err(LabError::CutoffBeyondLattice { .. })
        ));
    }

    #[test]
    fn born_estimate_is_linear() {
        let dom = Arc::new(build_square_domain(2, 8, 1.0).unwrap());
        let nb = dom.boundary().len();
        let k: Vec<f64> = (0..nb * nb).map(|i| ((i * 7 % 13) as f64 - 6.0) * 0.01).collect();
        let a = DtnMap::from_kernel(dom.clone(), k.clone()).unwrap();
        let b = DtnMap::from_kernel(dom, k.iter().map(|x| -3.0 * x).collect()).unwrap();
        let p = [1.3, -0.4];
        let ea = vhat_from_dtn(&p, &a).unwrap();
        let eb = vhat_from_dtn(&p, &b).unwrap();
        assert!((eb + 3.0 * ea).norm() <= 1e-13, "{ea} {eb}");
    }

    #[test]
    fn split_trivial_cases() {
        let dom = Arc::new(build_square_domain(2, 16, 1.0).unwrap());
        let fg = Arc::new(fourier_grid(&dom, 20.0, 21).unwrap());
        let v = crate::potentials::sample_potential(
            &crate::potentials::PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.12),
            dom.clone(),
            3,
        )
        .unwrap();
        let s = fourier_transform(&v, &fg).unwrap();
        let z = fourier_transform(&Potential::zero(dom, 3).unwrap(), &fg).unwrap();
        let same = error_split(&s, &s, 5.0).unwrap();
        assert_eq!((same.i1, same.i2), (0.0, 0.0));
        let all = error_split(&s, &z, 0.0).unwrap();
        let total: f64 = s.values().iter().map(|c| c.norm()).sum::<f64>() * fg.weight();
        assert_eq!(all.i1, 0.0);
        assert!((all.i2 - total).abs() <= 1e-12 * total);
    }
}
