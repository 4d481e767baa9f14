//! Synthetic potentials, the W^{m,1} norm, and the Fourier transform pair
//! `v̂(p) = (2π)^{-d} ∫ e^{ip·x} v(x) dx`, `v(x) = ∫ e^{-ip·x} v̂(p) dp`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{dot, Domain, FourierGrid, Point};
use crate::linalg::contract_axis;

/// Gaussians are rejected when they exceed this fraction of |A| inside the
/// two-cell boundary margin; the remaining tail is removed by a smooth taper.
pub const GAUSSIAN_SUPPORT_TOL: f64 = 1e-2;

/// Cells adjacent to the boundary that must carry zero potential.
pub const SUPPORT_MARGIN_CELLS: usize = 2;

/// Serialized with a `kind` tag; parsing is strict and reports the path of
/// the offending field inside nested specs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero {},
    /// `A exp(-|x-x₀|²/σ²)`, smoothly tapered to zero near the boundary.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `A exp(1 - 1/(1 - |x-x₀|²/σ²))` inside the ball of radius σ (C^∞).
    CompactBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `A (1 - |x-x₀|²/σ²)^q` inside the ball of radius σ; finite smoothness.
    PowerBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
        exponent: f64,
    },
    Sum {
        components: Vec<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn gaussian(amplitude: f64, center: &[f64], width: f64) -> Self {
        PotentialSpec::GaussianBump {
            amplitude,
            center: center.to_vec(),
            width,
        }
    }

    pub fn compact(amplitude: f64, center: &[f64], width: f64) -> Self {
        PotentialSpec::CompactBump {
            amplitude,
            center: center.to_vec(),
            width,
        }
    }

    pub fn power(amplitude: f64, center: &[f64], width: f64, exponent: f64) -> Self {
        PotentialSpec::PowerBump {
            amplitude,
            center: center.to_vec(),
            width,
            exponent,
        }
    }

    /// Same shape, amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            PotentialSpec::Zero {} => PotentialSpec::Zero {},
            PotentialSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => PotentialSpec::GaussianBump {
                amplitude: amplitude * factor,
                center: center.clone(),
                width: *width,
            },
            PotentialSpec::CompactBump {
                amplitude,
                center,
                width,
            } => PotentialSpec::CompactBump {
                amplitude: amplitude * factor,
                center: center.clone(),
                width: *width,
            },
            PotentialSpec::PowerBump {
                amplitude,
                center,
                width,
                exponent,
            } => PotentialSpec::PowerBump {
                amplitude: amplitude * factor,
                center: center.clone(),
                width: *width,
                exponent: *exponent,
            },
            PotentialSpec::Sum { components } => PotentialSpec::Sum {
                components: components.iter().map(|c| c.scaled(factor)).collect(),
            },
        }
    }

    pub fn plus(self, other: PotentialSpec) -> Self {
        PotentialSpec::Sum {
            components: vec![self, other],
        }
    }
}

const KINDS: &[&str] = &["zero", "gaussian_bump", "compact_bump", "power_bump", "sum"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyBody {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpBody {
    amplitude: f64,
    center: Vec<f64>,
    width: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerBody {
    amplitude: f64,
    center: Vec<f64>,
    width: f64,
    exponent: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SumBody {
    components: Vec<PotentialSpec>,
}

/// Splits a message of the form ``at `path`: reason``.
pub(crate) fn split_located(msg: &str) -> Option<(&str, &str)> {
    let rest = msg.strip_prefix("at `")?;
    let end = rest.find("`: ")?;
    Some((&rest[..end], &rest[end + 3..]))
}

pub(crate) fn join_path(outer: &str, inner: &str) -> String {
    match (outer, inner) {
        ("." | "", _) => inner.to_string(),
        (_, "." | "") => outer.to_string(),
        (_, i) if i.starts_with('[') => format!("{outer}{inner}"),
        _ => format!("{outer}.{inner}"),
    }
}

fn located(path: &str, msg: &str) -> String {
    match split_located(msg) {
        Some((inner, rest)) => format!("at `{}`: {rest}", join_path(path, inner)),
        None => format!("at `{path}`: {msg}"),
    }
}

fn body<T: serde::de::DeserializeOwned, E: serde::de::Error>(v: serde_json::Value) -> std::result::Result<T, E> {
    serde_path_to_error::deserialize(v)
        .map_err(|e| E::custom(located(&e.path().to_string(), &e.into_inner().to_string())))
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let mut map = serde_json::Map::deserialize(d)?;
        let kind = match map.remove("kind") {
            Some(serde_json::Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom(located("kind", "expected a string"))),
            None => return Err(D::Error::missing_field("kind")),
        };
        let v = serde_json::Value::Object(map);
        Ok(match kind.as_str() {
            "zero" => {
                let EmptyBody {} = body(v)?;
                PotentialSpec::Zero {}
            }
            "gaussian_bump" => {
                let b: BumpBody = body(v)?;
                PotentialSpec::GaussianBump {
                    amplitude: b.amplitude,
                    center: b.center,
                    width: b.width,
                }
            }
            "compact_bump" => {
                let b: BumpBody = body(v)?;
                PotentialSpec::CompactBump {
                    amplitude: b.amplitude,
                    center: b.center,
                    width: b.width,
                }
            }
            "power_bump" => {
                let b: PowerBody = body(v)?;
                PotentialSpec::PowerBump {
                    amplitude: b.amplitude,
                    center: b.center,
                    width: b.width,
                    exponent: b.exponent,
                }
            }
            "sum" => {
                let b: SumBody = body(v)?;
                PotentialSpec::Sum {
                    components: b.components,
                }
            }
            other => {
                let msg = format!("unknown kind `{other}`, expected one of {KINDS:?}");
                return Err(D::Error::custom(located("kind", &msg)));
            }
        })
    }
}

fn center_point(center: &[f64], dim: usize) -> Result<Point> {
    if center.len() != dim {
        return Err(LabError::param(
            "center",
            format!("expected {dim} coordinates, got {}", center.len()),
        ));
    }
    let mut c = [0.0; 3];
    c[..dim].copy_from_slice(center);
    Ok(c)
}

fn dist2(x: &Point, c: &Point) -> f64 {
    (0..3).map(|a| (x[a] - c[a]).powi(2)).sum()
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Product taper equal to one well inside the domain and zero in the margin.
pub fn boundary_taper(dom: &Domain, x: &Point) -> f64 {
    let h = dom.h();
    let outer = dom.side() / 2.0 - SUPPORT_MARGIN_CELLS as f64 * h;
    let width = (0.15 * dom.side()).max(4.0 * h);
    (0..dom.dim())
        .map(|a| smooth_step((outer - x[a].abs()) / width))
        .product()
}

/// Real potential sampled at cell centers, zero outside D.
#[derive(Debug, Clone)]
pub struct Potential {
    domain: Arc<Domain>,
    values: Vec<f64>,
    order: usize,
}

impl Potential {
    /// Wrap raw cell values, checking the zero margin.
    pub fn from_values(domain: Arc<Domain>, values: Vec<f64>, order: usize) -> Result<Self> {
        if values.len() != domain.num_cells() {
            return Err(LabError::Mismatch { what: "grids" });
        }
        if let Some((cell, &value)) = values
            .iter()
            .enumerate()
            .find(|&(c, v)| *v != 0.0 && domain.depth(c) < SUPPORT_MARGIN_CELLS)
        {
            return Err(LabError::SupportViolation {
                node: cell,
                position: domain.cell_center(cell)[..domain.dim()].to_vec(),
                value,
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::param("values", format!("non-finite value at cell {bad}")));
        }
        if order <= domain.dim() {
            return Err(LabError::param(
                "order",
                format!("smoothness m={order} must exceed d={}", domain.dim()),
            ));
        }
        Ok(Self {
            domain,
            values,
            order,
        })
    }

    pub fn zero(domain: Arc<Domain>, order: usize) -> Result<Self> {
        let n = domain.num_cells();
        Self::from_values(domain, vec![0.0; n], order)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Number of boundary cell layers on which the potential vanishes.
    pub fn zero_margin(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(c, _)| self.domain.depth(c))
            .min()
            .unwrap_or(self.domain.resolution() / 2)
    }

    /// Cells where the potential is nonzero.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(c, _)| c)
            .collect()
    }

    /// Pointwise combination `a·self + b·other` on the same grid.
    pub fn combine(&self, a: f64, other: &Potential, b: f64) -> Result<Potential> {
        if self.domain != other.domain {
            return Err(LabError::Mismatch { what: "domains" });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Potential::from_values(self.domain.clone(), values, self.order.min(other.order))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.domain.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (c, v) in self.values.iter().enumerate() {
            let x = self.domain.cell_center(c);
            let mut row: Vec<String> = x[..d].iter().map(|t| format!("{t:.17e}")).collect();
            row.push(format!("{v:.17e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, domain: Arc<Domain>, order: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let d = domain.dim();
        let bad = |reason: String| LabError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let headers = r.headers()?.clone();
        if headers.len() != d + 1 {
            return Err(bad(format!("expected {} columns, found {}", d + 1, headers.len())));
        }
        let mut values = Vec::with_capacity(domain.num_cells());
        let tol = 1e-9 * domain.side();
        for (c, rec) in r.records().enumerate() {
            let rec = rec?;
            if c >= domain.num_cells() {
                return Err(bad("more rows than grid cells".into()));
            }
            let x = domain.cell_center(c);
            for a in 0..d {
                let t: f64 = rec[a]
                    .trim()
                    .parse()
                    .map_err(|e| bad(format!("row {c}: {e}")))?;
                if (t - x[a]).abs() > tol {
                    return Err(bad(format!("row {c}: coordinate {t} does not match grid")));
                }
            }
            let v: f64 = rec[d]
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {c}: {e}")))?;
            values.push(v);
        }
        if values.len() != domain.num_cells() {
            return Err(bad(format!(
                "expected {} rows, found {}",
                domain.num_cells(),
                values.len()
            )));
        }
        Potential::from_values(domain, values, order)
    }
}

fn sample_into(spec: &PotentialSpec, dom: &Domain, out: &mut [f64]) -> Result<()> {
    let d = dom.dim();
    match spec {
        PotentialSpec::Zero {} => {}
        PotentialSpec::GaussianBump {
            amplitude,
            center,
            width,
        } => {
            let c = center_point(center, d)?;
            positive_width(*width)?;
            for (cell, slot) in out.iter_mut().enumerate() {
                let x = dom.cell_center(cell);
                let raw = amplitude * (-dist2(&x, &c) / (width * width)).exp();
                if dom.depth(cell) < SUPPORT_MARGIN_CELLS {
                    if raw.abs() > GAUSSIAN_SUPPORT_TOL * amplitude.abs() {
                        return Err(LabError::SupportViolation {
                            node: cell,
                            position: x[..d].to_vec(),
                            value: raw,
                        });
                    }
                    continue;
                }
                *slot += raw * boundary_taper(dom, &x);
            }
        }
        PotentialSpec::CompactBump {
            amplitude,
            center,
            width,
        } => {
            let c = center_point(center, d)?;
            positive_width(*width)?;
            sample_radial(dom, &c, *width, out, |s| {
                amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
            })?;
        }
        PotentialSpec::PowerBump {
            amplitude,
            center,
            width,
            exponent,
        } => {
            let c = center_point(center, d)?;
            positive_width(*width)?;
            if !(*exponent > 0.0) {
                return Err(LabError::param("exponent", "must be positive"));
            }
            sample_radial(dom, &c, *width, out, |s| amplitude * (1.0 - s).powf(*exponent))?;
        }
        PotentialSpec::Sum { components } => {
            for comp in components {
                sample_into(comp, dom, out)?;
            }
        }
    }
    Ok(())
}

fn positive_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(LabError::param("width", format!("must be positive, got {width}")))
    }
}

/// Radial profile `f(|x-c|²/σ²)` on the open unit ball.
fn sample_radial(
    dom: &Domain,
    c: &Point,
    width: f64,
    out: &mut [f64],
    f: impl Fn(f64) -> f64,
) -> Result<()> {
    for (cell, slot) in out.iter_mut().enumerate() {
        let x = dom.cell_center(cell);
        let s = dist2(&x, c) / (width * width);
        if s >= 1.0 {
            continue;
        }
        let v = f(s);
        if v == 0.0 {
            continue;
        }
        if dom.depth(cell) < SUPPORT_MARGIN_CELLS {
            return Err(LabError::SupportViolation {
                node: cell,
                position: x[..dom.dim()].to_vec(),
                value: v,
            });
        }
        *slot += v;
    }
    Ok(())
}

pub fn sample_potential(spec: &PotentialSpec, dom: Arc<Domain>, order: usize) -> Result<Potential> {
    let mut values = vec![0.0; dom.num_cells()];
    sample_into(spec, &dom, &mut values)?;
    Potential::from_values(dom, values, order)
}

/// Second-order central stencil for the j-th derivative (before the h^{-j}
/// scaling), centered on the middle entry.
fn derivative_stencil(j: usize) -> Vec<f64> {
    let convolve = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (k, y) in b.iter().enumerate() {
                out[i + k] += x * y;
            }
        }
        out
    };
    let mut st = vec![1.0];
    for _ in 0..j / 2 {
        st = convolve(&st, &[1.0, -2.0, 1.0]);
    }
    if j % 2 == 1 {
        st = convolve(&st, &[-0.5, 0.0, 0.5]);
    }
    st
}

fn apply_axis_derivative(dom: &Domain, data: &[f64], axis: usize, order: usize) -> Vec<f64> {
    if order == 0 {
        return data.to_vec();
    }
    let st = derivative_stencil(order);
    let half = (st.len() / 2) as isize;
    let n = dom.resolution() as isize;
    let stride = dom.stride(axis);
    let scale = dom.h().powi(-(order as i32));
    (0..data.len())
        .map(|cell| {
            let i = dom.cell_index(cell)[axis] as isize;
            let mut s = 0.0;
            for (t, coeff) in st.iter().enumerate() {
                let j = i + t as isize - half;
                // zero extension outside D
                if j < 0 || j >= n {
                    continue;
                }
                let nb = (cell as isize + (j - i) * stride as isize) as usize;
                s += coeff * data[nb];
            }
            s * scale
        })
        .collect()
}

/// Multi-indices J with |J| ≤ m in `dim` dimensions.
pub fn multi_indices(dim: usize, m: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=m {
        for b in 0..=(m - a) {
            if dim == 2 {
                out.push([a, b, 0]);
            } else {
                for c in 0..=(m - a - b) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// `max_{|J| ≤ m} ‖∂^J v‖_{L¹}` with second-order central differences.
pub fn norm_w_m1(v: &Potential, m: usize) -> Result<f64> {
    let dom = v.domain();
    let needed = m.div_ceil(2);
    let available = v.zero_margin();
    if needed > available || needed >= dom.resolution() / 2 {
        return Err(LabError::DerivativeStencil {
            order: m,
            needed,
            available,
        });
    }
    let vol = dom.cell_volume();
    let mut best = 0.0_f64;
    for j in multi_indices(dom.dim(), m) {
        let mut data = v.values().to_vec();
        for (axis, &order) in j.iter().enumerate().take(dom.dim()) {
            data = apply_axis_derivative(dom, &data, axis, order);
        }
        let l1: f64 = data.iter().map(|x| x.abs()).sum::<f64>() * vol;
        best = best.max(l1);
    }
    Ok(best)
}

/// Complex values on a frequency lattice.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<FourierGrid>,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Arc<FourierGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Mismatch { what: "lattices" });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn difference(&self, other: &Spectrum) -> Result<Spectrum> {
        if *self.grid != *other.grid {
            return Err(LabError::Mismatch { what: "lattices" });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Spectrum {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Largest relative violation of v̂(-p) = conj(v̂(p)).
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        (0..self.values.len())
            .map(|i| (self.values[self.grid.mirror(i)] - self.values[i].conj()).norm())
            .fold(0.0_f64, f64::max)
            / scale
    }
}

fn phase_matrix(freqs: &[f64], coords: &[f64], sign: f64) -> Vec<Vec<Complex64>> {
    freqs
        .iter()
        .map(|&p| {
            coords
                .iter()
                .map(|&x| Complex64::from_polar(1.0, sign * p * x))
                .collect()
        })
        .collect()
}

/// `v̂(p) = (2π)^{-d} Σ_x e^{ip·x} v(x) h^d`, evaluated axis by axis.
pub fn fourier_transform(v: &Potential, fg: &Arc<FourierGrid>) -> Result<Spectrum> {
    let dom = v.domain();
    if dom.dim() != fg.dim() {
        return Err(LabError::Mismatch { what: "dimensions" });
    }
    let d = dom.dim();
    let mut shape = vec![dom.resolution(); d];
    let mut data: Vec<Complex64> = v.values().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let e = phase_matrix(fg.axis_coords(), dom.axis_coords(), 1.0);
    for axis in 0..d {
        let (next, s) = contract_axis(&data, &shape, axis, &e);
        data = next;
        shape = s;
    }
    let scale = dom.cell_volume() / (2.0 * PI).powi(d as i32);
    for z in &mut data {
        *z *= scale;
    }
    Spectrum::new(fg.clone(), data)
}

/// Truncated inversion result: real part plus the size of the discarded
/// imaginary part.
#[derive(Debug, Clone)]
pub struct Inversion {
    pub values: Vec<f64>,
    pub imag_max: f64,
}

fn check_cutoff(fg: &FourierGrid, rho: f64) -> Result<()> {
    if rho > fg.p_max() || rho.is_nan() {
        return Err(LabError::CutoffBeyondLattice {
            rho,
            p_max: fg.p_max(),
        });
    }
    Ok(())
}

/// `w(x) = Σ_{|p|<ρ} e^{-ip·x} v̂(p) Δp^d` at the cell centers of `dom`.
pub fn inverse_fourier(s: &Spectrum, dom: &Domain, rho: f64) -> Result<Inversion> {
    let fg = s.grid();
    check_cutoff(fg, rho)?;
    if dom.dim() != fg.dim() {
        return Err(LabError::Mismatch { what: "dimensions" });
    }
    let d = dom.dim();
    let mut shape = vec![fg.n_p(); d];
    let mut data: Vec<Complex64> = s
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let p = fg.node(i);
            if dot(&p, &p).sqrt() < rho {
                *z
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let e = phase_matrix(dom.axis_coords(), fg.axis_coords(), -1.0);
    for axis in 0..d {
        let (next, sh) = contract_axis(&data, &shape, axis, &e);
        data = next;
        shape = sh;
    }
    let w = fg.weight();
    Ok(Inversion {
        values: data.iter().map(|z| z.re * w).collect(),
        imag_max: data.iter().fold(0.0_f64, |m, z| m.max((z.im * w).abs())),
    })
}

/// Direct evaluation of the truncated inversion at arbitrary points.
pub fn inverse_fourier_at(s: &Spectrum, points: &[Point], rho: f64) -> Result<Vec<Complex64>> {
    let fg = s.grid();
    check_cutoff(fg, rho)?;
    let inside: Vec<(Point, Complex64)> = (0..fg.len())
        .map(|i| (fg.node(i), s.values()[i]))
        .filter(|(p, _)| dot(p, p).sqrt() < rho)
        .collect();
    let w = fg.weight();
    Ok(points
        .iter()
        .map(|x| {
            inside
                .iter()
                .map(|(p, z)| z * Complex64::from_polar(1.0, -dot(p, x)))
                .sum::<Complex64>()
                * w
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_square_domain, fourier_grid};
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Arc<Domain> {
        Arc::new(build_square_domain(2, n, 1.0).unwrap())
    }

    #[test]
    fn zero_amplitude_gives_zero_potential() {
        let v = sample_potential(&PotentialSpec::gaussian(0.0, &[0.0, 0.0], 0.2), unit(16), 3)
            .unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn gaussian_peak_at_center_node() {
        let dom = unit(64);
        let v = sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.15), dom.clone(), 3)
            .unwrap();
        let (argmax, max) = v
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        let nearest = (0..dom.num_cells())
            .min_by(|&a, &b| {
                let na = crate::grid::norm(&dom.cell_center(a));
                let nb = crate::grid::norm(&dom.cell_center(b));
                na.partial_cmp(&nb).unwrap()
            })
            .unwrap();
        assert_eq!(
            crate::grid::norm(&dom.cell_center(argmax)),
            crate::grid::norm(&dom.cell_center(nearest))
        );
        assert!((max - 1.0).abs() < 1e-2);
    }

    #[test]
    fn sum_is_pointwise() {
        let dom = unit(32);
        let a = PotentialSpec::gaussian(0.4, &[0.1, 0.0], 0.1);
        let b = PotentialSpec::compact(-0.2, &[-0.1, 0.1], 0.2);
        let va = sample_potential(&a, dom.clone(), 3).unwrap();
        let vb = sample_potential(&b, dom.clone(), 3).unwrap();
        let vs = sample_potential(&a.clone().plus(b), dom, 3).unwrap();
        for i in 0..vs.values().len() {
            assert_eq!(vs.values()[i], va.values()[i] + vb.values()[i]);
        }
    }

    #[test]
    fn support_violation_reports_node() {
        let err = sample_potential(&PotentialSpec::compact(1.0, &[0.45, 0.0], 0.2), unit(32), 3)
            .unwrap_err();
        match err {
            LabError::SupportViolation { position, .. } => assert!(position[0] > 0.4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(
            sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.6), unit(32), 3).is_err()
        );
    }

    #[test]
    fn margin_is_respected() {
        let dom = unit(32);
        let v = sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.2), dom.clone(), 3)
            .unwrap();
        assert!(v.zero_margin() >= SUPPORT_MARGIN_CELLS);
        for b in dom.boundary() {
            assert_eq!(v.values()[b.cell], 0.0);
            assert_eq!(v.values()[b.inner], 0.0);
        }
    }

    #[test]
    fn order_must_exceed_dimension() {
        assert!(Potential::zero(unit(16), 2).is_err());
        assert!(Potential::zero(unit(16), 3).is_ok());
    }

    #[test]
    fn w_norm_of_zero_and_order_zero() {
        let dom = unit(32);
        assert_eq!(norm_w_m1(&Potential::zero(dom.clone(), 3).unwrap(), 2).unwrap(), 0.0);
        let v = sample_potential(&PotentialSpec::gaussian(0.7, &[0.0, 0.1], 0.12), dom.clone(), 3)
            .unwrap();
        let l1: f64 = v.values().iter().map(|x| x.abs()).sum::<f64>() * dom.cell_volume();
        assert_abs_diff_eq!(norm_w_m1(&v, 0).unwrap(), l1, epsilon = 1e-15);
    }

    #[test]
    fn w_norm_rejects_wide_stencil() {
        let dom = unit(16);
        let v = sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.12), dom, 3).unwrap();
        let margin = v.zero_margin();
        assert!(matches!(
            norm_w_m1(&v, 2 * margin + 2),
            Err(LabError::DerivativeStencil { .. })
        ));
    }

    #[test]
    fn stencils_have_expected_moments() {
        // j-th stencil annihilates polynomials of degree < j and maps x^j to j!
        for j in 1..=6 {
            let st = derivative_stencil(j);
            let half = (st.len() / 2) as f64;
            for deg in 0..=j {
                let m: f64 = st
                    .iter()
                    .enumerate()
                    .map(|(t, c)| c * (t as f64 - half).powi(deg as i32))
                    .sum();
                let expect = if deg == j {
                    (1..=j).product::<usize>() as f64
                } else {
                    0.0
                };
                assert_abs_diff_eq!(m, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_transform_and_empty_ball() {
        let dom = unit(16);
        let fg = Arc::new(fourier_grid(&dom, 10.0, 21).unwrap());
        let z = fourier_transform(&Potential::zero(dom.clone(), 3).unwrap(), &fg).unwrap();
        assert!(z.values().iter().all(|c| c.norm() == 0.0));
        let v = sample_potential(&PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.15), dom.clone(), 3)
            .unwrap();
        let s = fourier_transform(&v, &fg).unwrap();
        let inv = inverse_fourier(&s, &dom, 0.0).unwrap();
        assert!(inv.values.iter().all(|&x| x == 0.0));
        assert!(inverse_fourier(&s, &dom, 11.0).is_err());
    }

    #[test]
    fn spec_json_is_strict() {
        let ok: PotentialSpec = serde_json::from_str(
            r#"{"kind":"gaussian_bump","amplitude":1.0,"center":[0,0],"width":0.2}"#,
        )
        .unwrap();
        assert_eq!(ok, PotentialSpec::gaussian(1.0, &[0.0, 0.0], 0.2));
        assert!(serde_json::from_str::<PotentialSpec>(
            r#"{"kind":"gaussian_bump","amplitude":1.0,"center":[0,0],"width":0.2,"extra":1}"#,
        )
        .is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dom = unit(16);
        let v = sample_potential(&PotentialSpec::gaussian(0.3, &[0.05, 0.0], 0.15), dom.clone(), 4)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        v.write_csv(&path).unwrap();
        let back = Potential::read_csv(&path, dom, 4).unwrap();
        assert_eq!(back.values(), v.values());
    }
}
