//! Browser entry points. Each function takes plain numbers and returns a
//! JSON document for the page to plot; errors come back as strings.

use std::sync::Arc;

use dtnlab::born::{reconstruct, CutoffRule, Cutoff};
use dtnlab::faddeev::{born_pair, faddeev_green};
use dtnlab::forward::dtn_map;
use dtnlab::grid::norm;
use dtnlab::potentials::fourier_transform;
use dtnlab::{build_square_domain, fourier_grid, sample_potential, Potential, PotentialSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct GreenView {
    n: usize,
    /// Row-major `(2n+1)²` window of cell offsets `j ∈ [-n, n]²`.
    re: Vec<f64>,
    im: Vec<f64>,
    abs: Vec<f64>,
    residual: f64,
    k_re: [f64; 2],
    k_im: [f64; 2],
}

/// Faddeev Green function `g(x, k)` for `k = born_pair(p).k` on the unit
/// square with `n` cells per side.
#[wasm_bindgen]
pub fn green_field(n: usize, p1: f64, p2: f64) -> Out {
    let dom = Arc::new(build_square_domain(2, n, 1.0).map_err(text)?);
    let k = born_pair(&[p1, p2]).map_err(text)?.k();
    let g = faddeev_green(&k, dom).map_err(text)?;
    let m = n as i64;
    let side = (2 * n + 1) * (2 * n + 1);
    let (mut re, mut im, mut abs) = (Vec::with_capacity(side), Vec::with_capacity(side), Vec::with_capacity(side));
    for j1 in -m..=m {
        for j0 in -m..=m {
            let z = g.at_cells([j0, j1, 0]);
            re.push(z.re);
            im.push(z.im);
            abs.push(z.norm());
        }
    }
    to_json(&GreenView {
        n,
        re,
        im,
        abs,
        residual: g.delta_residual(),
        k_re: [k.re()[0], k.re()[1]],
        k_im: [k.im()[0], k.im()[1]],
    })
}

#[derive(Serialize)]
struct BornView {
    n: usize,
    side: f64,
    rho: f64,
    delta: f64,
    truth: Vec<f64>,
    reconstruction: Vec<f64>,
    sup_error: f64,
    relative_error: f64,
    imag_residue: f64,
}

/// Born reconstruction of a centred Gaussian from its synthetic DtN map,
/// truncated at `|p| < ρ`.
#[wasm_bindgen]
pub fn born_reconstruction(n: usize, side: f64, amplitude: f64, width: f64, rho: f64) -> Out {
    let dom = Arc::new(build_square_domain(2, n, side).map_err(text)?);
    let spec = PotentialSpec::gaussian(amplitude, &[0.0, 0.0], width);
    let v = sample_potential(&spec, dom.clone(), 3).map_err(text)?;
    let phi = dtn_map(&v).map_err(text)?;
    let phi0 = dtn_map(&Potential::zero(dom.clone(), 3).map_err(text)?).map_err(text)?;
    let diff = phi.difference(&phi0).map_err(text)?;
    let n_p = 4 * rho.ceil() as usize + 1;
    let fg = Arc::new(fourier_grid(&dom, rho.max(1.0), n_p).map_err(text)?);
    let rec = reconstruct(&diff, rho, &fg, &dom).map_err(text)?;
    let err = rec.sup_error(v.values());
    to_json(&BornView {
        n,
        side,
        rho,
        delta: diff.linf_norm(),
        truth: v.values().to_vec(),
        sup_error: err,
        relative_error: err / v.max_abs().max(f64::MIN_POSITIVE),
        imag_residue: rec.imag_residue,
        reconstruction: rec.values,
    })
}

#[derive(Serialize)]
struct CutoffView {
    lambda: f64,
    l1: f64,
    /// `(δ, ρ(δ))` from the cutoff rule.
    rule: Vec<[f64; 2]>,
    /// `(ρ, I₁(ρ), I₂(ρ))` for the exact spectrum of the bump.
    split: Vec<[f64; 3]>,
}

/// Cutoff rule `ρ = λ ln(1 + 1/δ)` next to the split of `∫|v̂|` into the
/// ball `|p| < ρ` and its complement, for a finite-smoothness bump.
#[wasm_bindgen]
pub fn cutoff_curves(alpha: f64, exponent: f64, width: f64, p_max: f64) -> Out {
    let n = 48;
    let dom = Arc::new(build_square_domain(2, n, 1.0).map_err(text)?);
    let rule = CutoffRule::for_domain(alpha, &dom).map_err(text)?;
    let rule_pts = (0..=40)
        .map(|i| {
            let delta = 10f64.powf(-0.25 * i as f64);
            match rule.rho(delta) {
                Ok(Cutoff::Finite(r)) => Ok([delta, r]),
                Ok(Cutoff::ExactData) => Ok([delta, f64::INFINITY]),
                Err(e) => Err(text(e)),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = PotentialSpec::power(1.0, &[0.0, 0.0], width, exponent);
    let v = sample_potential(&spec, dom.clone(), 3).map_err(text)?;
    let n_p = 2 * p_max.ceil() as usize + 1;
    let fg = Arc::new(fourier_grid(&dom, p_max, n_p).map_err(text)?);
    let s = fourier_transform(&v, &fg).map_err(text)?;
    let w = fg.weight();
    let mut radial: Vec<(f64, f64)> = s
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| (norm(&fg.node(i)), z.norm() * w))
        .collect();
    radial.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = radial.iter().map(|r| r.1).sum();
    let mut split = Vec::new();
    let mut inside = 0.0;
    let mut idx = 0;
    for i in 1..=60 {
        let rho = p_max * i as f64 / 60.0;
        while idx < radial.len() && radial[idx].0 < rho {
            inside += radial[idx].1;
            idx += 1;
        }
        split.push([rho, inside, (total - inside).max(0.0)]);
    }
    to_json(&CutoffView {
        lambda: rule.lambda(),
        l1: rule.l1(),
        rule: rule_pts,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: Out) -> serde_json::Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn green_window_has_full_size() {
        let v = parse(green_field(12, 2.0, 0.0));
        assert_eq!(v["abs"].as_array().unwrap().len(), 25 * 25);
        assert!(v["residual"].as_f64().unwrap() < 1e-10);
    }

    #[test]
    fn born_view_reports_small_error() {
        let v = parse(born_reconstruction(24, 2.5, 0.05, 0.45, 6.0));
        assert!(v["relative_error"].as_f64().unwrap() < 0.3);
        assert_eq!(v["truth"].as_array().unwrap().len(), 24 * 24);
    }

    #[test]
    fn cutoff_split_adds_up() {
        let v = parse(cutoff_curves(0.5, 4.5, 0.3, 20.0));
        let split = v["split"].as_array().unwrap();
        let first = split[0].as_array().unwrap();
        let last = split[split.len() - 1].as_array().unwrap();
        let total = first[1].as_f64().unwrap() + first[2].as_f64().unwrap();
        let total2 = last[1].as_f64().unwrap() + last[2].as_f64().unwrap();
        assert!((total - total2).abs() < 1e-12 * total);
        let rule = v["rule"].as_array().unwrap();
        assert!(rule.windows(2).all(|w| w[1][1].as_f64() > w[0][1].as_f64()));
    }

    #[test]
    fn errors_are_strings() {
        assert!(green_field(2, 1.0, 0.0).is_err());
        assert!(cutoff_curves(1.5, 4.5, 0.3, 20.0).is_err());
    }
}
