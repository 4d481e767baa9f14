//! Stability experiments: amplitude ladders of potential pairs, DtN
//! distances, cutoff-regularized Born reconstructions, the I₁/I₂ split
//! and exponent fits.

use std::path::Path;
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::born::{error_split, reconstruct, Cutoff, CutoffRule, DEFAULT_ALPHA};
use crate::error::{LabError, Result};
use crate::forward::{dtn_diff_norm, dtn_map, DtnMap};
use crate::grid::{fourier_grid, norm, Domain, DomainParams, FourierGrid, FourierParams};
use crate::potentials::{
    fourier_transform, inverse_fourier, norm_w_m1, sample_potential, Potential, PotentialSpec,
};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// δ window over which the I₁ constant must be stable.
pub const I1_WINDOW: (f64, f64) = (1e-5, 1e-2);
/// One constant must fit every record within this factor either way.
pub const CONSTANT_FACTOR: f64 = 3.0;
/// Allowed relative slack on the I₂ slope.
pub const SLOPE_SLACK: f64 = 0.2;

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_i2_samples() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainParams,
    pub fourier: FourierParams,
    /// Smoothness order m > d.
    pub order: usize,
    #[serde(default = "zero_spec")]
    pub background: PotentialSpec,
    pub perturbation: PotentialSpec,
    /// Strictly decreasing ladder of perturbation amplitudes ε.
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// ρ band `[lo, hi]` for the I₂ slope; defaults to `[p_max/6, p_max/2]`.
    #[serde(default)]
    pub i2_band: Option<[f64; 2]>,
    #[serde(default = "default_i2_samples")]
    pub i2_samples: usize,
    /// Output directory (ignored by the hash).
    #[serde(default)]
    pub output: Option<String>,
    /// Worker threads (ignored by the hash).
    #[serde(default)]
    pub threads: Option<usize>,
}

fn zero_spec() -> PotentialSpec {
    PotentialSpec::Zero {}
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse strict JSON, reporting the path of the first offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let reason = e.into_inner().to_string();
        match crate::potentials::split_located(&reason) {
            Some((inner, rest)) => LabError::Config {
                path: crate::potentials::join_path(&path, inner),
                reason: rest.to_string(),
            },
            None => LabError::Config { path, reason },
        }
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |path: &str, reason: String| LabError::Config {
            path: path.into(),
            reason,
        };
        if self.order <= self.domain.dimension {
            return Err(cfg_err(
                "order",
                format!("m = {} must exceed d = {}", self.order, self.domain.dimension),
            ));
        }
        if self.amplitudes.is_empty() {
            return Err(cfg_err("amplitudes", "ladder is empty".into()));
        }
        if self.amplitudes.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(cfg_err("amplitudes", "entries must be finite and ≥ 0".into()));
        }
        if self.amplitudes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(cfg_err("amplitudes", "ladder must be strictly decreasing".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(cfg_err("alpha", format!("must lie in (0,1), got {}", self.alpha)));
        }
        if let Some([lo, hi]) = self.i2_band {
            if !(lo > 0.0 && hi > lo && hi <= self.fourier.p_max) {
                return Err(cfg_err("i2_band", "need 0 < lo < hi ≤ p_max".into()));
            }
        }
        if self.i2_samples < 3 {
            return Err(cfg_err("i2_samples", "need at least 3".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything that affects results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(text.as_bytes())
    }

    pub fn i2_band(&self) -> [f64; 2] {
        self.i2_band
            .unwrap_or([self.fourier.p_max / 6.0, self.fourier.p_max / 2.0])
    }
}

/// One ε of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub eps: f64,
    pub delta: f64,
    pub rho: f64,
    pub exact_data: bool,
    /// `sup |reconstruction - (v₂ - v₁)|`.
    pub sup_err: f64,
    pub rel_err: f64,
    /// `sup |v₂ - v₁|`.
    pub sup_diff: f64,
    /// I₁ from the Born spectrum actually used.
    pub i1: f64,
    /// I₁ from the exact spectrum difference.
    pub i1_true: f64,
    pub i2: f64,
    /// `Σ_{|p|<ρ} |estimate - exact| Δp^d`.
    pub born_gap: f64,
    /// Sup error of the full-lattice inversion of the exact difference.
    pub quad_tol: f64,
    pub edge_ratio: f64,
    /// `max_{|p|<ρ} |Δv̂_est| / (δ e^{Lρ})`.
    pub c5: f64,
    /// `I₁ / (δ e^{L₁ρ})`.
    pub c6: f64,
    pub imag_residue: f64,
    pub guard_margin: f64,
    pub flag: Option<String>,
}

impl RunRecord {
    fn flagged(eps: f64, flag: String) -> Self {
        Self {
            eps,
            delta: f64::NAN,
            rho: f64::NAN,
            exact_data: false,
            sup_err: f64::NAN,
            rel_err: f64::NAN,
            sup_diff: f64::NAN,
            i1: f64::NAN,
            i1_true: f64::NAN,
            i2: f64::NAN,
            born_gap: f64::NAN,
            quad_tol: f64::NAN,
            edge_ratio: f64::NAN,
            c5: f64::NAN,
            c6: f64::NAN,
            imag_residue: f64::NAN,
            guard_margin: f64::NAN,
            flag: Some(flag),
        }
    }

    pub fn ok(&self) -> bool {
        self.flag.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config_hash: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub radius: f64,
    pub l1: f64,
    pub lambda: f64,
    pub order: usize,
    pub dim: usize,
    /// `α₁ = (m-d)/m`.
    pub alpha1: f64,
    /// `α₂ = m-d`.
    pub alpha2: f64,
    /// W^{m,1} norms of the background and of the largest perturbed potential.
    pub norm_bound: f64,
    /// `(2π)^{-d} |∂D|`, the constant in `max|Δv̂| ≤ C e^(Lρ) δ` for exact quadrature.
    pub c5_explicit: f64,
    pub records: Vec<RunRecord>,
    pub i2_curve: Vec<CurvePoint>,
    pub i2_fit: Option<Fit>,
    pub stability_fit: Option<Fit>,
    pub relative_fit: Option<Fit>,
}

/// Least-squares slope of `ln err` against `ln ln(1 + 1/δ)`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<Fit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(d, e)| *d > 0.0 && d.is_finite() && e.is_finite())
        .collect();
    if usable.len() < 3 {
        return Err(LabError::InsufficientData(format!(
            "need at least 3 points with δ > 0, got {}",
            usable.len()
        )));
    }
    let (lo, hi) = usable
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), (d, _)| (lo.min(*d), hi.max(*d)));
    if hi / lo < 100.0 {
        return Err(LabError::InsufficientData(format!(
            "δ spans {:.2} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    if usable.iter().any(|(_, e)| *e <= 0.0) {
        return Err(LabError::InsufficientData(
            "errors must be positive for a log-log fit".into(),
        ));
    }
    let xy: Vec<(f64, f64)> = usable
        .iter()
        .map(|(d, e)| ((1.0 / d).ln_1p().ln(), e.ln()))
        .collect();
    least_squares(&xy)
}

/// Log-log slope of `value` against `ρ`.
pub fn fit_power(points: &[CurvePoint]) -> Result<Fit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|c| c.rho > 0.0 && c.value > 0.0)
        .map(|c| (c.rho.ln(), c.value.ln()))
        .collect();
    if xy.len() < 3 {
        return Err(LabError::InsufficientData(format!(
            "need at least 3 positive points, got {}",
            xy.len()
        )));
    }
    least_squares(&xy)
}

fn least_squares(xy: &[(f64, f64)]) -> Result<Fit> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(LabError::InsufficientData("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(Fit {
        slope,
        intercept,
        residual,
        points: xy.len(),
    })
}

struct Shared {
    dom: Arc<Domain>,
    fg: Arc<FourierGrid>,
    rule: CutoffRule,
    v1: Potential,
    phi1: DtnMap,
}

fn run_one(cfg: &ExperimentConfig, s: &Shared, eps: f64) -> RunRecord {
    match run_one_inner(cfg, s, eps) {
        Ok(r) => r,
        Err(e) => RunRecord::flagged(eps, e.to_string()),
    }
}

fn run_one_inner(cfg: &ExperimentConfig, s: &Shared, eps: f64) -> Result<RunRecord> {
    let dom = &s.dom;
    let spec = cfg.background.clone().plus(cfg.perturbation.scaled(eps));
    let v2 = sample_potential(&spec, dom.clone(), cfg.order)?;
    let phi2 = dtn_map(&v2)?;
    let guard_margin = phi2.guard().map(|g| g.margin).unwrap_or(f64::NAN);
    let delta = dtn_diff_norm(&phi2, &s.phi1)?;
    let truth = v2.combine(1.0, &s.v1, -1.0)?;
    let sup_diff = truth.max_abs();
    let true_spec = fourier_transform(&truth, &s.fg)?;
    let full = inverse_fourier(&true_spec, dom, s.fg.p_max())?;
    let quad_tol = full
        .values
        .iter()
        .zip(truth.values())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let (rho, exact, rec_values, est, imag_residue) = match s.rule.rho(delta)? {
        Cutoff::ExactData => (0.0, true, vec![0.0; dom.num_cells()], None, 0.0),
        Cutoff::Finite(rho) => {
            let diff = phi2.difference(&s.phi1)?;
            let rec = reconstruct(&diff, rho, &s.fg, dom)?;
            (rho, false, rec.values, Some(rec.spectrum), rec.imag_residue)
        }
    };
    let sup_err = rec_values
        .iter()
        .zip(truth.values())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let zero = crate::potentials::Spectrum::new(
        s.fg.clone(),
        vec![num_complex::Complex64::new(0.0, 0.0); s.fg.len()],
    )?;
    let est = est.unwrap_or_else(|| zero.clone());
    let split_true = error_split(&true_spec, &zero, rho)?;
    let split_est = error_split(&est, &zero, rho)?;
    let gap = error_split(&est, &true_spec, rho)?;
    let est_peak = (0..s.fg.len())
        .filter(|&i| norm(&s.fg.node(i)) < rho)
        .map(|i| est.values()[i].norm())
        .fold(0.0, f64::max);
    let (c5, c6) = if delta > 0.0 {
        (
            est_peak / (delta * (s.rule.radius() * rho).exp()),
            split_est.i1 / (delta * (s.rule.l1() * rho).exp()),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(RunRecord {
        eps,
        delta,
        rho,
        exact_data: exact,
        sup_err,
        rel_err: if sup_diff > 0.0 { sup_err / sup_diff } else { 0.0 },
        sup_diff,
        i1: split_est.i1,
        i1_true: split_true.i1,
        i2: split_true.i2,
        born_gap: gap.i1,
        quad_tol,
        edge_ratio: split_true.edge_ratio,
        c5,
        c6,
        imag_residue,
        guard_margin,
        flag: None,
    })
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let dom = Arc::new(Domain::new(cfg.domain)?);
    let fg = Arc::new(fourier_grid(&dom, cfg.fourier.p_max, cfg.fourier.n_p)?);
    let rule = CutoffRule::for_domain(cfg.alpha, &dom)?;
    let v1 = sample_potential(&cfg.background, dom.clone(), cfg.order)?;
    let phi1 = dtn_map(&v1)?;
    let shared = Shared {
        dom: dom.clone(),
        fg: fg.clone(),
        rule,
        v1,
        phi1,
    };

    #[cfg(feature = "parallel")]
    let records: Vec<RunRecord> = cfg
        .amplitudes
        .par_iter()
        .map(|&e| run_one(cfg, &shared, e))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let records: Vec<RunRecord> = cfg
        .amplitudes
        .iter()
        .map(|&e| run_one(cfg, &shared, e))
        .collect();

    let d = dom.dim();
    let m = cfg.order;
    let shape = sample_potential(&cfg.perturbation, dom.clone(), m)?;
    let shape_spec = fourier_transform(&shape, &fg)?;
    let zero = crate::potentials::Spectrum::new(
        fg.clone(),
        vec![num_complex::Complex64::new(0.0, 0.0); fg.len()],
    )?;
    let [lo, hi] = cfg.i2_band();
    let mut i2_curve = Vec::with_capacity(cfg.i2_samples);
    for rho in geometric(lo, hi, cfg.i2_samples) {
        i2_curve.push(CurvePoint {
            rho,
            value: error_split(&shape_spec, &zero, rho)?.i2,
        });
    }
    let i2_fit = fit_power(&i2_curve).ok();

    let finite: Vec<&RunRecord> = records.iter().filter(|r| r.ok() && !r.exact_data).collect();
    let stability_fit =
        fit_exponent(&finite.iter().map(|r| (r.delta, r.sup_err)).collect::<Vec<_>>()).ok();
    let relative_fit =
        fit_exponent(&finite.iter().map(|r| (r.delta, r.rel_err)).collect::<Vec<_>>()).ok();

    let top = cfg.amplitudes[0];
    let v_top = sample_potential(
        &cfg.background.clone().plus(cfg.perturbation.scaled(top)),
        dom.clone(),
        m,
    )?;
    let norm_bound = norm_w_m1(&shared.v1, m)?.max(norm_w_m1(&v_top, m)?);

    Ok(StabilityReport {
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.to_string(),
        config: cfg.clone(),
        radius: dom.radius_bound(),
        l1: rule.l1(),
        lambda: rule.lambda(),
        order: m,
        dim: d,
        alpha1: (m - d) as f64 / m as f64,
        alpha2: (m - d) as f64,
        norm_bound,
        c5_explicit: dom.boundary_measure() / (2.0 * std::f64::consts::PI).powi(d as i32),
        records,
        i2_curve,
        i2_fit,
        stability_fit,
        relative_fit,
    })
}

impl StabilityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Flat table: one row per record plus the reference slopes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "eps",
            "delta",
            "rho",
            "sup_err",
            "rel_err",
            "I1",
            "I2",
            "fitted_slope",
            "ref_slope_alpha1",
            "ref_slope_alpha2",
            "flag",
        ])?;
        let fitted = self.stability_fit.map(|f| f.slope).unwrap_or(f64::NAN);
        for r in &self.records {
            w.write_record(&[
                format!("{:e}", r.eps),
                format!("{:e}", r.delta),
                format!("{:e}", r.rho),
                format!("{:e}", r.sup_err),
                format!("{:e}", r.rel_err),
                format!("{:e}", r.i1),
                format!("{:e}", r.i2),
                format!("{fitted:e}"),
                format!("{:e}", -self.alpha1),
                format!("{:e}", -self.alpha2),
                r.flag.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub passed: bool,
    /// Positive when satisfied; the distance to the threshold.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    fn push(&mut self, name: &str, margin: f64, detail: String) {
        self.entries.push(LedgerEntry {
            name: name.into(),
            passed: margin >= 0.0,
            margin,
            detail,
        });
    }
}

/// Spread `max/min` of a set of positive constants, and the geometric mean
/// that fits all of them within `sqrt(spread)`.
fn constant_spread(values: &[f64]) -> Option<(f64, f64)> {
    let pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
    if pos.is_empty() {
        return None;
    }
    let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().copied().fold(0.0, f64::max);
    Some((hi / lo, (hi * lo).sqrt()))
}

/// Check the report against the error-split inequalities and the expected
/// stability shape.
pub fn verify_bounds(report: &StabilityReport) -> Ledger {
    let mut ledger = Ledger {
        entries: Vec::new(),
    };
    let ok: Vec<&RunRecord> = report.records.iter().filter(|r| r.ok()).collect();
    let flagged = report.records.len() - ok.len();
    ledger.push(
        "records_complete",
        -(flagged as f64),
        format!("{flagged} flagged record(s)"),
    );

    // sup|v₁-v₂| ≤ I₁ + I₂ (+ lattice quadrature error)
    let slack = ok
        .iter()
        .map(|r| r.i1_true + r.i2 + r.quad_tol - r.sup_diff)
        .fold(f64::INFINITY, f64::min);
    ledger.push(
        "triangle_split",
        if ok.is_empty() { 0.0 } else { slack },
        "sup|Δv| ≤ I₁ + I₂ + quadrature error on every record".into(),
    );

    // reconstruction error ≤ Born gap + I₂ (+ quadrature)
    let slack = ok
        .iter()
        .filter(|r| !r.exact_data)
        .map(|r| r.born_gap + r.i2 + r.quad_tol - r.sup_err)
        .fold(f64::INFINITY, f64::min);
    ledger.push(
        "reconstruction_split",
        if slack.is_finite() { slack } else { 0.0 },
        "sup|rec - Δv| ≤ Σ|est - v̂| + I₂ + quadrature error".into(),
    );

    let window: Vec<&&RunRecord> = ok
        .iter()
        .filter(|r| !r.exact_data && r.delta >= I1_WINDOW.0 && r.delta <= I1_WINDOW.1)
        .collect();
    let limit = CONSTANT_FACTOR * CONSTANT_FACTOR;
    match constant_spread(&window.iter().map(|r| r.c6).collect::<Vec<_>>()) {
        Some((spread, c)) => ledger.push(
            "i1_constant",
            (limit - spread) / limit,
            format!(
                "I₁ ≤ C e^(L₁ρ) δ with C = {c:.3e}; spread {spread:.2} over {} record(s)",
                window.len()
            ),
        ),
        None => ledger.push("i1_constant", 0.0, "no records with δ in window".into()),
    }
    match constant_spread(&window.iter().map(|r| r.c5).collect::<Vec<_>>()) {
        Some((spread, c)) => ledger.push(
            "vhat_constant",
            (limit - spread) / limit,
            format!(
                "max|Δv̂| ≤ C e^(Lρ) δ with C = {c:.3e} (explicit {:.3e}); spread {spread:.2}",
                report.c5_explicit
            ),
        ),
        None => ledger.push("vhat_constant", 0.0, "no records with δ in window".into()),
    }

    let bound = -(1.0 - SLOPE_SLACK) * report.alpha2;
    match report.i2_fit {
        Some(f) => ledger.push(
            "i2_slope",
            bound - f.slope,
            format!("I₂ slope {:.3} vs bound {bound:.3} (m - d = {})", f.slope, report.alpha2),
        ),
        None if report.i2_curve.iter().all(|c| c.value == 0.0) => {
            ledger.push("i2_slope", 0.0, "I₂ vanishes on the whole band".into())
        }
        None => ledger.push("i2_slope", -1.0, "I₂ curve could not be fitted".into()),
    }

    let mut by_delta: Vec<&&RunRecord> = ok.iter().filter(|r| !r.exact_data).collect();
    by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let mono = by_delta
        .windows(2)
        .map(|w| w[0].sup_err - w[1].sup_err)
        .fold(f64::INFINITY, f64::min);
    ledger.push(
        "error_monotone",
        if mono.is_finite() { mono } else { 0.0 },
        "sup-error nonincreasing as δ decreases".into(),
    );

    let mut by_eps: Vec<&&RunRecord> = ok.iter().collect();
    by_eps.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let mono = by_eps
        .windows(2)
        .map(|w| w[0].delta - w[1].delta)
        .fold(f64::INFINITY, f64::min);
    ledger.push(
        "delta_monotone",
        if mono.is_finite() { mono } else { 0.0 },
        "δ decreases with ε".into(),
    );

    match report.stability_fit {
        Some(f) => ledger.push(
            "stability_exponent",
            -report.alpha1 - f.slope,
            format!(
                "fitted slope {:.3} vs -(m-d)/m = {:.3}, -(m-d) = {:.3}",
                f.slope, -report.alpha1, -report.alpha2
            ),
        ),
        None if by_delta.is_empty() => {
            ledger.push("stability_exponent", 0.0, "exact data only".into())
        }
        None => ledger.push(
            "stability_exponent",
            -1.0,
            "not enough span in δ to fit".into(),
        ),
    }
    ledger
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            domain: DomainParams {
                dimension: 2,
                resolution: 16,
                side: 1.0,
            },
            fourier: FourierParams {
                p_max: 20.0,
                n_p: 21,
            },
            order: 3,
            background: PotentialSpec::Zero {},
            perturbation: PotentialSpec::compact(1.0, &[0.0, 0.0], 0.3),
            amplitudes: vec![0.1, 0.01],
            alpha: 0.5,
            i2_band: None,
            i2_samples: 5,
            output: None,
            threads: None,
        }
    }

    #[test]
    fn exact_power_law_slope() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let d = 10f64.powi(-k);
                (d, 2.5 * (1.0 / d).ln_1p().powi(-3))
            })
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-10);
    }

    #[test]
    fn constant_points_have_zero_slope() {
        let pts = [(1e-1, 2.0), (1e-2, 2.0), (1e-4, 2.0)];
        assert!(fit_exponent(&pts).unwrap().slope.abs() < 1e-14);
    }

    #[test]
    fn narrow_span_refused() {
        let pts = [(1e-2, 1.0), (5e-3, 0.9), (2e-3, 0.8)];
        assert!(matches!(fit_exponent(&pts), Err(LabError::InsufficientData(_))));
        assert!(fit_exponent(&[(1e-1, 1.0), (1e-5, 0.5)]).is_err());
    }

    #[test]
    fn config_rejects_bad_ladder_and_order() {
        let mut c = small_config();
        c.amplitudes = vec![0.01, 0.1];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.order = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = r#"{"domain":{"dimension":2,"resolution":16,"side":1.0,"bogus":1},
            "fourier":{"p_max":10,"n_p":11},"order":3,
            "perturbation":{"kind":"zero"},"amplitudes":[0.1]}"#;
        match ExperimentConfig::from_json(text) {
            Err(LabError::Config { path, .. }) => assert_eq!(path, "domain.bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_potential_errors_are_located() {
        let cases = [
            (r#"{"kind":"power_bump","amplitude":1,"center":[0,0],"width":0.3,"exponent":"x"}"#, "perturbation.exponent"),
            (r#"{"kind":"zero","extra":1}"#, "perturbation.extra"),
            (r#"{"kind":"sum","components":[{"kind":"zero"},{"kind":"gaussian_bump","amplitude":1,"center":[0,0]}]}"#, "perturbation.components[1]"),
            (r#"{"kind":"sum","components":[{"kind":"compact_bump","amplitude":1,"center":[0,0],"width":0.2,"w":1}]}"#, "perturbation.components[0].w"),
            (r#"{"kind":"blob"}"#, "perturbation.kind"),
        ];
        for (spec, want) in cases {
            let text = format!(
                r#"{{"domain":{{"dimension":2,"resolution":16,"side":1.0}},"fourier":{{"p_max":10,"n_p":11}},
                   "order":3,"perturbation":{spec},"amplitudes":[0.1]}}"#
            );
            match ExperimentConfig::from_json(&text) {
                Err(LabError::Config { path, .. }) => assert_eq!(path, want, "{spec}"),
                other => panic!("unexpected {other:?}"),
            }
        }
        let ok = r#"{"kind":"sum","components":[{"kind":"zero"},{"kind":"power_bump","amplitude":1,"center":[0,0],"width":0.3,"exponent":4}]}"#;
        let spec: PotentialSpec = serde_json::from_str(ok).unwrap();
        let back: PotentialSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn hash_ignores_output_and_threads() {
        let a = small_config();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        b.threads = Some(7);
        assert_eq!(a.hash(), b.hash());
        b.alpha = 0.4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn identical_pair_takes_exact_branch() {
        let mut c = small_config();
        c.amplitudes = vec![0.0];
        let report = run_sweep(&c).unwrap();
        let r = &report.records[0];
        assert!(r.exact_data && r.delta == 0.0 && r.sup_err == 0.0);
        let ledger = verify_bounds(&report);
        for name in ["triangle_split", "reconstruction_split", "error_monotone", "stability_exponent"] {
            assert!(ledger.get(name).unwrap().passed, "{name}");
        }
    }
}
