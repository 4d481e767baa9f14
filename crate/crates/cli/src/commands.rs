use std::path::Path;
use std::sync::Arc;

use dtnlab::born::{born_spectrum, reconstruct, Cutoff, CutoffRule, Reconstruction, ReconstructionSummary};
use dtnlab::faddeev::{born_pair, default_frame, theta_pair_3d, ThetaPair};
use dtnlab::forward::{dtn_map, DtnMap};
use dtnlab::lab::{run_sweep, sha256_hex, verify_bounds, Ledger, StabilityReport};
use dtnlab::potentials::fourier_transform;
use dtnlab::reduction::{compare_routes, Background, RouteComparison};
use dtnlab::{fourier_grid, sample_potential, Domain, Potential};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, PairSpec};
use crate::staging::Staging;
use crate::CliError;

/// What a command reports back to `main`: a one-line summary and whether
/// every requested check passed.
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
}

fn domain(params: dtnlab::DomainParams) -> Result<Arc<Domain>, CliError> {
    Ok(Arc::new(Domain::new(params)?))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

#[derive(Serialize)]
struct ManifestEntry {
    name: String,
    meta_file: String,
    data_file: String,
    data_sha256: String,
    meta_sha256: String,
    guard_margin: Option<f64>,
    max_abs_potential: f64,
}

#[derive(Serialize)]
struct Manifest {
    code_version: &'static str,
    domain_hash: String,
    format: dtnlab::forward::KernelFormat,
    maps: Vec<ManifestEntry>,
}

pub fn forward(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = config::load_forward(config)?;
    let mut stage = Staging::new(out)?;
    let dom = domain(cfg.domain)?;
    let ext = match cfg.format {
        dtnlab::forward::KernelFormat::Csv => "csv",
        dtnlab::forward::KernelFormat::Binary => "bin",
    };
    let mut maps = Vec::with_capacity(cfg.potentials.len());
    for named in &cfg.potentials {
        let v = sample_potential(&named.spec, dom.clone(), cfg.order)?;
        let phi = dtn_map(&v)?;
        let meta_file = format!("{}.json", named.name);
        let data_file = format!("{}.{ext}", named.name);
        let meta_path = stage.path(&meta_file);
        let data_path = stage.path(&data_file);
        phi.write(&meta_path, cfg.format)?;
        log::info!("{}: {} boundary nodes", named.name, phi.len());
        maps.push(ManifestEntry {
            name: named.name.clone(),
            data_sha256: sha256_hex(&std::fs::read(&data_path)?),
            meta_sha256: sha256_hex(&std::fs::read(&meta_path)?),
            meta_file,
            data_file,
            guard_margin: phi.guard().map(|g| g.margin),
            max_abs_potential: v.max_abs(),
        });
    }
    let manifest = Manifest {
        code_version: dtnlab::lab::CODE_VERSION,
        domain_hash: dom.fingerprint(),
        format: cfg.format,
        maps,
    };
    stage.write("manifest.json", &json(&manifest)?)?;
    stage.commit()?;
    Ok(Outcome {
        summary: format!("wrote {} map(s) and manifest.json", cfg.potentials.len()),
        passed: true,
    })
}

fn theta_pair(dim: usize, spec: &PairSpec) -> Result<ThetaPair, CliError> {
    let born = born_pair(&spec.p)?;
    match spec.rho {
        None => Ok(born),
        Some(rho) if dim == 3 => {
            let (e1, e2) = default_frame(&spec.p)?;
            Ok(theta_pair_3d(&spec.p, rho, &e1, &e2)?)
        }
        Some(rho) => {
            let forced = born.rho();
            if (rho - forced).abs() <= 1e-12 * forced.max(1.0) {
                Ok(born)
            } else {
                Err(dtnlab::LabError::VarietyRigidity {
                    forced,
                    requested: rho,
                }
                .into())
            }
        }
    }
}

fn scatter_csv(path: &Path, dim: usize, rows: &[RouteComparison]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=dim).map(|a| format!("p{a}")).collect();
    header.extend(
        [
            "rho",
            "re_h_direct",
            "im_h_direct",
            "re_h_reduction",
            "im_h_reduction",
            "re_vhat",
            "im_vhat",
            "route_gap",
            "condition",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let p = r.direct.p();
        let vhat = r.reduction.vhat.unwrap_or_default();
        let mut rec: Vec<String> = p[..dim].iter().map(|x| format!("{x:.17e}")).collect();
        for x in [
            r.direct.pair.rho(),
            r.direct.h.re,
            r.direct.h.im,
            r.reduction.h.re,
            r.reduction.h.im,
            vhat.re,
            vhat.im,
            r.relative_gap(),
            r.condition,
        ] {
            rec.push(format!("{x:.17e}"));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn scatter(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = config::load_scatter(config)?;
    let dim = cfg.domain.dimension;
    let pairs = cfg
        .pairs
        .iter()
        .map(|p| theta_pair(dim, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut stage = Staging::new(out)?;
    let dom = domain(cfg.domain)?;
    let v1 = sample_potential(&cfg.background, dom.clone(), cfg.order)?;
    let v2 = sample_potential(&cfg.potential, dom.clone(), cfg.order)?;
    let phi1 = dtn_map(&v1)?;
    let phi2 = dtn_map(&v2)?;
    let bg = Background {
        potential: &v1,
        dtn: &phi1,
    };
    let rows = pairs
        .par_iter()
        .map(|pair| compare_routes(&bg, &v2, &phi2, pair))
        .collect::<Result<Vec<_>, _>>()?;
    scatter_csv(&stage.path("scatter.csv"), dim, &rows)?;
    stage.commit()?;
    let worst = rows.iter().map(|r| r.relative_gap()).fold(0.0, f64::max);
    let passed = cfg.max_gap.is_none_or(|tol| worst <= tol);
    Ok(Outcome {
        summary: format!("{} pair(s), largest route gap {worst:.3e}", rows.len()),
        passed,
    })
}

/// Reconstruction plus the summary written next to it.
pub struct ReconstructRun {
    pub reconstruction: Reconstruction,
    pub summary: ReconstructionSummary,
    pub truth: Option<Vec<f64>>,
    pub domain: Arc<Domain>,
}

pub fn run_reconstruct(cfg: &config::ReconstructConfig) -> Result<ReconstructRun, CliError> {
    let dom = domain(cfg.domain)?;
    let fg = Arc::new(fourier_grid(&dom, cfg.fourier.p_max, cfg.fourier.n_p)?);
    let v0 = sample_potential(&cfg.background, dom.clone(), cfg.order)?;
    let phi0 = dtn_map(&v0)?;
    let (phi, v): (DtnMap, Option<Potential>) = match (&cfg.potential, &cfg.dtn) {
        (Some(spec), _) => {
            let v = sample_potential(spec, dom.clone(), cfg.order)?;
            (dtn_map(&v)?, Some(v))
        }
        (None, Some(path)) => (DtnMap::read(path)?, None),
        (None, None) => unreachable!("validated config"),
    };
    let diff = phi.difference(&phi0)?;
    let delta = diff.linf_norm();
    let rule = CutoffRule::for_domain(cfg.alpha, &dom)?;
    let (rho, lambda, exact) = match cfg.rho {
        Some(rho) => (rho, None, false),
        None => match rule.rho(delta)? {
            Cutoff::ExactData => (0.0, Some(rule.lambda()), true),
            Cutoff::Finite(rho) => (rho, Some(rule.lambda()), false),
        },
    };
    let rec = if exact {
        Reconstruction::zero(&dom, &fg)
    } else {
        reconstruct(&diff, rho, &fg, &dom)?
    };
    let truth = match &v {
        Some(v) => Some(v.combine(1.0, &v0, -1.0)?),
        None => None,
    };
    let (sup_error, relative_error, i2) = match &truth {
        Some(t) => {
            let err = rec.sup_error(t.values());
            let scale = t.max_abs();
            let exact_spec = fourier_transform(t, &fg)?;
            let tail: f64 = exact_spec
                .values()
                .iter()
                .enumerate()
                .filter(|(i, _)| dtnlab::grid::norm(&fg.node(*i)) >= rho)
                .map(|(_, z)| z.norm())
                .sum::<f64>()
                * fg.weight();
            let rel = if scale > 0.0 { err / scale } else { err };
            (Some(err), Some(rel), Some(tail))
        }
        None => (None, None, None),
    };
    let i1 = if exact {
        0.0
    } else {
        let est = born_spectrum(&diff, &fg, rho)?;
        est.values().iter().map(|z| z.norm()).sum::<f64>() * fg.weight()
    };
    let summary = ReconstructionSummary {
        rho,
        lambda,
        delta,
        sup_error,
        relative_error,
        i1,
        i2,
        imag_residue: rec.imag_residue,
        exact_data: exact,
    };
    Ok(ReconstructRun {
        reconstruction: rec,
        summary,
        truth: truth.map(|t| t.values().to_vec()),
        domain: dom,
    })
}

pub fn reconstruct_cmd(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = config::load_reconstruct(config)?;
    let mut stage = Staging::new(out)?;
    let run = run_reconstruct(&cfg)?;
    run.reconstruction.write_csv(
        &stage.path("reconstruction.csv"),
        &run.domain,
        run.truth.as_deref(),
    )?;
    stage.write("summary.json", &json(&run.summary)?)?;
    stage.commit()?;
    let s = &run.summary;
    let mut summary = format!("ρ = {:.4}, δ = {:.3e}", s.rho, s.delta);
    if let Some(e) = s.relative_error {
        summary.push_str(&format!(", relative sup error {e:.3e}"));
    }
    Ok(Outcome {
        summary,
        passed: true,
    })
}

/// Sweep report with its ledger.
pub fn run_sweep_checked(cfg: &dtnlab::lab::ExperimentConfig) -> Result<(StabilityReport, Ledger), CliError> {
    let report = run_sweep(cfg)?;
    let ledger = verify_bounds(&report);
    Ok((report, ledger))
}

pub fn sweep(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = config::load_sweep(config)?;
    let mut stage = Staging::new(out)?;
    let (report, ledger) = run_sweep_checked(&cfg)?;
    report.write_json(&stage.path("report.json"))?;
    report.write_csv(&stage.path("report.csv"))?;
    stage.write("ledger.json", &json(&ledger)?)?;
    stage.commit()?;
    for e in &ledger.entries {
        let mark = if e.passed { "pass" } else { "FAIL" };
        println!("{mark} {:<22} margin {:+.3e}  {}", e.name, e.margin, e.detail);
    }
    Ok(Outcome {
        summary: format!(
            "{} record(s), config {}",
            report.records.len(),
            &report.config_hash[..12]
        ),
        passed: ledger.passed(),
    })
}

#[derive(Serialize)]
struct SelftestLine {
    name: String,
    passed: bool,
    detail: String,
}

/// Library invariants plus the command-level contracts.
pub fn selftest(out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut lines: Vec<SelftestLine> = dtnlab::selftest::run()
        .into_iter()
        .map(|c| SelftestLine {
            name: c.name.to_string(),
            passed: c.passed,
            detail: c.detail,
        })
        .collect();
    for (name, res) in crate::checks::run() {
        let (passed, detail) = match res {
            Ok(d) => (true, d),
            Err(e) => (false, e),
        };
        lines.push(SelftestLine {
            name: name.to_string(),
            passed,
            detail,
        });
    }
    for l in &lines {
        let mark = if l.passed { "pass" } else { "FAIL" };
        println!("{mark} {:<28} {}", l.name, l.detail);
    }
    if let Some(out) = out {
        let mut stage = Staging::new(out)?;
        stage.write("selftest.json", &json(&lines)?)?;
        stage.commit()?;
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    Ok(Outcome {
        summary: format!("{} check(s), {failed} failed", lines.len()),
        passed: failed == 0,
    })
}
