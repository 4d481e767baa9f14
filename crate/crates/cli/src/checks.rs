//! Command-level contracts exercised in process against a scratch directory.

use std::fs;
use std::path::Path;

use dtnlab::forward::{boundary_trace, normal_component, DtnMap};

use crate::commands;
use crate::CliError;

type Check = fn(&Path) -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("cli_forward_free_map", forward_free_map),
    ("cli_forward_missing_output", forward_missing_output),
    ("cli_forward_manifest", forward_manifest),
    ("cli_scatter_zero_rows", scatter_zero_rows),
    ("cli_scatter_rigidity", scatter_rigidity),
    ("cli_reconstruct_zero_field", reconstruct_zero_field),
    ("cli_reconstruct_echoes_rule", reconstruct_echoes_rule),
    ("cli_malformed_json_path", malformed_json_path),
];

pub fn run() -> Vec<(&'static str, Result<String, String>)> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let res = tempfile::tempdir()
                .map_err(|e| e.to_string())
                .and_then(|dir| check(dir.path()));
            (*name, res)
        })
        .collect()
}

const DOMAIN: &str = r#""domain":{"dimension":2,"resolution":12,"side":1.0}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> Result<std::path::PathBuf, String> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| e.to_string())?;
    Ok(p)
}

fn out_dir(dir: &Path) -> Result<std::path::PathBuf, String> {
    let p = dir.join("out");
    fs::create_dir(&p).map_err(|e| e.to_string())?;
    Ok(p)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn forward_free_map(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "forward.json",
        &format!(r#"{{{DOMAIN},"potentials":[{{"name":"free","spec":{{"kind":"zero"}}}}]}}"#),
    )?;
    let out = out_dir(dir)?;
    commands::forward(&cfg, &out).map_err(|e| e.to_string())?;
    let phi = DtnMap::read(&out.join("free.json")).map_err(|e| e.to_string())?;
    let dom = phi.domain().clone();
    let got = phi.apply(&boundary_trace(&dom, |x| x[0]));
    let err = got
        .iter()
        .zip(normal_component(&dom, 0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(err <= 5.0 * dom.h() * dom.h(), || format!("max |Φ₀x₁ - ν₁| = {err:e}"))?;
    Ok(format!("max |Φ₀x₁ - ν₁| = {err:.2e}"))
}

fn forward_missing_output(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "forward.json",
        &format!(r#"{{{DOMAIN},"potentials":[{{"name":"free","spec":{{"kind":"zero"}}}}]}}"#),
    )?;
    let missing = dir.join("absent");
    match commands::forward(&cfg, &missing) {
        Err(CliError::MissingOutput(_)) => {}
        Err(e) => return Err(format!("wrong error: {e}")),
        Ok(_) => return Err("missing directory accepted".into()),
    }
    ensure(!missing.exists(), || "output directory was created".into())?;
    Ok("refused, nothing written".into())
}

fn forward_manifest(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "forward.json",
        &format!(
            r#"{{{DOMAIN},"format":"binary","potentials":[
                {{"name":"free","spec":{{"kind":"zero"}}}},
                {{"name":"bump","spec":{{"kind":"gaussian_bump","amplitude":0.1,"center":[0.0,0.0],"width":0.1}}}}]}}"#
        ),
    )?;
    let out = out_dir(dir)?;
    commands::forward(&cfg, &out).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(out.join("manifest.json")).map_err(|e| e.to_string())?;
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let maps = manifest["maps"].as_array().ok_or("manifest has no maps")?;
    ensure(maps.len() == 2, || format!("{} entries", maps.len()))?;
    for m in maps {
        let data = m["data_file"].as_str().ok_or("missing data_file")?;
        let bytes = fs::read(out.join(data)).map_err(|e| e.to_string())?;
        ensure(
            m["data_sha256"].as_str() == Some(&dtnlab::lab::sha256_hex(&bytes)),
            || format!("hash mismatch for {data}"),
        )?;
    }
    let files = fs::read_dir(&out).map_err(|e| e.to_string())?.count();
    ensure(files == 5, || format!("{files} files in output"))?;
    Ok("two maps, hashes verified".into())
}

fn scatter_zero_rows(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "scatter.json",
        &format!(r#"{{{DOMAIN},"potential":{{"kind":"zero"}},"pairs":[{{"p":[2.0,0.0]}},{{"p":[1.0,-1.0]}}]}}"#),
    )?;
    let out = out_dir(dir)?;
    commands::scatter(&cfg, &out).map_err(|e| e.to_string())?;
    let mut r = csv::Reader::from_path(out.join("scatter.csv")).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        for col in 3..7 {
            let x: f64 = rec[col].parse().map_err(|e| format!("{e}"))?;
            ensure(x == 0.0, || format!("nonzero amplitude {x}"))?;
        }
        rows += 1;
    }
    ensure(rows == 2, || format!("{rows} rows"))?;
    Ok("all amplitudes zero".into())
}

fn scatter_rigidity(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "scatter.json",
        &format!(r#"{{{DOMAIN},"potential":{{"kind":"zero"}},"pairs":[{{"p":[2.0,0.0],"rho":3.0}}]}}"#),
    )?;
    let out = out_dir(dir)?;
    match commands::scatter(&cfg, &out) {
        Err(CliError::Lab(dtnlab::LabError::VarietyRigidity { .. })) => Ok("refused".into()),
        Err(e) => Err(format!("wrong error: {e}")),
        Ok(_) => Err("accepted".into()),
    }
}

fn reconstruct_zero_field(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "reconstruct.json",
        &format!(r#"{{{DOMAIN},"fourier":{{"p_max":6.0,"n_p":13}},"rho":5.0,"potential":{{"kind":"zero"}}}}"#),
    )?;
    let out = out_dir(dir)?;
    commands::reconstruct_cmd(&cfg, &out).map_err(|e| e.to_string())?;
    let mut r = csv::Reader::from_path(out.join("reconstruction.csv")).map_err(|e| e.to_string())?;
    let col = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .position(|h| h == "value")
        .ok_or("no value column")?;
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let x: f64 = rec[col].parse().map_err(|e| format!("{e}"))?;
        ensure(x == 0.0, || format!("nonzero value {x}"))?;
    }
    Ok("zero field".into())
}

fn reconstruct_echoes_rule(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "reconstruct.json",
        &format!(
            r#"{{{DOMAIN},"fourier":{{"p_max":6.0,"n_p":13}},
                "potential":{{"kind":"gaussian_bump","amplitude":0.05,"center":[0.0,0.0],"width":0.1}}}}"#
        ),
    )?;
    let out = out_dir(dir)?;
    commands::reconstruct_cmd(&cfg, &out).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(out.join("summary.json")).map_err(|e| e.to_string())?;
    let s: dtnlab::born::ReconstructionSummary = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let lambda = s.lambda.ok_or("λ not echoed")?;
    let want = lambda * (1.0 / s.delta).ln_1p();
    ensure((s.rho - want).abs() <= 1e-12 * want, || format!("ρ = {}, rule gives {want}", s.rho))?;
    Ok(format!("λ = {lambda:.4}, ρ = {:.4}", s.rho))
}

fn malformed_json_path(dir: &Path) -> Result<String, String> {
    let cfg = write_config(
        dir,
        "sweep.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":"one"},"fourier":{"p_max":8.0,"n_p":9},
            "order":3,"perturbation":{"kind":"zero"},"amplitudes":[0.1]}"#,
    )?;
    let out = out_dir(dir)?;
    match commands::sweep(&cfg, &out) {
        Err(CliError::Lab(dtnlab::LabError::Config { path, .. })) if path == "domain.side" => {
            Ok(format!("reported `{path}`"))
        }
        Err(e) => Err(format!("wrong error: {e}")),
        Ok(_) => Err("accepted".into()),
    }
}
