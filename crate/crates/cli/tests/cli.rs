use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dtnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtnlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn reference(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn forward_writes_maps_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = dtnlab(&["forward", "-c", reference("forward.json").to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(entries(dir.path()), ["bump.csv", "bump.json", "free.csv", "free.json", "manifest.json"]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let maps = m["maps"].as_array().unwrap();
    assert_eq!(maps.len(), 2);
    for e in maps {
        let bytes = fs::read(dir.path().join(e["data_file"].as_str().unwrap())).unwrap();
        assert_eq!(e["data_sha256"].as_str().unwrap(), dtnlab::lab::sha256_hex(&bytes));
    }
    let phi = dtnlab::forward::DtnMap::read(&dir.path().join("free.json")).unwrap();
    let dom = phi.domain().clone();
    let got = phi.apply(&dtnlab::forward::boundary_trace(&dom, |x| x[0]));
    let nu = dtnlab::forward::normal_component(&dom, 0);
    let err = got.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 5.0 * dom.h() * dom.h(), "{err}");
}

#[test]
fn missing_output_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    let o = dtnlab(&["forward", "-c", reference("forward.json").to_str().unwrap(), "-o", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));
    assert!(!missing.exists());
    assert!(entries(dir.path()).is_empty());
}

#[test]
fn failure_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    // the second potential reaches the boundary and is rejected after the first map is built
    let cfg = write(
        dir.path(),
        "forward.json",
        r#"{"domain":{"dimension":2,"resolution":12,"side":1.0},"potentials":[
            {"name":"free","spec":{"kind":"zero"}},
            {"name":"wide","spec":{"kind":"compact_bump","amplitude":1.0,"center":[0.45,0.0],"width":0.3}}]}"#,
    );
    let o = dtnlab(&["forward", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(entries(&out).is_empty(), "{:?}", entries(&out));
}

#[test]
fn malformed_json_reports_schema_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},"fourier":{"p_max":8.0,"n_p":9},
           "order":3,"perturbation":{"kind":"power_bump","amplitude":1.0,"center":[0.0,0.0],"width":0.3,"exponent":"x"},
           "amplitudes":[0.1]}"#,
    );
    let o = dtnlab(&["sweep", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`perturbation.exponent`"), "{}", stderr(&o));

    let cfg = write(dir.path(), "bad.json", r#"{"domain":{"dimension":2,"resolution":16,"side":1.0,"sid":1}}"#);
    let o = dtnlab(&["reconstruct", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`domain.sid`"), "{}", stderr(&o));
}

#[test]
fn scatter_zero_potential_rows_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scatter.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},"potential":{"kind":"zero"},
           "pairs":[{"p":[2.0,0.0]},{"p":[0.0,3.0]},{"p":[1.0,1.0],"rho":0.7071067811865476}]}"#,
    );
    let o = dtnlab(&["scatter", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = dir.path().join("scatter.csv");
    for col in ["re_h_direct", "im_h_direct", "re_h_reduction", "im_h_reduction"] {
        assert!(column(&csv, col).iter().all(|&x| x == 0.0), "{col}");
    }
}

#[test]
fn scatter_planar_rigidity_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scatter.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},"potential":{"kind":"zero"},
           "pairs":[{"p":[2.0,0.0],"rho":2.5}]}"#,
    );
    let o = dtnlab(&["scatter", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("variety rigidity"), "{}", stderr(&o));
    assert_eq!(entries(dir.path()), ["scatter.json"]);
}

#[test]
fn scatter_routes_agree_on_reference_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dtnlab(&["scatter", "-c", reference("scatter.json").to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gaps = column(&dir.path().join("scatter.csv"), "route_gap");
    assert_eq!(gaps.len(), 5);
    assert!(gaps.iter().all(|&g| g <= 0.03), "{gaps:?}");
}

#[test]
fn scatter_gap_limit_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scatter.json",
        r#"{"domain":{"dimension":2,"resolution":24,"side":1.0},
           "potential":{"kind":"gaussian_bump","amplitude":0.1,"center":[0.0,0.0],"width":0.2},
           "pairs":[{"p":[4.0,0.0]}],"max_gap":1e-12}"#,
    );
    let o = dtnlab(&["scatter", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(dir.path().join("scatter.csv").exists());
}

#[test]
fn reconstruct_free_data_gives_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    let o = dtnlab(&["forward", "-c", reference("forward.json").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let cfg = write(
        dir.path(),
        "reconstruct.json",
        r#"{"domain":{"dimension":2,"resolution":32,"side":1.0},"fourier":{"p_max":8.0,"n_p":17},
           "dtn":"out/free.json"}"#,
    );
    let rec = dir.path().join("rec");
    fs::create_dir(&rec).unwrap();
    let o = dtnlab(&["reconstruct", "-c", &cfg, "-o", rec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(column(&rec.join("reconstruction.csv"), "value").iter().all(|&x| x == 0.0));
    let s: dtnlab::born::ReconstructionSummary =
        serde_json::from_str(&fs::read_to_string(rec.join("summary.json")).unwrap()).unwrap();
    assert!(s.exact_data && s.delta == 0.0);
}

#[test]
fn reconstruct_echoes_cutoff_rule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "reconstruct.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},"fourier":{"p_max":6.0,"n_p":13},"alpha":0.4,
           "potential":{"kind":"gaussian_bump","amplitude":0.05,"center":[0.0,0.0],"width":0.12}}"#,
    );
    let o = dtnlab(&["reconstruct", "-c", &cfg, "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: dtnlab::born::ReconstructionSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let lambda = s.lambda.unwrap();
    let dom = dtnlab::build_square_domain(2, 16, 1.0).unwrap();
    assert!((lambda - 0.6 / (dom.radius_bound() + 2.0)).abs() < 1e-15);
    assert!((s.rho - lambda * (1.0 / s.delta).ln_1p()).abs() < 1e-12);
}

#[test]
fn reconstruct_gaussian_reference_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dtnlab(&["reconstruct", "-c", reference("reconstruct.json").to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: dtnlab::born::ReconstructionSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(s.relative_error.unwrap() <= 0.15, "{s:?}");
    assert!(s.imag_residue <= 0.01, "{s:?}");
}

#[test]
fn sweep_reference_ledger_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dtnlab(&["sweep", "-c", reference("sweep.json").to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert_eq!(entries(dir.path()), ["ledger.json", "report.csv", "report.json"]);
    let ledger: dtnlab::lab::Ledger =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ledger.json")).unwrap()).unwrap();
    assert!(ledger.passed());
    let header = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let first = header.lines().next().unwrap();
    for col in ["eps", "delta", "rho", "sup_err", "I1", "I2", "ref_slope_alpha1", "ref_slope_alpha2"] {
        assert!(first.split(',').any(|c| c == col), "{col} missing from {first}");
    }
}

#[test]
fn sweep_threads_do_not_change_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},"fourier":{"p_max":20.0,"n_p":21},"order":3,
           "perturbation":{"kind":"compact_bump","amplitude":1.0,"center":[0.0,0.0],"width":0.3},
           "amplitudes":[0.1,0.01,0.001]}"#,
    );
    let mut reports = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(format!("t{t}"));
        fs::create_dir(&out).unwrap();
        let o = dtnlab(&["--threads", t, "sweep", "-c", &cfg, "-o", out.to_str().unwrap()]);
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn selftest_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = dtnlab(&["selftest", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let lines: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selftest.json")).unwrap()).unwrap();
    assert!(lines.len() > 40);
    assert!(lines.iter().all(|l| l["passed"] == true));
}
