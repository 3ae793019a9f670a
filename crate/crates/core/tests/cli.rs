use std::path::Path;
use std::process::Command;

use serde_json::Value;

const MODEL: &str = r#"
[model]
nu = 1.0
sigma_d = 0.5
beta = 1.0
sigma_tilde = 1.0
f = { family = "linear", lambda = 1.0 }
g = { family = "affine", mu = 1.0 }
"#;

fn scenario(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, format!("{MODEL}\n{body}")).unwrap();
    path
}

fn necrosim(args: &[&str], config: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_necrosim"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn profile_uniform_case_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 2.0 }\n[run]\nsigma_bar = [0.4, 2.0]\nradius = [1.0, 3.0]\n",
    );
    assert_eq!(necrosim(&["profile"], &cfg, dir.path()), 0);
    let (header, rows) = csv_rows(&dir.path().join("profile.csv"));
    assert_eq!(header, ["r", "sigma", "regime", "rho", "sigma_bar", "R"]);
    let groups: std::collections::BTreeSet<(String, String)> =
        rows.iter().map(|r| (r[4].clone(), r[5].clone())).collect();
    assert_eq!(groups.len(), 4);
    let uniform: Vec<_> = rows.iter().filter(|r| r[2] == "Uniform").collect();
    assert!(!uniform.is_empty());
    assert!(uniform.iter().all(|r| r[1] == r[4]));
    let summary = json(&dir.path().join("profile.json"));
    assert_eq!(summary.as_array().unwrap().len(), 4);
}

#[test]
fn gmap_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 2.0 }\n[run]\nsigma_bar_grid = [0.3, 1.0, 2.0]\nradius_grid = { min = 0.5, max = 8.0, count = 4, log = true }\n",
    );
    assert_eq!(necrosim(&["gmap"], &cfg, dir.path()), 0);
    let (header, rows) = csv_rows(&dir.path().join("gmap.csv"));
    assert_eq!(header, ["sigma_bar", "R", "G", "regime", "quad_err"]);
    assert_eq!(rows.len(), 12);
    for r in rows.iter().filter(|r| f(&r[0]) == 0.3) {
        assert_eq!(f(&r[2]), -1.0 / 3.0);
    }
}

#[test]
fn simulate_pure_decay_and_period_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 0.4 }\n[run]\nr0 = 2.0\nhorizon = 5.0\n",
    );
    assert_eq!(necrosim(&["simulate"], &cfg, dir.path()), 0);
    let (header, rows) = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["t", "R", "G_value", "phi", "regime", "event"]);
    for r in &rows {
        let (t, radius) = (f(&r[0]), f(&r[1]));
        assert!((radius - 2.0 * (-t / 3.0).exp()).abs() < 1e-8 * radius);
    }
    let marked: Vec<f64> = rows
        .iter()
        .filter(|r| r[5].contains("PeriodBoundary"))
        .map(|r| f(&r[0]))
        .collect();
    assert_eq!(marked, [1.0, 2.0, 3.0, 4.0, 5.0]);
    let diag = json(&dir.path().join("diagnostics.json"));
    assert_eq!(diag["lower_envelope_ok"], true);
}

#[test]
fn classify_verdicts_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let low = scenario(dir.path(), "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 0.4 }\n");
    assert_eq!(necrosim(&["classify"], &low, dir.path()), 0);
    let v = json(&dir.path().join("classify.json"));
    assert_eq!(v["verdict"], "Extinction");
    assert!((v["s_bar"].as_f64().unwrap() + 1.0).abs() < 1e-14);

    let high = scenario(dir.path(), "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 2.0 }\n");
    assert_eq!(necrosim(&["classify"], &high, dir.path()), 0);
    let v = json(&dir.path().join("classify.json"));
    assert_eq!(v["verdict"], "PersistentPeriodic");
    assert!((v["fixed_point"].as_f64().unwrap() - 2.166026975179906).abs() < 1e-6);
}

#[test]
fn boundary_classification_depends_on_quadrature_error() {
    let dir = tempfile::tempdir().unwrap();
    let supply = "[supply]\nomega = 1.0\nphi = { family = \"sinusoidal\", mean = 1.0, amplitude = 0.3 }\n";
    let fine = scenario(dir.path(), supply);
    assert_eq!(necrosim(&["classify"], &fine, dir.path()), 0);
    assert_eq!(json(&dir.path().join("classify.json"))["verdict"], "Extinction");

    let coarse = scenario(
        dir.path(),
        &format!("{supply}[solver.quadrature]\ninitial_panels = 2\nmax_panels = 4\nrel_tol = 1.0\n"),
    );
    assert_eq!(necrosim(&["classify"], &coarse, dir.path()), 3);
    assert_eq!(json(&dir.path().join("classify.json"))["verdict"], "Ambiguous");
}

#[test]
fn periodic_writes_orbit_and_iterates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 2.0 }\n");
    assert_eq!(necrosim(&["periodic"], &cfg, dir.path()), 0);
    let (header, rows) = csv_rows(&dir.path().join("orbit.csv"));
    assert_eq!(header, ["t", "R_per"]);
    assert!(rows.iter().all(|r| (f(&r[1]) - 2.166026975179906).abs() < 1e-6));
    let (header, rows) = csv_rows(&dir.path().join("iterates.csv"));
    assert_eq!(header, ["n", "R_n", "residual", "kind"]);
    assert!(!rows.is_empty());
}

#[test]
fn exit_codes_for_bad_config_and_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let typo = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"constant\", value = 2.0 }\n[solver.shooting]\nbisection_tol = 1e-10\nbisecton_tol = 1e-9\n",
    );
    assert_eq!(necrosim(&["classify"], &typo, dir.path()), 1);
    assert_eq!(necrosim(&["simulate"], &dir.path().join("missing.toml"), dir.path()), 1);

    let stubborn = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"sinusoidal\", mean = 2.0, amplitude = 0.5 }\n[solver.periodic]\nsecant = false\nmax_iterations = 2\n",
    );
    assert_eq!(necrosim(&["periodic"], &stubborn, dir.path()), 2);
}

#[test]
fn sweep_writes_cells_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        r#"[supply]
omega = 1.0
phi = { family = "constant", value = 2.0 }
[run]
sweep_command = "classify"
[run.sweep]
"supply.phi.value" = [0.4, 2.0]
"model.beta" = [1.0, 2.0]
"#,
    );
    let out = dir.path().join("out");
    assert_eq!(necrosim(&["sweep", "--jobs", "2"], &cfg, &out), 0);
    let manifest = json(&out.join("manifest.json"));
    let cells = manifest["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for c in cells {
        let name = c["cell"].as_str().unwrap();
        let v = json(&out.join(name).join("classify.json"));
        let value = c["parameters"]["supply.phi.value"].as_f64().unwrap();
        let want = if value < 1.0 { "Extinction" } else { "PersistentPeriodic" };
        assert_eq!(v["verdict"], want);
        assert!(out.join(name).join("scenario.toml").exists());
    }
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn sweep_exit_code_is_worst_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        r#"[supply]
omega = 1.0
phi = { family = "constant", value = 2.0 }
[run]
sweep_command = "classify"
[run.sweep]
"model.beta" = [1.0, -1.0]
"#,
    );
    assert_eq!(necrosim(&["sweep"], &cfg, dir.path()), 1);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["cells"][0]["exit_code"], 0);
    assert_eq!(manifest["cells"][1]["exit_code"], 1);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[supply]\nomega = 1.0\nphi = { family = \"sinusoidal\", mean = 2.0, amplitude = 0.5 }\n[run]\nhorizon = 2.0\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(necrosim(&["simulate", "--jobs", "1"], &cfg, &a), 0);
    assert_eq!(necrosim(&["simulate", "--jobs", "3"], &cfg, &b), 0);
    let read = |p: &Path| std::fs::read(p.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
