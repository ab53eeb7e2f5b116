use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halfres"));
    c.env_remove("HALFRES_WORKERS");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.json");
    fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    bin().args([cmd, "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Numeric CSV body (header comments and column names stripped).
fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const ZERO_V: &str = r#"{
  "potential": { "kind": "ball_step", "amplitude_re": 0.0, "radius": 1.0, "smoothness": 0.0 },
  "grid": { "n_per_axis": 8 },
  "region": { "r_min": 0.3, "r_max": 1.5, "arg_min": -1.0, "arg_max": 4.0 },
  "solver": { "exclusion_radius": 0.3, "contour_points": 16 },
  "scan": { "n_log_mod": 4, "n_arg": 5 },
  "count": { "radii": [0.5, 1.5], "args": [1.0] },
  "scatter": { "lambdas": [0.7], "sphere_degree": 3 }
}"#;

#[test]
fn zero_potential_gives_trivial_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ZERO_V);

    let out = tmp.path().join("scan");
    assert!(run("scan", &cfg, &out).status.success());
    let rows = csv_rows(&out.join("scan.csv"));
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0, "log|det(I)| must vanish");
    }

    let out = tmp.path().join("poles");
    assert!(run("poles", &cfg, &out).status.success());
    assert!(csv_rows(&out.join("poles.csv")).is_empty());
    let j = read_json(&out.join("poles.json"));
    assert_eq!(j["zero_energy"]["status"]["status"], "regular");

    let out = tmp.path().join("count");
    assert!(run("count", &cfg, &out).status.success());
    for r in csv_rows(&out.join("count.csv")) {
        assert_eq!(r[2], "0");
    }

    let out = tmp.path().join("scatter");
    assert!(run("scatter", &cfg, &out).status.success());
    let j = read_json(&out.join("scatter.json"));
    assert_eq!(j["calibration"]["source"], "reference");
    let m = csv_rows(&out.join("s_matrix_0.csv"));
    for r in m {
        let (i, k) = (r[0].parse::<usize>().unwrap(), r[1].parse::<usize>().unwrap());
        let (re, im) = (r[2].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap());
        let want = if i == k { 1.0 } else { 0.0 };
        assert!((re - want).abs() < 1e-12 && im.abs() < 1e-12, "S[{i},{k}] = {re}+{im}i");
    }
}

#[test]
fn outputs_are_byte_identical_and_stamped() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "grid": { "n_per_axis": 8 },
  "region": { "r_min": 0.2, "r_max": 2.0, "arg_min": 2.5, "arg_max": 3.8 },
  "scan": { "n_log_mod": 5, "n_arg": 4 }
}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("scan", &cfg, &a).status.success());
    let two = bin().args(["scan", "--workers", "1", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    assert!(two.status.success());
    for name in ["scan.csv", "scan.json", "scan.svg"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name} differs between runs");
        let text = String::from_utf8(x).unwrap();
        assert!(text.contains(concat!("halfres ", env!("CARGO_PKG_VERSION"))), "{name} lacks the version line");
        assert!(text.contains("config_sha256"), "{name} lacks the config hash");
    }
    // row-major in arg, then modulus; 17 significant digits
    let rows = csv_rows(&a.join("scan.csv"));
    assert_eq!(rows[0][1], rows[4][1]);
    assert_ne!(rows[0][1], rows[5][1]);
    assert!(rows[1][0].contains('e') && rows[1][0].split('e').next().unwrap().trim_start_matches('-').len() == 18);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(run("poles", &missing, tmp.path()).status.code(), Some(2));

    let unknown = write_config(tmp.path(), r#"{ "grid": { "n_per_axis": 8, "typo": 1 } }"#);
    assert_eq!(run("poles", &unknown, tmp.path()).status.code(), Some(2));

    let five = write_config(tmp.path(), r#"{ "dimension": 5 }"#);
    let o = run("poles", &five, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension 3"));

    let grid = write_config(tmp.path(), r#"{ "potential": { "kind": "grid_file", "grid_file": "absent.txt" } }"#);
    assert_eq!(run("eigen", &grid, tmp.path()).status.code(), Some(2));

    let ok = write_config(tmp.path(), r#"{ "grid": { "n_per_axis": 8 } }"#);
    let o = bin().args(["eigen", "--workers", "0", "--config"]).arg(&ok).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let o = bin().arg("eigen").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dimension_five_kernel_suites_pass() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "dimension": 5 }"#);
    let out = tmp.path().join("v5");
    let o = run("validate", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("validate.json"));
    let names: Vec<&str> = j["suites"].as_array().unwrap().iter().map(|s| s["suite"].as_str().unwrap()).collect();
    assert_eq!(names, ["kernel_constants_d5", "sheet_jump_d5", "riesz_limit_d5", "kernel_dz_d5"]);
}

#[test]
fn corrupted_riesz_constant_fails_the_kernel_suite() {
    let tmp = TempDir::new().unwrap();
    let body = |scale: f64| {
        format!(
            r#"{{
  "potential": {{ "amplitude_re": 0.0 }},
  "grid": {{ "n_per_axis": 8, "oracle_box": 48.0, "oracle_grid": 128 }},
  "validate": {{ "alpha1_scale": {scale} }}
}}"#
        )
    };
    let cfg = write_config(tmp.path(), &body(1.05));
    let out = tmp.path().join("bad");
    let o = run("validate", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let j = read_json(&out.join("validate.json"));
    assert_eq!(j["all_passed"], false);
    for s in j["suites"].as_array().unwrap() {
        let kernel = s["suite"] == "kernel_fourier_oracle";
        assert_eq!(s["passed"].as_bool().unwrap(), !kernel, "{}", s["suite"]);
    }
    assert!(out.join("validate.csv").is_file());
}

#[test]
fn default_step_well_config_validates() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/step_well.json");
    let tmp = TempDir::new().unwrap();
    let o = run("validate", &cfg, tmp.path());
    let j = read_json(&tmp.path().join("validate.json"));
    assert!(o.status.success(), "{j:#}");
}

#[test]
fn eigen_reports_the_bound_state() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/step_well.json");
    let tmp = TempDir::new().unwrap();
    assert!(run("eigen", &cfg, tmp.path()).status.success());
    let j = read_json(&tmp.path().join("eigen.json"));
    let poles = j["bound_state_poles"].as_array().unwrap();
    assert_eq!(poles.len(), 1);
    let m: f64 = poles[0]["modulus"].to_string().parse().unwrap();
    assert!((m - 0.5745).abs() < 1e-3, "{m}");
}

#[test]
fn count_table_is_monotone() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
  "grid": { "n_per_axis": 8 },
  "region": { "r_min": 0.3, "r_max": 1.0, "arg_min": -3.3, "arg_max": 3.3 },
  "solver": { "exclusion_radius": 0.3 },
  "count": { "radii": [0.4, 0.7, 1.0], "args": [1.0, 3.3] }
}"#,
    );
    let out = tmp.path().join("c");
    let o = run("count", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("count.csv"));
    let n: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(n.len(), 6);
    for a in 0..2 {
        assert!(n[3 * a] <= n[3 * a + 1] && n[3 * a + 1] <= n[3 * a + 2]);
    }
    for r in 0..3 {
        assert!(n[r] <= n[3 + r]);
    }
    // the bound state at arg = π lies inside |z| ≤ 1, |arg| ≤ 3.3
    assert!(n[5] >= 1);
}
