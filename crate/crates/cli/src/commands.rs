use anyhow::{bail, Context as _};
use halfres::discretize::{fourier_grid_eigenvalues, radial_grid_eigenvalues, EigenOracle, Potential, RadialEigenOracle};
use halfres::resonances::{
    counting_envelope, counting_function, locate_poles, scan_log_det, zero_energy_obstruction, PoleMethod, PoleSet,
    ZeroEnergyReport,
};
use halfres::scattering::{
    calibrate_kappa, calibrate_transition, kappa_drift, reference_kappa, scattering_matrix, transition_matrix, SphereQuadrature,
};
use serde_json::{json, Map, Value};

use crate::config::{EigenMethod, Format, Loaded};
use crate::output::{f17, heatmap_svg, jf, Sink};
use crate::suites::{run_all, Context};

/// Whether the command's gates held; only `validate` has any.
pub type GatesPassed = bool;

pub fn validate(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    let c = &cfg.config;
    let v = cfg.potential()?;
    let q = if c.dimension == 3 { Some(cfg.quadrature(&v)?) } else { None };
    let results = run_all(&Context {
        dimension: c.dimension,
        potential: &v,
        quadrature: q.as_ref(),
        oracle_grid: c.grid.oracle_grid,
        oracle_box: c.grid.oracle_box,
        alpha1_scale: c.validate.alpha1_scale,
    });
    let all = results.iter().all(|r| r.passed);
    for r in &results {
        eprintln!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    if cfg.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = results
            .iter()
            .flat_map(|r| {
                let head = vec![r.name.to_string(), r.passed.to_string()];
                let mut rows: Vec<Vec<String>> = r
                    .measurements
                    .iter()
                    .map(|(what, val, lo, hi)| {
                        let mut row = head.clone();
                        row.extend([format!("\"{what}\""), f17(*val), f17(*lo), f17(*hi)]);
                        row
                    })
                    .collect();
                if let Some(e) = &r.error {
                    let mut row = head.clone();
                    row.extend([format!("\"error: {}\"", e.replace('"', "'")), f17(f64::NAN), f17(f64::NAN), f17(f64::NAN)]);
                    rows.push(row);
                }
                rows
            })
            .collect();
        sink.csv("validate.csv", &["suite", "passed", "quantity", "measured", "lower", "upper"], &rows)?;
    }
    if cfg.wants(Format::Json) {
        let suites: Vec<Value> = results
            .iter()
            .map(|r| {
                json!({
                    "suite": r.name,
                    "passed": r.passed,
                    "error": r.error,
                    "measurements": r.measurements.iter().map(|(w, v, lo, hi)| json!({
                        "quantity": w, "measured": jf(*v), "lower": jf(*lo), "upper": jf(*hi)
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let mut m = Map::new();
        m.insert("all_passed".into(), Value::Bool(all));
        m.insert("suites".into(), Value::Array(suites));
        sink.json("validate.json", m)?;
    }
    Ok(all)
}

pub fn scan(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    cfg.require_3d("scan")?;
    let c = &cfg.config;
    let v = cfg.potential()?;
    let q = cfg.quadrature(&v)?;
    let rect = cfg.region()?.rect()?;
    let field = scan_log_det(&rect, c.scan.n_log_mod, c.scan.n_arg, &v, &q, c.solver.det_variant)?;
    if cfg.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = field
            .samples
            .iter()
            .map(|(u, t, d)| vec![f17(*u), f17(*t), f17(u.exp()), f17(*d)])
            .collect();
        sink.csv("scan.csv", &["log_modulus", "arg_total", "modulus", "log_abs_det"], &rows)?;
    }
    if cfg.wants(Format::Json) {
        let mut m = Map::new();
        m.insert("log_modulus".into(), json!([jf(rect.log_mod[0]), jf(rect.log_mod[1])]));
        m.insert("arg_total".into(), json!([jf(rect.arg[0]), jf(rect.arg[1])]));
        m.insert("n_log_mod".into(), json!(field.n_log_mod));
        m.insert("n_arg".into(), json!(field.n_arg));
        m.insert("nan_cells".into(), json!(field.nan_cells));
        sink.json("scan.json", m)?;
    }
    if cfg.wants(Format::Svg) {
        let vals: Vec<f64> = field.samples.iter().map(|s| s.2).collect();
        let svg = heatmap_svg(&vals, field.n_arg, field.n_log_mod, rect.log_mod, rect.arg, "log|det| over (log|z|, arg z)");
        sink.svg("scan.svg", svg)?;
    }
    Ok(true)
}

fn search(cfg: &Loaded, v: &Potential) -> anyhow::Result<(PoleSet, ZeroEnergyReport)> {
    let q = cfg.quadrature(v)?;
    let set = locate_poles(&cfg.region()?, v, &q, &cfg.search_options()?)?;
    let zero = zero_energy_obstruction(v, &q)?;
    Ok((set, zero))
}

fn zero_energy_json(z: &ZeroEnergyReport) -> Value {
    json!({
        "status": z.status,
        "smallest_singular_value": jf(z.smallest_singular_value),
        "norm": jf(z.norm),
        "smallest_eigenvalue": z.smallest_eigenvalue.map(jf),
    })
}

fn search_summary(set: &PoleSet) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(
        "region".into(),
        json!({
            "r_min": jf(set.region.r_min), "r_max": jf(set.region.r_max),
            "arg_min": jf(set.region.arg_min), "arg_max": jf(set.region.arg_max),
            "exclusion_radius": jf(set.region.exclusion_radius),
        }),
    );
    m.insert("audited_splits".into(), json!(set.audits.len()));
    m.insert("rejected_splits".into(), json!(set.rejected_splits));
    m.insert("unaudited_splits".into(), json!(set.unaudited_splits));
    m.insert("worst_integer_distance".into(), jf(set.worst_distance));
    m.insert(
        "unresolved".into(),
        Value::Array(
            set.unresolved
                .iter()
                .map(|u| {
                    json!({
                        "log_modulus": [jf(u.rect.log_mod[0]), jf(u.rect.log_mod[1])],
                        "arg_total": [jf(u.rect.arg[0]), jf(u.rect.arg[1])],
                        "reason": u.reason,
                    })
                })
                .collect(),
        ),
    );
    m
}

pub fn poles(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    cfg.require_3d("poles")?;
    let v = cfg.potential()?;
    let (set, zero) = search(cfg, &v)?;
    let row = |p: &halfres::resonances::PoleRecord| {
        let z = p.location.value();
        vec![
            f17(p.location.modulus),
            f17(p.location.arg_total),
            p.location.sheet().to_string(),
            f17(z.re),
            f17(z.im),
            p.multiplicity.to_string(),
            f17(p.residual),
            f17(p.contour_median),
            p.contour_count.to_string(),
            match p.method {
                PoleMethod::ArgumentPrinciple => "argument_principle",
                PoleMethod::EigenvalueNewton => "eigenvalue_newton",
            }
            .to_string(),
        ]
    };
    if cfg.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = set.poles.iter().map(row).collect();
        sink.csv(
            "poles.csv",
            &["modulus", "arg_total", "sheet", "re", "im", "multiplicity", "residual", "contour_median", "contour_count", "method"],
            &rows,
        )?;
    }
    if cfg.wants(Format::Json) {
        let mut m = search_summary(&set);
        let poles: Vec<Value> = set
            .poles
            .iter()
            .map(|p| {
                json!({
                    "modulus": jf(p.location.modulus),
                    "arg_total": jf(p.location.arg_total),
                    "sheet": p.location.sheet(),
                    "multiplicity": p.multiplicity,
                    "residual": jf(p.residual),
                    "contour_median": jf(p.contour_median),
                    "contour_count": p.contour_count,
                    "method": p.method,
                })
            })
            .collect();
        m.insert("poles".into(), Value::Array(poles));
        m.insert("zero_energy".into(), zero_energy_json(&zero));
        sink.json("poles.json", m)?;
    }
    Ok(true)
}

pub fn count(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    cfg.require_3d("count")?;
    let c = &cfg.config;
    if c.count.radii.is_empty() || c.count.args.is_empty() {
        bail!("count.radii and count.args must be non-empty");
    }
    let v = cfg.potential()?;
    let (set, zero) = search(cfg, &v)?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &a in &c.count.args {
        for &r in &c.count.radii {
            let n = counting_function(r, a, &set).with_context(|| format!("N({r}, {a})"))?;
            let env = counting_envelope(r, a);
            rows.push(vec![f17(r), f17(a), n.to_string(), f17(env), f17(n as f64 / env)]);
            table.push(json!({"r": jf(r), "a": jf(a), "n": n, "envelope": jf(env), "ratio": jf(n as f64 / env)}));
        }
    }
    if cfg.wants(Format::Csv) {
        sink.csv("count.csv", &["r", "a", "N", "envelope", "N_over_envelope"], &rows)?;
    }
    if cfg.wants(Format::Json) {
        let mut m = search_summary(&set);
        m.insert("table".into(), Value::Array(table));
        // a zero-energy obstruction is flagged, never counted in N
        m.insert("zero_energy".into(), zero_energy_json(&zero));
        sink.json("count.json", m)?;
    }
    Ok(true)
}

pub fn scatter(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    cfg.require_3d("scatter")?;
    let c = &cfg.config;
    if c.scatter.lambdas.iter().any(|l| !(*l > 0.0)) || c.scatter.lambdas.is_empty() {
        bail!("scatter.lambdas must be a non-empty list of positive energies");
    }
    let v = cfg.potential()?;
    let q = cfg.quadrature(&v)?;
    let sphere = SphereQuadrature::new(c.scatter.sphere_degree)?;
    // unitarity pins κ only for a real, nonzero potential
    let cal = if v.is_real() && !v.is_zero() {
        Some(calibrate_kappa(c.scatter.calibration_lambda, &v, &q, &sphere)?)
    } else {
        None
    };
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for (idx, &lambda) in c.scatter.lambdas.iter().enumerate() {
        let kappa = cal.map_or_else(|| reference_kappa(lambda), |k| k.kappa_at(lambda));
        let s = scattering_matrix(lambda, &v, &q, &sphere, kappa)?;
        let drift = match cal {
            Some(k) => {
                let here = calibrate_transition(lambda, &transition_matrix(lambda, &v, &q, &sphere)?)?;
                Some(kappa_drift(&k, &here))
            }
            None => None,
        };
        let sv = s.singular_values();
        let defect = s.unitarity_defect();
        rows.push(vec![
            f17(lambda),
            f17(kappa.re),
            f17(kappa.im),
            f17(defect),
            f17(sv.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            f17(sv.iter().copied().fold(f64::INFINITY, f64::min)),
            drift.map_or("NaN".into(), f17),
        ]);
        summary.push(json!({
            "lambda": jf(lambda),
            "kappa": [jf(kappa.re), jf(kappa.im)],
            "kappa_over_lambda_squared": [jf(kappa.re / (lambda * lambda)), jf(kappa.im / (lambda * lambda))],
            "unitarity_defect": jf(defect),
            "max_singular_value": jf(sv.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            "min_singular_value": jf(sv.iter().copied().fold(f64::INFINITY, f64::min)),
            "kappa_drift": drift.map(jf),
            "matrix_file": format!("s_matrix_{idx}.csv"),
        }));
        if cfg.wants(Format::Csv) {
            let n = s.entries.nrows();
            let entries: Vec<Vec<String>> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| vec![i.to_string(), j.to_string(), f17(s.entries[(i, j)].re), f17(s.entries[(i, j)].im)])
                .collect();
            sink.csv(&format!("s_matrix_{idx}.csv"), &["row", "col", "re", "im"], &entries)?;
        }
    }
    if cfg.wants(Format::Csv) {
        let dirs: Vec<Vec<String>> = sphere
            .directions
            .iter()
            .zip(&sphere.weights)
            .enumerate()
            .map(|(i, (d, w))| vec![i.to_string(), f17(d[0]), f17(d[1]), f17(d[2]), f17(*w)])
            .collect();
        sink.csv("sphere.csv", &["index", "x", "y", "z", "weight"], &dirs)?;
        sink.csv(
            "scatter.csv",
            &["lambda", "kappa_re", "kappa_im", "unitarity_defect", "max_singular_value", "min_singular_value", "kappa_drift"],
            &rows,
        )?;
    }
    if cfg.wants(Format::Json) {
        let mut m = Map::new();
        m.insert(
            "calibration".into(),
            match cal {
                Some(k) => json!({
                    "source": "unitarity",
                    "lambda": jf(k.lambda),
                    "kappa": [jf(k.kappa_re), jf(k.kappa_im)],
                    "residual": jf(k.residual),
                }),
                None => json!({"source": "reference"}),
            },
        );
        m.insert("sphere_degree".into(), json!(sphere.degree));
        m.insert("energies".into(), Value::Array(summary));
        sink.json("scatter.json", m)?;
    }
    Ok(true)
}

pub fn eigen(cfg: &Loaded, sink: &mut Sink) -> anyhow::Result<GatesPassed> {
    cfg.require_3d("eigen")?;
    let c = &cfg.config;
    let v = cfg.potential()?;
    let vals = match c.eigen.method {
        EigenMethod::Radial => radial_grid_eigenvalues(&v, &RadialEigenOracle::default(), c.eigen.count)?,
        EigenMethod::Grid => {
            let o = EigenOracle {
                grid: c.grid.oracle_grid,
                side: c.grid.oracle_box,
                ..EigenOracle::default()
            };
            fourier_grid_eigenvalues(&v, &o, c.eigen.count)?
        }
    };
    // only negative energies are bound states; the rest sit in the continuum
    let rows: Vec<Vec<String>> = vals
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), f17(*e), (*e < 0.0).to_string()])
        .collect();
    if cfg.wants(Format::Csv) {
        sink.csv("eigen.csv", &["index", "energy", "bound"], &rows)?;
    }
    if cfg.wants(Format::Json) {
        let mut m = Map::new();
        m.insert("method".into(), serde_json::to_value(c.eigen.method)?);
        m.insert("eigenvalues".into(), Value::Array(vals.iter().map(|e| jf(*e)).collect()));
        m.insert(
            "bound_state_poles".into(),
            Value::Array(
                vals.iter()
                    .filter(|e| **e < 0.0)
                    .map(|e| json!({"modulus": jf(-e), "arg_total": jf(std::f64::consts::PI)}))
                    .collect(),
            ),
        );
        sink.json("eigen.json", m)?;
    }
    Ok(true)
}
