use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn hurst(args: &[&str]) -> Output {
    hurst_in(args, None, None)
}

fn hurst_in(args: &[&str], stdin: Option<&[u8]>, cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hurst"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    match cache {
        Some(dir) => cmd.env("HURST_CACHE_DIR", dir),
        None => cmd.env_remove("HURST_CACHE_DIR"),
    };
    let mut child = cmd.spawn().expect("spawn hurst");
    if let Some(bytes) = stdin {
        child.stdin.take().unwrap().write_all(bytes).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn ok_text(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn coeffs_at_brownian_motion() {
    let v = ok_json(&hurst(&["coeffs", "--H", "0.5"]));
    let c = &v["coefficients"];
    assert_eq!(c["sigma11"], 3.0);
    assert_eq!(c["g_inf"], 3.0);
    // the finite-n trace limit; see the README on the fine-grid contractions
    assert!((c["theta"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((v["expansion"]["v"].as_f64().unwrap() - 1.5610267357542).abs() < 1e-10);
    assert_eq!(v["resolved_config"]["H"], 0.5);
    assert_eq!(v["resolved_config"]["tol"], 1e-10);
}

#[test]
fn coeffs_exit_codes() {
    let out = hurst(&["coeffs", "--H", "1.2"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out = hurst(&["coeffs", "--H", "0.5", "--tol", "1e-14", "--max-radius", "64"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("not achieved"));
    let out = hurst(&["coeffs", "--H", "0.5", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = hurst(&["coeffs"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_keys_are_sorted() {
    let text = ok_text(&hurst(&["coeffs", "--H", "0.3", "--format", "json"]));
    let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("coefficients") < pos("expansion") && pos("expansion") < pos("resolved_config"));
    assert!(pos("g_inf") < pos("kappa3") && pos("kappa3") < pos("sigma11"));
    let csv = ok_text(&hurst(&["coeffs", "--H", "0.3", "--format", "csv"]));
    assert!(csv.starts_with("key,value\n"));
    assert!(csv.lines().any(|l| l.starts_with("coefficients.sigma11,")));
}

#[test]
fn expand_table() {
    let text = ok_text(&hurst(&["expand", "--H", "0.5", "--n", "64"]));
    assert!(text.starts_with("z,p_n,phi,p_n_b\n"));
    assert!(!text.contains('\r'));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 241);
    let mid = &rows[120];
    assert_eq!(mid[0], 0.0);
    assert!((mid[1] - 0.31930).abs() < 5e-6, "{}", mid[1]);
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        assert_eq!(a[0], -b[0]);
        assert_eq!(a[2], b[2]);
    }
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1])).sum();
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");

    let out = hurst(&["expand", "--H", "0.5", "--n", "64", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let p = path.to_str().unwrap();
    let out = hurst(&["simulate", "--H", "0.7", "--n", "64", "--seed", "1", "--out", p]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("\"command\":\"simulate\""));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,B\n") && !text.contains('\r'));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 129);
    assert_eq!(rows[0], [0.0, 0.0]);
    assert_eq!(rows[128][0], 1.0);

    let cache = dir.path().join("cache");
    let from_file = ok_json(&hurst_in(&["estimate", "--input", p], None, Some(&cache)));
    assert_eq!(from_file["n"], 64);
    for key in ["v_n", "v_2n", "h_raw", "h_hat", "h_star", "h_med", "clamped"] {
        assert!(!from_file[key].is_null(), "{key}");
    }
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);

    let from_stdin = ok_json(&hurst_in(&["estimate", "--stdin"], Some(text.as_bytes()), Some(&cache)));
    for key in ["n", "v_n", "v_2n", "h_raw", "h_hat", "h_star", "h_med", "clamped"] {
        assert_eq!(from_file[key], from_stdin[key], "{key}");
    }
    assert_eq!(from_stdin["resolved_config"]["input"], "<stdin>");

    // an even row count loses its last row with a warning
    let extra = format!("{text}1.0078125,0.5\n");
    let out = hurst_in(&["estimate", "--stdin"], Some(extra.as_bytes()), Some(&cache));
    assert_eq!(ok_json(&out)["n"], 64);
    assert!(stderr(&out).contains("dropping the last one"));

    let out = hurst_in(&["estimate", "--stdin"], Some(b"1\n2\nx\n4\n5\n"), Some(&cache));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 3"));
    assert_eq!(hurst(&["estimate"]).status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"H": 0.3, "n": 8, "seed": 5, "T": 2.0}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let v = ok_json(&hurst(&["simulate", "--config", c, "--seed", "9", "--format", "json"]));
    let r = &v["resolved_config"];
    assert_eq!((r["H"].as_f64(), r["n"].as_u64(), r["seed"].as_u64()), (Some(0.3), Some(8), Some(9)));
    assert_eq!(r["T"], 2.0);
    assert_eq!(v["B"].as_array().unwrap().len(), 17);
    assert_eq!(v["t"][16], 2.0);

    let direct = ok_json(&hurst(&["simulate", "--H", "0.3", "--n", "8", "--seed", "9", "--T", "2", "--format", "json"]));
    assert_eq!(v["B"], direct["B"]);

    std::fs::write(&cfg, r#"{"H": 0.3, "typo": 1}"#).unwrap();
    assert_eq!(hurst(&["simulate", "--config", c]).status.code(), Some(1));
}

#[test]
fn mc_requires_h_and_n() {
    let out = hurst(&["mc"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("--H") && err.contains("--n"), "{err}");
}

#[test]
fn mc_is_deterministic_and_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fig.svg");
    let dens = dir.path().join("density.csv");
    let args = ["mc", "--H", "0.5", "--n", "32", "--reps", "100000", "--seed", "7"];
    let first = ok_text(&hurst(&args));
    let mut with_files = args.to_vec();
    with_files.extend(["--svg", svg.to_str().unwrap(), "--density-csv", dens.to_str().unwrap()]);
    let second = ok_text(&hurst(&with_files));
    assert_eq!(first, second);

    let report: Value = serde_json::from_str(&first).unwrap();
    let schema: Value = serde_json::from_str(include_str!("../schema/mc_report.schema.json")).unwrap();
    let mut errors = Vec::new();
    validate(&schema, &schema, &report, "$", &mut errors);
    assert!(errors.is_empty(), "{errors:#?}");

    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let table = std::fs::read_to_string(&dens).unwrap();
    assert!(table.starts_with("z,empirical,phi,p_n\n"));
    assert_eq!(table.lines().count(), 82);
}

#[test]
fn diag_tables() {
    let v = ok_json(&hurst(&["diag", "--H", "0.5", "--n", "512"]));
    let rows = v["a_n"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let limit = if r["k"] == 2 { 6.0 } else { 20.0 };
        assert!((r["limit"].as_f64().unwrap() - limit).abs() < 1e-12);
        assert!(r["error"].as_f64().unwrap() < 20.0 / r["n"].as_f64().unwrap());
    }
    let v = ok_json(&hurst(&["diag", "--H", "0.3", "--n", "256"]));
    let last = v["decay"].as_array().unwrap().iter().find(|r| r["kernel"] == "rho_hat" && r["j"] == 1024).unwrap();
    assert!((last["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

/// Checks the JSON-schema keywords the report schema uses.
fn validate(root: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    if let Some(r) = schema["$ref"].as_str() {
        let target = r.trim_start_matches("#/").split('/').fold(root, |s, k| &s[k]);
        return validate(root, target, v, at, errors);
    }
    let num = |k: &str| schema[k].as_f64();
    if let Some(t) = schema["type"].as_str() {
        let ok = match t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            "string" => v.is_string(),
            "boolean" => v.is_boolean(),
            _ => false,
        };
        if !ok {
            errors.push(format!("{at}: expected {t}, got {v}"));
            return;
        }
    }
    if let Some(options) = schema["enum"].as_array() {
        if !options.contains(v) {
            errors.push(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        let bad = num("minimum").is_some_and(|m| x < m)
            || num("maximum").is_some_and(|m| x > m)
            || num("exclusiveMinimum").is_some_and(|m| x <= m)
            || num("exclusiveMaximum").is_some_and(|m| x >= m);
        if bad {
            errors.push(format!("{at}: {x} out of bounds"));
        }
    }
    if let Some(obj) = v.as_object() {
        for key in schema["required"].as_array().into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                errors.push(format!("{at}: missing {key}"));
            }
        }
        for (k, sub) in schema["properties"].as_object().into_iter().flatten() {
            if let Some(x) = obj.get(k) {
                validate(root, sub, x, &format!("{at}.{k}"), errors);
            }
        }
    }
    if let Some(items) = v.as_array() {
        if num("minItems").is_some_and(|m| (items.len() as f64) < m) {
            errors.push(format!("{at}: too few items"));
        }
        if !schema["items"].is_null() {
            for (i, x) in items.iter().enumerate() {
                validate(root, &schema["items"], x, &format!("{at}[{i}]"), errors);
            }
        }
    }
}
