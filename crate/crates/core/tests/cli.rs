//! End-to-end runs of the `gaussent` binary.

use std::path::PathBuf;
use std::process::Command;

use jsonschema::JSONSchema;
use serde_json::Value;

struct Run {
    stdout: String,
    stderr: String,
    code: i32,
}

fn gaussent(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_gaussent")).args(args).output().expect("binary runs");
    Run {
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
        code: out.status.code().unwrap_or(-1),
    }
}

fn json(args: &[&str]) -> Value {
    let r = gaussent(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    serde_json::from_str(&r.stdout).unwrap()
}

fn assert_schema(name: &str, doc: &Value) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{name} output violates its schema: {msgs:#?}");
    };
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

fn close(v: &Value, want: f64, tol: f64) {
    let got = v.as_f64().unwrap_or_else(|| panic!("{v} is not a number"));
    assert!((got - want).abs() <= tol, "{got} vs {want}");
}

#[test]
fn simon_values() {
    let doc = json(&["simon", "--a", "1", "--b", "2"]);
    assert_schema("simon", &doc);
    close(&doc["results"]["I_general"], -1.0 / 6.0, 1e-12);
    close(&doc["results"]["I_closed"], -0.166_667, 1e-6);
    assert_eq!(doc["results"]["separable"], false);

    let doc = json(&["simon", "--a", "1", "--b", "inf"]);
    assert_eq!(doc["results"]["I_closed"].as_f64(), Some(0.0));
    assert_eq!(doc["results"]["separable"], true);
    assert_eq!(doc["config"]["b"], "inf");

    let doc = json(&["simon", "--a", "2", "--b", "2"]);
    close(&doc["results"]["I_closed"], -1.333_333, 1e-6);
}

#[test]
fn eof_surface_csv() {
    let r = gaussent(&[
        "eof-surface", "--a-min", "1", "--a-max", "1", "--a-steps", "1", "--b-min", "2", "--b-max", "2", "--b-steps", "1",
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "a,b,eof\n1,2,0.082997062\n");

    let r = gaussent(&["eof-surface", "--a-steps", "4", "--b-steps", "7"]);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 1 + 4 * 7);
    assert!(!r.stdout.contains('\r'));

    // large b: EoF falls towards zero monotonically along each a
    let doc = json(&["eof-surface", "--format", "json", "--a-steps", "2", "--b-min", "10", "--b-max", "1000", "--b-steps", "20"]);
    assert_schema("eof-surface", &doc);
    let rows = doc["results"]["rows"].as_array().unwrap();
    let eofs: Vec<f64> = rows.iter().map(|r| r["eof"].as_f64().unwrap()).collect();
    for chunk in eofs.chunks(20) {
        assert!(chunk.windows(2).all(|w| w[1] < w[0]));
        assert!(chunk[19] < 1e-6 * chunk[0]);
    }
}

#[test]
fn dispersion_curve_rows_and_crossing() {
    let r = gaussent(&["dispersion-curve", "--u", "1.01", "--b", "1", "--t-max", "100", "--steps", "11"]);
    assert_eq!(r.code, 0);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "t,dx_separable,dx_entangled");
    assert_eq!(lines[1], "0,0.495049505,2.50614916");
    assert_eq!(lines.len(), 12);
    // the curves merge at late times
    let last: Vec<f64> = lines[11].split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[2] / last[1] - 1.0).abs() < 1e-3);

    let doc = json(&["dispersion-curve", "--u", "1.01", "--b", "1", "--offset", "1", "--format", "json"]);
    assert_schema("dispersion-curve", &doc);
    close(&doc["results"]["crossing"]["lab"], 3.458_391, 1e-6);
    close(&doc["results"]["crossing"]["entangled_clock"], 2.458_391, 1e-6);
    // before the delayed production there is no entangled curve yet
    assert!(doc["results"]["rows"][0]["dx_entangled"].is_null());
}

#[test]
fn protocol2_noiseless() {
    let doc = json(&["protocol", "--u", "1.01", "--b", "1", "--t0", "1", "--times", "0,0.5,1,1.5", "--noiseless"]);
    assert_schema("protocol", &doc);
    let first = &doc["results"]["first"];
    assert_eq!(first["verdict"]["classification"], "entangled");
    close(&first["details"]["fit"]["alpha"], 25.628_110, 1e-6);
    close(&first["details"]["fit"]["beta"], 1.0, 1e-6);
    close(&first["verdict"]["b_hat"], 1.0, 1e-6);
    close(&first["details"]["t0_hat"], 1.0, 1e-6);

    let doc = json(&["protocol", "--a", "1", "--t0", "2", "--times", "0,1,2", "--noiseless"]);
    assert_schema("protocol", &doc);
    let first = &doc["results"]["first"];
    assert_eq!(first["verdict"]["classification"], "separable");
    assert_eq!(first["verdict"]["b_hat"], "inf");
    close(&first["details"]["fit"]["alpha"], 1.0, 1e-9);
    close(&first["details"]["t0_hat"], 2.0, 1e-9);
}

#[test]
fn protocol1_known_origin() {
    let base = ["protocol", "--mode", "1", "--u", "1.01", "--t0", "1", "--times", "1", "--n-samples", "1000000", "--seed", "3"];
    let mut ent = base.to_vec();
    ent.extend(["--b", "1"]);
    let doc = json(&ent);
    assert_schema("protocol", &doc);
    assert_eq!(doc["results"]["first"]["verdict"]["classification"], "entangled");
    let b_hat = doc["results"]["first"]["verdict"]["b_hat"].as_f64().unwrap();
    assert!((b_hat - 1.0).abs() < 0.05, "b_hat {b_hat}");

    let mut sep = base.to_vec();
    sep.extend(["--b", "inf"]);
    let doc = json(&sep);
    assert_eq!(doc["results"]["first"]["verdict"]["classification"], "separable");

    let r = gaussent(&["protocol", "--mode", "1", "--times", "1,2"]);
    assert_ne!(r.code, 0);
}

#[test]
fn noisy_trials_are_counted_and_seeded() {
    let args = ["protocol", "--u", "1.01", "--b", "1", "--t0", "1", "--trials", "12", "--seed", "11"];
    let a = gaussent(&args);
    let b = gaussent(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let doc: Value = serde_json::from_str(&a.stdout).unwrap();
    assert_schema("protocol", &doc);
    let s = &doc["results"]["summary"];
    let total: u64 = ["separable", "entangled", "inconclusive"].iter().map(|k| s[*k].as_u64().unwrap()).sum();
    assert_eq!(total, 12);
    assert_eq!(doc["metadata"]["seed"], 11);
    assert_eq!(doc["results"]["trials"].as_array().unwrap().len(), 12);

    let other = gaussent(&["protocol", "--u", "1.01", "--b", "1", "--t0", "1", "--trials", "12", "--seed", "12"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn oracle_check_reports() {
    let doc = json(&["oracle-check", "--a", "1", "--b", "2", "--times", "1", "--grid-n", "256"]);
    assert_schema("oracle-check", &doc);
    assert_eq!(doc["results"]["passed"], true);
    assert!(doc["results"]["times"][0]["dx1_rel_err"].as_f64().unwrap() < 1e-3);

    let doc = json(&["oracle-check", "--a", "1", "--b", "inf", "--grid-n", "256"]);
    assert!(doc["results"]["cm_max_abs_err"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exit_codes() {
    // u·b ≤ 1 has no entangled state
    let r = gaussent(&["dispersion-curve", "--u", "0.5", "--b", "1"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.starts_with("error:"));
    assert_eq!(gaussent(&["simon", "--a", "-1", "--b", "2"]).code, 2);

    // the window fits the initial packet but not the spread one
    let r = gaussent(&["oracle-check", "--a", "1", "--b", "2", "--times", "0,20", "--grid-n", "256", "--grid-L", "8"]);
    assert_eq!(r.code, 3, "{}", r.stderr);

    // two times cannot fix two parameters plus a residual
    let r = gaussent(&["protocol", "--u", "1.01", "--b", "1", "--times", "0,1", "--noiseless"]);
    assert_eq!(r.code, 4, "{}", r.stderr);
}

#[test]
fn replay_reproduces_bytes() {
    let first = scratch("protocol_first.json");
    let again = scratch("protocol_replay.json");
    let r = gaussent(&[
        "protocol", "--u", "1.01", "--b", "1", "--t0", "0.5", "--trials", "4", "--seed", "99",
        "--out", first.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let r = gaussent(&["replay", "--config", first.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&again).unwrap());

    // the echoed config restores a non-default format too
    let csv_cfg = scratch("curve.json");
    let r = gaussent(&["dispersion-curve", "--u", "1.2", "--b", "3", "--format", "json", "--out", csv_cfg.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let r = gaussent(&["replay", "--config", csv_cfg.to_str().unwrap()]);
    let doc: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(std::fs::read_to_string(&csv_cfg).unwrap(), r.stdout);
    assert_schema("dispersion-curve", &doc);
}
