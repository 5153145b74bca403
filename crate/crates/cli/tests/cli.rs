use std::path::{Path, PathBuf};
use std::process::Command;

use semidim::config::{parse_config, parse_config_str};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn semidim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_semidim"))
        .args(args)
        .env_remove("SEMIDIM_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_round_trip_is_idempotent() {
    for name in [
        "cantor.json",
        "sierpinski.json",
        "affine_triadic.json",
        "pair.json",
        "cubed_quadratics.json",
        "siegel_pair.json",
        "parabolic_pair.json",
    ] {
        let first = parse_config(&fixture(name)).unwrap();
        let once = first.to_json();
        let second = parse_config_str(&once).unwrap();
        assert_eq!(first, second, "{name}");
        assert_eq!(once, second.to_json(), "{name}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let ok = fixture("cantor.json");
    let ok = ok.to_str().unwrap();

    let out = semidim(&["dim", "--config", ok, "--depths", "2,4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let bad_schema = write(
        dir.path(),
        "bad.json",
        r#"{"schema":"semidim/1","generators":[],"oops":1}"#,
    );
    let out = semidim(&["dim", "--config", &bad_schema]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/oops"));

    let out = semidim(&["dim", "--config", ok, "--depths", "4,2"]);
    assert_eq!(out.status.code(), Some(2));

    let out = semidim(&["dim", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(4));

    let out = semidim(&[
        "dim",
        "--config",
        ok,
        "--depths",
        "2",
        "--out",
        "/nonexistent/dir/r.json",
    ]);
    assert_eq!(out.status.code(), Some(4));

    // ⟨3z⟩ alone has a single branch: no root in [0.7, 2]
    let narrow = write(
        dir.path(),
        "narrow.json",
        r#"{"schema":"semidim/1","generators":[{"type":"poly","coeffs":[[0,0],[3,0]]}],"bracket":[0.7,2],"depths":[2]}"#,
    );
    let out = semidim(&["dim", "--config", &narrow]);
    assert_eq!(out.status.code(), Some(3));

    let out = semidim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dim_writes_json_and_level_root_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cantor.json");
    let status = semidim(&[
        "--threads",
        "2",
        "dim",
        "--config",
        fixture("cantor.json").to_str().unwrap(),
        "--depths",
        "4,6,8",
        "--mode",
        "difference",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let roots = report["level_roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
    let last = roots[2]["difference"].as_f64().unwrap();
    assert!((last - 2f64.ln() / 3f64.ln()).abs() < 0.05);
    let csv = std::fs::read_to_string(dir.path().join("cantor.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,t_root_direct,t_root_difference,distortion_ratio,pruned_mass_bound")
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn pressure_and_exhaust_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let o = semidim(&[
        "pressure",
        "--config",
        fixture("cantor.json").to_str().unwrap(),
        "--depths",
        "3",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&p).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,t,log_z,direct,difference");
    // 4 levels × 9 exponents
    assert_eq!(rows.len(), 1 + 4 * 9);
    // n = 1, t = 0: log 2
    let r: Vec<&str> = rows[10].split(',').collect();
    assert_eq!((r[0], r[1]), ("1", "0"));
    assert!((r[2].parse::<f64>().unwrap() - 2f64.ln()).abs() < 1e-12);

    let e = dir.path().join("e.csv");
    let o = semidim(&[
        "exhaust",
        "--config",
        fixture("affine_triadic.json").to_str().unwrap(),
        "--depths",
        "4",
        "--out",
        e.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&e).unwrap();
    assert_eq!(text.lines().next(), Some("size,root,pressure"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn render_writes_pgm_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("c.pgm");
    let o = semidim(&[
        "render",
        "--config",
        fixture("cantor.json").to_str().unwrap(),
        "--width",
        "30",
        "--height",
        "20",
        "--out",
        pgm.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n30 20\n255\n"));
    assert_eq!(bytes.len(), b"P5\n30 20\n255\n".len() + 600);

    let png = dir.path().join("p.png");
    let o = semidim(&[
        "render",
        "--config",
        fixture("pair.json").to_str().unwrap(),
        "--mode",
        "escape",
        "--width",
        "40",
        "--height",
        "40",
        "--out",
        png.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read(&png).unwrap().starts_with(b"\x89PNG"));

    let o = semidim(&["render", "--config", fixture("cantor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_pbosc_reports_json() {
    let o = semidim(&["check-pbosc", "--config", fixture("pair.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["overall"], serde_json::Value::Bool(true));
    let o = semidim(&["check-pbosc", "--config", fixture("cantor.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
