use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn liouville(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_liouville"))
        .arg(command)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn result(dir: &Path, name: &str) -> Value {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap();
    v["result"].clone()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn solve_f1() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "solve", r#"{"gamma": 0.0, "matrix": [[1.0]]}"#, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = result(tmp.path(), "summary.json");
    assert!((num(&s["sigma"][0]) - 4.0).abs() < 1e-6);
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, s);
    let csv = fs::read_to_string(tmp.path().join("out/profile.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "r,U_1,dU_1"));
}

#[test]
fn gamma_out_of_range() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "solve", r#"{"gamma": -1.5}"#, &[]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("gamma") && msg.contains("(-1, 0]"), "{msg}");
}

#[test]
fn tolerance_below_range() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "solve", r#"{"tol": 1e-20}"#, &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("tol"));
    let out = liouville(tmp.path(), "solve", "{}", &["--tol", "1e-20"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn parse_errors_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "solve", "{\n  \"r_maks\": 100\n}", &[]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("r_maks") && msg.contains("line 2"), "{msg}");
    let out = liouville(tmp.path(), "solve", "{\"r_max\": }", &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invert_round_trip() {
    let tmp = TempDir::new().unwrap();
    let matrix = r#""matrix": [[1, 2], [2, 1]]"#;
    let out = liouville(
        tmp.path(),
        "solve",
        &format!(r#"{{{matrix}, "reduced_alpha": [-1.3]}}"#),
        &["--quiet"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let sigma = num(&result(tmp.path(), "summary.json")["sigma"][1]);
    let out = liouville(
        tmp.path(),
        "invert",
        &format!(r#"{{{matrix}, "invert": {{"target_sigma": [{sigma:e}]}}}}"#),
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let alpha = num(&result(tmp.path(), "invert.json")["reduced_alpha"][0]);
    assert!((alpha + 1.3).abs() < 1e-8, "{alpha}");
}

#[test]
fn invert_unreachable() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "invert",
        r#"{"matrix": [[1, 2], [2, 1]], "invert": {"target_sigma": [50.0]}}"#,
        &[],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("best iterate"));
}

#[test]
fn invert_single_component() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "invert", r#"{"invert": {"target_sigma": []}}"#, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "invert.json");
    assert_eq!(r["reduced_alpha"], serde_json::json!([]));
    assert!((num(&r["full_sigma"][0]) - 4.0).abs() < 1e-6);
}

#[test]
fn surface_at_q() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "surface",
        r#"{"matrix": [[1, 2], [2, 1]], "surface": {}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "surface.json");
    assert_eq!(r["on_surface"], true);
    assert_eq!(r["region"]["on_surface"], 1);
    assert!(num(&r["lambda"]).abs() < 1e-12);
}

#[test]
fn surface_sweep_changes_sign_at_one() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "surface",
        r#"{"matrix": [[1, 2], [2, 1]],
            "surface": {"sweep": {"from": 0.5, "to": 1.5, "steps": 11}}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("# liouville "));
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let (t, lam) = l.split_once(',').unwrap();
            (t.parse().unwrap(), lam.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    for (t, lam) in rows {
        if t < 1.0 {
            assert!(lam > 0.0);
        } else if t > 1.0 {
            assert!(lam < 0.0);
        } else {
            assert!(lam.abs() < 1e-12);
        }
    }
}

#[test]
fn surface_critical_listing() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "surface",
        r#"{"surface": {"strengths": [-0.5], "m_max": 2}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "surface.json");
    let got: Vec<f64> = r["critical_values"].as_array().unwrap().iter().map(num).collect();
    let want = [4.0, 8.0, 12.0, 16.0, 20.0].map(|k| k * PI);
    assert_eq!(got.len(), 5);
    for (x, y) in got.iter().zip(want) {
        assert!((x - y).abs() < 1e-12 * y);
    }
}

#[test]
fn compare_identity() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "compare",
        r#"{"gamma": -0.3, "compare": {"mu_p": 0.7, "m_p": 5.0, "m_q": 5.0}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "compare.json");
    assert_eq!(num(&r["d_relation"]["heights"]["eta"]), 1.0);
    assert!(num(&r["d_relation"]["residual"][0]).abs() < 1e-9);
    assert_eq!(num(&r["distances"][0]["distance"]), 0.0);
}

#[test]
fn compare_f2_to_regular() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "compare",
        r#"{"gamma": -0.5, "r_max": 1e8, "compare": {"mu_p": 1.0, "m_p": 12.0, "m_q": 30.0}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "compare.json");
    assert!(num(&r["d_relation"]["residual"][0]).abs() < 1e-6);
}

#[test]
fn compare_perturbed_alpha() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "compare",
        r#"{"matrix": [[1, 2], [2, 1]], "reduced_alpha": [-1.0],
            "compare": {"mu_p": 1.0, "m_p": 5.0, "m_q": 5.0, "reduced_alpha_p": [-0.5]}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "compare.json");
    for row in r["distances"].as_array().unwrap() {
        assert!(num(&row["distance"]) > 1e-3, "{row}");
    }
}

const Q_REGIME: &str = r#"{"blowup": {"points": [[0.25, 0.5]], "regime": "q", "eps": 1e-3}}"#;

#[test]
fn leading_q_regime() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "leading", Q_REGIME, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "leading.json");
    assert_eq!(r["is_q"], true);
    let p = num(&r["result"]["prediction"]);
    assert!((p + 0.0111111).abs() < 1e-6, "{p}");
}

#[test]
fn leading_wrong_regime() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "leading",
        r#"{"blowup": {"points": [[0.25, 0.5]], "rho": [20.0], "regime": "q"}}"#,
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("wrong regime"), "{}", stderr(&out));
}

#[test]
fn leading_general_stability_rows() {
    let tmp = TempDir::new().unwrap();
    let config = format!(
        r#"{{"matrix": [[1, 1], [1, 4]],
            "blowup": {{"points": [[0.2, 0.9]], "gammas": [-0.5],
                        "rho": [{}, {}], "D": [0.0, 0.3], "alpha": [0.0, 0.0],
                        "delta0": 0.005, "eps": 0.01}}}}"#,
        2.0 * PI,
        PI
    );
    let out = liouville(tmp.path(), "leading", &config, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "leading.json");
    let lt = &r["result"]["leading"];
    assert_eq!(num(&lt["frak_m"]), 3.0);
    let row = &lt["rows"][0];
    assert_eq!(num(&row["delta0"]), 0.005);
    assert!((num(&row["a_fine"]) - num(&row["limit"])).abs() < (num(&row["a_coarse"]) - num(&row["limit"])).abs());
    let csv = fs::read_to_string(tmp.path().join("out/stability.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "i,t,delta0,a_coarse,a_fine,limit,b"));
}

#[test]
fn green_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(
        tmp.path(),
        "green",
        r#"{"green": {"geometry": {"lx": 2.0}, "points": [[0.1, 0.1], [1.2, 0.3], [0.5, 0.4]]}}"#,
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = result(tmp.path(), "green.json");
    assert_eq!(r["periods"], serde_json::json!([2.0, 0.5]));
    let g = r["gstar"].as_array().unwrap();
    for (t, row) in g.iter().enumerate() {
        for (s, v) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(*v, g[s][t]);
        }
    }
}

#[test]
fn green_coincident_points_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "green", r#"{"green": {"points": [[0.1, 0.1], [0.1, 0.1]]}}"#, &[]);
    assert_ne!(code(&out), 0);
}

#[test]
fn outputs_are_deterministic() {
    let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let tmp = TempDir::new().unwrap();
            for cmd in ["solve", "leading"] {
                let out = liouville(tmp.path(), cmd, Q_REGIME, &["--quiet"]);
                assert_eq!(code(&out), 0, "{}", stderr(&out));
            }
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(tmp.path().join("out"))
                .unwrap()
                .map(|e| {
                    let e = e.unwrap();
                    (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
                })
                .collect();
            files.sort();
            files
        })
        .collect();
    assert_eq!(runs[0].len(), 4);
    assert!(runs[0] == runs[1]);
}

#[test]
fn every_file_embeds_config_and_version() {
    let tmp = TempDir::new().unwrap();
    let out = liouville(tmp.path(), "solve", r#"{"r_max": 500}"#, &["--tol", "1e-10", "--quiet"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let version = env!("CARGO_PKG_VERSION");
    let csv = fs::read_to_string(tmp.path().join("out/profile.csv")).unwrap();
    assert!(csv.starts_with(&format!("# liouville {version} solve\n")));
    assert!(csv.contains(r#""tol":1e-10"#));
    for name in ["summary.json", "solve.json"] {
        let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out").join(name)).unwrap()).unwrap();
        assert_eq!(v["version"], version);
        assert_eq!(v["config"]["r_max"], 500.0);
        assert_eq!(v["config"]["tol"], 1e-10);
    }
}

#[test]
fn missing_config_file() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_liouville"))
        .args(["solve", "--config"])
        .arg(tmp.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
