use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbayes_cli::{bound_report, load_model, BoundName, EXIT_INVALID, EXIT_OK, GAP_TOL_ENV};
use qbayes_core::conic::SolverOptions;
use qbayes_core::model::model_zoo;
use serde_json::Value;

fn qbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbayes"))
        .args(args)
        .env_remove(GAP_TOL_ENV)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn zoo_file(dir: &Path, file: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(file);
    let mut all = vec!["zoo"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path_str(&path)]);
    let out = qbayes(&all);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_ms");
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[test]
fn zoo_writes_expected_point_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cb = read_json(&zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]));
    assert_eq!(cb["points"].as_array().unwrap().len(), 2);
    let xy = read_json(&zoo_file(dir.path(), "xy.json", &["qubit_xy", "0.5", "4"]));
    assert_eq!(xy["points"].as_array().unwrap().len(), 4);
    let out = qbayes(&["zoo", "no_such_model", "1"]);
    assert_eq!(code(&out), EXIT_INVALID);
}

#[test]
fn bounds_on_classical_binary() {
    let dir = tempfile::tempdir().unwrap();
    let model = zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]);
    let report = dir.path().join("r.json");
    let out = qbayes(&[
        "bounds",
        "--model",
        path_str(&model),
        "--bounds",
        "all",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    for name in ["nh", "holevo", "sld", "rld"] {
        let v = r["bounds"][name]["value"].as_f64().unwrap();
        assert!((v - 0.64).abs() < 1e-5, "{name} = {v}");
    }
    for name in ["nh", "holevo"] {
        let e = &r["bounds"][name];
        let v = e["value"].as_f64().unwrap();
        assert_eq!(e["solver_status"], "optimal");
        assert!(e["gap"].as_f64().unwrap() <= 1e-8 * v.abs().max(1.0));
    }
    let vt = r["bounds"]["vantree"]["error"].as_str().unwrap();
    assert!(vt.contains("missing derivatives"), "{vt}");
    assert!(r["bounds"]["nagaoka2"]["error"]
        .as_str()
        .unwrap()
        .contains("requires n=2"));
    assert!(r["model_digest"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn nagaoka2_alone_on_one_parameter_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]);
    let report = dir.path().join("r.json");
    let out = qbayes(&[
        "bounds",
        "--model",
        path_str(&model),
        "--bounds",
        "nagaoka2",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), EXIT_INVALID);
    let r = read_json(&report);
    assert!(r["bounds"]["nagaoka2"]["error"]
        .as_str()
        .unwrap()
        .contains("requires n=2"));

    let out = qbayes(&[
        "bounds",
        "--model",
        path_str(&model),
        "--bounds",
        "nagaoka2,sld",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), EXIT_OK);
}

#[test]
fn invalid_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"n\": 1,\n  \"d\": ]\n}").unwrap();
    let out = qbayes(&["bounds", "--model", path_str(&bad)]);
    assert_eq!(code(&out), EXIT_INVALID);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("column"), "{err}");

    let out = qbayes(&["bounds", "--model", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(code(&out), EXIT_INVALID);
    let out = qbayes(&["bounds", "--model", path_str(&bad), "--bounds", "bogus"]);
    assert_eq!(code(&out), EXIT_INVALID);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cb = zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]);
    let report = dir.path().join("v.json");
    let out = qbayes(&[
        "verify",
        "--model",
        path_str(&cb),
        "--iters",
        "50",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    assert_eq!(r["violated"], false);
    for link in r["audit"]["links"].as_array().unwrap() {
        assert!(link["margin"].as_f64().unwrap() >= -1e-6, "{link}");
    }

    let pm = zoo_file(dir.path(), "pm.json", &["point_mass", "2", "2", "7"]);
    let out = qbayes(&[
        "verify",
        "--model",
        path_str(&pm),
        "--iters",
        "20",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    for key in ["sld", "rld", "holevo", "nagaoka_hayashi", "seesaw"] {
        assert!(
            r["audit"][key].as_f64().unwrap().abs() < 1e-6,
            "{key}: {}",
            r["audit"][key]
        );
    }

    let mut corrupted = read_json(&cb);
    for p in corrupted["points"].as_array_mut().unwrap() {
        p["weight"] = Value::from(0.25);
    }
    let bad = dir.path().join("half.json");
    std::fs::write(&bad, serde_json::to_string(&corrupted).unwrap()).unwrap();
    let out = qbayes(&["verify", "--model", path_str(&bad)]);
    assert_eq!(code(&out), EXIT_INVALID);
}

#[test]
fn zoo_round_trip_matches_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let file = zoo_file(dir.path(), "xy.json", &["qubit_xy", "0.5", "4"]);
    let loaded = load_model(&file).map_err(|f| f.error).unwrap();
    let memory = model_zoo("qubit_xy", &[0.5], 4).unwrap();
    assert_eq!(loaded.model.to_json(), memory.to_json());

    let opts = SolverOptions::default();
    let selection = [BoundName::Nh, BoundName::Holevo, BoundName::Sld, BoundName::Rld];
    let (from_file, c1) = bound_report(&loaded, &selection, &opts);
    let in_memory = qbayes_cli::LoadedModel {
        model: memory,
        digest: loaded.digest.clone(),
    };
    let (from_memory, c2) = bound_report(&in_memory, &selection, &opts);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    for (name, a) in &from_file.bounds {
        let b = from_memory.bounds[name].value.unwrap();
        assert!((a.value.unwrap() - b).abs() <= 1e-12, "{name}");
    }
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let model = zoo_file(dir.path(), "pair.json", &["correlated_pair", "1", "0.6"]);
    let mut runs = Vec::new();
    for k in 0..2 {
        let report = dir.path().join(format!("r{k}.json"));
        let out = qbayes(&["bounds", "--model", path_str(&model), "--out", path_str(&report)]);
        assert_eq!(code(&out), EXIT_OK);
        let mut v = read_json(&report);
        strip_wall_time(&mut v);
        runs.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(runs[0], runs[1]);

    let mut verifies = Vec::new();
    for k in 0..2 {
        let report = dir.path().join(format!("v{k}.json"));
        let out = qbayes(&[
            "verify",
            "--model",
            path_str(&model),
            "--iters",
            "30",
            "--seeds",
            "4,5",
            "--out",
            path_str(&report),
        ]);
        assert_eq!(code(&out), EXIT_OK);
        verifies.push(std::fs::read_to_string(&report).unwrap());
    }
    assert_eq!(verifies[0], verifies[1]);
}

#[test]
fn csv_export_lists_selected_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let model = zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]);
    let csv = dir.path().join("r.csv");
    let report = dir.path().join("r.json");
    let out = qbayes(&[
        "bounds",
        "--model",
        path_str(&model),
        "--bounds",
        "sld,nh",
        "--out",
        path_str(&report),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), EXIT_OK);
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let name_col = headers.iter().position(|h| h == "bound").unwrap();
    let value_col = headers.iter().position(|h| h == "value").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(["nh", "sld"].contains(&&row[name_col]));
        let v: f64 = row[value_col].parse().unwrap();
        assert!((v - 0.64).abs() < 1e-5);
    }
}

#[test]
fn gap_tolerance_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let model = zoo_file(dir.path(), "cb.json", &["classical_binary", "1", "0.6"]);
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_qbayes"))
            .args(["bounds", "--model", path_str(&model), "--bounds", "nh"])
            .env(GAP_TOL_ENV, tol)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("1e-6")), EXIT_OK);
    assert_eq!(code(&run("not-a-number")), EXIT_INVALID);
    assert_eq!(code(&run("-1")), EXIT_INVALID);
}

#[test]
fn lemmas_print_tallies() {
    let out = qbayes(&["lemmas", "--seed", "3", "--trials", "3"]);
    assert_eq!(code(&out), EXIT_OK);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 3);
    assert!(text.lines().all(|l| l.ends_with(" 0 fail")), "{text}");
}
