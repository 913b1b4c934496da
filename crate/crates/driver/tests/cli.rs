use std::path::PathBuf;
use std::process::{Command, Output};

fn sdql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdql")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

#[test]
fn grad_emits_the_scatter_loop() {
    let o = sdql(&["grad", "VVD", "--wrt", "V1", "--spec", "V1=dense,V2=coo", "--emit-cpp"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("for(size_t i = 0; i < V2_len; i++) {\n        result[V2_VRow[i]] += V2_VVal[i];\n    }"), "{}", s);
}

#[test]
fn grad_dumps_the_factorized_stage() {
    let o = sdql(&["grad", "BATAX", "--wrt", "X", "--dump-stage", "post-ad"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("== post-ad ==\nbeta * (sum(<"), "{}", s);
    assert!(s.contains("r_2 * r_2") || s.contains("r * r"), "{}", s);
}

#[test]
fn grad_run_of_dot_product_is_the_other_vector() {
    let o = sdql(&["grad", "VVD", "--wrt", "V1", "--run", "--seed", "7", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["value"], j["inputs"]["V2"]);
    assert!(j["value"].as_object().is_some_and(|m| !m.is_empty()));
}

#[test]
fn runs_are_deterministic() {
    let args = ["grad", "BATAX", "--run", "--seed", "3", "--dump-stage", "all"];
    assert_eq!(sdql(&args).stdout, sdql(&args).stdout);
}

#[test]
fn source_files_and_inline_programs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scale.sdql");
    std::fs::write(&path, "sum(<i, v> in V) { i -> s * v }").unwrap();
    let p = path.display().to_string();
    let o = sdql(&["typecheck", &p, "--env", "V: tensor 1; s: real"]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), "{int -> real}"));
    let o = sdql(&["verify", &p, "--env", "V: tensor 1; s: real", "--wrt", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = sdql(&["parse", "-e", "sum(<i, a> in V) a * a", "--json"]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["kind"], "sum");
    let o = sdql(&["grad", "-e", "sum(<i, a> in V) a * a", "--env", "V: tensor 1", "--wrt", "V"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_reports_and_exit_codes() {
    let o = sdql(&["verify", "--all", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j.as_array().unwrap().len(), 6);
    assert!(j.as_array().unwrap().iter().all(|r| r["passed"] == true));
    // A step of 1e-300 underflows the difference quotient, so the check must fail.
    let o = sdql(&["verify", "SMVM", "--eps", "1e-300"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn verify_scalar_example() {
    // d/ds of { i -> v * s * s } is { i -> 2 s v }.
    let o = sdql(&["verify", "VSM", "--json", "--grad-support", "stored"]);
    assert_eq!(o.status.code(), Some(0));
    let o = sdql(&["grad", "VSM", "--run", "--json"]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let s = j["inputs"]["s"].as_f64().unwrap();
    for (k, v) in j["inputs"]["V"].as_object().unwrap() {
        let g = j["value"][k].as_f64().unwrap();
        assert!((g - 2.0 * s * v.as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn user_errors_exit_with_one() {
    assert_eq!(sdql(&["grad", "NOPE"]).status.code(), Some(1));
    assert_eq!(sdql(&["grad", "VVD", "--bogus"]).status.code(), Some(1));
    assert_eq!(sdql(&["grad", "VVD", "--dump-stage", "nowhere"]).status.code(), Some(1));
    assert_eq!(sdql(&["grad", "VVD", "--spec", "V1 = hash"]).status.code(), Some(1));
    assert_eq!(sdql(&["parse", "-e", "sum(<i in"]).status.code(), Some(1));
    assert_eq!(sdql(&["typecheck", "-e", "V + 1.0", "--env", "V: tensor 1"]).status.code(), Some(1));
    assert_eq!(sdql(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_emits_json_rows() {
    let o = sdql(&["bench", "VVD", "--dims", "--json"]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), "[]"));
    let o = sdql(&["bench", "SMVM", "--dims", "8,16", "--densities", "1,0.25", "--reps", "5", "--json"]);
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["optimized_samples"].as_array().unwrap().len() == 5));
}

#[test]
fn matrix_market_input_drives_a_run() {
    // The gradient of sum(A * X) with respect to X holds the column sums of A.
    let o = sdql(&["grad", "SMVM", "--matrix", &format!("A={}", fixture("general_4x4.mtx")), "--run", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["value"], serde_json::json!({"0": 3.75, "1": 0.5, "2": -1.0, "3": 7.0}));
    let o = sdql(&["verify", "SMVM", "--matrix", &format!("A={}", fixture("symmetric_3x3.mtx"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
