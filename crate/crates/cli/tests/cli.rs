use std::path::Path;
use std::process::{Command, Output};

fn w1mix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_w1mix"))
        .args(args)
        .output()
        .expect("spawn w1mix")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn experiment_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cvar.json");
    write(
        &cfg,
        r#"{"experiment":"cvar","model":"ar1","n":[500,2000],"replicates":4,"seed":2,
            "u":0.1,"kappa_draws":200,"grid_points":64,"kernel_n":2000}"#,
    );
    let out = dir.path().join("out");
    let o = w1mix(&[
        "experiment",
        "cvar",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,model,config_hash,seed,replicate,n,statistic,running_max,exact,error,w1_bound,envelope"
    );
    assert_eq!(lines.count(), 8);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "cvar");
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 12);
}

#[test]
fn refusal_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pareto.json");
    write(
        &cfg,
        r#"{"experiment":"clt","n":100,"model":{"name":"pareto","params":{"family":"iid",
            "marginal":{"family":"pareto","scale":1,"shape":1.5}}}}"#,
    );
    let o = w1mix(&["experiment", "clt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
}

#[test]
fn invalid_config_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"experiment":"clt","model":"iid-uniform","n":1}"#);
    let o = w1mix(&["experiment", "clt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn functionals_reports_v_as_json() {
    let o = w1mix(&["functionals", "--model", "sticky-markov"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mixing_condition"]["verdict"], "holds");
    assert!(v["V"].as_f64().unwrap() > 0.0);
}

#[test]
fn cvar_from_csv_matches_plug_in_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    write(&input, "loss\n3\n-1\n2\n0\n");
    let o = w1mix(&["cvar", "--u", "0.5", "--input-csv", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // Lower half of {-1, 0, 2, 3} averages to -0.5.
    assert_eq!(v["estimate"].as_f64().unwrap(), 0.5);
    assert_eq!(v["n"], 4);
    assert!(v.get("exact").is_none());
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = w1mix(&[
            "simulate",
            "--model",
            "iid-uniform",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_ne!(a, run("2", "c"));
}
