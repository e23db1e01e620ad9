use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn calib_lab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_calib-lab"));
    cmd.env_remove("CALIB_LAB_THREADS");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    calib_lab()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn schema_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/report.schema.json")
}

fn sidecar(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.hist.csv", out.display()))
}

const SMALL_ROBUST: &[&str] = &[
    "--vignette",
    "robust",
    "--n",
    "300",
    "--contam-range",
    "0,0.2",
];

#[test]
fn csv_report_has_fixed_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("robust.csv");
    let o = run(SMALL_ROBUST, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("vignette,param_name,param_value,mode,statistic,p_value,n,seed,wall_ms")
    );
    // two contamination levels, Bayes plus three fractional exponents each
    assert_eq!(lines.count(), 8);
    let hist = std::fs::read_to_string(sidecar(&out)).unwrap();
    assert!(hist.starts_with("row,bin_lo,bin_hi,count\n"));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 8);
}

#[test]
fn json_report_matches_shipped_schema() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path()).unwrap()).unwrap();
    assert!(jsonschema::meta::is_valid(&schema));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        SMALL_ROBUST,
        &[
            "--vignette",
            "gp-split",
            "--n",
            "100",
            "--split-sizes",
            "10",
        ],
        &[
            "--vignette",
            "laplace",
            "--n",
            "200",
            "--nu-range",
            "2,8",
            "--n-obs-range",
            "3",
        ],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = dir.path().join(format!("report-{i}.json"));
        let mut full = args.to_vec();
        full.extend(["--format", "json"]);
        let o = run(&full, &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let errors: Vec<String> = validator
            .iter_errors(&report)
            .map(|e| e.to_string())
            .collect();
        assert!(errors.is_empty(), "{errors:?}");
        assert!(!report.as_array().unwrap().is_empty());
    }
}

#[test]
fn schema_rejects_malformed_rows() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path()).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let good = serde_json::json!([{
        "vignette": "abc", "param_name": "epsilon", "param_value": 1.0, "mode": "weak:plain",
        "statistic": 0.01, "p_value": 0.5, "n": 100, "seed": 1, "wall_ms": 0
    }]);
    assert!(validator.is_valid(&good));
    let mut bad = good.clone();
    bad[0]["p_value"] = serde_json::json!(1.5);
    assert!(!validator.is_valid(&bad));
    let mut bad = good.clone();
    bad[0]["vignette"] = serde_json::json!("bogus");
    assert!(!validator.is_valid(&bad));
    let mut bad = good;
    bad[0].as_object_mut().unwrap().remove("seed");
    assert!(!validator.is_valid(&bad));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let cases: [&[&str]; 6] = [
        &["--vignette", "robust", "--n", "10"],
        &["--vignette", "fractional", "--n", "200", "--t-set", "0.5,2"],
        &["--vignette", "abc", "--n", "200", "--abc-budget", "0"],
        &["--vignette", "gp-split", "--split-sizes", "11"],
        &["--vignette", "nonsense"],
        &["--vignette", "laplace", "--nu-range", "5:1"],
    ];
    for args in cases {
        let o = run(args, &out);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.exists());
    }
}

#[test]
fn exhausted_simulation_budget_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abc.csv");
    let o = run(
        &[
            "--vignette",
            "abc",
            "--n",
            "100",
            "--n-strong",
            "100",
            "--eps-range",
            "0.05",
            "--abc-budget",
            "1",
        ],
        &out,
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn thread_count_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let by_flag = dir.path().join("flag.csv");
    let by_env = dir.path().join("env.csv");
    assert!(run(&[SMALL_ROBUST, &["--threads", "1"]].concat(), &by_flag)
        .status
        .success());
    let o = calib_lab()
        .env("CALIB_LAB_THREADS", "3")
        .args(SMALL_ROBUST)
        .arg("--out")
        .arg(&by_env)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(&by_flag).unwrap(),
        std::fs::read(&by_env).unwrap()
    );

    let o = calib_lab()
        .env("CALIB_LAB_THREADS", "many")
        .args(SMALL_ROBUST)
        .arg("--out")
        .arg(dir.path().join("bad.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_output_path_is_named_after_vignette() {
    let dir = tempfile::tempdir().unwrap();
    let o = calib_lab()
        .current_dir(dir.path())
        .args(SMALL_ROBUST)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("robust.json").exists());
    assert!(dir.path().join("robust.json.hist.csv").exists());
}

#[test]
fn timing_flag_fills_wall_clock_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let plain = run(SMALL_ROBUST, &out);
    assert!(plain.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
    assert!(run(&[SMALL_ROBUST, &["--timing"]].concat(), &out)
        .status
        .success());
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() == 9);
}
