//! End-to-end checks of the installed binary: exit codes, determinism, file
//! artifacts, and the JSON shapes downstream tooling depends on.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac-dp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write_file(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.display().to_string()
}

const NON_PRESERVING_DOC: &str = r#"{
  "alphabets": { "bit": { "size": 2 }, "unit": { "size": 1 } },
  "dists": {
    "state": { "alphabet": ["unit", "bit"], "probs": [0.75, 0.25] }
  },
  "kernels": {
    "input_prior": { "from": "unit", "to": "bit", "rows": [[0.25, 0.75]] },
    "identity_input": { "from": ["bit", "unit"], "to": "bit", "rows": [[1, 0], [0, 1]] },
    "multiplicative_feedback": {
      "from": ["bit", "bit"],
      "to": ["bit", "bit"],
      "rows": [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1]]
    },
    "threshold_estimator": {
      "from": ["bit", "unit", "bit"],
      "to": "bit",
      "rows": [[1, 0], [1, 0], [1, 0], [0, 1]]
    }
  },
  "system": {
    "state_joint": "state",
    "u_given_se": "input_prior",
    "x_given_use": "identity_input",
    "channel": "multiplicative_feedback",
    "estimator": "threshold_estimator",
    "distortion": "hamming"
  }
}"#;

#[test]
fn binary_example_reports_preservation_and_a_positive_rate() {
    let out = run(&["binary-example"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["membership"]["in_p"], true);
    assert!(v["theorem_1"]["r_bits"].as_f64().unwrap() > 0.0);
    let sha = v["provenance"]["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let first = run(&["--seed", "9", "binary-example"]);
    let second = run(&["--seed", "9", "binary-example"]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn region_exits_one_when_the_system_is_not_preserving() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_file(dir.path(), "threshold.json", NON_PRESERVING_DOC);
    let out = run(&["region", &doc]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["membership"]["in_p"], false);
    assert_eq!(v["points"]["theorem_1"]["feasible"], false);
}

#[test]
fn malformed_documents_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_file(dir.path(), "broken.json", "{ not json");
    let out = run(&["region", &doc]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn validate_only_lists_diagnostics_for_a_bad_kernel() {
    let bad = NON_PRESERVING_DOC.replace("[[0.25, 0.75]]", "[[0.25, 0.80]]");
    let dir = tempfile::tempdir().unwrap();
    let doc = write_file(dir.path(), "denormalized.json", &bad);
    let out = run(&["region", &doc, "--validate-only"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("input_prior"),
        "diagnostics should name the offending kernel: {text}"
    );
}

#[test]
fn out_flag_writes_the_report_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = bin()
        .args(["binary-example", "--out"])
        .arg(&target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(
        out.stdout.is_empty(),
        "writing to a file should keep stdout quiet"
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["membership"]["in_p"], true);
}

#[test]
fn transport_moves_the_excess_bernoulli_mass() {
    let dir = tempfile::tempdir().unwrap();
    let source = write_file(
        dir.path(),
        "p.json",
        r#"{ "alphabets": { "bit": { "size": 2 } },
             "dists": { "p": { "alphabet": "bit", "probs": [0.7, 0.3] } } }"#,
    );
    let target = write_file(
        dir.path(),
        "q.json",
        r#"{ "alphabets": { "bit": { "size": 2 } },
             "dists": { "q": { "alphabet": "bit", "probs": [0.5, 0.5] } } }"#,
    );
    let cost = write_file(dir.path(), "cost.csv", "# hamming\n0,1\n1,0\n");
    let out = run(&["transport", &source, &target, "--cost", &cost]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert!((v["cost"].as_f64().unwrap() - 0.2).abs() <= 1e-12);
    assert_eq!(v["certified_optimal"], true);
    assert!(v["greedy_cost"].as_f64().unwrap() >= 0.2 - 1e-12);
}

#[test]
fn gaussian_rejects_unknown_override_keys() {
    let out = run(&["gaussian", "--set", "var_sigma_typo=1.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn simulate_csv_curve_lands_next_to_the_primary_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let doc = std::fs::canonicalize(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/binary_example.json"),
    )
    .unwrap();
    let primary = dir.path().join("sim.json");
    let out = bin()
        .args(["simulate"])
        .arg(&doc)
        .args(["--ns", "2,3", "--out"])
        .arg(&primary)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&primary).unwrap()).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    let curve = dir.path().join("sim.curve.csv");
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(
        text.lines().any(|l| l.starts_with("n,")),
        "curve header missing: {text}"
    );
}
