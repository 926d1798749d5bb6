//! End-to-end tests for the `profinite` binary.
//!
//! Every test spawns the compiled binary as a subprocess and checks the
//! observable contract: exit codes, JSON output shape, and byte-level
//! determinism of reports. Module files are written into a fresh temp
//! directory per test.

use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_profinite");

/// Run the binary with the given arguments and no cache environment leaking in.
fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("PROFINITE_CACHE")
        .output()
        .expect("binary should spawn")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_str(&stdout_str(out)).expect("stdout should be valid JSON")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

fn write_file(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).expect("write module file");
    path.to_string_lossy().into_owned()
}

const LAURENT_X_MINUS_2: &str =
    r#"{"ring":"LZ","gens":1,"rel":[[{"x":1,"c":1},{"x":0,"c":-2}]]}"#;
const Z_MOD_2: &str = r#"{"ring":"ZZ","gens":1,"rel":[[2]]}"#;
const Z_MOD_3: &str = r#"{"ring":"ZZ","gens":1,"rel":[[3]]}"#;
const FREE_RANK_2_QO5: &str =
    r#"{"ring":"QO(-5)","steinitz":{"torsion":[],"rank":2,"ideal":{"gen":1}}}"#;

#[test]
fn fingerprint_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "m.json", LAURENT_X_MINUS_2);

    let first = run(&["fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&first), 0, "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let report = stdout_json(&first);
    assert_eq!(report["count"], 5);
    assert_eq!(report["bound"], 10);
    assert_eq!(report["ring"], "LZ");
    let classes = report["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 5);
    // Classes are emitted sorted; the trivial quotient is always present.
    assert_eq!(classes[0], "()");

    // Byte-for-byte determinism across invocations.
    let second = run(&["fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn compare_distinguishes_and_reports_witness() {
    let dir = TempDir::new().unwrap();
    let a = write_file(&dir, "a.json", Z_MOD_2);
    let b = write_file(&dir, "b.json", Z_MOD_3);

    let out = run(&["compare", &a, &b, "--bound", "32"]);
    assert_eq!(exit_code(&out), 1, "distinguished modules exit with 1");
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "distinguished");
    assert_eq!(report["witness"], "(3)");
    assert_eq!(report["witness_in_first"], false);

    // A module compared with itself is indistinguishable: exit 0.
    let out = run(&["compare", &a, &a, "--bound", "32"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "indistinguishable-up-to");
    assert_eq!(report["bound"], 32);
}

#[test]
fn compare_rejects_mixed_rings() {
    let dir = TempDir::new().unwrap();
    let a = write_file(&dir, "a.json", Z_MOD_2);
    let b = write_file(&dir, "b.json", LAURENT_X_MINUS_2);
    let out = run(&["compare", &a, &b]);
    assert_eq!(exit_code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn bs_scan_matches_expected_survivors() {
    let out = run(&[
        "bs-scan",
        "--n",
        "2",
        "--height",
        "10",
        "--prime-bound",
        "2000",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["match"], true);
    assert_eq!(report["survivors"], serde_json::json!([[1, 2], [2, 1]]));
    assert_eq!(report["extra"], serde_json::json!([]));
    assert_eq!(report["missing"], serde_json::json!([]));
}

#[test]
fn genus_reports_class_group_candidates() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "free2.json", FREE_RANK_2_QO5);
    let out = run(&["genus", &file, "--bound", "25"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["class_number"], 2);
    assert_eq!(report["discriminant"], -20);
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for entry in entries {
        assert_eq!(entry["indistinguishable"], true);
    }
    // A presentation-style file has no Steinitz data; genus must refuse it.
    let pres = write_file(&dir, "pres.json", Z_MOD_2);
    let out = run(&["genus", &pres]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn invariants_reports_annihilator_and_mu() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "m.json", r#"{"ring":"ZZ","gens":2,"rel":[[6,0],[0,4]]}"#);
    let out = run(&["invariants", &file, "--norm-bound", "25"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["annihilator"]["ideal"], "(12)");
    let mu: Vec<(String, u64)> = report["mu_table"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            (
                row["ideal"].as_str().unwrap().to_owned(),
                row["mu"].as_u64().unwrap(),
            )
        })
        .collect();
    assert!(mu.contains(&("(2)".to_owned(), 2)));
    assert!(mu.contains(&("(3)".to_owned(), 1)));
    assert!(mu.contains(&("(5)".to_owned(), 0)));
    assert_eq!(report["projectivity"]["status"], "not-projective");
}

#[test]
fn adic_crt_and_hensel() {
    let out = run(&["adic", "crt", "--ring", "ZZ", "--modulus", r#"{"gen":60}"#]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["verified"], true);
    let orders: Vec<&str> = report["factors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["order"].as_str().unwrap())
        .collect();
    assert_eq!(orders, vec!["4", "3", "5"]);

    let out = run(&[
        "adic", "hensel", "--ring", "ZZ", "--ideal", r#"{"gen":3}"#, "--level", "4", "--elem", "2",
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["inverse"], "41");

    // Non-invertible element: 3 lies in the ideal (3), so inversion must fail.
    let out = run(&[
        "adic", "hensel", "--ring", "ZZ", "--ideal", r#"{"gen":3}"#, "--level", "4", "--elem", "3",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn adic_truncate_reports_finite_quotient() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "m.json", LAURENT_X_MINUS_2);
    let ideal = r#"{"p":3,"f":[{"x":0,"c":1},{"x":1,"c":1}]}"#;
    let out = run(&["adic", "truncate", &file, "--ideal", ideal, "--level", "2"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["level"], 2);
    assert_eq!(report["ideal"], "(3, x+1)");
    assert_eq!(report["order"], "9");

    // The unit "ideal" (p, 1) is rejected: the generator must define a
    // genuine maximal ideal.
    let out = run(&[
        "adic", "truncate", &file, "--ideal", r#"{"p":3,"f":[{"x":0,"c":1}]}"#, "--level", "2",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn cache_is_transparent_and_persistent() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "m.json", LAURENT_X_MINUS_2);
    let cache_path = dir.path().join("cache.json");
    let cache_arg = cache_path.to_string_lossy().into_owned();

    let uncached = run(&["fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&uncached), 0);

    // Cold cache: report must be byte-identical to the uncached run.
    let cold = run(&["--cache", &cache_arg, "fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&cold), 0);
    assert_eq!(uncached.stdout, cold.stdout);
    assert!(cache_path.exists(), "cache file should be created");

    // Warm cache: still byte-identical.
    let warm = run(&["--cache", &cache_arg, "fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&warm), 0);
    assert_eq!(uncached.stdout, warm.stdout);

    // The cache file itself must hold the computed classes.
    let cache_data: Value =
        serde_json::from_str(&std::fs::read_to_string(&cache_path).unwrap()).unwrap();
    assert_eq!(cache_data["version"], 1);
    let entries = cache_data["entries"].as_object().unwrap();
    assert_eq!(entries.len(), 1);

    // Same path via environment variable instead of the flag.
    let env_cache = dir.path().join("env_cache.json");
    let out = Command::new(BIN)
        .args(["fingerprint", &file, "--bound", "10"])
        .env("PROFINITE_CACHE", &env_cache)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, uncached.stdout);
    assert!(env_cache.exists(), "env-var cache file should be created");

    // A corrupt cache must be ignored, not fatal.
    std::fs::write(&cache_path, "not json at all").unwrap();
    let recovered = run(&["--cache", &cache_arg, "fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&recovered), 0);
    assert_eq!(uncached.stdout, recovered.stdout);
}

#[test]
fn error_paths_exit_2() {
    let dir = TempDir::new().unwrap();

    // Missing file.
    let missing = dir.path().join("nope.json");
    let out = run(&["fingerprint", missing.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(!out.stderr.is_empty());

    // Malformed JSON.
    let bad = write_file(&dir, "bad.json", "{ this is not json");
    let out = run(&["fingerprint", &bad]);
    assert_eq!(exit_code(&out), 2);

    // Schema violation: unknown top-level key.
    let unknown = write_file(&dir, "unk.json", r#"{"ring":"ZZ","gens":1,"bogus":3}"#);
    let out = run(&["fingerprint", &unknown]);
    assert_eq!(exit_code(&out), 2);

    // Unknown flag is a usage error.
    let out = run(&["fingerprint", "--no-such-flag"]);
    assert_eq!(exit_code(&out), 2);

    // bs-scan rejects |n| <= 1.
    let out = run(&["bs-scan", "--n", "1", "--height", "5", "--prime-bound", "100"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn text_format_renders_without_json() {
    let dir = TempDir::new().unwrap();
    let file = write_file(&dir, "m.json", Z_MOD_2);
    let out = run(&["--format", "text", "fingerprint", &file, "--bound", "10"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    assert!(!text.trim_start().starts_with('{'), "text mode should not emit JSON");
    assert!(text.contains("classes"));
}

#[test]
fn localized_ring_round_trip() {
    let dir = TempDir::new().unwrap();
    // Over Z[1/2] the 2-part is invisible: Z/8 becomes the zero module.
    let file = write_file(&dir, "m.json", r#"{"ring":"ZZ[1/2]","gens":1,"rel":[[8]]}"#);
    let out = run(&["fingerprint", &file, "--bound", "20"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["ring"], "ZZ[1/2]");
    assert_eq!(report["count"], 1, "only the trivial quotient survives localization");
}
