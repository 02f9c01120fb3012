use std::path::{Path, PathBuf};
use std::process::Command;

use qhist::cli::{self, sig12, GlobalOpts, EXIT_INCONSISTENT, EXIT_INPUT, EXIT_OK, EXIT_ORACLE, EXIT_REFUSED};
use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qhist(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qhist"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn on(cmd: &str, file: &str, rest: &[&str]) -> Run {
    let path = example(file);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(rest);
    qhist(&args)
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qhist-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn shipped() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(example(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    assert!(files.len() >= 6);
    files
}

#[test]
fn validate_accepts_the_gallery() {
    for f in shipped() {
        let r = qhist(&["validate", f.to_str().unwrap()]);
        assert_eq!(r.code, EXIT_OK, "{}: {}", f.display(), r.stderr);
    }
}

#[test]
fn validate_reports_path_qualified_errors() {
    let text = std::fs::read_to_string(example("repeated_x.json")).unwrap();
    let bad = text.replacen("\"subsystem_dims\": [2]", "\"subsystem_dims\": [3]", 1);
    let path = scratch("dim_mismatch.json", &bad);
    let r = qhist(&["validate", path.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(
        r.stderr.contains("$.initial_state") || r.stderr.contains("$.observers[0]"),
        "{}",
        r.stderr
    );

    let bad = text.replacen("\"sigma_x\"", "\"sigma_w\"", 1);
    let path = scratch("bad_operator.json", &bad);
    let r = qhist(&["validate", path.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(
        r.stderr.contains("$.observers[0].measurements[0].observable"),
        "{}",
        r.stderr
    );

    let r = qhist(&["validate", "/no/such/file.json"]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("cannot read file"), "{}", r.stderr);

    let path = scratch("truncated.json", "{\"format\": 1,");
    assert_eq!(qhist(&["validate", path.to_str().unwrap()]).code, EXIT_INPUT);
}

#[test]
fn analyze_repeated_x_is_consistent() {
    let r = on("analyze", "repeated_x.json", &[]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("consistent"));
    let halves = r.stdout.lines().filter(|l| l.trim_end().ends_with(" 0.5")).count();
    assert_eq!(halves, 2, "{}", r.stdout);
}

#[test]
fn analyze_zxz_is_inconsistent() {
    let r = on("analyze", "zxz_inconsistent.json", &[]);
    assert_eq!(r.code, EXIT_INCONSISTENT);
    assert!(
        r.stdout.contains("INCONSISTENT: max |off-diagonal| 0.25"),
        "{}",
        r.stdout
    );
}

#[test]
fn analyze_json_mirrors_text() {
    for file in ["zxz_inconsistent.json", "stable_facts.json", "measurement_fam1.json"] {
        let text = on("analyze", file, &[]);
        let json = on("analyze", file, &["--json"]);
        assert_eq!(text.code, json.code);
        let v: Value = serde_json::from_str(&json.stdout).unwrap();
        assert_eq!(v["format_version"], 1);
        for fam in v["families"].as_array().unwrap() {
            assert!(text
                .stdout
                .contains(&format!("observer {}", fam["observer"].as_str().unwrap())));
            assert!(text.stdout.contains(&sig12(fam["max_offdiag"].as_f64().unwrap())));
            for h in fam["histories"].as_array().unwrap() {
                let line = h["label"].as_str().unwrap().to_string();
                let p = sig12(h["probability"].as_f64().unwrap());
                assert!(
                    text.stdout
                        .lines()
                        .any(|l| l.trim_start().starts_with(&line) && l.trim_end().ends_with(&p)),
                    "{line} {p} missing from\n{}",
                    text.stdout
                );
            }
        }
    }
}

#[test]
fn analyze_observer_filter() {
    let r = on("analyze", "stable_facts.json", &["--observer", "O2", "--json"]);
    assert_eq!(r.code, EXIT_OK);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["families"].as_array().unwrap().len(), 1);
    assert_eq!(v["families"][0]["observer"], "O2");
    assert_eq!(
        on("analyze", "stable_facts.json", &["--observer", "O9"]).code,
        EXIT_INPUT
    );
}

#[test]
fn json_output_is_deterministic() {
    for cmd in ["analyze", "classify", "verify"] {
        let a = on(cmd, "three_observers.json", &["--json"]);
        let b = on(cmd, "three_observers.json", &["--json"]);
        assert_eq!(a.stdout, b.stdout);
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn classify_verdicts() {
    let r = on("classify", "stable_facts.json", &[]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("O1 vs O2: Stable"), "{}", r.stdout);

    let r = on("classify", "relative_facts.json", &["--json"]);
    assert_eq!(r.code, EXIT_OK);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    let pair = &v["pairs"][0];
    assert_eq!(pair["verdict"], "Relative");
    assert_eq!(pair["failing"]["condition"], "commutation");
    assert_eq!(pair["failing"]["time"], "t1");
    assert!((pair["commutation"][0]["max_residual"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert!(pair["product"].is_null());

    let r = on("classify", "stable_facts.json", &["--pair", "O1", "O1"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("O1 vs O1: Stable"));

    let r = on("classify", "three_observers.json", &["--all-pairs", "--json"]);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
    assert_eq!(v["joint"]["verdict"], "Relative");

    assert_eq!(on("classify", "repeated_x.json", &[]).code, EXIT_INPUT);
    assert_eq!(
        on("classify", "stable_facts.json", &["--pair", "O1", "Q"]).code,
        EXIT_INPUT
    );
}

#[test]
fn conditional_measurement_record() {
    let p = |given: &str| {
        let r = on(
            "conditional",
            "measurement_fam1.json",
            &["--family", "fam1", "--event", "t1:s1", "--given", given, "--json"],
        );
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        let v: Value = serde_json::from_str(&r.stdout).unwrap();
        v["probability"].as_f64().unwrap()
    };
    assert!((p("t2:M1") - 1.0).abs() <= 1e-9);
    assert!(p("t2:M2").abs() <= 1e-9);

    for given in ["t2:M1", "t2:M2", "t2:rest"] {
        let r = on(
            "conditional",
            "measurement_fam2.json",
            &["--family", "fam2", "--event", "t1:s1", "--given", given],
        );
        assert_eq!(r.code, EXIT_REFUSED, "{}", r.stderr);
        assert!(r.stderr.contains("says nothing"), "{}", r.stderr);
    }
}

#[test]
fn conditional_refusals_and_zero_conditions() {
    let r = on(
        "conditional",
        "zxz_inconsistent.json",
        &["--family", "O", "--event", "t1:+1", "--given", "t2:+1"],
    );
    assert_eq!(r.code, EXIT_REFUSED);
    assert!(r.stderr.contains("single consistent framework"), "{}", r.stderr);

    let r = on(
        "conditional",
        "relative_facts.json",
        &["--family", "combined", "--event", "t1:+1"],
    );
    assert_eq!(r.code, EXIT_REFUSED);

    let r = on(
        "conditional",
        "measurement_fam1.json",
        &["--family", "fam1", "--event", "t1:s1", "--given", "t2:rest"],
    );
    assert_eq!(r.code, EXIT_INCONSISTENT);
    assert!(r.stderr.contains("probability"), "{}", r.stderr);

    let r = on(
        "conditional",
        "stable_facts.json",
        &["--family", "combined", "--event", "t1:+1∧+1"],
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("= 0.5"), "{}", r.stdout);

    assert_eq!(
        on("conditional", "stable_facts.json", &["--family", "O1", "--event", "t1"]).code,
        EXIT_INPUT
    );
    assert_eq!(
        on(
            "conditional",
            "stable_facts.json",
            &["--family", "nobody", "--event", "t1:+1"]
        )
        .code,
        EXIT_INPUT
    );
}

#[test]
fn verify_passes_on_every_shipped_example() {
    for f in shipped() {
        let r = qhist(&["verify", f.to_str().unwrap()]);
        assert_eq!(r.code, EXIT_OK, "{}: {}{}", f.display(), r.stdout, r.stderr);
        assert!(r.stdout.contains("verify: ok"));
    }
}

#[test]
fn verify_reports_injected_faults() {
    let path = example("zxz_inconsistent.json");
    let outcome = cli::cmd_verify_with(&path, &GlobalOpts::default(), |f, h| {
        let p = f.history_probability(h)?;
        Ok::<f64, qhist::histories::HistoryError>(if h.label() == "-1,+1" { p + 1e-6 } else { p })
    });
    assert_eq!(outcome.code, EXIT_ORACLE);
    assert!(outcome.stderr.contains("at history -1,+1"), "{}", outcome.stderr);
    assert!(outcome.stdout.contains("FAILED"));

    let clean = cli::cmd_verify_with(&path, &GlobalOpts::default(), |f, h| f.history_probability(h));
    assert_eq!(clean.code, EXIT_OK);
}

#[test]
fn verify_rejects_scenarios_without_observers() {
    let text = std::fs::read_to_string(example("repeated_x.json")).unwrap();
    let start = text.find("\"observers\"").unwrap();
    let empty = format!("{}\"observers\": []\n}}\n", &text[..start]);
    let path = scratch("no_observers.json", &empty);
    assert_eq!(qhist(&["validate", path.to_str().unwrap()]).code, EXIT_OK);
    let r = qhist(&["verify", path.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("no observers"));
}

#[test]
fn global_flags() {
    let r = on("analyze", "zxz_inconsistent.json", &["--tolerance", "0.5"]);
    assert_eq!(r.code, EXIT_INPUT, "{}", r.stderr);
    let r = on("analyze", "repeated_x.json", &["--tolerance", "1e-6", "--json"]);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["tolerance"]["eps_cons"], 1e-6);
    let r = on("analyze", "stable_facts.json", &["--max-histories", "2"]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(qhist(&["--version"]).stdout.starts_with("qhist"));
    assert_eq!(qhist(&["bogus"]).code, EXIT_INPUT);
}
