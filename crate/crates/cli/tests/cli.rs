use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mp-lab"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(scenario: &Path, out: &Path) -> Output {
    bin().arg("run").arg(scenario).arg("--out").arg(out).output().expect("spawn mp-lab")
}

#[test]
fn list_presets_names_every_preset() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["c1_degenerate", "quadratic_growth", "linear_mixed", "bellman_isaacs_demo"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn passing_scenario_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenarios().join("abp_linear_mixed.toml"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.txt", "report.json", "run.log"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["exit_code"], 0);
    assert!(std::fs::read_dir(dir.path()).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().starts_with("field_")));
}

#[test]
fn counterexample_exits_two_and_names_the_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenarios().join("c1_counterexample.toml"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("failed hypothesis"), "{stdout}");
}

#[test]
fn extension_may_be_omitted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenarios().join("abp_linear_mixed"), dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("narrow_strip.toml");
    assert_eq!(run(&scenario, a.path()).status.code(), Some(0));
    assert_eq!(run(&scenario, b.path()).status.code(), Some(0));
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "run.log" {
            continue;
        }
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "name = \"bad\"\ntheorems = [\"MP\"]\ncolour = 3\n[operator]\npreset = \"linear_mixed\"\n").unwrap();
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("nope.toml"), &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_monotone_operator_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cross.toml");
    std::fs::write(
        &cfg,
        r#"name = "cross"
theorems = ["MP"]

[operator.linear]
a = [["1", "0.9"], ["0.9", "0.85"]]
b = ["0", "0"]
c = "0"

[domain]
dim = 2
dirs = [[1.0, 0.0]]
offsets = [0.0]
widths = [1.0]

[grid]
h = 0.25
r = 1.0
"#,
    )
    .unwrap();
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("monotone"));
}
