use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_replisel"));
    c.env_remove("REPLISEL_OUT").arg("--quiet");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Small, fast settings shared by the end-to-end runs.
const SMALL: [&str; 12] = [
    "--set",
    "data.n_source=150",
    "--set",
    "data.n_target=120",
    "--set",
    "data.n_eval=150",
    "--set",
    "hyper_source.epochs=2",
    "--set",
    "hyper_target.epochs=3",
    "--seed-list",
    "1,2,3",
];

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn study_json(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("study.json")).unwrap()).unwrap()
}

#[test]
fn bound_with_zero_sensitivity_prints_zero() {
    let out = run(bin().args(["bound", "--epsilon", "0.01", "--n", "6000", "--c", "1", "--delta-q", "0"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("bound 0"));
}

#[test]
fn bound_prints_strategy_and_sample_size() {
    let out = run(bin().args([
        "bound",
        "--epsilon",
        "0.01",
        "--n",
        "1000",
        "--c",
        "1",
        "--delta-q",
        "0.625",
        "--strategy",
        "importance_weighting",
        "--rho",
        "0.05",
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("required_n 28820"), "{text}");
    assert!(text.contains("strategy_bound 1"), "{text}");
}

#[test]
fn missing_config_fails_with_file_message() {
    let out = bin().args(["study", "--config", "missing.toml"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("missing.toml") && err.contains("No such file"), "{err}");
}

#[test]
fn unknown_subcommand_fails() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn validation_reports_every_field() {
    let out = bin()
        .args(["study", "--set", "epsilon=0", "--set", "hyper_target.epochs=0", "--seed-list", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    for field in ["epsilon", "hyper_target.epochs", "seeds"] {
        assert!(err.contains(field), "missing {field}: {err}");
    }
}

#[test]
fn overrides_beat_file_values_beat_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "epsilon = 0.02\nhistogram_bin_width = 0.01\n[hyper_target]\nlr = 0.07\n").unwrap();
    let out = tmp.path().join("o");
    run(bin()
        .args(["study", "--config"])
        .arg(&cfg)
        .args(SMALL)
        .args(["--set", "epsilon=0.03", "--set", "sensitivity.enabled=false", "--out"])
        .arg(&out));
    let c = &study_json(&out)["config"];
    assert_eq!(c["epsilon"], 0.03);
    assert_eq!(c["histogram_bin_width"], 0.01);
    assert_eq!(c["hyper_target"]["lr"], 0.07);
    assert_eq!(c["hyper_target"]["batch_size"], 32);
    assert_eq!(c["seeds"], serde_json::json!([1, 2, 3]));
}

#[test]
fn embedded_config_reproduces_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(bin()
        .args(["study", "--config"])
        .arg(configs().join("study.toml"))
        .args(SMALL)
        .arg("--out")
        .arg(&a));
    run(bin().args(["study", "--config"]).arg(a.join("study.json")).arg("--out").arg(&b));
    assert_eq!(tree(&a), tree(&b));
    let runs = std::fs::read_to_string(a.join("runs.csv")).unwrap();
    assert!(runs.starts_with("seed,accuracy"));
    assert_eq!(runs.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(a.join("pairs.csv")).unwrap().lines().count(), 4);
}

#[test]
fn sweep_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run(bin()
            .args(["sweep", "--config"])
            .arg(configs().join("six_strategies.toml"))
            .args(SMALL)
            .arg("--out")
            .arg(dir));
    }
    let ta = tree(&a);
    assert_eq!(ta, tree(&b));
    let summary = String::from_utf8(ta[Path::new("summary.csv")].clone()).unwrap();
    assert_eq!(summary.lines().count(), 7);
    assert!(ta.contains_key(Path::new("05-gradient_based/dynamics.csv")));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    run(bin()
        .env("REPLISEL_OUT", tmp.path())
        .args(["study", "--set", "name=\"envtest\"", "--set", "sensitivity.enabled=false"])
        .args(SMALL));
    assert!(tmp.path().join("envtest/study.json").exists());
}

#[test]
fn generate_then_study_on_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run(bin().arg("generate").args(&SMALL[..6]).arg("--out").arg(&data));
    let cfg = tmp.path().join("csv.toml");
    let text = std::fs::read_to_string(configs().join("csv_study.toml"))
        .unwrap()
        .replace("runs/data", &data.display().to_string());
    std::fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("o");
    run(bin()
        .args(["study", "--config"])
        .arg(&cfg)
        .args(&SMALL[6..])
        .arg("--out")
        .arg(&out));
    assert_eq!(study_json(&out)["n_target"], 120);
}

#[test]
fn train_and_sensitivity_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = run(bin().arg("train").args(SMALL).args(["--seed", "9", "--out"]).arg(&out));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("target_accuracy"));
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["seed"], 9);
    let o = run(bin()
        .arg("sensitivity")
        .args(SMALL)
        .args(["--set", "strategy={kind=\"confidence_sampling\"}"]));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["delta_closed_form"], 5.0);
    assert!(report["estimate"]["delta_hat"].as_f64().unwrap() > 0.0);
}
