use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exea_core::eval::FidelityConfig;
use exea_core::{AdgConfig, RepairConfig, SynthConfig, TrainConfig};

fn exea() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_exea"));
    c.env_remove("EXEA_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    exea().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let d = dir.join("data");
    let mut args = vec!["synth", "--out", s(&d), "--n-entities", "80"];
    args.extend_from_slice(extra);
    ok(&args);
    d
}

/// `--flag` to the text of its `[default: ...]`, for every option in help.
fn help_defaults(sub: &str) -> BTreeMap<String, String> {
    let out = run(&[sub, "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // Long help lines may wrap the description onto the next line.
    let mut joined = String::new();
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with("--") || t.starts_with("-h,") {
            joined.push('\n');
        } else {
            joined.push(' ');
        }
        joined.push_str(t);
    }
    let mut map = BTreeMap::new();
    for line in joined.lines() {
        let Some(rest) = line.strip_prefix("--") else { continue };
        let flag = rest.split_whitespace().next().unwrap().to_string();
        if flag == "config" || flag == "help" {
            continue;
        }
        let default = line
            .split("[default: ")
            .nth(1)
            .and_then(|d| d.split(']').next())
            .unwrap_or_else(|| panic!("{sub} --{flag} lists no default"));
        map.insert(flag, default.to_string());
    }
    map
}

fn code_defaults() -> BTreeMap<&'static str, String> {
    let r = RepairConfig::default();
    let a = AdgConfig::default();
    let t = TrainConfig::default();
    let y = SynthConfig::default();
    let f = FidelityConfig::default();
    let g = |x: f64| format!("{x}");
    BTreeMap::from([
        ("out", "out".to_string()),
        ("workers", "0".into()),
        ("data", ".".into()),
        ("embeddings", "<data>/emb.tsv".into()),
        ("predictions", "<data>/pred.tsv".into()),
        ("h", r.h.to_string()),
        ("path-mode", "unsigned".into()),
        ("alpha", g(a.alpha)),
        ("weak-weight", g(a.weak_weight)),
        ("theta", g(a.theta)),
        ("gamma", g(a.gamma)),
        ("k", r.k.to_string()),
        ("beta", "sigmoid(theta)".into()),
        ("lambda", g(r.lambda)),
        ("triple-budget", r.triple_budget.to_string()),
        ("candidate-cap", r.candidate_cap.to_string()),
        ("relation-source", "model".into()),
        ("relation-stage", r.stages.relation.to_string()),
        ("one-to-many-stage", r.stages.one_to_many.to_string()),
        ("low-confidence-stage", r.stages.low_confidence.to_string()),
        ("dim", t.dim.to_string()),
        ("epochs", t.epochs.to_string()),
        ("learning-rate", g(t.learning_rate)),
        ("negatives", t.negatives_per_positive.to_string()),
        ("margin", g(t.margin)),
        ("train-seed", t.seed.to_string()),
        ("mode", "accuracy".into()),
        ("sample-n", f.sample_n.to_string()),
        ("sample-seed", f.sample_seed.to_string()),
        ("random-seed", f.random_seed.to_string()),
        ("candidate-hops", f.h.to_string()),
        ("csv", "false".into()),
        ("retrain-command", "none".into()),
        ("fixture", "none".into()),
        ("n-entities", y.n_entities.to_string()),
        ("n-relations", y.n_relations.to_string()),
        ("density", g(y.density)),
        ("rename-noise", g(y.rename_noise)),
        ("seed-fraction", g(y.seed_fraction)),
        ("embedding-noise", g(y.embedding_noise)),
        ("conflict-injection", g(y.conflict_injection)),
        ("rng-seed", y.rng_seed.to_string()),
    ])
}

const SUBCOMMANDS: [&str; 7] = ["train", "infer", "explain", "adg", "repair", "eval", "synth"];

#[test]
fn help_lists_every_key_with_the_code_default() {
    let code = code_defaults();
    assert_eq!(AdgConfig::default().theta, 0.5);
    assert!(RepairConfig::default().beta.is_none());
    assert_eq!(SynthConfig::default().dim, TrainConfig::default().dim);
    let mut seen = std::collections::BTreeSet::new();
    for sub in SUBCOMMANDS {
        for (flag, default) in help_defaults(sub) {
            let want = code.get(flag.as_str()).unwrap_or_else(|| panic!("{sub} --{flag} has no known default"));
            assert_eq!(&default, want, "{sub} --{flag}");
            seen.insert(flag);
        }
    }
    let all: std::collections::BTreeSet<String> = code.keys().map(|k| k.to_string()).collect();
    assert_eq!(seen, all);
}

#[test]
fn governor_fixture_repairs_with_the_worked_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("governor");
    let out = dir.path().join("out");
    ok(&["synth", "--fixture", "governor", "--out", s(&data)]);
    ok(&["repair", "--data", s(&data), "--out", s(&out)]);
    let a_star = fs::read_to_string(out.join("a_star.tsv")).unwrap();
    assert_eq!(a_star.lines().count(), 1);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let pair = &report["pairs"][0];
    assert_eq!(pair["source_label"], "加文·纽森");
    assert_eq!(pair["target_label"], "Gavin Newsom");
    let c = pair["confidence_after"].as_f64().unwrap();
    assert!((c - 0.808).abs() < 1e-3, "{c}");
}

#[test]
fn missing_embedding_file_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let missing = dir.path().join("no-such-emb.tsv");
    let out = dir.path().join("out");
    let r = run(&["repair", "--data", s(&data), "--embeddings", s(&missing), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no-such-emb.tsv"));
    assert!(!out.exists(), "no partial output on failure");
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let out = dir.path().join("out");
    let bad_h = run(&["repair", "--data", s(&data), "--h", "3", "--out", s(&out)]);
    assert_eq!(bad_h.status.code(), Some(1));
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"hops": 2}"#).unwrap();
    let unknown = run(&["repair", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("hops"));
    assert_eq!(run(&["repair", "--no-such-flag"]).status.code(), Some(1));
    let degenerate = run(&["synth", "--n-entities", "2", "--out", s(&out)]);
    assert_eq!(degenerate.status.code(), Some(1));
    let workers = exea().env("EXEA_WORKERS", "many").args(["synth", "--out", s(&out)]).output().unwrap();
    assert_eq!(workers.status.code(), Some(1));
    assert!(!out.exists());
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"k": 3, "h": 1, "triple-budget": 50, "one_to_many_stage": false}"#).unwrap();
    let out = dir.path().join("out");
    ok(&["repair", "--config", s(&cfg), "--data", s(&data), "--h", "2", "--out", s(&out)]);
    let m = manifest(&out);
    assert_eq!(m["config"]["h"], 2);
    assert_eq!(m["config"]["k"], 3);
    assert_eq!(m["config"]["triple_budget"], 50);
    assert_eq!(m["config"]["stages"]["cr2"], false);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--conflict-injection", "0.2"]);
    let mut hashes = Vec::new();
    for w in ["1", "4"] {
        let out = dir.path().join(format!("out{w}"));
        let r = exea().env("EXEA_WORKERS", w).args(["repair", "--data", s(&data), "--out", s(&out)]).output().unwrap();
        assert!(r.status.success());
        hashes.push(manifest(&out)["outputs"].clone());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn every_subcommand_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--conflict-injection", "0.1"]);
    let d = s(&data);
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--data", d, "--epochs", "20"],
        vec!["infer", "--data", d],
        vec!["explain", "--data", d],
        vec!["adg", "--data", d],
        vec!["repair", "--data", d],
        vec!["eval", "--data", d, "--mode", "ablation", "--csv", "true"],
        vec!["eval", "--data", d, "--mode", "fidelity", "--sample-n", "20", "--epochs", "30"],
        vec!["synth", "--n-entities", "50"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("o{i}-{rep}"));
            let mut a = args.clone();
            a.extend(["--out", s(&out)]);
            ok(&a);
            runs.push(manifest(&out));
        }
        assert_eq!(runs[0], runs[1], "{args:?}");
    }
}

#[test]
fn external_retrain_command_matches_the_bundled_trainer() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let script = dir.path().join("retrain.sh");
    fs::write(&script, format!("#!/bin/sh\nexec '{}' train --epochs 30 --data \"$1\" --out \"$1\"\n", env!("CARGO_BIN_EXE_exea")))
        .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
    }
    let common = ["eval", "--data", s(&data), "--mode", "fidelity", "--sample-n", "20", "--epochs", "30"];
    let bundled = dir.path().join("bundled");
    let external = dir.path().join("external");
    ok(&[&common[..], &["--out", s(&bundled)]].concat());
    ok(&[&common[..], &["--out", s(&external), "--retrain-command", s(&script)]].concat());
    let read = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(p.join("eval_report.json")).unwrap()).unwrap()
    };
    let (b, e) = (read(&bundled), read(&external));
    assert_eq!(b["fidelity"], e["fidelity"]);
    assert_eq!(b["random_fidelity"], e["random_fidelity"]);

    let failing = run(&[&common[..], &["--out", s(&dir.path().join("x")), "--retrain-command", "false"]].concat());
    assert_eq!(failing.status.code(), Some(2));
}
