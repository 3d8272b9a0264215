use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gmoe::csv_io::read_csv;
use gmoe::infer::parse_log;
use gmoe_core::model::DESK_ACTIONS;

fn gmoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmoe"))
        .args(args)
        .env_remove("GMOE_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gmoe(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "
[gmoe]
expert_hidden = 6
gate_hidden = 6

[baseline]
hidden = 8
layers = 2

[train]
max_epochs = 2
batch_size = 128
";

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(f.path("small.toml"), SMALL).unwrap();
        ok(&["gen-data", "--out", s(&f.path("data.csv")), "--duration", "40", "--seed", "3"]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, arch: &str, tag: &str, extra: &[&str]) -> serde_json::Value {
        let (ck, rep) = (self.path(&format!("{tag}.gmoe")), self.path(tag));
        let (data, ck, rep_s) = (s(&self.path("data.csv")).to_owned(), s(&ck).to_owned(), s(&rep).to_owned());
        let mut args = vec!["train", "--data", &data, "--arch", arch, "--out-checkpoint", &ck, "--report", &rep_s];
        args.extend_from_slice(extra);
        ok(&args);
        serde_json::from_str(&std::fs::read_to_string(rep.join("summary.json")).unwrap()).unwrap()
    }
}

#[test]
fn gen_data_counts_and_is_reproducible() {
    let f = Fixture::new();
    let out = ok(&["gen-data", "--out", s(&f.path("default.csv"))]);
    assert!(out.starts_with("wrote 12000 records"), "{out}");
    for name in DESK_ACTIONS {
        assert!(out.contains(name));
    }
    let out = ok(&["gen-data", "--out", s(&f.path("ten.csv")), "--duration", "10"]);
    assert!(out.starts_with("wrote 250 records"));
    ok(&["gen-data", "--out", s(&f.path("again.csv")), "--duration", "40", "--seed", "3"]);
    let a = std::fs::read(f.path("data.csv")).unwrap();
    assert_eq!(a, std::fs::read(f.path("again.csv")).unwrap());

    let env = Command::new(env!("CARGO_BIN_EXE_gmoe"))
        .args(["gen-data", "--out", s(&f.path("env.csv")), "--duration", "40"])
        .env("GMOE_SEED", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(a, std::fs::read(f.path("env.csv")).unwrap());
}

#[test]
fn train_writes_summary_and_reproduces_it() {
    let f = Fixture::new();
    let cfg = s(&f.path("small.toml")).to_owned();
    let a = f.train("gmoe", "a", &["--config", &cfg, "--seed", "4"]);
    let b = f.train("gmoe", "b", &["--config", &cfg, "--seed", "4"]);
    for key in ["loss", "accuracy", "mae"] {
        assert!(a["test"][key].is_f64(), "missing test.{key}");
    }
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    assert!(a["wall_time_s"].as_f64().unwrap() > 0.0);
    assert_eq!(strip(a.clone()), strip(b));
    let epochs = std::fs::read_to_string(f.path("a").join("epochs.jsonl")).unwrap();
    assert_eq!(epochs.lines().count() as u64, a["epochs_run"].as_u64().unwrap());
    assert_eq!(a["config"]["train"]["seed"], 4);
}

#[test]
fn baseline_is_larger_under_defaults() {
    let f = Fixture::new();
    let g = f.train("gmoe", "g", &["--epochs", "1"]);
    let b = f.train("baseline", "b", &["--epochs", "1"]);
    assert!(g["param_count"].as_u64().unwrap() < b["param_count"].as_u64().unwrap());
}

#[test]
fn invalid_configuration_lists_every_issue() {
    let f = Fixture::new();
    std::fs::write(f.path("bad.toml"), "[gmoe]\nexpert_hidden = 0\n[train]\nbatch_size = 0\npatience = 0\n").unwrap();
    let out = gmoe(&[
        "train", "--data", s(&f.path("data.csv")), "--config", s(&f.path("bad.toml")),
        "--out-checkpoint", s(&f.path("x.gmoe")), "--report", s(&f.path("x")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["expert_hidden", "batch_size", "patience"] {
        assert!(err.contains(needle), "{needle} missing from:\n{err}");
    }
    assert!(!f.path("x.gmoe").exists());
    let unknown = gmoe(&["train", "--data", s(&f.path("missing.csv")), "--out-checkpoint", "x", "--report", "y"]);
    assert!(!unknown.status.success());
}

#[test]
fn compare_reports_both_architectures() {
    let f = Fixture::new();
    let report = f.path("cmp.json");
    let text = ok(&[
        "compare", "--data", s(&f.path("data.csv")), "--seeds", "1,2", "--config", s(&f.path("small.toml")),
        "--report", s(&report),
    ]);
    assert!(text.contains("gmoe") && text.contains("baseline"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for arch in ["gmoe", "baseline"] {
        let losses: Vec<f64> = v["runs"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["arch"] == arch)
            .map(|r| r["test"]["loss"].as_f64().unwrap())
            .collect();
        assert_eq!(losses.len(), 2);
        let mean = (losses[0] + losses[1]) / 2.0;
        let std = ((losses[0] - mean).powi(2) / 2.0 + (losses[1] - mean).powi(2) / 2.0).sqrt();
        assert!((v[arch]["loss"]["mean"].as_f64().unwrap() - mean).abs() <= 1e-12 * mean.abs());
        assert!((v[arch]["loss"]["std"].as_f64().unwrap() - std).abs() <= 1e-12 * (1.0 + std));
    }

    let single = f.path("one.json");
    ok(&[
        "compare", "--data", s(&f.path("data.csv")), "--seeds", "5", "--config", s(&f.path("small.toml")),
        "--report", s(&single),
    ]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&single).unwrap()).unwrap();
    assert_eq!(v["gmoe"]["accuracy"]["std"], 0.0);
    assert_eq!(v["baseline"]["mae"]["std"], 0.0);
}

#[test]
fn infer_then_plot_export() {
    let f = Fixture::new();
    f.train("gmoe", "m", &["--config", s(&f.path("small.toml"))]);
    let log = f.path("infer.jsonl");
    let out = ok(&[
        "infer", "--checkpoint", s(&f.path("m.gmoe")), "--data", s(&f.path("data.csv")), "--stream", "max",
        "--out", s(&log),
    ]);
    assert!(out.contains("mean latency"));
    let (header, emissions, summary) = parse_log(&std::fs::read_to_string(&log).unwrap()).unwrap();
    let data = read_csv(&f.path("data.csv"), &header.actions).unwrap();
    assert_eq!(emissions[0].index, header.past_steps);
    assert_eq!(emissions.len(), data.len() - header.past_steps);
    for e in &emissions {
        assert_eq!(e.action_probs.len(), header.horizon);
        for row in &e.action_probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
    let summary = summary.unwrap();
    let mean = emissions.iter().map(|e| e.latency_ms).sum::<f64>() / emissions.len() as f64;
    assert!((summary.mean_latency_ms - mean).abs() <= 1e-9 * (1.0 + mean));
    assert_eq!(summary.count, emissions.len());

    let plots = f.path("plots");
    ok(&[
        "plot-export", "--infer-log", s(&log), "--data", s(&f.path("data.csv")), "--report", s(&f.path("m")),
        "--joint", "s_1", "--wrench", "f_0", "--out-dir", s(&plots),
    ]);
    let probs = std::fs::read_to_string(plots.join("action_probabilities.csv")).unwrap();
    let mut lines = probs.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), header.actions.len() + 1);
    assert_eq!(lines.count(), emissions.len());
    let curves = std::fs::read_to_string(plots.join("training_curves.csv")).unwrap();
    let epochs = std::fs::read_to_string(f.path("m").join("epochs.jsonl")).unwrap();
    assert_eq!(curves.lines().count() - 1, epochs.lines().count());
    let joint = std::fs::read_to_string(plots.join("channel_s_1.csv")).unwrap();
    let mut rows = 0;
    for line in joint.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let t: f64 = cells[2].parse().unwrap();
        let rec = data.records.iter().find(|r| r.time == t).unwrap();
        assert_eq!(cells[3].parse::<f64>().unwrap(), rec.joints[1]);
        rows += 1;
    }
    assert!(rows > emissions.len());

    let bad = gmoe(&[
        "plot-export", "--infer-log", s(&log), "--data", s(&f.path("data.csv")), "--joint", "s_9",
        "--out-dir", s(&plots),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown channel"));
}

#[test]
fn infer_rejects_mismatched_or_truncated_data() {
    let f = Fixture::new();
    f.train("gmoe", "m", &["--config", s(&f.path("small.toml")), "--epochs", "1"]);
    let other = f.path("other.csv");
    std::fs::write(&other, "time,s_0,sdot_0,f_0,action\n0,1,2,3,none\n0.04,1,2,3,none\n").unwrap();
    let out = gmoe(&["infer", "--checkpoint", s(&f.path("m.gmoe")), "--data", s(&other), "--out", s(&f.path("o.jsonl"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("layout"));

    let full = std::fs::read_to_string(f.path("data.csv")).unwrap();
    let cut = &full[..full.len() - 30];
    let truncated = f.path("cut.csv");
    std::fs::write(&truncated, cut).unwrap();
    let log = f.path("cut.jsonl");
    let out = gmoe(&["infer", "--checkpoint", s(&f.path("m.gmoe")), "--data", s(&truncated), "--out", s(&log)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stream ended early"));
    assert!(!log.exists());
}

#[test]
fn help_lists_defaults() {
    let help = ok(&["gen-data", "--help"]);
    for needle in ["--seed", "[default: 7]", "[env: GMOE_SEED", "[default: 480]", "[default: desk]", "--noise"] {
        assert!(help.contains(needle), "{needle} missing:\n{help}");
    }
    let help = ok(&["train", "--help"]);
    for needle in ["--epochs", "default: 200", "--b2", "default: 0.2", "[default: gmoe]"] {
        assert!(help.contains(needle), "{needle} missing:\n{help}");
    }
}
