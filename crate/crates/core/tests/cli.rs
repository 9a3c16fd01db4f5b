use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use routine_dynamics::checkpoint::{Checkpoint, Model};
use routine_dynamics::cli::{checkpoint_file, run};
use routine_dynamics::sim::{read_manifest, SimConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_routine-dynamics"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let mut c = SimConfig::default();
    c.households = 2;
    c.train_days = 4;
    c.test_days = 2;
    c.genetic.runs = 1;
    c.genetic.iterations = 50;
    let path = dir.join("small.json");
    fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    path
}

/// A small dataset with static, FreMEn and one-epoch GNN checkpoints.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    fn ckpt(&self, name: &str) -> PathBuf {
        self.root.join(format!("ckpt_{name}"))
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = small_config(&root);
        let data = root.join("data");
        assert_eq!(run(["rd", "generate", "--config", s(&config), "--out", s(&data), "--seed", "5"]), 0);
        for p in ["static", "fremen"] {
            let out = root.join(format!("ckpt_{p}"));
            assert_eq!(run(["rd", "train", "--data", s(&data), "--out", s(&out), "--predictor", p]), 0);
        }
        let out = root.join("ckpt_gnn");
        let args = ["rd", "train", "--data", s(&data), "--out", s(&out), "--predictor", "gnn", "--epochs", "1", "--train-days", "2"];
        assert_eq!(run(args), 0);
        Fixture { _dir: dir, root }
    })
}

fn evaluate(f: &Fixture, out: &Path, extra: &[&str]) -> i32 {
    let (data, g, fr, st) = (f.data(), f.ckpt("gnn"), f.ckpt("fremen"), f.ckpt("static"));
    let mut args = vec!["rd", "evaluate", "--data", s(&data), "--out", s(out)];
    args.extend(["--checkpoints", s(&g), "--checkpoints", s(&fr), "--checkpoints", s(&st)]);
    let extra: Vec<String> = extra.iter().map(|x| x.to_string()).collect();
    let mut all: Vec<String> = args.into_iter().map(String::from).collect();
    all.extend(extra);
    run(all)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn generate_is_reproducible() {
    let f = fixture();
    let m = read_manifest(&f.data()).unwrap();
    assert_eq!((m.households, m.train_days, m.test_days, m.seed), (2, 4, 2, 5));
    for k in 0..2 {
        assert_eq!(listing(&f.data().join(format!("household_{k}/train"))).len(), 4);
        assert_eq!(listing(&f.data().join(format!("household_{k}/test"))).len(), 2);
    }
    let again = tempfile::tempdir().unwrap();
    let config = small_config(again.path());
    let out = again.path().join("data");
    assert_eq!(run(["rd", "generate", "--config", s(&config), "--out", s(&out), "--seed", "5"]), 0);
    assert_eq!(read_manifest(&out).unwrap().dataset_digest, m.dataset_digest);
}

#[test]
fn malformed_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"households\": ").unwrap();
    let out = bin().args(["generate", "--config", s(&bad), "--out", s(&dir.path().join("x"))]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));

    let missing = bin().args(["train", "--data", "/nonexistent", "--out", s(dir.path())]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let unknown = bin().args(["train", "--frobnicate"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let predictor = bin().args(["train", "--data", "x", "--out", "y", "--predictor", "lstm"]).output().unwrap();
    assert_eq!(predictor.status.code(), Some(2));
    let threads = bin().env("ROUTINE_DYNAMICS_THREADS", "zero").args(["generate", "--out", s(&dir.path().join("y"))]).output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn checkpoints_round_trip_and_record_flags() {
    let f = fixture();
    for p in ["static", "fremen", "gnn"] {
        let path = f.ckpt(p).join(checkpoint_file(1));
        let bytes = fs::read(&path).unwrap();
        let ckpt = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ckpt.model.kind(), p);
        assert_eq!(ckpt.to_bytes().unwrap(), bytes);
    }
    let out = f.root.join("ckpt_noatt");
    let data = f.data();
    let args = ["rd", "train", "--data", s(&data), "--out", s(&out), "--epochs", "1", "--train-days", "1", "--ablate-attention", "--time-encoding", "linear"];
    assert_eq!(run(args), 0);
    match Checkpoint::load(&out.join(checkpoint_file(0))).unwrap().model {
        Model::Gnn(p) => {
            assert!(!p.config.attention_enabled);
            assert_eq!(p.config.epochs, 1);
            assert_eq!(p.config.time_encoding.width(), 1);
        }
        other => panic!("{}", other.kind()),
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"attention_enabled\": false"));
    assert!(manifest.contains("\"epoch_losses\""));
}

#[test]
fn table1_writes_one_report_and_reruns_identically() {
    let f = fixture();
    let a = f.root.join("eval_a");
    let b = f.root.join("eval_b");
    assert_eq!(evaluate(f, &a, &["--experiment", "table1", "--delta", "30"]), 0);
    assert_eq!(evaluate(f, &b, &["--experiment", "table1", "--delta", "30"]), 0);
    let names = listing(&a);
    assert_eq!(names, listing(&b));
    let csv: Vec<&String> = names.iter().filter(|n| n.ends_with(".csv")).collect();
    assert_eq!(csv.len(), 1);
    assert!(csv[0].starts_with("table1_d030_") && csv[0].ends_with("_seed5.csv"));
    let text = fs::read_to_string(a.join(csv[0])).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, vec!["gnn", "fremen", "static"]);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn sweep_writes_twelve_reports() {
    let f = fixture();
    let out = f.root.join("eval_sweep");
    assert_eq!(evaluate(f, &out, &["--experiment", "sweep"]), 0);
    let csv: Vec<String> = listing(&out).into_iter().filter(|n| n.ends_with(".csv")).collect();
    assert_eq!(csv.len(), 12);
    for d in (10..=120).step_by(10) {
        assert!(csv.iter().any(|n| n.starts_with(&format!("sweep_d{d:03}_"))), "{d}");
    }
}

#[test]
fn foreign_checkpoints_are_refused() {
    let f = fixture();
    let dir = f.root.join("ckpt_foreign");
    fs::create_dir_all(&dir).unwrap();
    fs::copy(f.ckpt("static").join("manifest.json"), dir.join("manifest.json")).unwrap();
    for k in 0..2 {
        let mut ckpt = Checkpoint::load(&f.ckpt("static").join(checkpoint_file(k))).unwrap();
        ckpt.catalog_digest = "0".repeat(64);
        ckpt.save(&dir.join(checkpoint_file(k))).unwrap();
    }
    let out = f.root.join("eval_foreign");
    let data = f.data();
    let code = run(["rd", "evaluate", "--data", s(&data), "--out", s(&out), "--checkpoints", s(&dir)]);
    assert_eq!(code, 2);
    let none = run(["rd", "evaluate", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(none, 2);
}

#[test]
fn data_efficiency_and_ablation_run_end_to_end() {
    let f = fixture();
    let data = f.data();
    let out = f.root.join("eval_eff");
    let args = ["rd", "evaluate", "--data", s(&data), "--out", s(&out), "--experiment", "data-efficiency", "--train-days", "2,4", "--predictor", "static", "--predictor", "fremen"];
    assert_eq!(run(args), 0);
    let csv: Vec<String> = listing(&out).into_iter().filter(|n| n.ends_with(".csv")).collect();
    assert_eq!(csv.len(), 2);
    let too_many = ["rd", "evaluate", "--data", s(&data), "--out", s(&out), "--experiment", "data-efficiency", "--train-days", "9", "--predictor", "static"];
    assert_eq!(run(too_many), 2);

    // Ablations train three models on every training day; keep them tiny.
    let out = f.root.join("eval_ablation");
    let quick = f.root.join("ablation_data");
    let mut c = SimConfig::default();
    c.genetic.runs = 1;
    c.genetic.iterations = 20;
    c.households = 1;
    c.train_days = 1;
    c.test_days = 1;
    let cfg = f.root.join("tiny.json");
    fs::write(&cfg, serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(run(["rd", "generate", "--config", s(&cfg), "--out", s(&quick)]), 0);
    let args = ["rd", "evaluate", "--data", s(&quick), "--out", s(&out), "--experiment", "ablation", "--epochs", "1"];
    assert_eq!(run(args), 0);
    let csv = listing(&out).into_iter().find(|n| n.ends_with(".csv")).unwrap();
    let text = fs::read_to_string(out.join(csv)).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, vec!["full", "no_attention", "linear_time"]);
}
