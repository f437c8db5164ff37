mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uegd::model::*;

fn uegd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uegd")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("archive{seed}"));
    let seed_arg = seed.to_string();
    let o = uegd(&["synth", "--out", p(&out), "--clips", "24,8,8", "--frames", "2,4", "--dims", "4,4,4", "--layers", "2", "--seed", &seed_arg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const SMALL: [&str; 14] = [
    "--enc-hidden", "8", "--embed-dim", "4", "--dec-hidden", "4", "--heads", "2", "--max-epochs", "2", "--batch-size", "8", "--workers", "1",
];

fn train(archive: &Path, out: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["train", "--archive", p(archive), "--out", p(out), "--seeds", "3,4"];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    let o = uegd(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(stdout(&o).trim())
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let archive = synth(dir.path(), 1);
    let out = dir.path().join("runs");
    assert_eq!(code(&uegd(&["train", "--archive", p(&archive), "--out", p(&out), "--modalities", "v,x"])), 2);
    assert_eq!(code(&uegd(&["train", "--archive", p(&archive), "--out", p(&out), "--no-such-flag"])), 2);
    assert_eq!(code(&uegd(&["frobnicate"])), 2);
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&uegd(&["train", "--archive", p(&missing), "--out", p(&out)])), 2);
    assert!(!out.exists(), "no run directory on usage errors");
    assert_eq!(code(&uegd(&["--help"])), 0);
    assert_eq!(code(&uegd(&["train", "--help"])), 0);
}

#[test]
fn synth_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (x, y) = (synth(a.path(), 5), synth(b.path(), 5));
    assert_eq!(common::tree_digest(&x), common::tree_digest(&y));
    let z = synth(a.path(), 6);
    assert_ne!(common::tree_digest(&x), common::tree_digest(&z));
}

#[test]
fn train_eval_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let archive = synth(dir.path(), 2);
    let run = train(&archive, &dir.path().join("runs"), &["--aggregation", "weighted"]);
    assert!(run.file_name().unwrap().to_str().unwrap().ends_with("-seed3"));
    for f in ["config.txt", "results.csv", "trial1-seed3.ckpt", "trial2-seed4.ckpt", "trial1-seed3.log", "trial2-seed4.log"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let results = read_csv(&run.join("results.csv"));
    assert_eq!(results[0], ["trial", "seed", "mae", "corr", "acc2_nonneg", "acc2_pos", "f1_nonneg", "f1_pos"]);
    assert_eq!(results.len(), 4);
    assert_eq!(results[3][0], "avg");
    let avg_mae: f64 = results[3][2].parse().unwrap();
    let trial_mae: f64 = (results[1][2].parse::<f64>().unwrap() + results[2][2].parse::<f64>().unwrap()) / 2.0;
    assert!((avg_mae - trial_mae).abs() < 1e-9);
    let log = std::fs::read_to_string(run.join("trial1-seed3.log")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let ckpt = run.join("trial1-seed3.ckpt");
    let eval_out = dir.path().join("eval");
    let o = uegd(&["eval", "--archive", p(&archive), "--checkpoint", p(&ckpt), "--out", p(&eval_out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("mae="));
    assert_eq!(read_csv(&eval_out.join("gates.csv")).len(), 1 + 8);
    assert_eq!(read_csv(&eval_out.join("predictions.csv")).len(), 1 + 8);
    assert_eq!(read_csv(&eval_out.join("gate_histogram.csv")).len(), 1 + 60);
    // eval reproduces the test metrics recorded at training time
    let metrics = read_csv(&eval_out.join("metrics.csv"));
    let mae = metrics.iter().find(|r| r[0] == "mae").unwrap()[1].clone();
    assert_eq!(mae.parse::<f64>().unwrap(), results[1][2].parse::<f64>().unwrap());

    // a checkpoint that ignores its input predicts a constant
    let (cfg, mut params) = read_checkpoint(&ckpt).unwrap();
    let model = Uegd::new(cfg.clone()).unwrap();
    let d = model.layout().decoder;
    params.get_mut(d.out_w).data_mut().iter_mut().for_each(|v| *v = 0.0);
    let flat = dir.path().join("flat.ckpt");
    write_checkpoint(&flat, &cfg, &params).unwrap();
    let o = uegd(&["analyze", "--archive", p(&archive), "--checkpoint", p(&ckpt), p(&flat), "--out", p(&eval_out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&eval_out.join("variance.csv"));
    assert_eq!(rows[0], ["config", "total_var", "intra_var"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][0], "labels");
    assert_eq!(rows[3][0], "flat");
    assert_eq!(rows[3][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[3][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let archive = synth(dir.path(), 3);
    let mut cfg = ModelConfig::small([5, 4, 4], [2, 2, 2]);
    cfg.embed_dim = 4;
    let model = Uegd::new(cfg.clone()).unwrap();
    let params = ParamStore::<f32>::init(model.layout(), &mut ChaCha8Rng::seed_from_u64(1));
    let ckpt = dir.path().join("other.ckpt");
    write_checkpoint(&ckpt, &cfg, &params).unwrap();
    let o = uegd(&["eval", "--archive", p(&archive), "--checkpoint", p(&ckpt), "--out", p(&dir.path().join("e"))]);
    assert_eq!(code(&o), 2);
    let o = uegd(&["eval", "--archive", p(&archive), "--checkpoint", p(&dir.path().join("none.ckpt")), "--out", p(&dir.path().join("e"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_reports_best_layer() {
    let dir = tempfile::tempdir().unwrap();
    let archive = synth(dir.path(), 4);
    let mut args = vec!["sweep", "--archive", p(&archive), "--out", p(dir.path()), "--modality", "a", "--seeds", "1"];
    args.extend_from_slice(&SMALL);
    let o = uegd(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    let run = PathBuf::from(lines.next().unwrap());
    let best: usize = lines.next().unwrap().strip_prefix("best_layer=").unwrap().parse().unwrap();
    let rows = read_csv(&run.join("layer_sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!((1..=2).contains(&best));
    assert!(run.join("sweep.log").is_file());
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let archive = synth(dir.path(), 6);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\nmax_epochs = 1\nbatch_size = 4\nseeds = 9\n").unwrap();
    let run = train(&archive, &dir.path().join("runs"), &["--config", p(&cfg)]);
    let text = std::fs::read_to_string(run.join("config.txt")).unwrap();
    // SMALL sets max-epochs 2 and batch-size 8 on the command line; seeds come from train()
    assert!(text.contains("max-epochs = 2"), "{text}");
    assert!(text.contains("batch-size = 8"), "{text}");
    assert!(text.contains("seeds = 3,4"), "{text}");

    std::fs::write(&cfg, "max-epochs = 1\npatience = 1\n").unwrap();
    let o = uegd(&["train", "--archive", p(&archive), "--out", p(&dir.path().join("r2")), "--config", p(&cfg), "--seeds", "1", "--enc-hidden", "8", "--embed-dim", "4", "--dec-hidden", "4", "--heads", "2"]);
    assert_eq!(code(&o), 0);
    let run = PathBuf::from(stdout(&o).trim());
    let text = std::fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(text.contains("max-epochs = 1") && text.contains("patience = 1"), "{text}");

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&uegd(&["train", "--archive", p(&archive), "--out", p(dir.path()), "--config", p(&cfg)])), 2);
}
