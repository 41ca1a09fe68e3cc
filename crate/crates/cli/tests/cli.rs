use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::io::Write;
use std::sync::OnceLock;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_smigraph"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn toy_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/toy_200.smi")
}

/// A one-epoch checkpoint of a small model, shared by the tests in this file.
fn checkpoint() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("tiny.conf");
        std::fs::write(
            &config,
            "d_model = 16\ntransformer_layers = 1\nheads = 2\nffn_width = 32\ngnn_layers = 1\ngnn_width = 8\nfingerprint_width = 64\n",
        )
        .unwrap();
        let corpus = dir.path().join("small.smi");
        let lines: Vec<String> = std::fs::read_to_string(toy_corpus()).unwrap().lines().take(24).map(String::from).collect();
        std::fs::write(&corpus, lines.join("\n")).unwrap();
        let out = run(&[
            "pretrain",
            corpus.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--epochs",
            "1",
            "--batch-size",
            "8",
            "--output",
            dir.path().join("run").to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let log = stdout(&out);
        assert!(log.starts_with("epoch\t"));
        assert_eq!(log.lines().count(), 2);
        dir
    });
    Box::leak(dir.path().join("run/final").into_boxed_path())
}

#[test]
fn tokenize_joins_tokens_with_spaces() {
    let out = run(&["tokenize", "CCO"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "C C O\n");
    assert!(out.stderr.is_empty());
}

#[test]
fn fragment_line_format() {
    assert_eq!(stdout(&run(&["fragment", "CCO"])), "1\t0,0,0\t0,0,0\n");
    assert_eq!(stdout(&run_stdin(&["fragment"], "CC(=O)OC\n")), "2\t0,0,0,1,1\t0,0,0,0,0,0,1,1\n");
}

#[test]
fn stdin_lines_stream_in_order() {
    let out = run_stdin(&["tokenize"], "# comment\nCCO second-field\n\nc1ccccc1\n");
    assert_eq!(stdout(&out), "C C O\nc 1 c c c c c 1\n");
}

#[test]
fn chemistry_subcommands() {
    assert_eq!(stdout(&run(&["groups", "CC(=O)O"])), "carboxylic_acid\n");
    assert_eq!(stdout(&run(&["scaffold", "CCO", "c1ccccc1CC"])), "\nc1ccccc1\n");
    let parsed = stdout(&run(&["parse", "OCC"]));
    assert_eq!(parsed, stdout(&run(&["parse", "CCO"])));
    assert!(parsed.ends_with("\t3\t2\n"));
    let fp = stdout(&run(&["fingerprint", "--width", "64", "CCO"]));
    assert_eq!(fp.trim().len(), 16);
}

#[test]
fn outputs_are_deterministic() {
    for args in [["mask", "--seed", "4", "CC(=O)OC"], ["mask", "--seed", "4", "c1ccccc1C(=O)NC"]] {
        let a = run(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, run(&args).stdout);
    }
    let single = stdout(&run(&["mask", "--mask-strategy", "single", "--seed", "1", "CCOCC"]));
    assert!(single.contains("ablation\t"));
}

#[test]
fn input_errors_exit_one() {
    let out = run(&["parse", "C1CC"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());

    let out = run(&["parse", "CCO", "C(", "CC"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out).lines().count(), 2);

    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["mask", "--mask-strategy", "nope", "C"]).status.code(), Some(1));
    assert_eq!(run(&["fingerprint", "--width", "3", "C"]).status.code(), Some(1));
    assert_eq!(run(&["similarity", "--checkpoint", "/nonexistent", "C", "C"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn metrics_from_stdin() {
    let out = run_stdin(&["metrics"], "prediction\ttruth\n0.9\t1\n0.2\t0\n0.8\t0\n0.7\t1\n");
    assert_eq!(stdout(&out), "roc_auc\t0.750000\naccuracy\t0.750000\n");
    let out = run_stdin(&["metrics", "--task", "reg"], "1\t1\n2\t3\n");
    assert_eq!(stdout(&out), "rmse\t0.707107\nmse\t0.500000\nci\t1.000000\n");
    let out = run_stdin(&["metrics"], "0.3\t1\n0.4\t1\n");
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("roc_auc\tNaN\n"));
}

#[test]
fn similarity_of_identical_molecules_is_one() {
    let ckpt = checkpoint().to_str().unwrap();
    let out = run(&["similarity", "--checkpoint", ckpt, "CCO", "CCO"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "1.000000\n");
    let other = stdout(&run(&["similarity", "--checkpoint", ckpt, "CCO", "c1ccccc1N"]));
    let v: f64 = other.trim().parse().unwrap();
    assert!(v.is_finite() && v < 1.0);
}

#[test]
fn embed_and_attention_dump() {
    let ckpt = checkpoint().to_str().unwrap();
    let out = run(&["embed", "--checkpoint", ckpt, "CCO", "CC(=O)OC"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.len() == 16));

    let out = run(&["attn-dump", "--checkpoint", ckpt, "--layer", "0", "CCO"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("# layer 0 head")).count(), 2);
    assert!(text.contains("\tt:C\t0\t"));
    assert!(text.contains("\ta:O\t0\t"));
    assert_eq!(run(&["attn-dump", "--checkpoint", ckpt, "--layer", "5", "CCO"]).status.code(), Some(1));
}

#[test]
fn finetune_reports_metrics() {
    let ckpt = checkpoint().to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("task.tsv");
    let smiles = std::fs::read_to_string(toy_corpus()).unwrap();
    let mut text = String::from("smiles\tlabel\n");
    for (i, s) in smiles.lines().take(40).enumerate() {
        text.push_str(&format!("{s}\t{}\n", i % 2));
    }
    std::fs::write(&data, text).unwrap();
    let out = run(&["finetune", data.to_str().unwrap(), "--checkpoint", ckpt, "--task", "cls", "--split", "random", "--epochs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("split_sizes\t32\t4\t4\n"), "{text}");
    assert!(text.contains("test\troc_auc\t"));
    assert_eq!(run(&["finetune", data.to_str().unwrap(), "--checkpoint", ckpt, "--task", "x"]).status.code(), Some(1));
}
