//! End-to-end checks of the command-line interface.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semlink"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("semlink-cli-{}-{name}", std::process::id()));
    let _ = fs::create_dir_all(&dir);
    dir
}

fn write(path: &PathBuf, text: &str) {
    fs::write(path, text).unwrap();
}

const TINY_CORPUS: &str = "\
a man smiling at the camera
a woman with long hair
an old man with a beard
a young woman in a red hat
two people near a wall
a child running in the park
a man with dark glasses
a woman looking to the side
a boy with curly hair
a girl with a bright smile
an old woman with earrings
a man in a blue shirt
";

#[test]
fn bleu_identical_files_score_one() {
    let dir = temp_dir("bleu");
    let refs = dir.join("refs.txt");
    write(&refs, TINY_CORPUS);
    let out = bin()
        .args(["bleu", "--reference"])
        .arg(&refs)
        .arg("--candidate")
        .arg(&refs)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bleu1 = 1.000000"), "{text}");
    assert!(text.contains("bleu4 = 1.000000"), "{text}");
}

#[test]
fn bleu_rejects_mismatched_line_counts() {
    let dir = temp_dir("bleu-mismatch");
    let refs = dir.join("refs.txt");
    let cands = dir.join("cands.txt");
    write(&refs, "a b c\nd e f\n");
    write(&cands, "a b c\n");
    let out = bin()
        .args(["bleu", "--reference"])
        .arg(&refs)
        .arg("--candidate")
        .arg(&cands)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line counts differ"));
}

#[test]
fn channel_bench_emits_table() {
    let out = bin()
        .args([
            "channel-bench",
            "--snr-points-db",
            "18",
            "--bits",
            "600000",
            "--seed",
            "7",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("snr_db,ber_monte_carlo,ber_analytic,rel_error"));
    let row = text.lines().nth(1).unwrap();
    let rel: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(rel < 0.25, "BER off analytic by {rel}");
}

#[test]
fn classic_sweep_writes_csv_and_decoded_hook() {
    let dir = temp_dir("sweep");
    let corpus = dir.join("corpus.txt");
    write(&corpus, TINY_CORPUS);
    let cfg = dir.join("run.cfg");
    write(
        &cfg,
        &format!(
            "train_corpus = {}\nlink = classic\nsnr_points_db = inf,12\nseeds = 1,2\n",
            corpus.display()
        ),
    );
    let out_csv = dir.join("out.csv");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_csv)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4, "header + 2 snr x 2 seeds");
    assert!(csv.lines().nth(1).unwrap().starts_with("classic,"));

    let decoded = fs::read_to_string(dir.join("out.csv.decoded.txt")).unwrap();
    // Noiseless point at the first seed: decoded text equals the input.
    assert_eq!(decoded.trim_end(), TINY_CORPUS.trim_end());
}

#[test]
fn train_then_neural_sweep_roundtrip() {
    let dir = temp_dir("train");
    let corpus = dir.join("corpus.txt");
    write(&corpus, TINY_CORPUS);
    let cfg = dir.join("run.cfg");
    write(
        &cfg,
        &format!(
            "train_corpus = {}\nlink = neural\nsnr_points_db = 6\nseeds = 1\n\
             max_len = 10\nmodel_dim = 16\nheads = 2\nff_dim = 32\nlayers = 1\n\
             channel_dim_per_token = 4\nepochs_per_phase = 1\nmax_rounds = 1\nbatch_size = 6\n",
            corpus.display()
        ),
    );
    let ckpt = dir.join("tiny.ckpt");
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .args(["--seed", "3"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(ckpt.exists());
    for suffix in [".meta", ".vocab", ".history.csv"] {
        assert!(
            dir.join(format!("tiny.ckpt{suffix}")).exists(),
            "missing sidecar {suffix}"
        );
    }

    let out_csv = dir.join("neural.csv");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("neural,6.000000,1,"));
}

#[test]
fn sweep_refuses_checkpoint_with_wrong_dimensions() {
    let dir = temp_dir("mismatch");
    let corpus = dir.join("corpus.txt");
    write(&corpus, TINY_CORPUS);
    let base = "link = neural\nsnr_points_db = 6\nseeds = 1\nmax_len = 10\nheads = 2\n\
                ff_dim = 32\nlayers = 1\nchannel_dim_per_token = 4\nepochs_per_phase = 1\n\
                max_rounds = 1\nbatch_size = 6\n";
    let train_cfg = dir.join("train.cfg");
    write(
        &train_cfg,
        &format!(
            "train_corpus = {}\nmodel_dim = 16\n{base}",
            corpus.display()
        ),
    );
    let ckpt = dir.join("m.ckpt");
    assert!(bin()
        .args(["train", "--config"])
        .arg(&train_cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap()
        .status
        .success());

    // Sweep against a config that disagrees on model_dim.
    let sweep_cfg = dir.join("sweep.cfg");
    write(
        &sweep_cfg,
        &format!(
            "train_corpus = {}\nmodel_dim = 24\n{base}",
            corpus.display()
        ),
    );
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&sweep_cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(dir.join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model_dim"), "{err}");
    assert!(err.contains("16") && err.contains("24"), "{err}");
}

#[test]
fn mine_bench_smoke() {
    let out = bin()
        .args([
            "mine-bench",
            "--steps",
            "60",
            "--batch",
            "64",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("closed-form MI"), "{text}");
    assert!(text.contains("0.8304"), "{text}");
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = temp_dir("unknown-key");
    let corpus = dir.join("corpus.txt");
    write(&corpus, TINY_CORPUS);
    let cfg = dir.join("bad.cfg");
    write(
        &cfg,
        &format!("train_corpus = {}\nsnr_dbs = 1,2\n", corpus.display()),
    );
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr_dbs"));
}
