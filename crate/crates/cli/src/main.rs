//! Command-line front end: train the neural codec, run BLEU-vs-SNR
//! sweeps, score text files, and benchmark the channel and the MI
//! estimator.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semlink::channel::{apply_channel, ChannelConfig};
use semlink::classic::bits::BitVec;
use semlink::classic::qam::{qam64_ber_approx, qam64_demodulate, qam64_modulate};
use semlink::corpus::tokenize;
use semlink::harness::{emit_csv, parse_config, run_sweep, run_training, write_decoded};
use semlink::metrics::{bleu, BleuWeights};
use semlink::mine::{gaussian_benchmark_with, gaussian_mi};
use semlink::rng::Rng64;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "semlink",
    version,
    about = "Semantic text-link simulator: transformer JSCC vs Huffman+RS+64-QAM"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the neural codec described by a config file and write a
    /// checkpoint plus .meta/.vocab/.history.csv sidecars.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path (default: the config's `checkpoint`, else model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides the config's train_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep BLEU vs SNR for the configured links and emit CSV, plus
    /// `<out>.decoded.txt` with decoded sentences aligned to the input.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (default: the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Replaces the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Score a candidate text file against a reference file, line by line.
    Bleu {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Highest n-gram order to report.
        #[arg(long, default_value_t = 4)]
        max_order: usize,
    },
    /// Uncoded 64-QAM Monte-Carlo BER against the analytic
    /// nearest-neighbor approximation.
    ChannelBench {
        #[arg(long, default_value = "0,3,6,9,12,15,18")]
        snr_points_db: String,
        #[arg(long, default_value_t = 1_000_000)]
        bits: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the table as CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlated-Gaussian benchmark for the MI estimator.
    MineBench {
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        #[arg(long, default_value_t = 256)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Moving-average decay for the gradient bias correction;
        /// 0 keeps the raw gradient.
        #[arg(long, default_value_t = 0.0)]
        ema_decay: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train {
            config,
            checkpoint,
            seed,
        } => cmd_train(config, checkpoint, seed),
        Cmd::Sweep {
            config,
            out,
            checkpoint,
            seed,
            threads,
        } => cmd_sweep(config, out, checkpoint, seed, threads),
        Cmd::Bleu {
            reference,
            candidate,
            max_order,
        } => cmd_bleu(reference, candidate, max_order),
        Cmd::ChannelBench {
            snr_points_db,
            bits,
            seed,
            out,
        } => cmd_channel_bench(&snr_points_db, bits, seed, out),
        Cmd::MineBench {
            rho,
            steps,
            batch,
            lr,
            ema_decay,
            seed,
        } => cmd_mine_bench(rho, steps, batch, lr, ema_decay, seed),
    }
}

fn cmd_train(config: PathBuf, checkpoint: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = parse_config(&config)?;
    if let Some(s) = seed {
        cfg.train_seed = s;
    }
    let ckpt = checkpoint
        .or(cfg.checkpoint.clone())
        .unwrap_or_else(|| PathBuf::from("model.ckpt"));
    let summary = run_training(&cfg, &ckpt)?;
    println!("checkpoint: {}", summary.checkpoint.display());
    println!("history:    {}", summary.history_csv.display());
    println!("channel dims per token: {}", summary.channel_dim_per_token);
    if let Some(mean) = summary.classic_mean_symbols {
        println!(
            "matched budget: classic mean {:.2} symbols/sentence, neural {}",
            mean,
            cfg.max_len * summary.channel_dim_per_token / 2
        );
    }
    println!(
        "epochs recorded: {}, final total loss {:.4}",
        summary.epochs_recorded, summary.final_total_loss
    );
    Ok(())
}

fn cmd_sweep(
    config: PathBuf,
    out: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    let mut cfg = parse_config(&config)?;
    if let Some(c) = checkpoint {
        cfg.checkpoint = Some(c);
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    let result = run_sweep(&cfg)?;
    emit_csv(&result, &cfg.out)?;
    let decoded_path = write_decoded(&result, &cfg.out)?;
    if let (Some(classic), Some(neural)) = (
        result.classic_mean_symbols,
        result.neural_symbols_per_sentence,
    ) {
        println!("symbol budget: classic mean {classic:.2}, neural {neural} per sentence");
    }
    println!(
        "{:<8} {:>7} {:>6} {:>8} {:>8} {:>7}",
        "method", "snr_db", "seed", "bleu1", "bleu4", "failed"
    );
    for row in &result.rows {
        println!(
            "{:<8} {:>7.1} {:>6} {:>8.4} {:>8.4} {:>7}",
            row.method, row.snr_db, row.seed, row.bleu[0], row.bleu[3], row.sentences_failed
        );
    }
    println!("csv: {}", cfg.out.display());
    println!("decoded: {}", decoded_path.display());
    Ok(())
}

fn read_lines(path: &PathBuf) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn cmd_bleu(reference: PathBuf, candidate: PathBuf, max_order: usize) -> Result<()> {
    let refs = read_lines(&reference)?;
    let cands = read_lines(&candidate)?;
    if refs.len() != cands.len() {
        bail!(
            "line counts differ: {} has {}, {} has {}",
            reference.display(),
            refs.len(),
            candidate.display(),
            cands.len()
        );
    }
    let mut sums = vec![0.0; max_order];
    let mut scored = 0usize;
    for (r, c) in refs.iter().zip(&cands) {
        let r_tok = tokenize(r);
        let c_tok = tokenize(c);
        if r_tok.is_empty() {
            continue;
        }
        scored += 1;
        for (k, sum) in sums.iter_mut().enumerate() {
            *sum += bleu(&c_tok, &r_tok, &BleuWeights::uniform(k + 1));
        }
    }
    if scored == 0 {
        bail!("no scorable lines (empty reference)");
    }
    println!("sentences: {scored}");
    for (k, sum) in sums.iter().enumerate() {
        println!("bleu{} = {:.6}", k + 1, sum / scored as f64);
    }
    Ok(())
}

fn cmd_channel_bench(snr_points: &str, bits: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let points: Vec<f64> = snr_points
        .split(',')
        .map(|s| s.trim().parse::<f64>().context("bad SNR value"))
        .collect::<Result<_>>()?;
    let mut table = String::from("snr_db,ber_monte_carlo,ber_analytic,rel_error\n");
    for &snr_db in &points {
        let mut rng = Rng64::new(seed ^ snr_db.to_bits());
        let mut tx_bits = BitVec::with_capacity(bits);
        for _ in 0..bits {
            tx_bits.push(rng.next_u64() & 1 == 1);
        }
        let (block, _) = qam64_modulate(&tx_bits);
        let cfg = ChannelConfig::awgn(snr_db, seed);
        let rx = apply_channel(&block, &cfg, &mut rng);
        let demod = qam64_demodulate(&rx, 1.0);
        let errors = (0..bits)
            .filter(|&i| demod.get(i) != tx_bits.get(i))
            .count();
        let ber = errors as f64 / bits as f64;
        let analytic = qam64_ber_approx(snr_db);
        let rel = if analytic > 0.0 {
            (ber - analytic).abs() / analytic
        } else {
            0.0
        };
        let _ = writeln!(table, "{snr_db:.6},{ber:.8},{analytic:.8},{rel:.4}");
    }
    match out {
        Some(path) => {
            fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_mine_bench(
    rho: f64,
    steps: usize,
    batch: usize,
    lr: f64,
    ema_decay: f64,
    seed: u64,
) -> Result<()> {
    let ema = (ema_decay > 0.0).then_some(ema_decay);
    let correlated = gaussian_benchmark_with(rho, steps, batch, lr, seed, ema)?;
    let independent = gaussian_benchmark_with(0.0, steps, batch, lr, seed ^ 0xFF, ema)?;
    println!("closed-form MI(rho={rho}) = {:.4} nats", gaussian_mi(rho));
    println!("estimated bound          = {correlated:.4} nats");
    println!("independent pair bound   = {independent:.4} nats (target 0)");
    Ok(())
}
