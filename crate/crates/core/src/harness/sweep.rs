//! Training orchestration and SNR sweep execution.

use super::{BudgetMode, ExperimentConfig, HarnessError};
use crate::channel::{ChannelConfig, ChannelKind};
use crate::classic::huffman::{byte_frequencies, huffman_build, HuffmanCodebook};
use crate::classic::rs::RsParams;
use crate::classic::{classic_symbol_count, classic_transmit_sentence};
use crate::corpus::{decode_tokens, encode_sentence, load_corpus, tokenize, Vocabulary};
use crate::jscc::{train, transmit, JsccConfig, JsccModel, TrainConfig};
use crate::metrics::{bleu, word_accuracy, BleuWeights};
use crate::mine::MineEstimator;
use crate::rng::{derive_seed, Rng64};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// One aggregated line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub snr_db: f64,
    pub seed: u64,
    /// Mean sentence BLEU-1..BLEU-4 (cumulative uniform weights).
    pub bleu: [f64; 4],
    pub word_accuracy: f64,
    pub complex_symbols_per_sentence_mean: f64,
    pub sentences_failed: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Decoded sentences aligned with the eval corpus, from the
    /// preferred method (neural when present) at the highest SNR point
    /// and the first seed; the text-pipeline hook.
    pub decoded: Vec<String>,
    pub classic_mean_symbols: Option<f64>,
    pub neural_symbols_per_sentence: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub meta_file: PathBuf,
    pub vocab_file: PathBuf,
    pub history_csv: PathBuf,
    pub channel_dim_per_token: usize,
    pub classic_mean_symbols: Option<f64>,
    pub epochs_recorded: usize,
    pub final_total_loss: f64,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn classic_mean_symbols(
    sentences: &[String],
    book: &HuffmanCodebook,
    rs: &RsParams,
) -> Result<f64, HarnessError> {
    let mut total = 0usize;
    for s in sentences {
        total += classic_symbol_count(book, rs, s)?;
    }
    Ok(total as f64 / sentences.len() as f64)
}

/// Picks the even channel dimension whose symbol count best matches
/// the classic mean; errors when the best choice is off by over 10%.
fn matched_channel_dim(classic_mean: f64, max_len: usize) -> Result<usize, HarnessError> {
    let ideal = 2.0 * classic_mean / max_len as f64;
    let mut c = (ideal / 2.0).round() as usize * 2;
    if c == 0 {
        c = 2;
    }
    let neural = max_len * c / 2;
    let deviation = (neural as f64 - classic_mean).abs() / classic_mean;
    if deviation > 0.10 {
        return Err(HarnessError::BudgetInfeasible {
            classic_mean,
            neural,
            deviation: deviation * 100.0,
        });
    }
    Ok(c)
}

/// Trains the neural codec per the config and writes the checkpoint
/// plus its sidecars: `.meta` (flat key=value), `.vocab` (tokens in id
/// order), and `.history.csv` (per-epoch losses).
pub fn run_training(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
) -> Result<TrainSummary, HarnessError> {
    let sentences = load_corpus(&cfg.train_corpus)?;
    let vocab = Vocabulary::build(&sentences, cfg.min_freq)?;
    let seqs: Vec<_> = sentences
        .iter()
        .map(|s| encode_sentence(&vocab, s, cfg.max_len))
        .collect();

    let (channel_dim, classic_mean) = match cfg.budget {
        BudgetMode::Fixed => (cfg.channel_dim_per_token, None),
        BudgetMode::Matched => {
            let book = build_codebook(&sentences)?;
            let rs = RsParams::new(cfg.rs_n, cfg.rs_k)?;
            let mean = classic_mean_symbols(&sentences, &book, &rs)?;
            (matched_channel_dim(mean, cfg.max_len)?, Some(mean))
        }
    };

    let mut jscc_cfg = JsccConfig::new(vocab.size(), cfg.max_len);
    jscc_cfg.model_dim = cfg.model_dim;
    jscc_cfg.heads = cfg.heads;
    jscc_cfg.ff_dim = cfg.ff_dim;
    jscc_cfg.layers = cfg.layers;
    jscc_cfg.channel_dim_per_token = channel_dim;
    jscc_cfg.lambda_mi = cfg.lambda_mi;
    jscc_cfg.train_snr_range_db = (cfg.train_snr_low_db, cfg.train_snr_high_db);
    jscc_cfg.fading_h = cfg.fading_h;

    let mut model = JsccModel::new(jscc_cfg.clone(), cfg.train_seed)?;
    let mut mine = MineEstimator::new(channel_dim, 64, cfg.train_seed ^ 0x4D49);
    if cfg.mine_ema_decay > 0.0 {
        mine = mine.with_ema_correction(cfg.mine_ema_decay);
    }
    let tc = TrainConfig {
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        mine_lr: cfg.mine_lr,
        epochs_per_phase: cfg.epochs_per_phase,
        max_rounds: cfg.max_rounds,
        unk_noise_prob: cfg.unk_noise_prob,
        seed: cfg.train_seed,
        convergence_delta: 1e-3,
    };
    let history = train(&mut model, &mut mine, &seqs, &tc)?;

    model.save(checkpoint)?;

    let meta_file = sidecar(checkpoint, ".meta");
    let mut meta = String::new();
    let _ = writeln!(meta, "vocab_size = {}", jscc_cfg.vocab_size);
    let _ = writeln!(meta, "max_len = {}", jscc_cfg.max_len);
    let _ = writeln!(meta, "model_dim = {}", jscc_cfg.model_dim);
    let _ = writeln!(meta, "heads = {}", jscc_cfg.heads);
    let _ = writeln!(meta, "ff_dim = {}", jscc_cfg.ff_dim);
    let _ = writeln!(meta, "layers = {}", jscc_cfg.layers);
    let _ = writeln!(
        meta,
        "channel_dim_per_token = {}",
        jscc_cfg.channel_dim_per_token
    );
    let _ = writeln!(meta, "lambda_mi = {}", jscc_cfg.lambda_mi);
    let _ = writeln!(meta, "train_snr_low_db = {}", jscc_cfg.train_snr_range_db.0);
    let _ = writeln!(
        meta,
        "train_snr_high_db = {}",
        jscc_cfg.train_snr_range_db.1
    );
    let _ = writeln!(meta, "fading_h = {}", jscc_cfg.fading_h);
    let _ = writeln!(
        meta,
        "budget = {}",
        match cfg.budget {
            BudgetMode::Fixed => "fixed",
            BudgetMode::Matched => "matched",
        }
    );
    if let Some(mean) = classic_mean {
        let _ = writeln!(meta, "classic_mean_symbols = {mean}");
    }
    let _ = writeln!(meta, "train_seed = {}", cfg.train_seed);
    write_file(&meta_file, &meta)?;

    let vocab_file = sidecar(checkpoint, ".vocab");
    let mut vtext = String::new();
    for token in vocab.tokens() {
        vtext.push_str(token);
        vtext.push('\n');
    }
    write_file(&vocab_file, &vtext)?;

    let history_csv = sidecar(checkpoint, ".history.csv");
    let mut htext = String::from("round,phase,epoch,ce,mi_bound,total\n");
    for rec in &history {
        let _ = writeln!(
            htext,
            "{},{},{},{:.6},{:.6},{:.6}",
            rec.round, rec.phase, rec.epoch, rec.ce, rec.mi_bound, rec.total
        );
    }
    write_file(&history_csv, &htext)?;

    Ok(TrainSummary {
        checkpoint: checkpoint.to_path_buf(),
        meta_file,
        vocab_file,
        history_csv,
        channel_dim_per_token: channel_dim,
        classic_mean_symbols: classic_mean,
        epochs_recorded: history.len(),
        final_total_loss: history.last().map_or(f64::NAN, |r| r.total),
    })
}

fn build_codebook(sentences: &[String]) -> Result<HuffmanCodebook, HarnessError> {
    let mut bytes = Vec::new();
    for s in sentences {
        bytes.extend_from_slice(s.as_bytes());
    }
    Ok(huffman_build(&byte_frequencies(&bytes))?)
}

struct MetaView {
    jscc: JsccConfig,
    budget: BudgetMode,
}

fn read_meta(path: &Path) -> Result<MetaView, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let kv = super::parse_kv(&text, path)?;
    let get = |key: &str| -> Result<&str, HarnessError> {
        kv.get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| HarnessError::MissingKey(format!("{key} (in {})", path.display())))
    };
    let parse_usize = |key: &str| -> Result<usize, HarnessError> {
        get(key)?.parse().map_err(|_| HarnessError::Config {
            path: path.display().to_string(),
            line: kv[key].1,
            msg: format!("bad value for {key}"),
        })
    };
    let parse_f64 = |key: &str| -> Result<f64, HarnessError> {
        get(key)?.parse().map_err(|_| HarnessError::Config {
            path: path.display().to_string(),
            line: kv[key].1,
            msg: format!("bad value for {key}"),
        })
    };
    let mut jscc = JsccConfig::new(parse_usize("vocab_size")?, parse_usize("max_len")?);
    jscc.model_dim = parse_usize("model_dim")?;
    jscc.heads = parse_usize("heads")?;
    jscc.ff_dim = parse_usize("ff_dim")?;
    jscc.layers = parse_usize("layers")?;
    jscc.channel_dim_per_token = parse_usize("channel_dim_per_token")?;
    jscc.lambda_mi = parse_f64("lambda_mi")?;
    jscc.train_snr_range_db = (
        parse_f64("train_snr_low_db")?,
        parse_f64("train_snr_high_db")?,
    );
    jscc.fading_h = parse_f64("fading_h")?;
    let budget = match get("budget")? {
        "matched" => BudgetMode::Matched,
        _ => BudgetMode::Fixed,
    };
    Ok(MetaView { jscc, budget })
}

fn check_meta(field: &str, expected: String, found: String) -> Result<(), HarnessError> {
    if expected != found {
        return Err(HarnessError::MetaMismatch {
            field: field.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Loads the trained codec and vocabulary behind a checkpoint,
/// cross-checking its metadata against the experiment config.
fn load_trained(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
) -> Result<(JsccModel, Vocabulary), HarnessError> {
    let meta = read_meta(&sidecar(checkpoint, ".meta"))?;
    check_meta(
        "max_len",
        cfg.max_len.to_string(),
        meta.jscc.max_len.to_string(),
    )?;
    check_meta(
        "model_dim",
        cfg.model_dim.to_string(),
        meta.jscc.model_dim.to_string(),
    )?;
    check_meta("heads", cfg.heads.to_string(), meta.jscc.heads.to_string())?;
    check_meta(
        "ff_dim",
        cfg.ff_dim.to_string(),
        meta.jscc.ff_dim.to_string(),
    )?;
    check_meta(
        "layers",
        cfg.layers.to_string(),
        meta.jscc.layers.to_string(),
    )?;
    if cfg.budget == BudgetMode::Fixed {
        check_meta(
            "channel_dim_per_token",
            cfg.channel_dim_per_token.to_string(),
            meta.jscc.channel_dim_per_token.to_string(),
        )?;
    } else {
        // A matched-mode sweep refuses a checkpoint trained at a
        // different budget.
        check_meta(
            "budget",
            "matched".into(),
            match meta.budget {
                BudgetMode::Matched => "matched".into(),
                BudgetMode::Fixed => "fixed".into(),
            },
        )?;
    }

    let vocab_path = sidecar(checkpoint, ".vocab");
    let vtext = fs::read_to_string(&vocab_path).map_err(|source| HarnessError::Io {
        path: vocab_path.display().to_string(),
        source,
    })?;
    let tokens: Vec<String> = vtext.lines().map(str::to_string).collect();
    if tokens.len() != meta.jscc.vocab_size {
        return Err(HarnessError::MetaMismatch {
            field: "vocab_size".into(),
            expected: meta.jscc.vocab_size.to_string(),
            found: tokens.len().to_string(),
        });
    }
    let vocab = Vocabulary::from_tokens(tokens);
    let model = JsccModel::load(checkpoint, meta.jscc)?;
    Ok((model, vocab))
}

struct SweepContext<'a> {
    cfg: &'a ExperimentConfig,
    eval_sentences: &'a [String],
    book: &'a HuffmanCodebook,
    rs: &'a RsParams,
    neural: Option<&'a (JsccModel, Vocabulary)>,
}

/// Runs the configured sweep: every (method, SNR, seed) row transmits
/// every eval sentence and aggregates BLEU-1..4, word accuracy, the
/// mean complex-symbol spend, and failure counts.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let train_sentences = load_corpus(&cfg.train_corpus)?;
    let eval_sentences = if cfg.eval_corpus == cfg.train_corpus {
        train_sentences.clone()
    } else {
        load_corpus(&cfg.eval_corpus)?
    };
    if train_sentences.is_empty() || eval_sentences.is_empty() {
        return Err(HarnessError::Corpus(
            crate::corpus::CorpusError::EmptyCorpus,
        ));
    }

    let book = build_codebook(&train_sentences)?;
    let rs = RsParams::new(cfg.rs_n, cfg.rs_k)?;
    let classic_mean = classic_mean_symbols(&train_sentences, &book, &rs)?;

    let methods = cfg.link.methods();
    let neural = if methods.contains(&"neural") {
        let ckpt = cfg
            .checkpoint
            .clone()
            .ok_or(HarnessError::CheckpointRequired)?;
        if !ckpt.exists() {
            if cfg.train_if_missing {
                run_training(cfg, &ckpt)?;
            } else {
                return Err(HarnessError::Io {
                    path: ckpt.display().to_string(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "checkpoint not found (set train_if_missing = true to train here)",
                    ),
                });
            }
        }
        Some(load_trained(cfg, &ckpt)?)
    } else {
        None
    };

    let neural_symbols = neural
        .as_ref()
        .map(|(model, _)| model.cfg.symbols_per_sentence());
    if cfg.budget == BudgetMode::Matched {
        if let Some(n) = neural_symbols {
            let deviation = (n as f64 - classic_mean).abs() / classic_mean;
            if deviation > 0.10 {
                return Err(HarnessError::BudgetInfeasible {
                    classic_mean,
                    neural: n,
                    deviation: deviation * 100.0,
                });
            }
        }
    }

    // The decoded-text hook comes from the preferred method at the
    // strongest SNR and the first seed.
    let hook_method = if methods.contains(&"neural") {
        "neural"
    } else {
        "classic"
    };
    let hook_snr = cfg
        .snr_points_db
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut tasks: Vec<(&'static str, f64, usize)> = Vec::new();
    for &method in &methods {
        for &snr in &cfg.snr_points_db {
            for seed_idx in 0..cfg.seeds.len() {
                tasks.push((method, snr, seed_idx));
            }
        }
    }

    let ctx = SweepContext {
        cfg,
        eval_sentences: &eval_sentences,
        book: &book,
        rs: &rs,
        neural: neural.as_ref(),
    };

    // Row plus, for the hook task only, the decoded sentences.
    type Slot = Option<(SweepRow, Option<Vec<String>>)>;
    let slots: Mutex<Vec<Slot>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let workers = cfg.threads.max(1).min(tasks.len().max(1));
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<(), HarnessError> {
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= tasks.len() {
                        return Ok(());
                    }
                    let (method, snr, seed_idx) = tasks[i];
                    let collect = method == hook_method && snr == hook_snr && seed_idx == 0;
                    let out = eval_row(&ctx, method, snr, seed_idx, collect)?;
                    slots.lock().unwrap()[i] = Some(out);
                }
            }));
        }
        for h in handles {
            h.join().expect("sweep worker panicked")?;
        }
        Ok(())
    })?;

    let mut decoded = Vec::new();
    let mut rows = Vec::new();
    for slot in slots.into_inner().unwrap() {
        let (row, dec) = slot.expect("all tasks completed");
        if let Some(d) = dec {
            decoded = d;
        }
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
            .then(a.seed.cmp(&b.seed))
    });

    Ok(SweepResult {
        rows,
        decoded,
        classic_mean_symbols: Some(classic_mean),
        neural_symbols_per_sentence: neural_symbols,
    })
}

fn channel_config(cfg: &ExperimentConfig, snr_db: f64, seed: u64) -> ChannelConfig {
    match cfg.channel {
        ChannelKind::Awgn => ChannelConfig::awgn(snr_db, seed),
        ChannelKind::FixedFading => ChannelConfig::fixed_fading(cfg.fading_h, snr_db, seed),
    }
}

fn eval_row(
    ctx: &SweepContext<'_>,
    method: &str,
    snr_db: f64,
    seed_idx: usize,
    collect_decoded: bool,
) -> Result<(SweepRow, Option<Vec<String>>), HarnessError> {
    let cfg = ctx.cfg;
    let seed_value = cfg.seeds[seed_idx];
    let row_seed = derive_seed(seed_value, method, snr_db.to_bits(), seed_idx as u64);

    let mut bleu_sums = [0.0f64; 4];
    let mut acc_sum = 0.0;
    let mut symbol_sum = 0usize;
    let mut failed = 0usize;
    let mut decoded_lines = collect_decoded.then(Vec::new);

    let weights: Vec<BleuWeights> = (1..=4).map(BleuWeights::uniform).collect();
    for (si, sentence) in ctx.eval_sentences.iter().enumerate() {
        let sentence_seed = row_seed ^ si as u64;
        let ch = channel_config(cfg, snr_db, sentence_seed);
        let mut rng = Rng64::new(sentence_seed);

        let (decoded, symbols, sentence_failed) = match method {
            "classic" => match classic_transmit_sentence(sentence, ctx.book, ctx.rs, &ch, &mut rng)
            {
                Ok((decoded, stats)) => (decoded, stats.complex_symbols, stats.corrupted),
                // A sentence the codebook cannot express transmits
                // nothing and counts as failed.
                Err(crate::classic::ClassicError::Huffman(_)) => (String::new(), 0, true),
                Err(e) => return Err(e.into()),
            },
            "neural" => {
                let (model, vocab) = ctx.neural.expect("neural context present");
                let seq = encode_sentence(vocab, sentence, model.cfg.max_len);
                let (out, symbols) = transmit(model, &[seq], &ch, &mut rng)?;
                let text = decode_tokens(vocab, &out[0].ids).expect("argmax ids are in range");
                let failed = text.is_empty() && !sentence.is_empty();
                (text, symbols, failed)
            }
            other => unreachable!("unknown method {other}"),
        };

        let reference = tokenize(sentence);
        let candidate = tokenize(&decoded);
        for (k, w) in weights.iter().enumerate() {
            bleu_sums[k] += bleu(&candidate, &reference, w);
        }
        acc_sum += word_accuracy(&candidate, &reference);
        symbol_sum += symbols;
        if sentence_failed {
            failed += 1;
        }
        if let Some(lines) = decoded_lines.as_mut() {
            lines.push(decoded);
        }
    }

    let n = ctx.eval_sentences.len() as f64;
    let row = SweepRow {
        method: method.to_string(),
        snr_db,
        seed: seed_value,
        bleu: [
            bleu_sums[0] / n,
            bleu_sums[1] / n,
            bleu_sums[2] / n,
            bleu_sums[3] / n,
        ],
        word_accuracy: acc_sum / n,
        complex_symbols_per_sentence_mean: symbol_sum as f64 / n,
        sentences_failed: failed,
    };
    Ok((row, decoded_lines))
}
