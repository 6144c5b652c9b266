//! Experiment runner: flat key=value configuration, SNR sweeps over
//! both links, CSV emission, and reproducible seeding.

mod sweep;

pub use sweep::{run_sweep, run_training, SweepResult, SweepRow, TrainSummary};

use crate::channel::ChannelKind;
use crate::classic::ClassicError;
use crate::corpus::CorpusError;
use crate::jscc::JsccError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("unknown config key \"{key}\" in {path}")]
    UnknownKey { path: String, key: String },
    #[error("missing required config key \"{0}\"")]
    MissingKey(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Rs(#[from] crate::classic::rs::RsError),
    #[error(transparent)]
    Huffman(#[from] crate::classic::huffman::HuffmanError),
    #[error(transparent)]
    Jscc(#[from] JsccError),
    #[error(
        "a neural sweep needs a checkpoint: set checkpoint= in the config or pass --checkpoint"
    )]
    CheckpointRequired,
    #[error(
        "checkpoint metadata mismatch for {field}: checkpoint has {found}, config wants {expected}"
    )]
    MetaMismatch {
        field: String,
        expected: String,
        found: String,
    },
    #[error(
        "matched budget infeasible: classic mean is {classic_mean:.2} symbols/sentence; nearest \
         even channel dim gives {neural} ({deviation:.1}% off, limit 10%)"
    )]
    BudgetInfeasible {
        classic_mean: f64,
        neural: usize,
        deviation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSelection {
    Both,
    Neural,
    Classic,
}

impl LinkSelection {
    pub fn methods(&self) -> Vec<&'static str> {
        match self {
            LinkSelection::Both => vec!["classic", "neural"],
            LinkSelection::Neural => vec!["neural"],
            LinkSelection::Classic => vec!["classic"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// Use `channel_dim_per_token` exactly as configured.
    Fixed,
    /// Choose `channel_dim_per_token` so neural symbols/sentence land
    /// within 10% of the classic link's train-corpus mean.
    Matched,
}

/// Everything a run needs, parsed from a flat key=value file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train_corpus: PathBuf,
    pub eval_corpus: PathBuf,
    pub link: LinkSelection,
    pub snr_points_db: Vec<f64>,
    pub seeds: Vec<u64>,
    pub channel: ChannelKind,
    pub fading_h: f64,
    pub rs_n: usize,
    pub rs_k: usize,
    pub budget: BudgetMode,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: usize,
    pub train_if_missing: bool,

    pub max_len: usize,
    pub min_freq: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub layers: usize,
    pub channel_dim_per_token: usize,
    pub lambda_mi: f64,
    pub train_snr_low_db: f64,
    pub train_snr_high_db: f64,
    pub epochs_per_phase: usize,
    pub max_rounds: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub mine_lr: f64,
    /// Moving-average decay for the MI-critic gradient correction;
    /// 0 disables it (raw gradient).
    pub mine_ema_decay: f64,
    pub unk_noise_prob: f64,
    pub train_seed: u64,
}

impl ExperimentConfig {
    /// A config with every key at its documented default; equivalent to
    /// parsing a file containing only `train_corpus = <path>`.
    pub fn new(train_corpus: PathBuf) -> Self {
        Self::defaults(train_corpus)
    }

    /// Defaults for every key except the required `train_corpus`.
    fn defaults(train_corpus: PathBuf) -> Self {
        ExperimentConfig {
            eval_corpus: train_corpus.clone(),
            train_corpus,
            link: LinkSelection::Both,
            snr_points_db: vec![0.0, 3.0, 6.0, 9.0, 12.0],
            seeds: vec![1, 2, 3],
            channel: ChannelKind::Awgn,
            fading_h: 1.0,
            rs_n: 42,
            rs_k: 30,
            budget: BudgetMode::Fixed,
            checkpoint: None,
            out: PathBuf::from("sweep.csv"),
            threads: 1,
            train_if_missing: false,
            max_len: 32,
            min_freq: 1,
            model_dim: 128,
            heads: 8,
            ff_dim: 512,
            layers: 3,
            channel_dim_per_token: 16,
            lambda_mi: 0.05,
            train_snr_low_db: 5.0,
            train_snr_high_db: 10.0,
            epochs_per_phase: 8,
            max_rounds: 3,
            batch_size: 16,
            lr: 1e-3,
            mine_lr: 1e-3,
            mine_ema_decay: 0.0,
            unk_noise_prob: 0.1,
            train_seed: 1,
        }
    }
}

/// Parses a flat `key = value` config file. Lines starting with `#`
/// and blank lines are skipped; list values are comma-separated;
/// unknown keys are rejected by name.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let pairs = parse_kv(&text, path)?;
    let path_str = path.display().to_string();

    let train_corpus = pairs
        .get("train_corpus")
        .ok_or_else(|| HarnessError::MissingKey("train_corpus".into()))?;
    let mut cfg = ExperimentConfig::defaults(PathBuf::from(&train_corpus.0));

    for (key, (value, line)) in &pairs {
        let err = |msg: String| HarnessError::Config {
            path: path_str.clone(),
            line: *line,
            msg,
        };
        match key.as_str() {
            "train_corpus" => cfg.train_corpus = PathBuf::from(value),
            "eval_corpus" => cfg.eval_corpus = PathBuf::from(value),
            "link" => {
                cfg.link = match value.as_str() {
                    "both" => LinkSelection::Both,
                    "neural" => LinkSelection::Neural,
                    "classic" => LinkSelection::Classic,
                    other => {
                        return Err(err(format!(
                            "link must be both|neural|classic, got {other}"
                        )))
                    }
                }
            }
            "snr_points_db" => {
                cfg.snr_points_db =
                    parse_list(value).map_err(|e| err(format!("snr_points_db: {e}")))?;
                if cfg.snr_points_db.is_empty() {
                    return Err(err("snr_points_db must be non-empty".into()));
                }
            }
            "seeds" => {
                cfg.seeds = parse_list(value).map_err(|e| err(format!("seeds: {e}")))?;
                if cfg.seeds.is_empty() {
                    return Err(err("seeds must be non-empty".into()));
                }
            }
            "channel" => {
                cfg.channel = match value.as_str() {
                    "awgn" => ChannelKind::Awgn,
                    "fixed_fading" => ChannelKind::FixedFading,
                    other => {
                        return Err(err(format!(
                            "channel must be awgn|fixed_fading, got {other}"
                        )))
                    }
                }
            }
            "fading_h" => {
                cfg.fading_h = parse_one(value).map_err(|e| err(format!("fading_h: {e}")))?
            }
            "rs_n" => cfg.rs_n = parse_one(value).map_err(|e| err(format!("rs_n: {e}")))?,
            "rs_k" => cfg.rs_k = parse_one(value).map_err(|e| err(format!("rs_k: {e}")))?,
            "budget" => {
                cfg.budget = match value.as_str() {
                    "fixed" => BudgetMode::Fixed,
                    "matched" => BudgetMode::Matched,
                    other => return Err(err(format!("budget must be fixed|matched, got {other}"))),
                }
            }
            "checkpoint" => cfg.checkpoint = Some(PathBuf::from(value)),
            "out" => cfg.out = PathBuf::from(value),
            "threads" => {
                cfg.threads = parse_one(value).map_err(|e| err(format!("threads: {e}")))?
            }
            "train_if_missing" => {
                cfg.train_if_missing = value
                    .parse()
                    .map_err(|_| err(format!("train_if_missing must be true|false, got {value}")))?
            }
            "max_len" => {
                cfg.max_len = parse_one(value).map_err(|e| err(format!("max_len: {e}")))?
            }
            "min_freq" => {
                cfg.min_freq = parse_one(value).map_err(|e| err(format!("min_freq: {e}")))?
            }
            "model_dim" => {
                cfg.model_dim = parse_one(value).map_err(|e| err(format!("model_dim: {e}")))?
            }
            "heads" => cfg.heads = parse_one(value).map_err(|e| err(format!("heads: {e}")))?,
            "ff_dim" => cfg.ff_dim = parse_one(value).map_err(|e| err(format!("ff_dim: {e}")))?,
            "layers" => cfg.layers = parse_one(value).map_err(|e| err(format!("layers: {e}")))?,
            "channel_dim_per_token" => {
                cfg.channel_dim_per_token =
                    parse_one(value).map_err(|e| err(format!("channel_dim_per_token: {e}")))?
            }
            "lambda_mi" => {
                cfg.lambda_mi = parse_one(value).map_err(|e| err(format!("lambda_mi: {e}")))?
            }
            "train_snr_low_db" => {
                cfg.train_snr_low_db =
                    parse_one(value).map_err(|e| err(format!("train_snr_low_db: {e}")))?
            }
            "train_snr_high_db" => {
                cfg.train_snr_high_db =
                    parse_one(value).map_err(|e| err(format!("train_snr_high_db: {e}")))?
            }
            "epochs_per_phase" => {
                cfg.epochs_per_phase =
                    parse_one(value).map_err(|e| err(format!("epochs_per_phase: {e}")))?
            }
            "max_rounds" => {
                cfg.max_rounds = parse_one(value).map_err(|e| err(format!("max_rounds: {e}")))?
            }
            "batch_size" => {
                cfg.batch_size = parse_one(value).map_err(|e| err(format!("batch_size: {e}")))?
            }
            "lr" => cfg.lr = parse_one(value).map_err(|e| err(format!("lr: {e}")))?,
            "mine_lr" => {
                cfg.mine_lr = parse_one(value).map_err(|e| err(format!("mine_lr: {e}")))?
            }
            "mine_ema_decay" => {
                cfg.mine_ema_decay =
                    parse_one(value).map_err(|e| err(format!("mine_ema_decay: {e}")))?
            }
            "unk_noise_prob" => {
                cfg.unk_noise_prob =
                    parse_one(value).map_err(|e| err(format!("unk_noise_prob: {e}")))?
            }
            "train_seed" => {
                cfg.train_seed = parse_one(value).map_err(|e| err(format!("train_seed: {e}")))?
            }
            other => {
                return Err(HarnessError::UnknownKey {
                    path: path_str,
                    key: other.to_string(),
                })
            }
        }
    }
    if cfg.channel == ChannelKind::Awgn {
        if pairs.contains_key("fading_h") && cfg.fading_h != 1.0 {
            return Err(HarnessError::Config {
                path: path_str,
                line: pairs["fading_h"].1,
                msg: format!("awgn channel requires fading_h = 1, got {}", cfg.fading_h),
            });
        }
        cfg.fading_h = 1.0;
    } else if !pairs.contains_key("fading_h") {
        cfg.fading_h = 0.9;
    }
    Ok(cfg)
}

/// Shared flat key=value reader; returns key -> (value, line number).
pub(crate) fn parse_kv(
    text: &str,
    path: &Path,
) -> Result<BTreeMap<String, (String, usize)>, HarnessError> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("expected key = value, got \"{line}\""),
            });
        };
        pairs.insert(key.trim().to_string(), (value.trim().to_string(), i + 1));
    }
    Ok(pairs)
}

fn parse_one<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("cannot parse \"{value}\": {e}"))
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_one)
        .collect()
}

/// Writes sweep rows as CSV: a header then one row per
/// (method, snr, seed), floats with six decimals, sorted.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    let mut text = String::from(
        "method,snr_db,seed,bleu1,bleu2,bleu3,bleu4,word_accuracy,complex_symbols_per_sentence_mean,sentences_failed\n",
    );
    for row in &result.rows {
        writeln!(
            text,
            "{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            row.method,
            row.snr_db,
            row.seed,
            row.bleu[0],
            row.bleu[1],
            row.bleu[2],
            row.bleu[3],
            row.word_accuracy,
            row.complex_symbols_per_sentence_mean,
            row.sentences_failed
        )
        .expect("string write");
    }
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the decoded-sentence hook file `<out>.decoded.txt`, one line
/// per eval sentence, aligned with the input order.
pub fn write_decoded(result: &SweepResult, out: &Path) -> Result<PathBuf, HarnessError> {
    let mut name = out.as_os_str().to_owned();
    name.push(".decoded.txt");
    let path = PathBuf::from(name);
    let mut text = String::new();
    for line in &result.decoded {
        text.push_str(line);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}
