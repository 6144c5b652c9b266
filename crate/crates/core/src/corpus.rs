//! Sentence corpora, vocabularies, and token-id sequences.
//!
//! Tokenization is lowercase whitespace word-splitting with ASCII
//! punctuation stripped from word edges. Four ids are reserved:
//! pad = 0, start = 1, end = 2, unk = 3.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const PAD_ID: u32 = 0;
pub const START_ID: u32 = 1;
pub const END_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const RESERVED: usize = 4;

pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line} is not valid UTF-8")]
    NotUtf8 { path: String, line: usize },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("token id {0} is outside the vocabulary (size {1})")]
    IdOutOfRange(u32, usize),
}

/// Splits a sentence into lowercase words, trimming ASCII punctuation
/// from word edges. Words that are pure punctuation vanish.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Word-to-id table with the four reserved ids at 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from sentences. Every word with frequency
    /// of at least `min_freq` gets an id; ids are assigned by
    /// descending frequency, ties broken lexicographically, starting
    /// at 4.
    pub fn build(sentences: &[String], min_freq: usize) -> Result<Self, CorpusError> {
        if sentences.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut freq: HashMap<String, usize> = HashMap::new();
        for s in sentences {
            for w in tokenize(s) {
                *freq.entry(w).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> =
            freq.into_iter().filter(|(_, c)| *c >= min_freq).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut id_to_token: Vec<String> = vec![
            "<pad>".to_string(),
            "<start>".to_string(),
            "<end>".to_string(),
            UNK_TOKEN.to_string(),
        ];
        id_to_token.extend(kept.into_iter().map(|(w, _)| w));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    /// Reconstructs a vocabulary from tokens listed in id order
    /// (reserved ids first), as produced by [`Vocabulary::tokens`].
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token: tokens,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    /// All tokens in id order, including the reserved ones.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }
}

/// A fixed-length token-id sequence: start marker, word ids, end
/// marker, then padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Count of non-pad positions, including the start and end markers.
    pub true_len: usize,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}

/// Reads a newline-delimited UTF-8 corpus file: one sentence per
/// non-empty line, trimmed, order preserved.
pub fn load_corpus(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut sentences = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| CorpusError::NotUtf8 {
            path: path.display().to_string(),
            line: i + 1,
        })?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            sentences.push(trimmed.to_string());
        }
    }
    Ok(sentences)
}

/// Encodes a sentence as `[start, word ids, end, pad...]` of length
/// `max_len`. Unknown words map to unk; sentences longer than
/// `max_len - 2` words are truncated before the end marker.
pub fn encode_sentence(vocab: &Vocabulary, sentence: &str, max_len: usize) -> TokenSequence {
    assert!(max_len >= 3, "max_len must be at least 3");
    let words = tokenize(sentence);
    let keep = words.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(START_ID);
    for w in &words[..keep] {
        ids.push(vocab.id_of(w).unwrap_or(UNK_ID));
    }
    ids.push(END_ID);
    let true_len = ids.len();
    ids.resize(max_len, PAD_ID);
    TokenSequence { ids, true_len }
}

/// Inverse of [`encode_sentence`]: words joined by single spaces,
/// stopping at the first end marker; start and pad are skipped; unk
/// renders as `<unk>`.
pub fn decode_tokens(vocab: &Vocabulary, ids: &[u32]) -> Result<String, CorpusError> {
    let mut words: Vec<&str> = Vec::new();
    for &id in ids {
        if id == END_ID {
            break;
        }
        if id == START_ID || id == PAD_ID {
            continue;
        }
        match vocab.token_of(id) {
            Some(tok) => words.push(tok),
            None => return Err(CorpusError::IdOutOfRange(id, vocab.size())),
        }
    }
    Ok(words.join(" "))
}
