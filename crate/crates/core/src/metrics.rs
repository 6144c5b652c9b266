//! Text similarity scoring: BLEU with clipped n-gram precision and a
//! brevity penalty, plus positional word accuracy.

use std::collections::HashMap;

/// N-gram weights for BLEU. Must sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuWeights {
    u: Vec<f64>,
}

impl BleuWeights {
    /// Uniform weights over orders 1..=n.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1);
        BleuWeights {
            u: vec![1.0 / n as f64; n],
        }
    }

    pub fn new(u: Vec<f64>) -> Self {
        assert!(!u.is_empty());
        assert!(u.iter().all(|&w| w >= 0.0));
        let sum: f64 = u.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "weights must sum to 1");
        BleuWeights { u }
    }

    pub fn max_order(&self) -> usize {
        self.u.len()
    }
}

impl Default for BleuWeights {
    fn default() -> Self {
        BleuWeights::uniform(4)
    }
}

/// Which side of the length ratio the brevity term penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Brevity {
    /// Standard BLEU: candidates shorter than the reference are
    /// penalized by `exp(min(1 - l_ref/l_cand, 0))`.
    ShortCandidatePenalty,
    /// Transposed variant penalizing long candidates instead:
    /// `exp(min(1 - l_cand/l_ref, 0))`. Kept behind this option for
    /// compatibility with formulations that order the ratio that way.
    LongCandidatePenalty,
}

/// Sliding-window n-gram counts. Sequences shorter than `n` give an
/// empty map.
pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    assert!(n >= 1);
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram precision as a (clipped, total) pair. `total == 0`
/// flags that the candidate has no n-grams of this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Precision {
    pub clipped: usize,
    pub total: usize,
}

impl Precision {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clipped as f64 / self.total as f64
        }
    }
}

/// Modified n-gram precision: candidate counts clipped by reference
/// counts, over the total candidate n-gram count.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> Precision {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let total: usize = cand.values().sum();
    let clipped: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refc.get(gram).copied().unwrap_or(0)))
        .sum();
    Precision { clipped, total }
}

/// Sentence BLEU with standard brevity handling.
pub fn bleu(candidate: &[String], reference: &[String], weights: &BleuWeights) -> f64 {
    bleu_with_brevity(
        candidate,
        reference,
        weights,
        Brevity::ShortCandidatePenalty,
    )
}

/// Sentence BLEU: `exp(brevity + sum_n u_n ln p_n)`, with zero
/// precisions smoothed to `1/(2*total)` so the log stays finite (the
/// total is floored at 1 when the candidate has no n-grams of that
/// order). An empty candidate scores 0.
pub fn bleu_with_brevity(
    candidate: &[String],
    reference: &[String],
    weights: &BleuWeights,
    brevity: Brevity,
) -> f64 {
    debug_assert!(!reference.is_empty(), "reference must be non-empty");
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l_cand = candidate.len() as f64;
    let l_ref = reference.len() as f64;
    let brevity_term = match brevity {
        Brevity::ShortCandidatePenalty => (1.0 - l_ref / l_cand).min(0.0),
        Brevity::LongCandidatePenalty => (1.0 - l_cand / l_ref).min(0.0),
    };
    let mut log_score = brevity_term;
    for (i, &u) in weights.u.iter().enumerate() {
        let p = modified_precision(candidate, reference, i + 1);
        let smoothed = if p.clipped == 0 {
            1.0 / (2.0 * p.total.max(1) as f64)
        } else {
            p.value()
        };
        log_score += u * smoothed.ln();
    }
    log_score.exp()
}

/// Positional word accuracy: matches / max(len(candidate), len(reference)).
pub fn word_accuracy(candidate: &[String], reference: &[String]) -> f64 {
    let denom = candidate.len().max(reference.len());
    if denom == 0 {
        return 1.0;
    }
    let matches = candidate
        .iter()
        .zip(reference.iter())
        .filter(|(c, r)| c == r)
        .count();
    matches as f64 / denom as f64
}
