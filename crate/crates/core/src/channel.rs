//! Physical channel model: fixed-gain fading plus additive white
//! Gaussian noise, `y = h*x + n`.
//!
//! Complex symbols are stored as interleaved real pairs `(re, im)`, so
//! a block of `2k` reals carries `k` complex symbols. SNR is Es/N0:
//! average complex-symbol energy over total complex noise variance,
//! assuming the transmitted block is normalized to unit average
//! complex-symbol power.

use crate::rng::Rng64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("symbol block must have even length, got {0}")]
    OddLength(usize),
    #[error("cannot normalize an all-zero symbol block")]
    AllZeroBlock,
}

/// A block of channel symbols: interleaved `(re, im)` real pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    values: Vec<f64>,
}

impl SymbolBlock {
    pub fn new(values: Vec<f64>) -> Result<Self, ChannelError> {
        if !values.len().is_multiple_of(2) {
            return Err(ChannelError::OddLength(values.len()));
        }
        Ok(SymbolBlock { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of real dimensions (twice the complex symbol count).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of complex symbols in the block.
    pub fn complex_len(&self) -> usize {
        self.values.len() / 2
    }

    /// Mean power per complex symbol, `sum(v^2) / (len/2)`.
    pub fn average_complex_power(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let sum_sq: f64 = self.values.iter().map(|v| v * v).sum();
        sum_sq / self.complex_len() as f64
    }
}

/// Channel kind. `Awgn` forces `h = 1`; `FixedFading` scales by a
/// known constant gain before the noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    FixedFading,
}

/// Channel parameters. Identical `(block, config, seed)` triples give
/// bit-identical outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// Channel gain. Always 1 for AWGN.
    pub h: f64,
    /// Es/N0 in dB per complex symbol at unit signal power.
    pub snr_db: f64,
    pub seed: u64,
    /// Forces the noise term to zero regardless of `snr_db`.
    pub noiseless: bool,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        ChannelConfig {
            kind: ChannelKind::Awgn,
            h: 1.0,
            snr_db,
            seed,
            noiseless: false,
        }
    }

    pub fn fixed_fading(h: f64, snr_db: f64, seed: u64) -> Self {
        assert!(h > 0.0, "channel gain must be positive");
        ChannelConfig {
            kind: ChannelKind::FixedFading,
            h,
            snr_db,
            seed,
            noiseless: false,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }
}

/// Scales a block so its average complex-symbol power is exactly 1.
pub fn normalize_power(block: &SymbolBlock) -> Result<SymbolBlock, ChannelError> {
    let power = block.average_complex_power();
    if power == 0.0 {
        return Err(ChannelError::AllZeroBlock);
    }
    let scale = 1.0 / power.sqrt();
    Ok(SymbolBlock {
        values: block.values.iter().map(|v| v * scale).collect(),
    })
}

/// Noise standard deviation per real dimension for unit-power symbols:
/// `sigma = sqrt(10^(-snr_db/10) / 2)`.
pub fn noise_sigma(snr_db: f64) -> f64 {
    (10f64.powf(-snr_db / 10.0) / 2.0).sqrt()
}

/// Applies `y[i] = h * x[i] + sigma * g[i]` with `g` standard normal
/// draws from `rng`. The noise realization depends only on the rng
/// state, never on the input values.
pub fn apply_channel(block: &SymbolBlock, cfg: &ChannelConfig, rng: &mut Rng64) -> SymbolBlock {
    let sigma = if cfg.noiseless {
        0.0
    } else {
        noise_sigma(cfg.snr_db)
    };
    let values = block
        .values
        .iter()
        .map(|&x| cfg.h * x + sigma * rng.next_gaussian())
        .collect();
    SymbolBlock { values }
}
