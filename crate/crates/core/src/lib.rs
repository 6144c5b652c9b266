//! Link-level simulator and library for semantic text transmission
//! over noisy wireless channels.
//!
//! Two links share one channel model (`y = h*x + n` over interleaved
//! complex symbol pairs):
//!
//! - a transformer joint source-channel codec trained end-to-end with
//!   a mutual-information regularizer ([`jscc`], [`mine`], [`nnkit`]);
//! - a conventional chain of Huffman source coding, Reed-Solomon over
//!   GF(256), and Gray-mapped 64-QAM ([`classic`]).
//!
//! [`metrics`] scores decoded text against the original with BLEU and
//! word accuracy, and [`harness`] runs reproducible BLEU-vs-SNR sweeps
//! over both links and writes them as CSV.

pub mod channel;
pub mod classic;
pub mod corpus;
pub mod harness;
pub mod jscc;
pub mod metrics;
pub mod mine;
pub mod nnkit;
pub mod rng;
