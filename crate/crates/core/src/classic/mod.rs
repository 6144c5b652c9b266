//! The conventional text link: Huffman source coding, Reed-Solomon
//! channel coding over GF(256), and Gray-mapped 64-QAM with
//! hard-decision demodulation.

pub mod bits;
pub mod gf256;
pub mod huffman;
pub mod qam;
pub mod rs;

use crate::channel::{apply_channel, ChannelConfig};
use crate::rng::Rng64;
use bits::BitVec;
use huffman::{huffman_decode_prefix, huffman_encode, HuffmanCodebook, HuffmanError};
use rs::{rs_decode, rs_encode, RsError, RsParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicError {
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-sentence accounting for the classic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkStats {
    /// Complex symbols actually transmitted: ceil(coded_bits / 6).
    pub complex_symbols: usize,
    pub rs_blocks: usize,
    pub rs_blocks_failed: usize,
    /// Bit errors on the coded stream, before RS correction.
    pub bit_errors_pre_rs: usize,
    /// Bit errors on the payload after RS correction.
    pub bit_errors_post_rs: usize,
    /// Zero bits appended to reach a multiple of 6 for modulation.
    pub qam_pad_bits: usize,
    /// True when any stage failed to reproduce its input exactly.
    pub corrupted: bool,
}

/// Huffman bits framed into whole RS blocks. The payload starts with a
/// big-endian u16 counting total padding bits (partial-byte padding
/// plus zero fill bytes); the remaining bytes carry the bit stream.
#[derive(Debug, Clone)]
struct FramedPayload {
    /// Header + packed bits + zero fill; length = blocks * k.
    payload: Vec<u8>,
}

fn frame(
    book: &HuffmanCodebook,
    params: &RsParams,
    sentence: &str,
) -> Result<FramedPayload, ClassicError> {
    let bits = huffman_encode(book, sentence.as_bytes())?;
    let data_bytes = bits.len().div_ceil(8);
    let blocks = (2 + data_bytes).div_ceil(params.k());
    let padded_total = blocks * params.k();
    let pad_bits = (padded_total - 2) * 8 - bits.len();
    // Padding never exceeds one block plus a partial byte, and k <= 255,
    // so the u16 header always fits.
    debug_assert!(pad_bits <= u16::MAX as usize);
    let mut payload = Vec::with_capacity(padded_total);
    payload.extend_from_slice(&(pad_bits as u16).to_be_bytes());
    payload.extend_from_slice(&bits.to_bytes());
    payload.resize(padded_total, 0);
    Ok(FramedPayload { payload })
}

/// Best-effort inverse of [`frame`]: returns the decoded sentence and
/// whether every stage was clean.
fn deframe(book: &HuffmanCodebook, payload: &[u8]) -> (String, bool) {
    if payload.len() < 2 {
        return (String::new(), false);
    }
    let max_bits = (payload.len() - 2) * 8;
    let pad_bits = u16::from_be_bytes([payload[0], payload[1]]) as usize;
    let (bit_len, header_ok) = if pad_bits <= max_bits {
        (max_bits - pad_bits, true)
    } else {
        (max_bits, false)
    };
    let mut stream = BitVec::from_bytes(&payload[2..]);
    stream = stream.iter().take(bit_len).collect();
    let (bytes, clean) = huffman_decode_prefix(book, &stream);
    match String::from_utf8(bytes) {
        Ok(s) => (s, clean && header_ok),
        Err(e) => {
            let s = String::from_utf8_lossy(e.as_bytes()).into_owned();
            (s, false)
        }
    }
}

/// Complex symbols the classic chain spends on a sentence, without
/// running the channel.
pub fn classic_symbol_count(
    book: &HuffmanCodebook,
    params: &RsParams,
    sentence: &str,
) -> Result<usize, ClassicError> {
    let framed = frame(book, params, sentence)?;
    let blocks = framed.payload.len() / params.k();
    Ok((blocks * params.n() * 8).div_ceil(6))
}

/// Runs one sentence through the full chain:
/// UTF-8 -> Huffman -> framing -> RS -> 64-QAM -> channel -> inverse.
///
/// RS blocks that fail to decode pass their systematic symbols through
/// uncorrected, like a real link; the result is then best-effort.
pub fn classic_transmit_sentence(
    sentence: &str,
    book: &HuffmanCodebook,
    params: &RsParams,
    cfg: &ChannelConfig,
    rng: &mut Rng64,
) -> Result<(String, LinkStats), ClassicError> {
    let framed = frame(book, params, sentence)?;
    let blocks = framed.payload.len() / params.k();

    let mut coded = Vec::with_capacity(blocks * params.n());
    for chunk in framed.payload.chunks_exact(params.k()) {
        coded.extend(rs_encode(params, chunk)?);
    }
    let coded_bits = BitVec::from_bytes(&coded);
    let (tx_block, qam_pad_bits) = qam::qam64_modulate(&coded_bits);

    let rx_block = apply_channel(&tx_block, cfg, rng);
    let rx_bits_full = qam::qam64_demodulate(&rx_block, cfg.h);
    let rx_bits: BitVec = rx_bits_full.iter().take(coded_bits.len()).collect();
    let bit_errors_pre_rs = coded_bits.hamming_distance(&rx_bits);

    let rx_bytes = rx_bits.to_bytes();
    let mut payload = Vec::with_capacity(framed.payload.len());
    let mut rs_blocks_failed = 0;
    for chunk in rx_bytes.chunks_exact(params.n()) {
        match rs_decode(params, chunk) {
            Ok((data, _)) => payload.extend(data),
            Err(RsError::DecodeFailure) => {
                rs_blocks_failed += 1;
                payload.extend_from_slice(&chunk[..params.k()]);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let bit_errors_post_rs =
        BitVec::from_bytes(&framed.payload).hamming_distance(&BitVec::from_bytes(&payload));
    let (decoded, clean) = deframe(book, &payload);

    let stats = LinkStats {
        complex_symbols: tx_block.complex_len(),
        rs_blocks: blocks,
        rs_blocks_failed,
        bit_errors_pre_rs,
        bit_errors_post_rs,
        qam_pad_bits,
        corrupted: rs_blocks_failed > 0 || !clean,
    };
    Ok((decoded, stats))
}

/// Hex dump of the transmit chain, one stage per line
/// (`name: hex-of-packed-bits`), for diffing against other
/// implementations. Stages: source bytes, Huffman bits, framed
/// payload, RS-coded stream, modulated bit stream (with QAM padding).
pub fn dump_stages(
    sentence: &str,
    book: &HuffmanCodebook,
    params: &RsParams,
) -> Result<String, ClassicError> {
    use std::fmt::Write as _;
    let hex = |bytes: &[u8]| -> String { bytes.iter().map(|b| format!("{b:02x}")).collect() };
    let mut out = String::new();
    let _ = writeln!(out, "source: {}", hex(sentence.as_bytes()));
    let bits = huffman_encode(book, sentence.as_bytes())?;
    let _ = writeln!(out, "huffman[{}]: {}", bits.len(), hex(&bits.to_bytes()));
    let framed = frame(book, params, sentence)?;
    let _ = writeln!(out, "payload: {}", hex(&framed.payload));
    let mut coded = Vec::new();
    for chunk in framed.payload.chunks_exact(params.k()) {
        coded.extend(rs_encode(params, chunk)?);
    }
    let _ = writeln!(out, "rs: {}", hex(&coded));
    let coded_bits = BitVec::from_bytes(&coded);
    let (_, pad) = qam::qam64_modulate(&coded_bits);
    let mut padded = coded_bits.clone();
    for _ in 0..pad {
        padded.push(false);
    }
    let _ = writeln!(
        out,
        "modulated[{}]: {}",
        padded.len(),
        hex(&padded.to_bytes())
    );
    Ok(out)
}

/// Writes [`dump_stages`] output to a text file.
pub fn dump_stages_to_file(
    path: &std::path::Path,
    sentence: &str,
    book: &HuffmanCodebook,
    params: &RsParams,
) -> Result<(), ClassicError> {
    let text = dump_stages(sentence, book, params)?;
    std::fs::write(path, text).map_err(|source| ClassicError::Io {
        path: path.display().to_string(),
        source,
    })
}
