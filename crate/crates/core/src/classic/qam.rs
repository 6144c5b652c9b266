//! Gray-mapped 64-QAM: 6 bits per complex symbol on an 8x8 grid at
//! levels {+-1, +-3, +-5, +-7}/sqrt(42), which makes the average
//! constellation energy exactly 1. The first 3 bits of each group
//! select the I level, the last 3 the Q level.

use super::bits::BitVec;
use crate::channel::SymbolBlock;

/// 1/sqrt(42): unit average power scaling.
pub const QAM64_SCALE: f64 = 0.154_303_349_962_091_9;

const LEVELS: [f64; 8] = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0];

/// Per-axis Gray table: 000 -> -7 up to 100 -> +7.
const GRAY_OF_INDEX: [u8; 8] = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];

fn index_of_gray(gray: u8) -> usize {
    GRAY_OF_INDEX.iter().position(|&g| g == gray & 0x7).unwrap()
}

fn level_of_gray(gray: u8) -> f64 {
    LEVELS[index_of_gray(gray)] * QAM64_SCALE
}

/// Nearest-level hard decision on an equalized axis value.
fn nearest_index(value: f64) -> usize {
    let v = value / QAM64_SCALE;
    // Decision thresholds sit at the even levels -6, -4, ... Map to
    // an index by clamping ((v + 7) / 2 + 0.5).
    let idx = ((v + 7.0) / 2.0).round();
    idx.clamp(0.0, 7.0) as usize
}

/// Maps a bit sequence to 64-QAM symbols, zero-padding to a multiple
/// of 6 bits. Returns the symbol block and the number of pad bits.
pub fn qam64_modulate(bits: &BitVec) -> (SymbolBlock, usize) {
    let pad = (6 - bits.len() % 6) % 6;
    let groups = (bits.len() + pad) / 6;
    let mut values = Vec::with_capacity(groups * 2);
    let bit = |i: usize| if i < bits.len() { bits.get(i) } else { false };
    for g in 0..groups {
        let base = g * 6;
        let mut i_gray = 0u8;
        let mut q_gray = 0u8;
        for b in 0..3 {
            i_gray = i_gray << 1 | bit(base + b) as u8;
            q_gray = q_gray << 1 | bit(base + 3 + b) as u8;
        }
        values.push(level_of_gray(i_gray));
        values.push(level_of_gray(q_gray));
    }
    (SymbolBlock::new(values).expect("even length"), pad)
}

/// Hard-decision demodulation: equalize by `h`, slice each axis to the
/// nearest level, and invert the Gray table. Output length is 6 bits
/// per complex symbol; callers truncate any pad bits themselves.
pub fn qam64_demodulate(block: &SymbolBlock, h: f64) -> BitVec {
    assert!(h > 0.0, "channel gain must be positive");
    let mut bits = BitVec::with_capacity(block.complex_len() * 6);
    for pair in block.values().chunks_exact(2) {
        let i_gray = GRAY_OF_INDEX[nearest_index(pair[0] / h)];
        let q_gray = GRAY_OF_INDEX[nearest_index(pair[1] / h)];
        bits.push_bits(i_gray as u32, 3);
        bits.push_bits(q_gray as u32, 3);
    }
    bits
}

/// Analytic nearest-neighbor BER approximation for Gray 64-QAM over
/// AWGN at Es/N0 = `snr_db`: `(4/6) * (1 - 1/8) * Q(sqrt(3*snr/63))`.
pub fn qam64_ber_approx(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    (4.0 / 6.0) * (1.0 - 1.0 / 8.0) * q_function((3.0 * snr / 63.0).sqrt())
}

/// Gaussian tail probability Q(x) = 0.5 * erfc(x / sqrt(2)).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function, Abramowitz & Stegun 7.1.26 applied to
/// exp(-x^2); absolute error below 1.5e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let tail = poly * (-z * z).exp();
    if x >= 0.0 {
        tail
    } else {
        2.0 - tail
    }
}
