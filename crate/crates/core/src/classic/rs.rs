//! Systematic Reed-Solomon codes over GF(256).
//!
//! Codewords are `[data (k symbols) | parity (n-k symbols)]` with the
//! codeword polynomial written high-degree-first, so index `i` holds
//! the coefficient of `x^(n-1-i)`. The generator has roots
//! `alpha^0 .. alpha^(2t-1)`. Decoding is syndrome-based:
//! Berlekamp-Massey for the error locator, Chien search for the
//! positions, Forney for the magnitudes.

use super::gf256 as gf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RsError {
    #[error("invalid RS parameters n={n}, k={k}: need 0 < k < n <= 255 and t >= 1")]
    BadParams { n: usize, k: usize },
    #[error("expected {expected} symbols, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("more than t errors: codeword is uncorrectable")]
    DecodeFailure,
}

/// RS(n, k) over GF(256): `k` data symbols, `n - k` parity symbols,
/// correcting up to `t = (n - k) / 2` symbol errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsParams {
    n: usize,
    k: usize,
    /// Generator polynomial, ascending degree, length n - k + 1.
    generator: Vec<u8>,
}

impl RsParams {
    pub fn new(n: usize, k: usize) -> Result<Self, RsError> {
        if k == 0 || k >= n || n > 255 || (n - k) / 2 == 0 {
            return Err(RsError::BadParams { n, k });
        }
        // g(x) = prod_{i=0}^{n-k-1} (x - alpha^i)
        let mut generator = vec![1u8];
        for i in 0..(n - k) as i32 {
            generator = gf::poly_mul(&generator, &[gf::alpha_pow(i), 1]);
        }
        Ok(RsParams { n, k, generator })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Correctable symbol errors per codeword.
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }
}

/// Encodes `data` (length k) into a systematic codeword of length n.
pub fn rs_encode(params: &RsParams, data: &[u8]) -> Result<Vec<u8>, RsError> {
    if data.len() != params.k {
        return Err(RsError::WrongLength {
            expected: params.k,
            got: data.len(),
        });
    }
    // Remainder of data(x) * x^(n-k) divided by g(x), computed as a
    // feedback shift over the parity register.
    let parity_len = params.parity_len();
    let mut parity = vec![0u8; parity_len];
    for &d in data {
        let feedback = d ^ parity[0];
        parity.rotate_left(1);
        parity[parity_len - 1] = 0;
        if feedback != 0 {
            for (j, p) in parity.iter_mut().enumerate() {
                // generator is monic; skip its leading coefficient.
                *p ^= gf::mul(feedback, params.generator[parity_len - 1 - j]);
            }
        }
    }
    let mut codeword = Vec::with_capacity(params.n);
    codeword.extend_from_slice(data);
    codeword.extend_from_slice(&parity);
    Ok(codeword)
}

/// Decodes a received word of length n. Returns the data symbols and
/// the number of corrected symbol errors, or `DecodeFailure` when more
/// than t symbols are wrong.
pub fn rs_decode(params: &RsParams, received: &[u8]) -> Result<(Vec<u8>, usize), RsError> {
    if received.len() != params.n {
        return Err(RsError::WrongLength {
            expected: params.n,
            got: received.len(),
        });
    }
    let syndromes = compute_syndromes(params, received);
    if syndromes.iter().all(|&s| s == 0) {
        return Ok((received[..params.k].to_vec(), 0));
    }

    let locator = berlekamp_massey(&syndromes);
    let num_errors = locator.len() - 1;
    if num_errors == 0 || num_errors > params.t() {
        return Err(RsError::DecodeFailure);
    }

    // Chien search: index i holds the coefficient of x^(n-1-i), so its
    // locator is alpha^(n-1-i).
    let mut error_positions = Vec::new();
    for i in 0..params.n {
        let power = (params.n - 1 - i) as i32;
        if gf::poly_eval(&locator, gf::alpha_pow(-power)) == 0 {
            error_positions.push(i);
        }
    }
    if error_positions.len() != num_errors {
        return Err(RsError::DecodeFailure);
    }

    // Forney: omega(x) = S(x) * lambda(x) mod x^(2t);
    // magnitude at X = X * omega(X^-1) / lambda'(X^-1).
    let mut omega = gf::poly_mul(&syndromes, &locator);
    omega.truncate(params.parity_len());
    let mut corrected = received.to_vec();
    let mut corrected_count = 0;
    for &i in &error_positions {
        let power = (params.n - 1 - i) as i32;
        let x_inv = gf::alpha_pow(-power);
        let denom = eval_formal_derivative(&locator, x_inv);
        if denom == 0 {
            return Err(RsError::DecodeFailure);
        }
        let magnitude = gf::mul(
            gf::alpha_pow(power),
            gf::div(gf::poly_eval(&omega, x_inv), denom),
        );
        if magnitude == 0 {
            return Err(RsError::DecodeFailure);
        }
        corrected[i] ^= magnitude;
        corrected_count += 1;
    }

    // A word that still has nonzero syndromes was miscorrected.
    if compute_syndromes(params, &corrected)
        .iter()
        .any(|&s| s != 0)
    {
        return Err(RsError::DecodeFailure);
    }
    Ok((corrected[..params.k].to_vec(), corrected_count))
}

fn compute_syndromes(params: &RsParams, word: &[u8]) -> Vec<u8> {
    (0..params.parity_len() as i32)
        .map(|j| {
            // S_j = word(alpha^j) with high-degree-first coefficients.
            let mut acc = 0u8;
            for &c in word {
                acc = gf::mul(acc, gf::alpha_pow(j)) ^ c;
            }
            acc
        })
        .collect()
}

/// Berlekamp-Massey: smallest LFSR (error locator, ascending degree,
/// locator[0] = 1) generating the syndrome sequence.
fn berlekamp_massey(syndromes: &[u8]) -> Vec<u8> {
    let mut locator = vec![1u8];
    let mut prev = vec![1u8];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut b = 1u8;
    for i in 0..syndromes.len() {
        let mut delta = syndromes[i];
        for j in 1..=l.min(locator.len() - 1) {
            delta ^= gf::mul(locator[j], syndromes[i - j]);
        }
        if delta == 0 {
            m += 1;
        } else if 2 * l <= i {
            let tmp = locator.clone();
            let scale = gf::div(delta, b);
            locator = poly_sub_scaled_shift(&locator, &prev, scale, m);
            prev = tmp;
            l = i + 1 - l;
            b = delta;
            m = 1;
        } else {
            let scale = gf::div(delta, b);
            locator = poly_sub_scaled_shift(&locator, &prev, scale, m);
            m += 1;
        }
    }
    locator.truncate(l + 1);
    locator
}

/// locator - scale * x^shift * prev (addition and subtraction coincide).
fn poly_sub_scaled_shift(locator: &[u8], prev: &[u8], scale: u8, shift: usize) -> Vec<u8> {
    let mut out = locator.to_vec();
    if out.len() < prev.len() + shift {
        out.resize(prev.len() + shift, 0);
    }
    for (j, &p) in prev.iter().enumerate() {
        out[j + shift] ^= gf::mul(scale, p);
    }
    out
}

/// Formal derivative in characteristic 2: odd-degree terms survive.
fn eval_formal_derivative(poly: &[u8], x: u8) -> u8 {
    let mut acc = 0u8;
    let mut x_pow = 1u8;
    for i in (1..poly.len()).step_by(2) {
        acc ^= gf::mul(poly[i], x_pow);
        x_pow = gf::mul(x_pow, gf::mul(x, x));
    }
    acc
}
