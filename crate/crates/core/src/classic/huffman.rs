//! Canonical Huffman coding over bytes.
//!
//! Code lengths come from the usual two-queue merge with deterministic
//! tie-breaking (frequency first, then smallest contained symbol), and
//! the actual bit patterns are assigned canonically from the sorted
//! (length, symbol) order, so identical frequency maps always produce
//! identical codebooks.

use super::bits::BitVec;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HuffmanError {
    #[error("need at least 2 distinct symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("byte 0x{0:02X} has no code in this codebook")]
    UnmappedByte(u8),
    #[error("bit stream ends inside a code; {decoded} bytes recovered")]
    Truncated { decoded: usize },
}

/// Canonical prefix code over a subset of byte values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCodebook {
    /// code_of[b] = (pattern, length), length 0 = unmapped.
    code_of: Vec<(u32, u8)>,
    /// (symbol, length) sorted canonically; drives decode.
    canonical: Vec<(u8, u8)>,
}

/// Builds the optimal prefix code for the given byte frequencies.
pub fn huffman_build(freqs: &BTreeMap<u8, u64>) -> Result<HuffmanCodebook, HuffmanError> {
    let symbols: Vec<(u8, u64)> = freqs
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| (s, c))
        .collect();
    if symbols.len() < 2 {
        return Err(HuffmanError::TooFewSymbols(symbols.len()));
    }

    // Merge queue keyed by (freq, min symbol in subtree) for full
    // determinism.
    #[derive(Clone)]
    struct Node {
        freq: u64,
        min_symbol: u8,
        kind: NodeKind,
    }
    #[derive(Clone)]
    enum NodeKind {
        Leaf(u8),
        Internal(Box<Node>, Box<Node>),
    }

    let mut heap: Vec<Node> = symbols
        .iter()
        .map(|&(s, c)| Node {
            freq: c,
            min_symbol: s,
            kind: NodeKind::Leaf(s),
        })
        .collect();
    while heap.len() > 1 {
        heap.sort_by(|a, b| {
            b.freq
                .cmp(&a.freq)
                .then_with(|| b.min_symbol.cmp(&a.min_symbol))
        });
        let a = heap.pop().unwrap();
        let b = heap.pop().unwrap();
        heap.push(Node {
            freq: a.freq + b.freq,
            min_symbol: a.min_symbol.min(b.min_symbol),
            kind: NodeKind::Internal(Box::new(a), Box::new(b)),
        });
    }

    // Depth of each leaf = code length.
    let mut lengths: Vec<(u8, u8)> = Vec::with_capacity(symbols.len());
    let mut stack = vec![(heap.pop().unwrap(), 0u8)];
    while let Some((node, depth)) = stack.pop() {
        match node.kind {
            NodeKind::Leaf(s) => lengths.push((s, depth)),
            NodeKind::Internal(a, b) => {
                stack.push((*a, depth + 1));
                stack.push((*b, depth + 1));
            }
        }
    }
    lengths.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    assert!(
        lengths.last().unwrap().1 <= 32,
        "code length exceeds the 32-bit pattern limit"
    );

    // Canonical code assignment from sorted lengths.
    let mut code_of = vec![(0u32, 0u8); 256];
    let mut code: u32 = 0;
    let mut prev_len = lengths[0].1;
    for &(symbol, len) in &lengths {
        code <<= len - prev_len;
        code_of[symbol as usize] = (code, len);
        code += 1;
        prev_len = len;
    }
    Ok(HuffmanCodebook {
        code_of,
        canonical: lengths,
    })
}

impl HuffmanCodebook {
    pub fn code_length(&self, byte: u8) -> Option<u8> {
        let (_, len) = self.code_of[byte as usize];
        (len > 0).then_some(len)
    }

    pub fn symbol_count(&self) -> usize {
        self.canonical.len()
    }

    /// `sum 2^-len` over all codes; 1 for a full prefix tree.
    pub fn kraft_sum(&self) -> f64 {
        self.canonical
            .iter()
            .map(|&(_, len)| 0.5f64.powi(len as i32))
            .sum()
    }
}

pub fn huffman_encode(book: &HuffmanCodebook, data: &[u8]) -> Result<BitVec, HuffmanError> {
    let mut bits = BitVec::with_capacity(data.len() * 8);
    for &b in data {
        let (pattern, len) = book.code_of[b as usize];
        if len == 0 {
            return Err(HuffmanError::UnmappedByte(b));
        }
        bits.push_bits(pattern, len as usize);
    }
    Ok(bits)
}

/// Decodes as many complete symbols as the stream holds. Trailing bits
/// that do not finish a code yield `Truncated` with the prefix length;
/// callers wanting best-effort output use [`huffman_decode_prefix`].
pub fn huffman_decode(book: &HuffmanCodebook, bits: &BitVec) -> Result<Vec<u8>, HuffmanError> {
    let (bytes, clean) = huffman_decode_prefix(book, bits);
    if clean {
        Ok(bytes)
    } else {
        Err(HuffmanError::Truncated {
            decoded: bytes.len(),
        })
    }
}

/// Decodes until the bits run out; the flag is false when the stream
/// ended mid-code.
pub fn huffman_decode_prefix(book: &HuffmanCodebook, bits: &BitVec) -> (Vec<u8>, bool) {
    // Canonical decode: walk lengths in order, comparing the running
    // code value against the first-code-at-length boundaries.
    let mut first_code: BTreeMap<u8, u32> = BTreeMap::new();
    let mut first_index: BTreeMap<u8, usize> = BTreeMap::new();
    {
        let mut code: u32 = 0;
        let mut prev_len = book.canonical[0].1;
        for (idx, &(_, len)) in book.canonical.iter().enumerate() {
            code <<= len - prev_len;
            first_code.entry(len).or_insert(code);
            first_index.entry(len).or_insert(idx);
            code += 1;
            prev_len = len;
        }
    }
    let count_at: BTreeMap<u8, usize> =
        book.canonical
            .iter()
            .fold(BTreeMap::new(), |mut m, &(_, len)| {
                *m.entry(len).or_insert(0) += 1;
                m
            });

    let mut out = Vec::new();
    let mut pos = 0;
    'symbols: while pos < bits.len() {
        let mut code: u32 = 0;
        let mut len: u8 = 0;
        loop {
            if pos + len as usize >= bits.len() || len >= 32 {
                // Ran out of bits inside a code.
                return (out, false);
            }
            code = code << 1 | bits.get(pos + len as usize) as u32;
            len += 1;
            if let (Some(&fc), Some(&fi), Some(&cnt)) = (
                first_code.get(&len),
                first_index.get(&len),
                count_at.get(&len),
            ) {
                if code >= fc && (code - fc) < cnt as u32 {
                    out.push(book.canonical[fi + (code - fc) as usize].0);
                    pos += len as usize;
                    continue 'symbols;
                }
            }
        }
    }
    (out, true)
}

/// Byte frequencies of a slice, for codebook construction.
pub fn byte_frequencies(data: &[u8]) -> BTreeMap<u8, u64> {
    let mut freqs = BTreeMap::new();
    for &b in data {
        *freqs.entry(b).or_insert(0) += 1;
    }
    freqs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freqs(pairs: &[(u8, u64)]) -> BTreeMap<u8, u64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn forced_lengths_three_symbols() {
        let book = huffman_build(&freqs(&[(b'a', 2), (b'b', 1), (b'c', 1)])).unwrap();
        assert_eq!(book.code_length(b'a'), Some(1));
        assert_eq!(book.code_length(b'b'), Some(2));
        assert_eq!(book.code_length(b'c'), Some(2));
    }

    #[test]
    fn two_symbols_get_one_bit_each() {
        let book = huffman_build(&freqs(&[(b'a', 1), (b'b', 1)])).unwrap();
        assert_eq!(book.code_length(b'a'), Some(1));
        assert_eq!(book.code_length(b'b'), Some(1));
    }

    #[test]
    fn uniform_four_symbols() {
        let book = huffman_build(&freqs(&[(1, 5), (2, 5), (3, 5), (4, 5)])).unwrap();
        for s in 1..=4u8 {
            assert_eq!(book.code_length(s), Some(2));
        }
        assert!((book.kraft_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_symbols_rejected() {
        assert_eq!(
            huffman_build(&freqs(&[(b'a', 3)])),
            Err(HuffmanError::TooFewSymbols(1))
        );
    }

    #[test]
    fn encode_length_example() {
        // lengths {a:1, b:2} from {a:2, b:1, c:1}; "aab" = 1+1+2 bits.
        let book = huffman_build(&freqs(&[(b'a', 2), (b'b', 1), (b'c', 1)])).unwrap();
        let bits = huffman_encode(&book, b"aab").unwrap();
        assert_eq!(bits.len(), 4);
    }

    #[test]
    fn encode_unmapped_byte_errors() {
        let book = huffman_build(&freqs(&[(b'a', 1), (b'b', 1)])).unwrap();
        assert_eq!(
            huffman_encode(&book, b"ax"),
            Err(HuffmanError::UnmappedByte(b'x'))
        );
    }

    #[test]
    fn roundtrip_sentences() {
        let sentences = [
            "a man smiling at the camera",
            "a woman with glasses and a hat",
            "two dogs playing in the snow",
        ];
        let all: Vec<u8> = sentences.concat().into_bytes();
        let book = huffman_build(&byte_frequencies(&all)).unwrap();
        for s in sentences {
            let bits = huffman_encode(&book, s.as_bytes()).unwrap();
            let back = huffman_decode(&book, &bits).unwrap();
            assert_eq!(back, s.as_bytes());
        }
    }

    #[test]
    fn prefix_free_property() {
        let data = b"the quick brown fox jumps over the lazy dog";
        let book = huffman_build(&byte_frequencies(data)).unwrap();
        let codes: Vec<(u32, u8)> = data
            .iter()
            .map(|&b| {
                let len = book.code_length(b).unwrap();
                let bits = huffman_encode(&book, &[b]).unwrap();
                let mut v = 0u32;
                for bit in bits.iter() {
                    v = v << 1 | bit as u32;
                }
                (v, len)
            })
            .collect();
        for &(ca, la) in &codes {
            for &(cb, lb) in &codes {
                if la < lb {
                    assert_ne!(ca, cb >> (lb - la), "prefix violation");
                }
            }
        }
        assert!(book.kraft_sum() <= 1.0 + 1e-12);
    }

    #[test]
    fn truncated_stream_reports_prefix() {
        // Codebook over "abracadabra": a:1, r:2, b:3, c:4, d:4 bits.
        // "abrac" is 11 bits; dropping 2 leaves "abra" plus half of c.
        let book = huffman_build(&byte_frequencies(b"abracadabra")).unwrap();
        let bits = huffman_encode(&book, b"abrac").unwrap();
        assert_eq!(bits.len(), 11);
        let cut: BitVec = bits.iter().take(bits.len() - 2).collect();
        match huffman_decode(&book, &cut) {
            Err(HuffmanError::Truncated { decoded }) => assert_eq!(decoded, 4),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn bit_flip_corrupts_output() {
        let book = huffman_build(&byte_frequencies(b"hello world")).unwrap();
        let mut bits = huffman_encode(&book, b"hello").unwrap();
        bits.set(0, !bits.get(0));
        let (decoded, _) = huffman_decode_prefix(&book, &bits);
        assert_ne!(decoded, b"hello".to_vec());
    }

    #[test]
    fn deterministic_build() {
        let f = byte_frequencies(b"some deterministic sample text");
        assert_eq!(huffman_build(&f).unwrap(), huffman_build(&f).unwrap());
    }

    #[test]
    fn skewed_frequencies_build_a_deep_tree_that_still_roundtrips() {
        // Powers of two give a maximally unbalanced tree: symbol k gets
        // a code of length ~(n - k). Exercises the canonical decoder
        // across many distinct lengths.
        let mut f = BTreeMap::new();
        for k in 0..16u8 {
            f.insert(k, 1u64 << k);
        }
        let book = huffman_build(&f).unwrap();
        assert_eq!(book.code_length(15), Some(1));
        assert_eq!(book.code_length(0), Some(15));
        assert!((book.kraft_sum() - 1.0).abs() < 1e-12);
        let data: Vec<u8> = (0..16u8).chain((0..16u8).rev()).collect();
        let bits = huffman_encode(&book, &data).unwrap();
        assert_eq!(huffman_decode(&book, &bits).unwrap(), data);
    }
}
