//! Compact bit sequence, most-significant bit first within each byte.

/// Growable bit vector. Bit `i` lives in byte `i / 8` at position
/// `7 - i % 8`, so packing into bytes is big-endian within bytes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitVec {
    bytes: Vec<u8>,
    len: usize,
}

impl BitVec {
    pub fn new() -> Self {
        BitVec::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitVec {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let byte = self.len / 8;
            self.bytes[byte] |= 1 << (7 - self.len % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        let mask = 1 << (7 - i % 8);
        if bit {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    /// Appends the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u32, count: usize) {
        for i in (0..count).rev() {
            self.push(value >> i & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitVec) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    /// Packs into whole bytes, zero-padding the tail.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    /// Bits from a byte slice, all 8 bits of every byte.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        BitVec {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Number of positions where `self` and `other` differ, up to the
    /// shorter length, plus the length difference.
    pub fn hamming_distance(&self, other: &BitVec) -> usize {
        let common = self.len.min(other.len);
        let mut d = self.len.max(other.len) - common;
        for i in 0..common {
            if self.get(i) != other.get(i) {
                d += 1;
            }
        }
        d
    }
}

impl FromIterator<bool> for BitVec {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut bv = BitVec::new();
        for b in iter {
            bv.push(b);
        }
        bv
    }
}
