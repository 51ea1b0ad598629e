//! Packed bit strings over GF(2).
//!
//! Bit `i` lives in word `i / 64` at position `i % 64` (little-endian within
//! words). The byte form used for hex serialization follows the same rule:
//! bit `i` is bit `i % 8` of byte `i / 8`. Unused high bits of the last word
//! are always zero.

use std::fmt;
use std::ops::BitXor;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut words: Vec<u64> = (0..words_for(len)).map(|_| rng.gen()).collect();
        mask_tail(&mut words, len);
        Self { len, words }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                s.set(i, true);
            }
        }
        s
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::default();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// Parses a string of `'0'`/`'1'` characters, index 0 first.
    pub fn parse_binary(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for c in text.chars() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                other => {
                    return Err(Error::Parse(format!("invalid bit character {other:?}")));
                }
            }
        }
        Ok(s)
    }

    pub(crate) fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        mask_tail(&mut words, len);
        Self { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Positions of the set bits, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.weight());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let tz = w.trailing_zeros() as usize;
                out.push(wi * 64 + tz);
                w &= w - 1;
            }
        }
        out
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(self ^ other)
    }

    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Parity of `self AND other`.
    pub fn dot(&self, other: &BitString) -> bool {
        assert_eq!(self.len, other.len, "dot of unequal lengths");
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    /// `len` bits starting at `start`, packed from bit 0.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len, "slice out of range");
        let mut words = vec![0u64; words_for(len)];
        let shift = start % 64;
        let base = start / 64;
        for (k, w) in words.iter_mut().enumerate() {
            let lo = self.words.get(base + k).copied().unwrap_or(0);
            let hi = self.words.get(base + k + 1).copied().unwrap_or(0);
            *w = if shift == 0 {
                lo
            } else {
                (lo >> shift) | (hi << (64 - shift))
            };
        }
        BitString::from_words(len, words)
    }

    pub fn reversed(&self) -> BitString {
        let mut out = BitString::zeros(self.len);
        for i in self.support() {
            out.set(self.len - 1 - i, true);
        }
        out
    }

    /// Little-endian byte packing (bit `i` → bit `i % 8` of byte `i / 8`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Parse(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let mut words = vec![0u64; words_for(len)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        let tail = len % 8;
        if tail != 0 && bytes[bytes.len() - 1] >> tail != 0 {
            return Err(Error::Parse("nonzero padding bits".into()));
        }
        Ok(Self::from_words(len, words))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_bytes(&bytes, len)
    }

    pub fn to_binary_string(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Interprets the first `min(len, 64)` bits as an integer, bit 0 least significant.
    pub fn to_u64(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }
}

fn mask_tail(words: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        assert_eq!(self.len, rhs.len, "xor of unequal lengths");
        BitString {
            len: self.len,
            words: self.words.iter().zip(&rhs.words).map(|(a, b)| a ^ b).collect(),
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self.to_binary_string())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_string())
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRepr {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BitStringRepr {
            len: self.len,
            hex: self.to_hex(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BitStringRepr::deserialize(deserializer)?;
        BitString::from_hex(&repr.hex, repr.len).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_order_is_little_endian() {
        let s = BitString::parse_binary("1000000001").unwrap();
        assert_eq!(s.to_bytes(), vec![0x01, 0x02]);
        assert_eq!(s.to_hex(), "0102");
    }

    #[test]
    fn slice_crosses_word_boundary() {
        let mut s = BitString::zeros(130);
        s.set(63, true);
        s.set(64, true);
        s.set(129, true);
        let t = s.slice(63, 67);
        assert_eq!(t.support(), vec![0, 1, 66]);
    }

    #[test]
    fn rejects_dirty_padding() {
        assert!(BitString::from_bytes(&[0xff], 3).is_err());
        assert!(BitString::from_bytes(&[0x07], 3).is_ok());
    }

    proptest! {
        #[test]
        fn hex_roundtrip(bits in proptest::collection::vec(0u8..2, 0..300)) {
            let s = BitString::from_bits(&bits);
            let back = BitString::from_hex(&s.to_hex(), s.len()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn slice_matches_getters(bits in proptest::collection::vec(0u8..2, 1..200), a in 0usize..200, b in 0usize..200) {
            let s = BitString::from_bits(&bits);
            let start = a % s.len();
            let len = b % (s.len() - start + 1);
            let t = s.slice(start, len);
            for i in 0..len {
                prop_assert_eq!(t.get(i), s.get(start + i));
            }
        }
    }
}
