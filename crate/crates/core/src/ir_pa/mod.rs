//! Information reconciliation and privacy amplification.
//!
//! The sender publishes a Toeplitz check value of length `κ = ⌈m(H(q)+Δ)⌉`;
//! the receiver recovers the sender's word with a minimum-weight search
//! ([`decode`]). Keys of length `l = ⌊m(1−Δ)⌋ − κ` are extracted with an
//! independent Toeplitz seed.

mod decode;

pub use decode::{decode, decode_with, DecodeMethod, DecodeOutcome, DecoderConfig};

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hashing::HashSeed;

/// Slack applied before rounding products of floats to integers.
const ROUNDING_GUARD: f64 = 1e-9;

pub fn ceil_guarded(x: f64) -> i64 {
    (x - ROUNDING_GUARD).ceil() as i64
}

pub fn floor_guarded(x: f64) -> i64 {
    (x + ROUNDING_GUARD).floor() as i64
}

/// Base-2 binary entropy with `0 log(1/0) = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrParams {
    pub block_len: usize,
    pub crossover: f64,
    pub margin: f64,
    pub check_len: usize,
    pub weight_cap: usize,
}

impl IrParams {
    /// `κ = ⌈m(H(q)+Δ)⌉` and the default weight cap `⌈2qm⌉ + 2`.
    pub fn derive(block_len: usize, crossover: f64, margin: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&crossover) {
            return Err(Error::param("crossover", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&margin) {
            return Err(Error::param("margin", "must lie in [0, 1)"));
        }
        let m = block_len as f64;
        let check_len = ceil_guarded(m * (binary_entropy(crossover) + margin)).max(0) as usize;
        Ok(Self {
            block_len,
            crossover,
            margin,
            check_len: check_len.min(block_len),
            weight_cap: default_weight_cap(block_len, crossover),
        })
    }
}

pub fn default_weight_cap(block_len: usize, crossover: f64) -> usize {
    (ceil_guarded(2.0 * crossover * block_len as f64).max(0) as usize + 2).min(block_len)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaParams {
    pub block_len: usize,
    pub margin: f64,
    pub check_len: usize,
    /// May be negative when the margin and check value exhaust the block.
    pub key_len: i64,
}

impl PaParams {
    /// `l = ⌊m(1−Δ)⌋ − κ`.
    pub fn derive(block_len: usize, margin: f64, check_len: usize) -> Self {
        let key_len = floor_guarded(block_len as f64 * (1.0 - margin)) - check_len as i64;
        Self {
            block_len,
            margin,
            check_len,
            key_len,
        }
    }

    /// Usable key length; rounds with `l ≤ 0` produce no key.
    pub fn usable_key_len(&self) -> usize {
        self.key_len.max(0) as usize
    }
}

pub fn encode_check(x: &BitString, seed: &HashSeed) -> Result<BitString> {
    seed.hash(x)
}

pub fn extract_key(x: &BitString, seed: &HashSeed) -> Result<BitString> {
    seed.hash(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::sample_seed;
    use crate::rng::{stream, Role};

    /// Entropy evaluated as a sum of `p log(1/p)` terms in extended form.
    fn entropy_oracle(q: f64) -> f64 {
        let terms = [q, 1.0 - q];
        terms
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * (1.0 / p).ln() / std::f64::consts::LN_2)
            .sum()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
        assert!((binary_entropy(0.25) - 0.811_278_124_459_132_9).abs() < 1e-12);
        for i in 1..100 {
            let q = i as f64 / 100.0;
            assert!((binary_entropy(q) - entropy_oracle(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn check_length_rule() {
        // H(0.11) = 0.499916..., so κ = ⌈100 · 0.549916⌉ = 55
        assert!((binary_entropy(0.11) - 0.499_916).abs() < 1e-6);
        let ir = IrParams::derive(100, 0.11, 0.05).unwrap();
        assert_eq!(ir.check_len, 55);
        assert_eq!(ir.weight_cap, 24);
        assert!(ir.weight_cap as f64 >= (0.11f64 * 100.0).ceil());
        let pa = PaParams::derive(100, 0.05, ir.check_len);
        assert_eq!(pa.key_len, 95 - 55);
    }

    #[test]
    fn guarded_rounding() {
        assert_eq!(ceil_guarded(4000.0 * (0.25 - 0.05)), 800);
        assert_eq!(ceil_guarded(800.000_000_000_1), 800);
        assert_eq!(ceil_guarded(800.01), 801);
        assert_eq!(floor_guarded(759.999_999_999_9), 760);
        assert_eq!(ceil_guarded(-200.0), -200);
    }

    #[test]
    fn negative_key_length_is_unusable() {
        let pa = PaParams::derive(10, 0.05, 12);
        assert!(pa.key_len < 0);
        assert_eq!(pa.usable_key_len(), 0);
    }

    #[test]
    fn check_of_zeros_is_zero() {
        let mut rng = stream(5, 0, Role::Hashing);
        let seed = sample_seed(64, 20, &mut rng).unwrap();
        assert!(encode_check(&BitString::zeros(64), &seed).unwrap().is_zero());
        assert!(encode_check(&BitString::zeros(63), &seed).is_err());
    }

    #[test]
    fn empty_key() {
        let mut rng = stream(6, 0, Role::Hashing);
        let seed = sample_seed(30, 0, &mut rng).unwrap();
        let x = BitString::random(30, &mut rng);
        assert!(extract_key(&x, &seed).unwrap().is_empty());
    }

    #[test]
    fn full_rank_seed_gives_exactly_uniform_key() {
        // With m = 6 every input is enumerated; a full-rank 2×6 map hits each
        // output exactly 2^4 times.
        let mut rng = stream(7, 0, Role::Hashing);
        let mut checked = 0;
        while checked < 5 {
            let seed = sample_seed(6, 2, &mut rng).unwrap();
            let mut counts = [0usize; 4];
            for v in 0u8..64 {
                let bits: Vec<u8> = (0..6).map(|i| (v >> i) & 1).collect();
                let k = extract_key(&BitString::from_bits(&bits), &seed).unwrap();
                counts[k.to_u64() as usize] += 1;
            }
            let full_rank = counts.iter().all(|&c| c > 0);
            if full_rank {
                assert_eq!(counts, [16; 4]);
                checked += 1;
            }
        }
    }

    #[test]
    fn random_seed_key_is_statistically_uniform() {
        let mut rng = stream(8, 0, Role::Hashing);
        let trials = 100_000;
        let mut counts = [0f64; 4];
        for _ in 0..trials {
            let seed = sample_seed(16, 2, &mut rng).unwrap();
            let x = BitString::random(16, &mut rng);
            counts[extract_key(&x, &seed).unwrap().to_u64() as usize] += 1.0;
        }
        let expected = trials as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // χ²(3) 0.999 quantile
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn extract_key_is_linear() {
        let mut rng = stream(9, 0, Role::Hashing);
        let seed = sample_seed(40, 12, &mut rng).unwrap();
        for _ in 0..50 {
            let a = BitString::random(40, &mut rng);
            let b = BitString::random(40, &mut rng);
            let lhs = &extract_key(&a, &seed).unwrap() ^ &extract_key(&b, &seed).unwrap();
            assert_eq!(lhs, extract_key(&(&a ^ &b), &seed).unwrap());
        }
    }
}
