//! Toeplitz hashing over GF(2).
//!
//! A seed with input length `m` and output length `r` stores the `m + r − 1`
//! diagonal bits `d` of the `r × m` matrix `T[i][j] = d[i − j + m − 1]`.
//! For distinct inputs the family collides with probability exactly `2^-r`.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashSeed {
    in_len: usize,
    out_len: usize,
    diagonal: BitString,
}

fn diagonal_len(m: usize, r: usize) -> usize {
    if r == 0 {
        0
    } else {
        m + r - 1
    }
}

impl HashSeed {
    pub fn new(in_len: usize, out_len: usize, diagonal: BitString) -> Result<Self> {
        if out_len > in_len {
            return Err(Error::param(
                "out_len",
                format!("must not exceed in_len ({out_len} > {in_len})"),
            ));
        }
        let want = diagonal_len(in_len, out_len);
        if diagonal.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                actual: diagonal.len(),
            });
        }
        Ok(Self {
            in_len,
            out_len,
            diagonal,
        })
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn diagonal(&self) -> &BitString {
        &self.diagonal
    }

    /// Row `i` of the matrix as an `m`-bit string.
    pub fn row(&self, i: usize) -> BitString {
        self.diagonal.slice(i, self.in_len).reversed()
    }

    /// Column `j` of the matrix as an `r`-bit string.
    pub fn column(&self, j: usize) -> BitString {
        if self.out_len == 0 {
            return BitString::zeros(0);
        }
        self.diagonal.slice(self.in_len - 1 - j, self.out_len)
    }

    pub fn hash(&self, x: &BitString) -> Result<BitString> {
        if x.len() != self.in_len {
            return Err(Error::LengthMismatch {
                expected: self.in_len,
                actual: x.len(),
            });
        }
        let xr = x.reversed();
        let mut out = BitString::zeros(self.out_len);
        for i in 0..self.out_len {
            if self.diagonal.slice(i, self.in_len).dot(&xr) {
                out.set(i, true);
            }
        }
        Ok(out)
    }
}

/// Uniformly random seed for a `m → r` hash.
pub fn sample_seed<R: Rng + ?Sized>(m: usize, r: usize, rng: &mut R) -> Result<HashSeed> {
    if m == 0 && r > 0 {
        return Err(Error::param("m", "must be positive"));
    }
    if r > m {
        return Err(Error::param("r", format!("must not exceed m ({r} > {m})")));
    }
    let diagonal = BitString::random(diagonal_len(m, r), rng);
    HashSeed::new(m, r, diagonal)
}

pub fn hash(seed: &HashSeed, x: &BitString) -> Result<BitString> {
    seed.hash(x)
}

#[derive(Serialize, Deserialize)]
struct SeedRepr {
    m: usize,
    r: usize,
    diagonal: String,
}

impl Serialize for HashSeed {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SeedRepr {
            m: self.in_len,
            r: self.out_len,
            diagonal: self.diagonal.to_hex(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HashSeed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SeedRepr::deserialize(deserializer)?;
        let diagonal = BitString::from_hex(&repr.diagonal, diagonal_len(repr.m, repr.r))
            .map_err(serde::de::Error::custom)?;
        HashSeed::new(repr.m, repr.r, diagonal).map_err(serde::de::Error::custom)
    }
}
