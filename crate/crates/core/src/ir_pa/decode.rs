//! Minimum-weight recovery from a Toeplitz check value.
//!
//! Given `y` and `check = hash(x)`, the decoder looks for the error pattern
//! `e` of least Hamming weight with `hash(y ⊕ e) = check`, breaking ties by
//! the lexicographic order of the support. Because the hash is linear this
//! is syndrome decoding with `T·e = check ⊕ hash(y)`.
//!
//! Three search tiers, cheapest exact tier first:
//!
//! 1. **coset**: when the solution space has dimension ≤ `coset_max_dim`, the
//!    whole coset is walked in Gray-code order. Exact.
//! 2. **enumeration**: error patterns in increasing weight, supports in
//!    lexicographic order, while the pattern count fits
//!    `enumeration_budget`. Exact up to the weight it reaches.
//! 3. **information set**: Stern-style collision search over random
//!    information sets, started above the weight the enumeration tier
//!    excluded. It stops once a lower-weight solution would have been missed
//!    with probability below `miss_tolerance`, or when the work budget runs
//!    out. Minimality here is probabilistic.
//!
//! Every returned word satisfies `hash(word) = check` and
//! `|word ⊕ y| ≤ w_max`. The information-set tier draws its randomness from
//! a stream keyed by the inputs, so the result is a deterministic function
//! of `(y, check, seed, w_max, config)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::factorial::ln_binomial;

use crate::bits::{words_for, BitString};
use crate::error::{Error, Result};
use crate::hashing::HashSeed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub coset_max_dim: u32,
    pub enumeration_budget: u64,
    pub isd_work_budget: f64,
    pub miss_tolerance: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            coset_max_dim: 20,
            enumeration_budget: 2_000_000,
            isd_work_budget: 3e8,
            miss_tolerance: 5e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMethod {
    Coset,
    Enumeration,
    InformationSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded {
        word: BitString,
        error_weight: usize,
        method: DecodeMethod,
    },
    Failure,
}

impl DecodeOutcome {
    pub fn word(&self) -> Option<&BitString> {
        match self {
            DecodeOutcome::Decoded { word, .. } => Some(word),
            DecodeOutcome::Failure => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, DecodeOutcome::Failure)
    }
}

pub fn decode(
    y: &BitString,
    check: &BitString,
    seed: &HashSeed,
    w_max: usize,
) -> Result<DecodeOutcome> {
    decode_with(y, check, seed, w_max, &DecoderConfig::default())
}

pub fn decode_with(
    y: &BitString,
    check: &BitString,
    seed: &HashSeed,
    w_max: usize,
    config: &DecoderConfig,
) -> Result<DecodeOutcome> {
    let (m, r) = (seed.in_len(), seed.out_len());
    if y.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: y.len(),
        });
    }
    if check.len() != r {
        return Err(Error::LengthMismatch {
            expected: r,
            actual: check.len(),
        });
    }
    let syndrome = check ^ &seed.hash(y)?;
    let problem = Problem::new(seed, &syndrome);

    let finish = |e: BitString, method| {
        let error_weight = e.weight();
        DecodeOutcome::Decoded {
            word: y ^ &e,
            error_weight,
            method,
        }
    };

    let Some(reduced) = problem.reduce((0..m).collect::<Vec<_>>().as_slice()) else {
        // no error pattern of any weight matches
        return Ok(DecodeOutcome::Failure);
    };
    let free_dim = m - reduced.rank();

    if free_dim as u32 <= config.coset_max_dim {
        let e = reduced.coset_minimum();
        return Ok(if e.weight() <= w_max {
            finish(e, DecodeMethod::Coset)
        } else {
            DecodeOutcome::Failure
        });
    }

    let reach = enumeration_reach(m, w_max, config.enumeration_budget);
    if let Some(e) = problem.enumerate_up_to(reach) {
        return Ok(finish(e, DecodeMethod::Enumeration));
    }
    if reach >= w_max {
        return Ok(DecodeOutcome::Failure);
    }

    let mut rng = decoder_stream(y, check, seed, w_max);
    Ok(
        match problem.stern_search(reach + 1, w_max, reduced.rank(), config, &mut rng) {
            Some(e) => finish(e, DecodeMethod::InformationSet),
            None => DecodeOutcome::Failure,
        },
    )
}

fn decoder_stream(y: &BitString, check: &BitString, seed: &HashSeed, w_max: usize) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"otforge/decode/v1");
    for part in [y, check, seed.diagonal()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.to_bytes());
    }
    h.update((seed.in_len() as u64).to_le_bytes());
    h.update((w_max as u64).to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Largest weight `w` with `Σ_{i≤w} C(m, i) ≤ budget`, capped at `w_max`.
fn enumeration_reach(m: usize, w_max: usize, budget: u64) -> usize {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut reach = 0;
    for w in 0..=w_max.min(m) {
        if w > 0 {
            binom = binom * (m - w + 1) as u128 / w as u128;
        }
        total += binom;
        if total > budget as u128 {
            break;
        }
        reach = w;
    }
    reach
}

#[inline]
fn bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
fn weight(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

/// `true` when `a` precedes `b` in (weight, lexicographic support) order.
fn precedes(a: &BitString, b: &BitString) -> bool {
    let (wa, wb) = (a.weight(), b.weight());
    if wa != wb {
        return wa < wb;
    }
    for (x, y) in a.words().iter().zip(b.words()) {
        let d = x ^ y;
        if d != 0 {
            let low = d & d.wrapping_neg();
            return x & low != 0;
        }
    }
    false
}

/// `T·e = s` with `T` the seed's `r × m` matrix, stored by columns.
struct Problem {
    m: usize,
    r: usize,
    /// Words per column.
    cw: usize,
    /// `m + 1` columns of `cw` words each; the last one is `s`.
    cols: Vec<u64>,
    columns: Vec<BitString>,
    syndrome: BitString,
}

/// Reduced column echelon form: every pivot column is a unit vector at its
/// pivot row, and rows without a pivot are zero.
struct Reduced {
    m: usize,
    cw: usize,
    cols: Vec<u64>,
    /// `(column, row)` per pivot, in elimination order.
    pivots: Vec<(usize, usize)>,
    /// Pivot rows as a bit mask.
    used: Vec<u64>,
}

impl Problem {
    fn new(seed: &HashSeed, syndrome: &BitString) -> Self {
        let (m, r) = (seed.in_len(), seed.out_len());
        let cw = words_for(r).max(1);
        let columns: Vec<BitString> = (0..m).map(|j| seed.column(j)).collect();
        let mut cols = vec![0u64; (m + 1) * cw];
        for (j, col) in columns.iter().chain(std::iter::once(syndrome)).enumerate() {
            cols[j * cw..j * cw + col.words().len()].copy_from_slice(col.words());
        }
        Self {
            m,
            r,
            cw,
            cols,
            columns,
            syndrome: syndrome.clone(),
        }
    }

    /// Gauss–Jordan elimination picking pivot columns in `order`, which must
    /// list every column. `None` when the system is inconsistent.
    fn reduce(&self, order: &[usize]) -> Option<Reduced> {
        let cw = self.cw;
        let mut cols = self.cols.clone();
        let mut used = vec![0u64; cw];
        let mut pivots = Vec::with_capacity(self.r);
        let mut mask = vec![0u64; cw];
        for &c in order {
            if pivots.len() == self.r {
                break;
            }
            let col = &cols[c * cw..(c + 1) * cw];
            let Some(row) = col
                .iter()
                .zip(&used)
                .position(|(x, u)| x & !u != 0)
                .map(|w| w * 64 + (col[w] & !used[w]).trailing_zeros() as usize)
            else {
                continue;
            };
            let (w, b) = (row / 64, 1u64 << (row % 64));
            mask.copy_from_slice(col);
            mask[w] ^= b;
            for dst in cols.chunks_exact_mut(cw) {
                if dst[w] & b != 0 {
                    for (d, x) in dst.iter_mut().zip(&mask) {
                        *d ^= x;
                    }
                }
            }
            used[w] |= b;
            pivots.push((c, row));
        }
        let s = &cols[self.m * cw..];
        if s.iter().zip(&used).any(|(x, u)| x & !u != 0) {
            return None;
        }
        Some(Reduced {
            m: self.m,
            cw,
            cols,
            pivots,
            used,
        })
    }

    /// Exhaustive search in (weight, lexicographic) order up to `max_weight`.
    fn enumerate_up_to(&self, max_weight: usize) -> Option<BitString> {
        let target = self.syndrome.words().to_vec();
        let sw = target.len();
        let mut acc = vec![vec![0u64; sw]; max_weight + 1];
        let mut chosen = Vec::with_capacity(max_weight);
        for w in 0..=max_weight.min(self.m) {
            if self.dfs(w, 0, &mut acc, &mut chosen, &target) {
                let mut e = BitString::zeros(self.m);
                for &j in &chosen {
                    e.set(j, true);
                }
                return Some(e);
            }
        }
        None
    }

    fn dfs(
        &self,
        remaining: usize,
        start: usize,
        acc: &mut [Vec<u64>],
        chosen: &mut Vec<usize>,
        target: &[u64],
    ) -> bool {
        let depth = chosen.len();
        if remaining == 0 {
            return acc[depth] == target;
        }
        for j in start..=(self.m - remaining) {
            let (head, tail) = acc.split_at_mut(depth + 1);
            for ((dst, a), c) in tail[0]
                .iter_mut()
                .zip(&head[depth])
                .zip(self.columns[j].words())
            {
                *dst = a ^ c;
            }
            chosen.push(j);
            if self.dfs(remaining - 1, j + 1, acc, chosen, target) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    /// Stern-style collision search for the lowest-weight solution of weight
    /// in `floor..=w_max`.
    fn stern_search(
        &self,
        floor: usize,
        w_max: usize,
        rank: usize,
        config: &DecoderConfig,
        rng: &mut ChaCha20Rng,
    ) -> Option<BitString> {
        const P: usize = 2;
        let m = self.m;
        let k = m - rank;
        let (k1, k2) = (k / 2, k - k / 2);
        let mut scratch = SternScratch::new(k1, k2, self.cw, P);
        let (l1, l2) = (scratch.left.len() as f64, scratch.right.len() as f64);
        let rank_words = self.cw as f64;
        let iteration_cost = |window: usize| {
            (rank * (self.m + 1) * self.cw) as f64
                + (l1 + l2) * rank_words
                + l1 * l2 / 2f64.powi(window as i32) * (rank_words + 8.0)
        };
        // window minimising expected work per hit at the middle of the range
        let target = ((floor + w_max) / 2).max(1);
        let window = (1..=rank.min(24))
            .min_by(|&a, &b| {
                let cost = |w| {
                    iteration_cost(w) / stern_success_probability(m, rank, k1, k2, w, P, target)
                };
                cost(a).total_cmp(&cost(b))
            })
            .unwrap_or(0);
        let max_iterations = (config.isd_work_budget / iteration_cost(window)).max(1.0) as u64;

        let mut order: Vec<usize> = (0..m).collect();
        let mut is_pivot = vec![false; m];
        let mut info = Vec::with_capacity(k);
        let mut best: Option<BitString> = None;
        let mut since_improvement: u64 = 0;

        for _ in 0..max_iterations {
            order.shuffle(rng);
            let reduced = self.reduce(&order).expect("consistency does not depend on order");
            is_pivot.iter_mut().for_each(|p| *p = false);
            for &(p, _) in &reduced.pivots {
                is_pivot[p] = true;
            }
            info.clear();
            info.extend(order.iter().copied().filter(|&c| !is_pivot[c]));
            let bound = best.as_ref().map_or(w_max, |b| b.weight());
            let found = reduced.stern_iteration(&info, k1, window, bound, &mut scratch);

            since_improvement += 1;
            if let Some(e) = found {
                if best.as_ref().is_none_or(|b| precedes(&e, b)) {
                    if best.as_ref().is_none_or(|b| e.weight() < b.weight()) {
                        since_improvement = 0;
                    }
                    best = Some(e);
                }
            }
            if let Some(b) = &best {
                let w = b.weight();
                if w <= floor {
                    break;
                }
                let p_hit = stern_success_probability(m, rank, k1, k2, window, P, w - 1);
                let miss = (since_improvement as f64) * (-p_hit).ln_1p();
                if miss <= config.miss_tolerance.ln() {
                    break;
                }
            }
        }
        best
    }
}

/// Buffers reused across information sets.
struct SternScratch {
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
    left_vals: Vec<u64>,
    heads: Vec<usize>,
    next: Vec<usize>,
}

impl SternScratch {
    fn new(k1: usize, k2: usize, rw: usize, p: usize) -> Self {
        let left = subsets(k1, p);
        let right = subsets(k2, p);
        Self {
            left_vals: vec![0; left.len() * rw],
            next: vec![usize::MAX; left.len()],
            heads: Vec::new(),
            left,
            right,
        }
    }
}

impl Reduced {
    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn column(&self, c: usize) -> &[u64] {
        &self.cols[c * self.cw..(c + 1) * self.cw]
    }

    /// Builds `e` from info-set columns `extra` and a reduced vector `x`.
    fn assemble(&self, extra: &[usize], x: &[u64]) -> BitString {
        let mut e = BitString::zeros(self.m);
        for &c in extra {
            e.flip(c);
        }
        for &(c, row) in &self.pivots {
            if bit(x, row) {
                e.flip(c);
            }
        }
        e
    }

    fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.m];
        for &(c, _) in &self.pivots {
            is_pivot[c] = true;
        }
        (0..self.m).filter(|&c| !is_pivot[c]).collect()
    }

    /// Least element of the solution coset in (weight, lexicographic) order.
    fn coset_minimum(&self) -> BitString {
        let mut current = self.assemble(&[], self.column(self.m));
        let kernel: Vec<BitString> = self
            .free_columns()
            .into_iter()
            .map(|f| self.assemble(&[f], self.column(f)))
            .collect();
        let mut best = current.clone();
        let count: u64 = 1u64 << kernel.len();
        for g in 1..count {
            current.xor_assign(&kernel[g.trailing_zeros() as usize]);
            if precedes(&current, &best) {
                best = current.clone();
            }
        }
        best
    }

    /// Lowest `window` pivot rows within the first word.
    fn window_mask(&self, window: usize) -> u64 {
        let mut mask = 0u64;
        let mut rest = self.used[0];
        for _ in 0..window {
            if rest == 0 {
                break;
            }
            let low = rest & rest.wrapping_neg();
            mask |= low;
            rest ^= low;
        }
        mask
    }

    /// One information set: enumerate up to `p` columns from each half of
    /// `info`, match on `window` pivot rows, keep the best solution of
    /// weight ≤ `bound`.
    fn stern_iteration(
        &self,
        info: &[usize],
        k1: usize,
        window: usize,
        bound: usize,
        scratch: &mut SternScratch,
    ) -> Option<BitString> {
        let rw = self.cw;
        let s = self.column(self.m);
        let (left, right) = info.split_at(k1);
        let window_mask = self.window_mask(window);

        // left list: s ⊕ Σ_A v, bucketed by window bits
        let left_subsets = &scratch.left;
        let left_vals = &mut scratch.left_vals;
        for (idx, subset) in left_subsets.iter().enumerate() {
            let dst = &mut left_vals[idx * rw..(idx + 1) * rw];
            dst.copy_from_slice(s);
            for &a in subset {
                for (d, c) in dst.iter_mut().zip(self.column(left[a])) {
                    *d ^= c;
                }
            }
        }
        let table_bits = (usize::BITS - left_subsets.len().leading_zeros()) as usize;
        let buckets = 1usize << window.min(table_bits);
        let bucket = |v: u64| (pext_low(v, window_mask) as usize) & (buckets - 1);
        scratch.heads.clear();
        scratch.heads.resize(buckets, usize::MAX);
        let (heads, next) = (&mut scratch.heads, &mut scratch.next);
        for idx in (0..left_subsets.len()).rev() {
            let key = bucket(left_vals[idx * rw]);
            next[idx] = heads[key];
            heads[key] = idx;
        }

        let mut best: Option<(usize, BitString)> = None;
        let mut tmp = vec![0u64; rw];
        let mut right_val = vec![0u64; rw];
        for subset in &scratch.right {
            right_val.fill(0);
            for &b in subset {
                for (d, c) in right_val.iter_mut().zip(self.column(right[b])) {
                    *d ^= c;
                }
            }
            let mut idx = heads[bucket(right_val[0])];
            while idx != usize::MAX {
                let lv = &left_vals[idx * rw..(idx + 1) * rw];
                if (lv[0] ^ right_val[0]) & window_mask == 0 {
                    for ((t, a), b) in tmp.iter_mut().zip(lv).zip(&right_val) {
                        *t = a ^ b;
                    }
                    let total = left_subsets[idx].len() + subset.len() + weight(&tmp);
                    let limit = best.as_ref().map_or(bound, |(w, _)| *w);
                    if total <= limit {
                        let extra: Vec<usize> = left_subsets[idx]
                            .iter()
                            .map(|&a| left[a])
                            .chain(subset.iter().map(|&b| right[b]))
                            .collect();
                        let e = self.assemble(&extra, &tmp);
                        if best.as_ref().is_none_or(|(_, cur)| precedes(&e, cur)) {
                            best = Some((total, e));
                        }
                    }
                }
                idx = next[idx];
            }
        }
        best.map(|(_, e)| e)
    }
}

/// Gathers the bits of `v` selected by `mask` into the low bits.
fn pext_low(v: u64, mask: u64) -> u64 {
    if mask & mask.wrapping_add(1) == 0 {
        // contiguous low mask
        return v & mask;
    }
    let (mut out, mut m, mut k) = (0u64, mask, 0);
    while m != 0 {
        let low = m & m.wrapping_neg();
        if v & low != 0 {
            out |= 1 << k;
        }
        k += 1;
        m ^= low;
    }
    out
}

#[cfg(test)]
fn subsets_up_to(n: usize, p: usize) -> usize {
    (0..=p.min(n))
        .map(|a| ln_binomial(n as u64, a as u64).exp().round() as usize)
        .sum()
}

/// All subsets of `0..n` with at most `p` elements, smallest first.
fn subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..p.min(n) {
        let mut grown = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for j in start..n {
                let mut t = s.clone();
                t.push(j);
                grown.push(t);
            }
        }
        out.extend(grown.iter().cloned());
        frontier = grown;
    }
    out
}

/// Chance that one random information set exposes a fixed weight-`w` error.
fn stern_success_probability(
    m: usize,
    rank: usize,
    k1: usize,
    k2: usize,
    window: usize,
    p: usize,
    w: usize,
) -> f64 {
    let denom = ln_binomial(m as u64, w as u64);
    let mut total = 0.0;
    for a in 0..=p.min(k1) {
        for b in 0..=p.min(k2) {
            if a + b > w || w - a - b > rank - window {
                continue;
            }
            let ln = ln_binomial(k1 as u64, a as u64)
                + ln_binomial(k2 as u64, b as u64)
                + ln_binomial((rank - window) as u64, (w - a - b) as u64);
            total += (ln - denom).exp();
        }
    }
    total.min(1.0)
}
