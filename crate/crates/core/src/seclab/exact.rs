//! Exact enumeration on tiny instances with rational arithmetic.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::BsecSymbol;
use crate::error::{Error, Result};
use crate::hashing::HashSeed;
use crate::protocol::{select_index_sets, sender_reply, IndexSets, Mutation, PayloadWriter};

/// Largest number of atoms an enumeration may visit.
pub const ATOM_LIMIT: u128 = 100_000_000;

/// Parses `a/b`, a decimal such as `0.25`, or an integer, exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("`{text}` is not a rational number"));
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if frac.chars().any(|c| !c.is_ascii_digit()) || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{}{frac}", if int.is_empty() { "0" } else { int })
        .parse()
        .map_err(|_| bad())?;
    Ok(BigRational::new(digits, num::pow(BigInt::from(10), frac.len())))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// A finite distribution with exact probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDist {
    support: BTreeMap<String, BigRational>,
}

impl ExactDist {
    /// Merges repeated labels; probabilities must be non-negative and sum to 1.
    pub fn new<I: IntoIterator<Item = (String, BigRational)>>(items: I) -> Result<Self> {
        let mut support: BTreeMap<String, BigRational> = BTreeMap::new();
        for (label, p) in items {
            if p.is_negative() {
                return Err(Error::Contract(format!("negative probability for {label}")));
            }
            *support.entry(label).or_insert_with(BigRational::zero) += p;
        }
        let total: BigRational = support.values().sum();
        if !total.is_one() {
            return Err(Error::Contract(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> impl Iterator<Item = (&str, &BigRational)> {
        self.support.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, label: &str) -> BigRational {
        self.support.get(label).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Image under a relabelling.
    pub fn marginal<F: Fn(&str) -> String>(&self, f: F) -> Self {
        let mut support: BTreeMap<String, BigRational> = BTreeMap::new();
        for (k, v) in &self.support {
            *support.entry(f(k)).or_insert_with(BigRational::zero) += v;
        }
        Self { support }
    }

    /// Product of two independent distributions, labels joined by `|`.
    pub fn product(&self, other: &Self) -> Self {
        let mut support = BTreeMap::new();
        for (a, p) in &self.support {
            for (b, q) in &other.support {
                support.insert(format!("{a}|{b}"), p * q);
            }
        }
        Self { support }
    }

    pub fn total_variation(&self, other: &Self) -> BigRational {
        let mut sum = BigRational::zero();
        for (k, p) in &self.support {
            sum += (p - other.prob(k)).abs();
        }
        for (k, q) in &other.support {
            if !self.support.contains_key(k) {
                sum += q;
            }
        }
        sum / BigRational::from_integer(2.into())
    }
}

/// Protocol 1 on BSEC(p, q) with `m = κ = l = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactInstance {
    pub n: usize,
    pub p: BigRational,
    pub q: BigRational,
    pub mutation: Option<Mutation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPrivacy {
    /// `d_var(P_{B K₀ K₁ Xⁿ Π}, P_B × P_{K₀ K₁ Xⁿ Π})` as `a/b`.
    pub distance: String,
    pub distance_f64: f64,
    pub atoms: u128,
    pub outcomes: usize,
    pub abort_probability: String,
}

/// Keep probability for a non-erased symbol, exactly.
fn keep_probability_exact(p: &BigRational, mutation: Option<Mutation>) -> BigRational {
    let one = BigRational::one();
    let base = p / (&one - p);
    let r = match mutation {
        Some(Mutation::SkewDiscard) => base + BigRational::new(1.into(), 100.into()),
        _ => base,
    };
    r.min(one)
}

fn check_probabilities(p: &BigRational, q: &BigRational) -> Result<()> {
    let half = BigRational::new(1.into(), 2.into());
    if p.is_negative() || *p > half {
        return Err(Error::param("p", format!("must satisfy 0 ≤ p ≤ 1/2 (got {p})")));
    }
    if q.is_negative() || *q > BigRational::one() {
        return Err(Error::param("q", format!("must satisfy 0 ≤ q ≤ 1 (got {q})")));
    }
    Ok(())
}

const KEY_LEN: usize = 1;
const BLOCK: usize = 1;

/// Upper bound on the atoms visited: `B`, both keys, `Xⁿ`, five
/// (output, `V`) outcomes per use and both one-bit hash seeds.
pub fn atom_count(n: usize) -> u128 {
    let pow = |base: u128, e: usize| (0..e).try_fold(1u128, |acc, _| acc.checked_mul(base));
    let per_use = pow(10, n).unwrap_or(u128::MAX); // 2 inputs × 5 outcomes
    let seeds = 1u128 << (2 * (BLOCK + KEY_LEN - 1));
    per_use.saturating_mul(2 * (1 << (2 * KEY_LEN)) * seeds)
}

/// `(I0, I1)` as index lists.
type SetPair = (Vec<usize>, Vec<usize>);
/// A view label with its probability.
type LabeledMass = (String, BigRational);

/// Exact law of the index sets (or abort) given `Xⁿ = x` and `B = b`,
/// enumerating channel outputs and discard choices.
fn index_set_law(
    x: &[bool],
    b: bool,
    p: &BigRational,
    q: &BigRational,
    keep: &BigRational,
    mutation: Option<Mutation>,
) -> BTreeMap<Option<SetPair>, BigRational> {
    let one = BigRational::one();
    // (output, V, probability) per input bit
    let outcomes = |bit: bool| {
        let unerased = &one - p;
        vec![
            (BsecSymbol::from_bit(bit), 0u8, &unerased * (&one - q) * keep),
            (BsecSymbol::from_bit(bit), 2u8, &unerased * (&one - q) * (&one - keep)),
            (BsecSymbol::from_bit(!bit), 0u8, &unerased * q * keep),
            (BsecSymbol::from_bit(!bit), 2u8, &unerased * q * (&one - keep)),
            (BsecSymbol::Erasure, 1u8, p.clone()),
        ]
    };
    let per_use: Vec<_> = x.iter().map(|&bit| outcomes(bit)).collect();
    let mut law = BTreeMap::new();
    let mut v = vec![0u8; x.len()];
    fn walk(
        i: usize,
        weight: BigRational,
        per_use: &[Vec<(BsecSymbol, u8, BigRational)>],
        v: &mut Vec<u8>,
        emit: &mut dyn FnMut(&[u8], BigRational),
    ) {
        if weight.is_zero() {
            return;
        }
        if i == per_use.len() {
            emit(v, weight);
            return;
        }
        for (_, vi, pr) in &per_use[i] {
            v[i] = *vi;
            walk(i + 1, &weight * pr, per_use, v, emit);
        }
    }
    walk(0, one.clone(), &per_use, &mut v, &mut |v, w| {
        let key = select_index_sets(v, b, BLOCK, 0, 1, mutation)
            .ok()
            .map(|s| (s.i0, s.i1));
        *law.entry(key).or_insert_with(BigRational::zero) += w;
    });
    law
}

fn hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

/// Sender-side view label for one atom.
fn view_label(
    keys: (&BitString, &BitString),
    x: &[bool],
    sets: Option<&(Vec<usize>, Vec<usize>)>,
    seeds: (&HashSeed, &HashSeed),
    mutation: Option<Mutation>,
) -> Result<String> {
    let xs = BitString::from_bools(x.iter().copied());
    let head = PayloadWriter::new().bits(keys.0).bits(keys.1).bits(&xs);
    let Some((i0, i1)) = sets else {
        return Ok(format!("{}:abort", hex(&head.finish())));
    };
    let sets = IndexSets {
        i0: i0.clone(),
        i1: i1.clone(),
        i2: Vec::new(),
    };
    let reply = sender_reply(x, &sets, keys, seeds.0, seeds.1, mutation)?;
    let body = head
        .indices(i0)
        .indices(i1)
        .seed(seeds.0)
        .seed(seeds.1)
        .bits(&reply.masked[0])
        .bits(&reply.masked[1])
        .bits(&reply.checks[0])
        .bits(&reply.checks[1]);
    Ok(hex(&body.finish()))
}

/// Exact joint law of `(B, K₀, K₁, Xⁿ, Π)` for the instance.
pub fn sender_view_joint(inst: &ExactInstance) -> Result<(ExactDist, BigRational)> {
    check_probabilities(&inst.p, &inst.q)?;
    if inst.n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let atoms = atom_count(inst.n);
    if atoms > ATOM_LIMIT {
        return Err(Error::InstanceTooLarge {
            atoms,
            limit: ATOM_LIMIT,
        });
    }
    let keep = keep_probability_exact(&inst.p, inst.mutation);
    let key_space: Vec<BitString> = (0..1u64 << KEY_LEN)
        .map(|k| BitString::from_bools((0..KEY_LEN).map(|i| k >> i & 1 == 1)))
        .collect();
    let seed_space: Vec<HashSeed> = (0..2u64)
        .map(|d| HashSeed::new(BLOCK, KEY_LEN, BitString::from_bools([d == 1])))
        .collect::<Result<_>>()?;
    // P(B) P(K₀) P(K₁) P(Xⁿ) P(F) P(G)
    let scale = BigRational::new(
        1.into(),
        BigInt::from(2u32) * BigInt::from(key_space.len().pow(2))
            * (BigInt::from(1u8) << inst.n)
            * BigInt::from(seed_space.len().pow(2)),
    );

    let parts: Vec<Result<(Vec<LabeledMass>, BigRational)>> = (0..1u64 << inst.n)
        .into_par_iter()
        .map(|xv| {
            let x: Vec<bool> = (0..inst.n).map(|i| xv >> i & 1 == 1).collect();
            let mut items = Vec::new();
            let mut aborted = BigRational::zero();
            for b in [false, true] {
                let law = index_set_law(&x, b, &inst.p, &inst.q, &keep, inst.mutation);
                for (sets, w) in law {
                    let w = &w * &scale;
                    for k0 in &key_space {
                        for k1 in &key_space {
                            for f in &seed_space {
                                for g in &seed_space {
                                    if sets.is_none() {
                                        aborted += &w;
                                    }
                                    let label = view_label((k0, k1), &x, sets.as_ref(), (f, g), inst.mutation)?;
                                    items.push((format!("{}|{label}", b as u8), w.clone()));
                                }
                            }
                        }
                    }
                }
            }
            Ok((items, aborted))
        })
        .collect();
    let mut all = Vec::new();
    let mut aborted = BigRational::zero();
    for part in parts {
        let (items, a) = part?;
        all.extend(items);
        aborted += a;
    }
    Ok((ExactDist::new(all)?, aborted))
}

/// `d_var(P_{B K₀ K₁ Xⁿ Π}, P_B × P_{K₀ K₁ Xⁿ Π})`, exactly.
pub fn exact_receiver_privacy(inst: &ExactInstance) -> Result<ExactPrivacy> {
    let (joint, aborted) = sender_view_joint(inst)?;
    let split = |label: &str| -> (String, String) {
        let (b, rest) = label.split_once('|').expect("labels carry B");
        (b.to_string(), rest.to_string())
    };
    let pb = joint.marginal(|l| split(l).0);
    let rest = joint.marginal(|l| split(l).1);
    let distance = joint.total_variation(&pb.product(&rest));
    Ok(ExactPrivacy {
        distance_f64: rational_to_f64(&distance),
        distance: distance.to_string(),
        atoms: atom_count(inst.n),
        outcomes: joint.len(),
        abort_probability: aborted.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VSymmetry {
    /// `P(V=0|x)` as `a/b`.
    pub v0: String,
    pub v1: String,
    pub holds: bool,
}

/// Checks `P(V=0|x) = P(V=1|x) = p` under the discard rule, exactly.
pub fn exact_v_symmetry(p: &BigRational, mutation: Option<Mutation>) -> Result<VSymmetry> {
    if !p.is_positive() || *p > BigRational::new(1.into(), 2.into()) {
        return Err(Error::param("p", format!("must satisfy 0 < p ≤ 1/2 (got {p})")));
    }
    // the law of V does not depend on x or on the crossover
    let v0 = (BigRational::one() - p) * keep_probability_exact(p, mutation);
    let v1 = p.clone();
    Ok(VSymmetry {
        holds: v0 == v1 && &v1 == p,
        v0: v0.to_string(),
        v1: v1.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn instance(n: usize, p: BigRational, q: BigRational, mutation: Option<Mutation>) -> ExactInstance {
        ExactInstance { n, p, q, mutation }
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1/4").unwrap(), r(1, 4));
        assert_eq!(parse_rational("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("0.1").unwrap(), r(1, 10));
        assert_eq!(parse_rational("2").unwrap(), r(2, 1));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        for bad in ["", "1/0", "a", "0.2x", "1/b"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exact_dist_basics() {
        let d = ExactDist::new([("a".into(), r(1, 3)), ("b".into(), r(2, 3))]).unwrap();
        let e = ExactDist::new([("a".into(), r(1, 2)), ("c".into(), r(1, 2))]).unwrap();
        assert_eq!(d.total_variation(&e), r(2, 3));
        assert_eq!(d.total_variation(&d), r(0, 1));
        assert!(ExactDist::new([("a".into(), r(1, 2))]).is_err());
        assert!(ExactDist::new([("a".into(), r(3, 2)), ("b".into(), r(-1, 2))]).is_err());
    }

    #[test]
    fn joint_sums_to_one_exactly() {
        let (joint, aborted) = sender_view_joint(&instance(2, r(1, 4), r(1, 4), None)).unwrap();
        let total: BigRational = joint.support().map(|(_, p)| p.clone()).sum();
        assert!(total.is_one());
        // n = 2 aborts unless one use has V=0 and the other V=1
        assert_eq!(aborted, BigRational::one() - r(2, 16));
    }

    #[test]
    fn faithful_protocol_leaks_nothing() {
        for p in [r(1, 4), r(1, 2)] {
            for q in [r(1, 4), r(1, 2)] {
                for n in [2, 4] {
                    let out = exact_receiver_privacy(&instance(n, p.clone(), q.clone(), None)).unwrap();
                    assert_eq!(out.distance, "0", "p={p} q={q} n={n}");
                }
            }
        }
    }

    #[test]
    fn order_leak_is_detected() {
        let out = exact_receiver_privacy(&instance(4, r(1, 4), r(1, 4), Some(Mutation::LeakOrder))).unwrap();
        assert!(out.distance_f64 > 0.0);
        let out = exact_receiver_privacy(&instance(4, r(1, 4), r(1, 4), Some(Mutation::FixedOrder))).unwrap();
        assert_eq!(out.distance, "0");
    }

    #[test]
    fn pure_bsc_always_aborts() {
        let out = exact_receiver_privacy(&instance(3, r(0, 1), r(1, 4), None)).unwrap();
        assert_eq!((out.distance.as_str(), out.abort_probability.as_str()), ("0", "1"));
    }

    #[test]
    fn size_guard() {
        assert_eq!(atom_count(4), 10_000 * 2 * 4 * 4);
        match exact_receiver_privacy(&instance(8, r(1, 4), r(1, 4), None)) {
            Err(Error::InstanceTooLarge { atoms, limit }) => {
                assert_eq!(limit, ATOM_LIMIT);
                assert_eq!(atoms, 100_000_000 * 32);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn v_symmetry() {
        assert!(exact_v_symmetry(&r(1, 4), None).unwrap().holds);
        assert_eq!(exact_v_symmetry(&r(1, 4), None).unwrap().v0, "1/4");
        assert!(exact_v_symmetry(&r(1, 2), None).unwrap().holds);
        assert!(!exact_v_symmetry(&r(1, 4), Some(Mutation::SkewDiscard)).unwrap().holds);
        assert!(exact_v_symmetry(&r(0, 1), None).is_err());
        assert!(exact_v_symmetry(&r(3, 4), None).is_err());
    }
}
