//! Monte-Carlo dependence tests between the unchosen key and the
//! receiver's view.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bits::BitString;
use crate::channel::BsecParams;
use crate::error::{Error, Result};
use crate::hashing::HashSeed;
use crate::protocol::{run_trial, ChannelKind, Mutation, PayloadReader, ProtocolKind, Tag, TrialSpec};
use crate::rng::labeled_stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenderSecurityConfig {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub mutation: Option<Mutation>,
    pub bootstrap: usize,
    /// Family-wise significance level.
    pub alpha: f64,
}

impl Default for SenderSecurityConfig {
    /// `p = 1/2` so that every index of the unchosen set is erased; the
    /// block length is 40 and the key length 3.
    fn default() -> Self {
        Self {
            n: 88,
            p: 0.5,
            q: 0.25,
            delta: 0.05,
            trials: 10_000,
            seed: 11,
            mutation: None,
            bootstrap: 200,
            alpha: 1e-3,
        }
    }
}

/// Result of a contingency-table test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceTest {
    pub digest: String,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Plug-in `d_var` between the empirical joint and the product of its marginals.
    pub d_var: f64,
    pub d_var_interval: [f64; 2],
    pub min_expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenderSecurityOutcome {
    pub key_len: usize,
    pub trials: usize,
    pub completed: usize,
    pub tests: Vec<DependenceTest>,
    /// Bonferroni-adjusted smallest p-value.
    pub p_value: f64,
    pub rejected: bool,
    pub warnings: Vec<String>,
}

/// Pearson χ² test of independence over paired categorical samples.
pub fn chi_square_independence(pairs: &[(usize, usize)], rows: usize, cols: usize) -> (f64, usize, f64, f64) {
    let n = pairs.len() as f64;
    let mut table = vec![0f64; rows * cols];
    let (mut rs, mut cs) = (vec![0f64; rows], vec![0f64; cols]);
    for &(a, b) in pairs {
        table[a * cols + b] += 1.0;
        rs[a] += 1.0;
        cs[b] += 1.0;
    }
    let mut stat = 0.0;
    let mut min_expected = f64::INFINITY;
    for a in (0..rows).filter(|&a| rs[a] > 0.0) {
        for b in (0..cols).filter(|&b| cs[b] > 0.0) {
            let e = rs[a] * cs[b] / n;
            min_expected = min_expected.min(e);
            stat += (table[a * cols + b] - e).powi(2) / e;
        }
    }
    let live = |v: &[f64]| v.iter().filter(|&&x| x > 0.0).count();
    let dof = (live(&rs).saturating_sub(1)) * (live(&cs).saturating_sub(1));
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
    };
    (stat, dof, p_value, min_expected)
}

/// `½ Σ |p̂(a,b) − p̂(a) p̂(b)|`.
pub fn plugin_dvar(pairs: &[(usize, usize)], rows: usize, cols: usize) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mut table = vec![0f64; rows * cols];
    let (mut rs, mut cs) = (vec![0f64; rows], vec![0f64; cols]);
    for &(a, b) in pairs {
        table[a * cols + b] += 1.0;
        rs[a] += 1.0;
        cs[b] += 1.0;
    }
    let mut sum = 0.0;
    for a in 0..rows {
        for b in 0..cols {
            sum += (table[a * cols + b] / n - rs[a] * cs[b] / (n * n)).abs();
        }
    }
    sum / 2.0
}

fn bootstrap_interval(pairs: &[(usize, usize)], size: usize, resamples: usize, seed: u64, label: &str) -> [f64; 2] {
    if pairs.is_empty() || resamples == 0 {
        return [0.0, 0.0];
    }
    let mut rng = labeled_stream(seed, 0, &format!("seclab/bootstrap/{label}"));
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<(usize, usize)> =
                (0..pairs.len()).map(|_| pairs[rng.gen_range(0..pairs.len())]).collect();
            plugin_dvar(&sample, size, size)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let at = |f: f64| stats[((f * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    [at(0.025), at(0.975)]
}

/// Some solution of `F z = c` over GF(2), by Gaussian elimination.
fn particular_solution(f: &HashSeed, c: &BitString) -> Option<BitString> {
    let (m, r) = (f.in_len(), f.out_len());
    let mut rows: Vec<(BitString, bool)> = (0..r).map(|i| (f.row(i), c.get(i))).collect();
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..m {
        let Some(pos) = (next..r).find(|&i| rows[i].0.get(col)) else {
            continue;
        };
        rows.swap(next, pos);
        let pivot = rows[next].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != next && row.0.get(col) {
                row.0.xor_assign(&pivot.0);
                row.1 ^= pivot.1;
            }
        }
        pivots.push(col);
        next += 1;
    }
    if rows[next..].iter().any(|(_, rhs)| *rhs) {
        return None;
    }
    let mut z = BitString::zeros(m);
    for (i, &col) in pivots.iter().enumerate() {
        if rows[i].1 {
            z.set(col, true);
        }
    }
    Some(z)
}

/// One completed trial: `K_B̄` and the two view digests.
fn observe(spec: &TrialSpec, seed: u64, trial: u64) -> Result<Option<(usize, usize, usize)>> {
    let (outcome, transcript) = run_trial(spec, seed, trial)?;
    if outcome.aborted() {
        return Ok(None);
    }
    let other = !outcome.choice as usize;
    let key = if other == 0 { &outcome.keys_sender[0].0 } else { &outcome.keys_sender[0].1 };
    let view = transcript.receiver_view();
    let payload = |tag: Tag| {
        view.messages
            .iter()
            .find(|m| m.round == 1 && m.tag == tag)
            .map(|m| m.payload.as_slice())
            .ok_or_else(|| Error::Contract(format!("missing {tag:?} message")))
    };
    let mut seeds = PayloadReader::new(payload(Tag::HashSeeds)?);
    let (pad_hash, check_hash) = (seeds.seed()?, seeds.seed()?);
    let mut masked = PayloadReader::new(payload(Tag::MaskedKeys)?);
    let masked = [masked.bits()?, masked.bits()?];
    let mut checks = PayloadReader::new(payload(Tag::CheckValues)?);
    let checks = [checks.bits()?, checks.bits()?];

    let plain = masked[other].to_u64() as usize;
    // best linear guess of the pad from the check value
    let guess = match particular_solution(&check_hash, &checks[other]) {
        Some(z) => masked[other].xor(&pad_hash.hash(&z)?)?.to_u64() as usize,
        None => plain,
    };
    Ok(Some((key.to_u64() as usize, plain, guess)))
}

/// Tests `K_B̄` against the masked key `Π₂,B̄` and against `Π₂,B̄ ⊕ F(z)`
/// for a solution `z` of the unchosen check equations.
pub fn sender_security(cfg: &SenderSecurityConfig) -> Result<SenderSecurityOutcome> {
    if cfg.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut spec = TrialSpec::new(
        ProtocolKind::Standard,
        cfg.n,
        1,
        cfg.delta,
        ChannelKind::Bsec(BsecParams::new(cfg.p, cfg.q)?),
    );
    spec.mutation = cfg.mutation;
    let key_len = spec.key_lens()?[0];
    if key_len > 4 {
        return Err(Error::param("l", format!("must be at most 4 bits for test power (got {key_len})")));
    }
    if key_len == 0 {
        return Ok(SenderSecurityOutcome {
            key_len,
            trials: cfg.trials,
            completed: 0,
            tests: Vec::new(),
            p_value: 1.0,
            rejected: false,
            warnings: vec!["key length 0: nothing to conceal".into()],
        });
    }
    let observed: Vec<Option<(usize, usize, usize)>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| observe(&spec, cfg.seed, t))
        .collect::<Result<_>>()?;
    let samples: Vec<(usize, usize, usize)> = observed.into_iter().flatten().collect();
    let size = 1usize << key_len;

    let mut warnings = Vec::new();
    let tests: Vec<DependenceTest> = [("masked-key", 1usize), ("masked-key-xor-guess", 2)]
        .into_iter()
        .map(|(name, which)| {
            let pairs: Vec<(usize, usize)> = samples
                .iter()
                .map(|s| (s.0, if which == 1 { s.1 } else { s.2 }))
                .collect();
            let (chi_square, dof, p_value, min_expected) = chi_square_independence(&pairs, size, size);
            if min_expected < 5.0 {
                warnings.push(format!("{name}: smallest expected cell count {min_expected:.2} < 5, low power"));
            }
            DependenceTest {
                digest: name.to_string(),
                chi_square,
                dof,
                p_value,
                d_var: plugin_dvar(&pairs, size, size),
                d_var_interval: bootstrap_interval(&pairs, size, cfg.bootstrap, cfg.seed, name),
                min_expected,
            }
        })
        .collect();
    let p_min = tests.iter().map(|t| t.p_value).fold(1.0, f64::min);
    let p_value = (p_min * tests.len() as f64).min(1.0);
    Ok(SenderSecurityOutcome {
        key_len,
        trials: cfg.trials,
        completed: samples.len(),
        rejected: p_value < cfg.alpha,
        p_value,
        tests,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::sample_seed;
    use crate::rng::{stream, Role};

    #[test]
    fn chi_square_known_table() {
        // 2×2 table [[30, 10], [10, 30]]: χ² = 20
        let mut pairs = vec![(0, 0); 30];
        pairs.extend(vec![(0, 1); 10]);
        pairs.extend(vec![(1, 0); 10]);
        pairs.extend(vec![(1, 1); 30]);
        let (stat, dof, p, min_e) = chi_square_independence(&pairs, 2, 2);
        assert!((stat - 20.0).abs() < 1e-12);
        assert_eq!(dof, 1);
        assert!((p - 7.744_216e-6).abs() < 1e-9, "{p}");
        assert_eq!(min_e, 20.0);
        assert!((plugin_dvar(&pairs, 2, 2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn independent_table_has_zero_dvar() {
        let pairs: Vec<(usize, usize)> = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).collect();
        assert_eq!(plugin_dvar(&pairs, 4, 4), 0.0);
        assert_eq!(chi_square_independence(&pairs, 4, 4).0, 0.0);
    }

    #[test]
    fn particular_solutions_satisfy_checks() {
        let mut rng = stream(5, 0, Role::Hashing);
        for _ in 0..50 {
            let f = sample_seed(20, 12, &mut rng).unwrap();
            let x = BitString::random(20, &mut rng);
            let c = f.hash(&x).unwrap();
            let z = particular_solution(&f, &c).unwrap();
            assert_eq!(f.hash(&z).unwrap(), c);
        }
    }

    #[test]
    fn default_instance_sizes() {
        let cfg = SenderSecurityConfig {
            trials: 600,
            bootstrap: 20,
            ..SenderSecurityConfig::default()
        };
        let out = sender_security(&cfg).unwrap();
        assert_eq!(out.key_len, 3);
        assert!(out.completed > 300 && out.completed < 600);
        assert!(!out.rejected);
    }

    #[test]
    fn pad_leak_is_rejected() {
        let cfg = SenderSecurityConfig {
            trials: 600,
            bootstrap: 20,
            mutation: Some(Mutation::LeakPadBit),
            ..SenderSecurityConfig::default()
        };
        let out = sender_security(&cfg).unwrap();
        assert!(out.rejected, "{out:?}");
        assert!(out.tests[0].d_var > 0.3);
    }

    #[test]
    fn keyless_instance_is_trivial() {
        let cfg = SenderSecurityConfig {
            n: 20,
            trials: 10,
            ..SenderSecurityConfig::default()
        };
        let out = sender_security(&cfg).unwrap();
        assert_eq!((out.key_len, out.rejected, out.p_value), (0, false, 1.0));
    }
}
