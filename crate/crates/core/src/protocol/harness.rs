//! Independent trials and correctness estimation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    run_protocol1, run_protocol2, run_protocol3, ChannelKind, ExamplePlan, Mutation, OtOutcome,
    ProtocolParams, RoundPlan, Transcript,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::ir_pa::DecoderConfig;
use crate::rng::{stream, PartySeeds, Role};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "p1")]
    Standard,
    #[serde(rename = "p2")]
    Recursive,
    #[serde(rename = "p3")]
    Example,
}

impl ProtocolKind {
    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::Standard => "p1",
            ProtocolKind::Recursive => "p2",
            ProtocolKind::Example => "p3",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(ProtocolKind::Standard),
            "p2" => Ok(ProtocolKind::Recursive),
            "p3" => Ok(ProtocolKind::Example),
            _ => Err(Error::param("protocol", "must be one of p1, p2, p3")),
        }
    }
}

/// Everything that defines a trial except its seeds and inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub kind: ProtocolKind,
    pub n: usize,
    pub rounds: usize,
    pub delta: f64,
    pub channel: ChannelKind,
    pub decoder: DecoderConfig,
    pub mutation: Option<Mutation>,
}

impl TrialSpec {
    pub fn new(kind: ProtocolKind, n: usize, rounds: usize, delta: f64, channel: ChannelKind) -> Self {
        Self {
            kind,
            n,
            rounds,
            delta,
            channel,
            decoder: DecoderConfig::default(),
            mutation: None,
        }
    }

    pub fn params(&self, master: u64, trial: u64) -> Result<ProtocolParams> {
        let rounds = match self.kind {
            ProtocolKind::Example => 2,
            _ => self.rounds,
        };
        Ok(ProtocolParams::new(
            self.n,
            rounds,
            self.delta,
            self.channel,
            PartySeeds::for_trial(master, trial),
        )?
        .with_decoder(self.decoder)
        .with_mutation(self.mutation))
    }

    /// Key length per round.
    pub fn key_lens(&self) -> Result<Vec<usize>> {
        match self.kind {
            ProtocolKind::Example => Ok(ExamplePlan::new(self.n, self.delta).key_lens().to_vec()),
            _ => Ok(self
                .params(0, 0)?
                .schedule()?
                .iter()
                .map(RoundPlan::usable_key_len)
                .collect()),
        }
    }
}

/// Uniform `B` and key pairs drawn from the trial's input streams.
pub fn trial_inputs(master: u64, trial: u64, lens: &[usize]) -> (bool, Vec<(BitString, BitString)>) {
    let b = stream(master, trial, Role::ReceiverInput).gen::<bool>();
    let mut rng = stream(master, trial, Role::SenderInput);
    let keys = lens
        .iter()
        .map(|&l| (BitString::random(l, &mut rng), BitString::random(l, &mut rng)))
        .collect();
    (b, keys)
}

pub fn run_trial(spec: &TrialSpec, master: u64, trial: u64) -> Result<(OtOutcome, Transcript)> {
    let params = spec.params(master, trial)?;
    let (b, keys) = trial_inputs(master, trial, &spec.key_lens()?);
    match spec.kind {
        ProtocolKind::Standard => {
            if keys.len() != 1 {
                return Err(Error::param("T", "must be 1 for p1"));
            }
            run_protocol1(&params, b, &keys[0].0, &keys[0].1)
        }
        ProtocolKind::Recursive => run_protocol2(&params, b, &keys),
        ProtocolKind::Example => run_protocol3(&params, b, &keys),
    }
}

/// Summary of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub correct: bool,
    pub abort: Option<String>,
    pub decode_failures: usize,
    pub key_bits: Vec<usize>,
    pub key_bit_errors: usize,
}

impl TrialRecord {
    pub fn from_outcome(trial: u64, outcome: &OtOutcome) -> Self {
        Self {
            trial,
            correct: outcome.is_correct(),
            abort: outcome.abort.as_ref().map(|r| r.to_string()),
            decode_failures: outcome.decode_failures.len(),
            key_bits: outcome.round_key_bits(),
            key_bit_errors: outcome.key_bit_errors(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessEstimate {
    pub trials: usize,
    /// Trials with an abort, a decode failure or `K̂ ≠ K_B`.
    pub failures: usize,
    pub aborts: usize,
    pub decode_failures: usize,
    /// Completed trials whose estimate differs from `K_B`.
    pub key_mismatches: usize,
    pub estimate: f64,
    pub interval: [f64; 2],
    /// Mean of total key bits per channel use, aborted trials counting 0.
    pub mean_rate: f64,
    pub mean_round_rates: Vec<f64>,
    /// Wrong key bits over all key bits received in completed trials.
    pub key_bit_error_rate: f64,
    pub records: Vec<TrialRecord>,
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    [(centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p)]
}

/// Runs `trials` independent trials (in parallel on the current rayon pool)
/// and reduces them in trial order.
pub fn estimate_correctness(spec: &TrialSpec, trials: usize, master: u64) -> Result<CorrectnessEstimate> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, master, t).map(|(o, _)| TrialRecord::from_outcome(t, &o)))
        .collect::<Result<_>>()?;
    Ok(summarise(spec.n, records))
}

fn summarise(n: usize, records: Vec<TrialRecord>) -> CorrectnessEstimate {
    let trials = records.len();
    let failures = records.iter().filter(|r| !r.correct).count();
    let aborts = records.iter().filter(|r| r.abort.is_some()).count();
    let decode_failures = records.iter().filter(|r| r.decode_failures > 0).count();
    let key_mismatches = records
        .iter()
        .filter(|r| r.abort.is_none() && r.key_bit_errors > 0)
        .count();
    let rounds = records.iter().map(|r| r.key_bits.len()).max().unwrap_or(0);
    let mut round_bits = vec![0usize; rounds];
    for r in &records {
        for (acc, bits) in round_bits.iter_mut().zip(&r.key_bits) {
            *acc += bits;
        }
    }
    let scale = (trials * n) as f64;
    let mean_round_rates: Vec<f64> = round_bits.iter().map(|&b| b as f64 / scale).collect();
    let sent: usize = round_bits.iter().sum();
    let wrong: usize = records
        .iter()
        .filter(|r| r.abort.is_none())
        .map(|r| r.key_bit_errors)
        .sum();
    CorrectnessEstimate {
        trials,
        failures,
        aborts,
        decode_failures,
        key_mismatches,
        estimate: failures as f64 / trials as f64,
        interval: wilson_interval(failures, trials),
        mean_rate: sent as f64 / scale,
        mean_round_rates,
        key_bit_error_rate: if sent == 0 { 0.0 } else { wrong as f64 / sent as f64 },
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BsecParams;
    use proptest::prelude::*;

    fn bsec_spec(p: f64, q: f64, n: usize) -> TrialSpec {
        TrialSpec::new(
            ProtocolKind::Standard,
            n,
            1,
            0.05,
            ChannelKind::Bsec(BsecParams::new(p, q).unwrap()),
        )
    }

    #[test]
    fn wilson_known_values() {
        let [lo, hi] = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let [lo, hi] = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    #[test]
    fn noiseless_channel_never_fails() {
        let est = estimate_correctness(&bsec_spec(0.25, 0.0, 1000), 20, 3).unwrap();
        assert_eq!(est.failures, 0);
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.interval[0], 0.0);
        assert!((est.mean_rate - est.mean_round_rates[0]).abs() < 1e-15);
    }

    #[test]
    fn estimate_is_reproducible() {
        let spec = bsec_spec(0.3, 0.02, 500);
        let a = estimate_correctness(&spec, 12, 9).unwrap();
        let b = estimate_correctness(&spec, 12, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn inputs_match_key_lengths() {
        let (b0, keys) = trial_inputs(1, 2, &[5, 0, 9]);
        assert_eq!(keys.iter().map(|k| k.0.len()).collect::<Vec<_>>(), vec![5, 0, 9]);
        let (b1, again) = trial_inputs(1, 2, &[5, 0, 9]);
        assert_eq!((b0, &keys), (b1, &again));
    }

    #[test]
    fn kind_labels() {
        for k in [ProtocolKind::Standard, ProtocolKind::Recursive, ProtocolKind::Example] {
            assert_eq!(k.label().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("p4".parse::<ProtocolKind>().is_err());
    }

    proptest! {
        #[test]
        fn wilson_contains_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac) as usize;
            let [lo, hi] = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
    }
}
