//! Executable OT protocols with recorded transcripts.
//!
//! [`run_protocol1`] is the one-round BSEC protocol, [`run_protocol2`] the
//! `T`-round protocol that recycles discarded indices through erasure
//! emulation, and [`run_protocol3`] the two-phase protocol for the
//! four-input example channel. [`estimate_correctness`] runs independent
//! trials in parallel.

mod example;
mod harness;
mod standard;
mod transcript;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use example::{run_protocol3, ExamplePlan};
pub use harness::{
    estimate_correctness, run_trial, trial_inputs, wilson_interval, CorrectnessEstimate,
    ProtocolKind, TrialRecord, TrialSpec,
};
pub use standard::{receiver_key, run_protocol1, run_protocol2, sender_reply, SenderReply};
pub use transcript::{
    ChannelUse, Direction, Message, PayloadReader, PayloadWriter, ReceiverView, SenderView, Tag,
    Transcript,
};

use crate::bits::BitString;
use crate::channel::{emulated_params, BsecParams, BsecSymbol};
use crate::error::{Error, Result};
use crate::ir_pa::{ceil_guarded, DecoderConfig, IrParams, PaParams};
use crate::rng::PartySeeds;

/// Channel a protocol runs over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Bsec(BsecParams),
    Example1,
}

/// Deliberate protocol defects used to check that the security tests bite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// `I0` always holds the unerased pool and `I1` the erased one,
    /// whatever `B` is.
    FixedOrder,
    /// `I_B` is taken from the front of its pool and `I_B̄` from the back.
    LeakOrder,
    /// The discard rule keeps non-erased symbols with probability
    /// `p/(1−p) + 0.01`.
    SkewDiscard,
    /// The first bit of every pad `S_b` is sent as 0, exposing the first
    /// key bit of both keys.
    LeakPadBit,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::FixedOrder,
        Mutation::LeakOrder,
        Mutation::SkewDiscard,
        Mutation::LeakPadBit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Mutation::FixedOrder => "fixed-order",
            Mutation::LeakOrder => "leak-order",
            Mutation::SkewDiscard => "skew-discard",
            Mutation::LeakPadBit => "leak-pad-bit",
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|m| m.label()).collect();
                Error::param("mutate", format!("must be one of {}", known.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub n: usize,
    pub rounds: usize,
    pub delta: f64,
    pub channel: ChannelKind,
    pub seeds: PartySeeds,
    pub decoder: DecoderConfig,
    pub mutation: Option<Mutation>,
}

impl ProtocolParams {
    pub fn new(
        n: usize,
        rounds: usize,
        delta: f64,
        channel: ChannelKind,
        seeds: PartySeeds,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        if rounds == 0 {
            return Err(Error::param("T", "must be at least 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        Ok(Self {
            n,
            rounds,
            delta,
            channel,
            seeds,
            decoder: DecoderConfig::default(),
            mutation: None,
        })
    }

    pub fn with_decoder(mut self, decoder: DecoderConfig) -> Self {
        self.decoder = decoder;
        self
    }

    pub fn with_mutation(mut self, mutation: Option<Mutation>) -> Self {
        self.mutation = mutation;
        self
    }

    pub(crate) fn bsec(&self) -> Result<BsecParams> {
        match self.channel {
            ChannelKind::Bsec(p) => Ok(p),
            ChannelKind::Example1 => Err(Error::param("channel", "must be a BSEC")),
        }
    }

    /// Round plans for the BSEC protocols.
    pub fn schedule(&self) -> Result<Vec<RoundPlan>> {
        schedule(self.n, self.rounds, self.delta, self.bsec()?)
    }
}

/// Sizes used in one round of the BSEC protocols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    /// 1-based round index.
    pub round: usize,
    pub erasure: f64,
    pub crossover: f64,
    /// `n_{t−1}`: indices entering the round.
    pub active_len: usize,
    /// `n_t`: emulated indices carried to the next round (unused in the last).
    pub carry_len: usize,
    pub block_len: usize,
    pub check_len: usize,
    pub key_len: i64,
}

impl RoundPlan {
    /// A round transfers keys only when `m_t > 0` and `l_t > 0`.
    pub fn keyed(&self) -> bool {
        self.block_len > 0 && self.key_len > 0
    }

    pub fn usable_key_len(&self) -> usize {
        if self.keyed() {
            self.key_len as usize
        } else {
            0
        }
    }
}

/// `n_t = ⌈n_{t−1}(1−2p_t−Δ)/2⌉`, `m_t = ⌈n_{t−1}(p_t−Δ)⌉`,
/// `κ_t = ⌈m_t(H(q_t)+Δ)⌉`, `l_t = ⌊m_t(1−Δ)⌋ − κ_t`, with `(p_t, q_t)`
/// following the emulation recursion. Negative sizes clamp to 0.
pub fn schedule(n: usize, rounds: usize, delta: f64, channel: BsecParams) -> Result<Vec<RoundPlan>> {
    let (mut p, mut q) = (channel.erasure_prob(), channel.crossover_prob());
    let mut active = n;
    let mut plans = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let prev = active as f64;
        let carry = ceil_guarded(prev * (1.0 - 2.0 * p - delta) / 2.0).max(0) as usize;
        let block = ceil_guarded(prev * (p - delta)).max(0) as usize;
        let ir = IrParams::derive(block, q, delta)?;
        let pa = PaParams::derive(block, delta, ir.check_len);
        plans.push(RoundPlan {
            round,
            erasure: p,
            crossover: q,
            active_len: active,
            carry_len: carry,
            block_len: block,
            check_len: ir.check_len,
            key_len: pa.key_len,
        });
        active = carry;
        (p, q) = emulated_params(q);
    }
    Ok(plans)
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortReason {
    pub round: usize,
    pub pool: String,
    pub needed: usize,
    pub available: usize,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "insufficient indices, round {}: pool {} has {} of {} needed",
            self.round, self.pool, self.available, self.needed
        )
    }
}

/// Index lists sent in `Π₁`, as positions within the round's active indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    pub i0: Vec<usize>,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
}

impl IndexSets {
    pub fn for_bit(&self, b: bool) -> &[usize] {
        if b {
            &self.i1
        } else {
            &self.i0
        }
    }
}

/// Probability that a non-erased symbol is kept for the key (`V = 0`).
pub fn keep_probability(p: f64, mutation: Option<Mutation>) -> f64 {
    let base = if p >= 1.0 { 1.0 } else { p / (1.0 - p) };
    match mutation {
        Some(Mutation::SkewDiscard) => (base + 0.01).min(1.0),
        _ => base.min(1.0),
    }
}

/// `V = 1` for erasures; otherwise `V = 0` with probability `p/(1−p)` and
/// `V = 2` with probability `(1−2p)/(1−p)`.
pub fn discard_sample<R: Rng + ?Sized>(y: BsecSymbol, p: f64, rng: &mut R) -> u8 {
    discard_sample_with(y, p, None, rng)
}

pub(crate) fn discard_sample_with<R: Rng + ?Sized>(
    y: BsecSymbol,
    p: f64,
    mutation: Option<Mutation>,
    rng: &mut R,
) -> u8 {
    if y == BsecSymbol::Erasure {
        return 1;
    }
    if rng.gen_bool(keep_probability(p, mutation)) {
        0
    } else {
        2
    }
}

/// Receiver's index selection: `I_B` is the first `m` positions with
/// `V = 0`, `I_B̄` the first `m` with `V = 1` and `I2` the first `2·pairs`
/// with `V = 2`.
pub fn build_index_sets(
    v: &[u8],
    b: bool,
    m: usize,
    pairs: usize,
    round: usize,
) -> std::result::Result<IndexSets, AbortReason> {
    select_index_sets(v, b, m, pairs, round, None)
}

pub(crate) fn select_index_sets(
    v: &[u8],
    b: bool,
    m: usize,
    pairs: usize,
    round: usize,
    mutation: Option<Mutation>,
) -> std::result::Result<IndexSets, AbortReason> {
    let pool = |value: u8| -> Vec<usize> {
        v.iter()
            .enumerate()
            .filter(|&(_, &x)| x == value)
            .map(|(i, _)| i)
            .collect()
    };
    let take = |list: Vec<usize>, needed: usize, name: &str, from_back: bool| {
        if list.len() < needed {
            return Err(AbortReason {
                round,
                pool: name.to_string(),
                needed,
                available: list.len(),
            });
        }
        Ok(if from_back {
            list[list.len() - needed..].to_vec()
        } else {
            list[..needed].to_vec()
        })
    };
    let leak = mutation == Some(Mutation::LeakOrder);
    let kept = take(pool(0), m, "V=0", false)?;
    let erased = take(pool(1), m, "V=1", leak)?;
    let i2 = take(pool(2), 2 * pairs, "V=2", false)?;
    let (i0, i1) = if b && mutation != Some(Mutation::FixedOrder) {
        (erased, kept)
    } else {
        (kept, erased)
    };
    Ok(IndexSets { i0, i1, i2 })
}

/// Result of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtOutcome {
    pub n: usize,
    pub choice: bool,
    pub abort: Option<AbortReason>,
    /// `(K0, K1)` per round; keyless rounds hold empty strings.
    pub keys_sender: Vec<(BitString, BitString)>,
    /// `K̂` per completed round.
    pub keys_receiver: Vec<BitString>,
    /// Rounds whose reconciliation found no word.
    pub decode_failures: Vec<usize>,
}

impl OtOutcome {
    pub(crate) fn start(n: usize, choice: bool, keys: &[(BitString, BitString)]) -> Self {
        Self {
            n,
            choice,
            abort: None,
            keys_sender: keys.to_vec(),
            keys_receiver: Vec::with_capacity(keys.len()),
            decode_failures: Vec::new(),
        }
    }

    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    pub fn chosen_key(&self, round: usize) -> &BitString {
        let (k0, k1) = &self.keys_sender[round];
        if self.choice {
            k1
        } else {
            k0
        }
    }

    /// Key bits per round, 0 everywhere for an aborted run.
    pub fn round_key_bits(&self) -> Vec<usize> {
        self.keys_sender
            .iter()
            .map(|(k0, _)| if self.aborted() { 0 } else { k0.len() })
            .collect()
    }

    /// Total key bits per channel use.
    pub fn rate(&self) -> f64 {
        self.round_key_bits().iter().sum::<usize>() as f64 / self.n as f64
    }

    /// Bits where `K̂` differs from `K_B`, over completed rounds.
    pub fn key_bit_errors(&self) -> usize {
        self.keys_receiver
            .iter()
            .enumerate()
            .map(|(t, k)| {
                let want = self.chosen_key(t);
                if k.len() == want.len() {
                    (k ^ want).weight()
                } else {
                    want.len()
                }
            })
            .sum()
    }

    /// `K̂ = K_B` in every round with no abort and no decode failure.
    pub fn is_correct(&self) -> bool {
        !self.aborted()
            && self.decode_failures.is_empty()
            && self.keys_receiver.len() == self.keys_sender.len()
            && self
                .keys_receiver
                .iter()
                .enumerate()
                .all(|(t, k)| k == self.chosen_key(t))
    }
}

pub(crate) fn check_key_lengths(keys: &[(BitString, BitString)], lens: &[usize]) -> Result<()> {
    if keys.len() != lens.len() {
        return Err(Error::param(
            "keys",
            format!("need one key pair per round ({} rounds, {} pairs)", lens.len(), keys.len()),
        ));
    }
    for ((k0, k1), &want) in keys.iter().zip(lens) {
        for k in [k0, k1] {
            if k.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    actual: k.len(),
                });
            }
        }
    }
    Ok(())
}
