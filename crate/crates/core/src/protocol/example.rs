//! Protocol 3: two phases over the four-input example channel.
//!
//! Phase 1 uses the uses where exactly one coordinate is erased; the
//! receiver orders the two erased-pattern lists by `B`. Phase 2 turns the
//! uses with no erasure into a noiseless-or-erased channel by revealing
//! `X1 ⊕ X2` and relabelling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transcript::{Direction, PayloadWriter, Tag, Transcript};
use super::{check_key_lengths, AbortReason, ChannelKind, Mutation, OtOutcome, ProtocolParams};
use crate::bits::BitString;
use crate::channel::{emulate_bsec_pair, example1_output_symbols, make_example1, BsecSymbol};
use crate::error::{Error, Result};
use crate::ir_pa::floor_guarded;

/// List sizes: `⌊n(1/4−Δ)⌋` per erased-pattern list, `⌊n(1/2−Δ)⌋` uses for
/// phase 2 and `⌊n(1/4−Δ)⌋` per phase-2 list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePlan {
    pub n: usize,
    pub erased_len: usize,
    pub pair_len: usize,
    pub second_len: usize,
}

impl ExamplePlan {
    pub fn new(n: usize, delta: f64) -> Self {
        let size = |frac: f64| floor_guarded(n as f64 * (frac - delta)).max(0) as usize;
        Self {
            n,
            erased_len: size(0.25),
            pair_len: size(0.5),
            second_len: size(0.25),
        }
    }

    /// Phase-1 keys cover both erased-pattern lists.
    pub fn key_lens(&self) -> [usize; 2] {
        [2 * self.erased_len, self.second_len]
    }
}

fn short(round: usize, pool: &str, needed: usize, available: usize) -> AbortReason {
    AbortReason {
        round,
        pool: pool.to_string(),
        needed,
        available,
    }
}

fn first(list: &[usize], needed: usize, round: usize, pool: &str) -> std::result::Result<Vec<usize>, AbortReason> {
    if list.len() < needed {
        Err(short(round, pool, needed, list.len()))
    } else {
        Ok(list[..needed].to_vec())
    }
}

fn pad(mut s: BitString, mutation: Option<Mutation>) -> BitString {
    if mutation == Some(Mutation::LeakPadBit) && !s.is_empty() {
        s.set(0, false);
    }
    s
}

pub fn run_protocol3(
    params: &ProtocolParams,
    b: bool,
    keys: &[(BitString, BitString)],
) -> Result<(OtOutcome, Transcript)> {
    if params.channel != ChannelKind::Example1 {
        return Err(Error::param("channel", "must be the example channel"));
    }
    let plan = ExamplePlan::new(params.n, params.delta);
    check_key_lengths(keys, &plan.key_lens())?;

    let spec = make_example1();
    let mut streams = params.seeds.streams();
    let mut transcript = Transcript::new(spec.inputs().to_vec(), spec.outputs().to_vec(), b);
    let mut outcome = OtOutcome::start(params.n, b, keys);

    let inputs: Vec<usize> = (0..params.n)
        .map(|_| streams.sender.gen_range(0..4))
        .collect();
    let sample = spec.sample(&inputs, &mut streams.channel)?;
    transcript.record_uses(1, &inputs, &sample.outputs);
    let x: Vec<(bool, bool)> = inputs.iter().map(|&i| (i & 2 != 0, i & 1 != 0)).collect();
    let y: Vec<(BsecSymbol, BsecSymbol)> = sample
        .outputs
        .iter()
        .map(|&o| example1_output_symbols(o))
        .collect();

    // Phase 1.
    let (mut only1, mut only2, mut both) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &(a, c)) in y.iter().enumerate() {
        match (a == BsecSymbol::Erasure, c == BsecSymbol::Erasure) {
            (false, true) => only1.push(i),
            (true, false) => only2.push(i),
            (false, false) => both.push(i),
            (true, true) => {}
        }
    }
    let lists = first(&only1, plan.erased_len, 1, "first coordinate only")
        .and_then(|e1| Ok((e1, first(&only2, plan.erased_len, 1, "second coordinate only")?)))
        .and_then(|(e1, e2)| Ok((e1, e2, first(&both, plan.pair_len, 1, "no erasure")?)));
    let (e1, e2, i2) = match lists {
        Ok(l) => l,
        Err(reason) => {
            outcome.abort = Some(reason);
            return Ok((outcome, transcript));
        }
    };
    let (hat1, hat2) = if b { (e2, e1) } else { (e1, e2) };
    transcript.send(
        1,
        Direction::ReceiverToSender,
        Tag::ErasedLists,
        PayloadWriter::new()
            .indices(&hat1)
            .indices(&hat2)
            .indices(&i2)
            .finish(),
    );

    let s0 = BitString::from_bools(hat1.iter().map(|&i| x[i].0).chain(hat2.iter().map(|&i| x[i].1)));
    let s1 = BitString::from_bools(hat1.iter().map(|&i| x[i].1).chain(hat2.iter().map(|&i| x[i].0)));
    let masked = [
        keys[0].0.xor(&pad(s0, params.mutation))?,
        keys[0].1.xor(&pad(s1, params.mutation))?,
    ];
    transcript.send(
        1,
        Direction::SenderToReceiver,
        Tag::MaskedKeys,
        PayloadWriter::new().bits(&masked[0]).bits(&masked[1]).finish(),
    );
    let readable = |i: usize| {
        let (a, c) = y[i];
        a.bit().or(c.bit()).expect("one coordinate is unerased")
    };
    let estimate = BitString::from_bools(hat1.iter().chain(&hat2).map(|&i| readable(i)));
    outcome.keys_receiver.push(masked[b as usize].xor(&estimate)?);

    // Phase 2.
    let mut parities = BitString::zeros(i2.len());
    let mut x2 = Vec::with_capacity(i2.len());
    let mut y2 = Vec::with_capacity(i2.len());
    for (k, &i) in i2.iter().enumerate() {
        let ((xa, xc), (ya, yc)) = (x[i], y[i]);
        let parity = xa ^ xc;
        parities.set(k, parity);
        let ya = if parity { ya.flipped() } else { ya };
        let (xe, ye) = emulate_bsec_pair(Some((xa ^ parity, xc)), (ya, yc))?;
        x2.push(xe.expect("sender side supplied"));
        y2.push(ye);
    }
    transcript.send(
        1,
        Direction::SenderToReceiver,
        Tag::Parities,
        PayloadWriter::new().bits(&parities).finish(),
    );

    let clear: Vec<usize> = (0..y2.len()).filter(|&k| y2[k] != BsecSymbol::Erasure).collect();
    let erased: Vec<usize> = (0..y2.len()).filter(|&k| y2[k] == BsecSymbol::Erasure).collect();
    let sets = first(&clear, plan.second_len, 2, "unerased")
        .and_then(|c| Ok((c, first(&erased, plan.second_len, 2, "erased")?)));
    let (chosen, other) = match sets {
        Ok(s) => s,
        Err(reason) => {
            outcome.abort = Some(reason);
            return Ok((outcome, transcript));
        }
    };
    let (i0, i1) = if b { (other, chosen) } else { (chosen, other) };
    transcript.send(
        2,
        Direction::ReceiverToSender,
        Tag::IndexSets,
        PayloadWriter::new().indices(&i0).indices(&i1).finish(),
    );
    let s2 = |list: &[usize]| BitString::from_bools(list.iter().map(|&k| x2[k]));
    let masked = [
        keys[1].0.xor(&pad(s2(&i0), params.mutation))?,
        keys[1].1.xor(&pad(s2(&i1), params.mutation))?,
    ];
    transcript.send(
        2,
        Direction::SenderToReceiver,
        Tag::MaskedKeys,
        PayloadWriter::new().bits(&masked[0]).bits(&masked[1]).finish(),
    );
    let mine = if b { &i1 } else { &i0 };
    let estimate = BitString::from_bools(mine.iter().map(|&k| y2[k].bit().unwrap_or(false)));
    outcome.keys_receiver.push(masked[b as usize].xor(&estimate)?);
    Ok((outcome, transcript))
}
