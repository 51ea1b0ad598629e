//! Protocols 1 and 2 over the BSEC.

use rand::Rng;

use super::transcript::{Direction, PayloadWriter, Tag, Transcript};
use super::{
    check_key_lengths, discard_sample_with, select_index_sets, IndexSets, Mutation, OtOutcome,
    ProtocolParams, RoundPlan,
};
use crate::bits::BitString;
use crate::channel::{emulate_bsec_pair, make_bsec, BsecSymbol};
use crate::error::{Error, Result};
use crate::hashing::{sample_seed, HashSeed};
use crate::ir_pa::{decode_with, default_weight_cap, DecoderConfig};

/// What the sender returns for one keyed round: `Π_{2,b} = K_b ⊕ F(X_{I_b})`
/// and `C_b = G(X_{I_b})`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenderReply {
    pub masked: [BitString; 2],
    pub checks: [BitString; 2],
}

fn gather(bits: &[bool], positions: &[usize]) -> BitString {
    BitString::from_bools(positions.iter().map(|&i| bits[i]))
}

pub fn sender_reply(
    x: &[bool],
    sets: &IndexSets,
    keys: (&BitString, &BitString),
    f: &HashSeed,
    g: &HashSeed,
    mutation: Option<Mutation>,
) -> Result<SenderReply> {
    let mut masked = [BitString::zeros(0), BitString::zeros(0)];
    let mut checks = [BitString::zeros(0), BitString::zeros(0)];
    for (b, key) in [(0, keys.0), (1, keys.1)] {
        let xb = gather(x, sets.for_bit(b == 1));
        let mut pad = f.hash(&xb)?;
        if mutation == Some(Mutation::LeakPadBit) && !pad.is_empty() {
            pad.set(0, false);
        }
        masked[b] = key.xor(&pad)?;
        checks[b] = g.hash(&xb)?;
    }
    Ok(SenderReply { masked, checks })
}

/// Receiver's estimate `K̂ = Π_{2,B} ⊕ F(X̂)` and whether decoding failed.
/// On failure the raw observation stands in for `X̂`.
pub fn receiver_key(
    y: &[BsecSymbol],
    sets: &IndexSets,
    b: bool,
    reply: &SenderReply,
    f: &HashSeed,
    g: &HashSeed,
    crossover: f64,
    decoder: &DecoderConfig,
) -> Result<(BitString, bool)> {
    let positions = sets.for_bit(b);
    let yb = BitString::from_bools(positions.iter().map(|&i| y[i].bit().unwrap_or(false)));
    let w_max = default_weight_cap(positions.len(), crossover);
    let outcome = decode_with(&yb, &reply.checks[b as usize], g, w_max, decoder)?;
    let failed = outcome.is_failure();
    let estimate = outcome.word().cloned().unwrap_or(yb);
    let key = reply.masked[b as usize].xor(&f.hash(&estimate)?)?;
    Ok((key, failed))
}

/// Protocol 1: one round, `|K0| = |K1| = l₁`.
pub fn run_protocol1(
    params: &ProtocolParams,
    b: bool,
    k0: &BitString,
    k1: &BitString,
) -> Result<(OtOutcome, Transcript)> {
    if params.rounds != 1 {
        return Err(Error::param("T", "must be 1 for the one-round protocol"));
    }
    run_rounds(params, b, &[(k0.clone(), k1.clone())])
}

/// Protocol 2: `T` rounds with one key pair per round (empty for keyless
/// rounds).
pub fn run_protocol2(
    params: &ProtocolParams,
    b: bool,
    keys: &[(BitString, BitString)],
) -> Result<(OtOutcome, Transcript)> {
    if !params.n.is_multiple_of(2) {
        return Err(Error::param("n", "must be even for the recursive protocol"));
    }
    run_rounds(params, b, keys)
}

fn run_rounds(
    params: &ProtocolParams,
    b: bool,
    keys: &[(BitString, BitString)],
) -> Result<(OtOutcome, Transcript)> {
    let plans = params.schedule()?;
    let lens: Vec<usize> = plans.iter().map(RoundPlan::usable_key_len).collect();
    check_key_lengths(keys, &lens)?;

    let spec = make_bsec(params.bsec()?);
    let mut streams = params.seeds.streams();
    let mut transcript = Transcript::new(spec.inputs().to_vec(), spec.outputs().to_vec(), b);
    let mut outcome = OtOutcome::start(params.n, b, keys);

    let inputs: Vec<usize> = (0..params.n)
        .map(|_| streams.sender.gen::<bool>() as usize)
        .collect();
    let sample = spec.sample(&inputs, &mut streams.channel)?;
    transcript.record_uses(1, &inputs, &sample.outputs);

    let mut xs: Vec<bool> = inputs.iter().map(|&x| x == 1).collect();
    let mut ys: Vec<BsecSymbol> = sample
        .outputs
        .iter()
        .map(|&y| BsecSymbol::from_index(y).expect("BSEC output alphabet"))
        .collect();

    for (t, plan) in plans.iter().enumerate() {
        let round = plan.round;
        let last = t + 1 == plans.len();
        let pairs = if last { 0 } else { plan.carry_len };
        let m = if plan.keyed() { plan.block_len } else { 0 };

        let v: Vec<u8> = ys
            .iter()
            .map(|&y| discard_sample_with(y, plan.erasure, params.mutation, &mut streams.receiver))
            .collect();
        let sets = match select_index_sets(&v, b, m, pairs, round, params.mutation) {
            Ok(sets) => sets,
            Err(reason) => {
                outcome.abort = Some(reason);
                return Ok((outcome, transcript));
            }
        };
        transcript.send(
            round,
            Direction::ReceiverToSender,
            Tag::IndexSets,
            PayloadWriter::new()
                .indices(&sets.i0)
                .indices(&sets.i1)
                .indices(&sets.i2)
                .finish(),
        );

        if plan.keyed() {
            let (k0, k1) = &keys[t];
            let f = sample_seed(m, plan.key_len as usize, &mut streams.hashing)?;
            let g = sample_seed(m, plan.check_len, &mut streams.hashing)?;
            let reply = sender_reply(&xs, &sets, (k0, k1), &f, &g, params.mutation)?;
            transcript.send(
                round,
                Direction::SenderToReceiver,
                Tag::HashSeeds,
                PayloadWriter::new().seed(&f).seed(&g).finish(),
            );
            transcript.send(
                round,
                Direction::SenderToReceiver,
                Tag::MaskedKeys,
                PayloadWriter::new()
                    .bits(&reply.masked[0])
                    .bits(&reply.masked[1])
                    .finish(),
            );
            transcript.send(
                round,
                Direction::SenderToReceiver,
                Tag::CheckValues,
                PayloadWriter::new()
                    .bits(&reply.checks[0])
                    .bits(&reply.checks[1])
                    .finish(),
            );
            let (key, failed) =
                receiver_key(&ys, &sets, b, &reply, &f, &g, plan.crossover, &params.decoder)?;
            if failed {
                outcome.decode_failures.push(round);
            }
            outcome.keys_receiver.push(key);
        } else {
            outcome.keys_receiver.push(BitString::zeros(0));
        }

        if !last {
            let (nx, ny, parities) = align_pairs(&xs, &ys, &sets.i2)?;
            transcript.send(
                round,
                Direction::SenderToReceiver,
                Tag::Parities,
                PayloadWriter::new().bits(&parities).finish(),
            );
            xs = nx;
            ys = ny;
        }
    }
    Ok((outcome, transcript))
}

/// Pairs consecutive positions of `i2`, reveals each pair's parity, flips
/// the first element when it is 1 and relabels the aligned pair.
pub(crate) fn align_pairs(
    xs: &[bool],
    ys: &[BsecSymbol],
    i2: &[usize],
) -> Result<(Vec<bool>, Vec<BsecSymbol>, BitString)> {
    let mut parities = BitString::zeros(i2.len() / 2);
    let mut nx = Vec::with_capacity(i2.len() / 2);
    let mut ny = Vec::with_capacity(i2.len() / 2);
    for (k, pair) in i2.chunks_exact(2).enumerate() {
        let (a, c) = (pair[0], pair[1]);
        let parity = xs[a] ^ xs[c];
        parities.set(k, parity);
        let ya = if parity { ys[a].flipped() } else { ys[a] };
        let (x, y) = emulate_bsec_pair(Some((xs[a] ^ parity, xs[c])), (ya, ys[c]))?;
        nx.push(x.expect("sender side supplied"));
        ny.push(y);
    }
    Ok((nx, ny, parities))
}
