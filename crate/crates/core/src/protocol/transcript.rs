//! Message records, party views and their wire forms.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "OTTR" version:u8 choice:u8
//! inputs:  u16 count, then (u16 len, utf-8) labels
//! outputs: u16 count, then (u16 len, utf-8) labels
//! uses:    u32 count, then (round:u32, input:u16, output:u16)
//! msgs:    u32 count, then (round:u32, direction:u8, tag:u8, len:u32, payload)
//! ```

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hashing::HashSeed;

const MAGIC: &[u8; 4] = b"OTTR";
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "sender-to-receiver")]
    SenderToReceiver,
    #[serde(rename = "receiver-to-sender")]
    ReceiverToSender,
}

impl Direction {
    fn code(self) -> u8 {
        match self {
            Direction::SenderToReceiver => 0,
            Direction::ReceiverToSender => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Direction::SenderToReceiver),
            1 => Ok(Direction::ReceiverToSender),
            _ => Err(Error::Parse(format!("unknown direction code {c}"))),
        }
    }
}

/// What a message carries. Payload layouts are listed per variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    /// Index lists `I0, I1, I2` (Protocol 3 phase 2: `I0, I1`).
    IndexSets,
    /// Seeds `F, G`.
    HashSeeds,
    /// Bit strings `K0 ⊕ S0, K1 ⊕ S1`.
    MaskedKeys,
    /// Bit strings `C0, C1`.
    CheckValues,
    /// One bit string of pair parities.
    Parities,
    /// Protocol 3 phase 1: index lists `Î1, Î2, I2`.
    ErasedLists,
}

impl Tag {
    const ALL: [Tag; 6] = [
        Tag::IndexSets,
        Tag::HashSeeds,
        Tag::MaskedKeys,
        Tag::CheckValues,
        Tag::Parities,
        Tag::ErasedLists,
    ];

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&t| t == self).unwrap() as u8
    }

    fn from_code(c: u8) -> Result<Self> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown tag code {c}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    pub direction: Direction,
    pub tag: Tag,
    #[serde(with = "hex_payload")]
    pub payload: Vec<u8>,
}

mod hex_payload {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

/// One physical channel use, as alphabet indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelUse {
    pub round: u32,
    pub input: u16,
    pub output: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub input_alphabet: Vec<String>,
    pub output_alphabet: Vec<String>,
    /// Receiver's choice bit; only the receiver view exposes it.
    pub choice: bool,
    pub channel_uses: Vec<ChannelUse>,
    pub messages: Vec<Message>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SenderView {
    pub inputs: Vec<u16>,
    pub messages: Vec<Message>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReceiverView {
    pub choice: bool,
    pub outputs: Vec<u16>,
    pub messages: Vec<Message>,
}

impl Transcript {
    pub fn new(input_alphabet: Vec<String>, output_alphabet: Vec<String>, choice: bool) -> Self {
        Self {
            input_alphabet,
            output_alphabet,
            choice,
            channel_uses: Vec::new(),
            messages: Vec::new(),
        }
    }

    pub(crate) fn record_uses(&mut self, round: u32, inputs: &[usize], outputs: &[usize]) {
        self.channel_uses
            .extend(inputs.iter().zip(outputs).map(|(&x, &y)| ChannelUse {
                round,
                input: x as u16,
                output: y as u16,
            }));
    }

    pub(crate) fn send(&mut self, round: usize, direction: Direction, tag: Tag, payload: Vec<u8>) {
        self.messages.push(Message {
            round: round as u32,
            direction,
            tag,
            payload,
        });
    }

    pub fn sender_view(&self) -> SenderView {
        SenderView {
            inputs: self.channel_uses.iter().map(|u| u.input).collect(),
            messages: self.messages.clone(),
        }
    }

    pub fn receiver_view(&self) -> ReceiverView {
        ReceiverView {
            choice: self.choice,
            outputs: self.channel_uses.iter().map(|u| u.output).collect(),
            messages: self.messages.clone(),
        }
    }

    /// First message with the given round and tag.
    pub fn find(&self, round: usize, tag: Tag) -> Option<&Message> {
        self.messages
            .iter()
            .find(|m| m.round as usize == round && m.tag == tag)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.push(VERSION);
        w.push(self.choice as u8);
        for alphabet in [&self.input_alphabet, &self.output_alphabet] {
            w.extend_from_slice(&(alphabet.len() as u16).to_le_bytes());
            for label in alphabet {
                w.extend_from_slice(&(label.len() as u16).to_le_bytes());
                w.extend_from_slice(label.as_bytes());
            }
        }
        w.extend_from_slice(&(self.channel_uses.len() as u32).to_le_bytes());
        for u in &self.channel_uses {
            w.extend_from_slice(&u.round.to_le_bytes());
            w.extend_from_slice(&u.input.to_le_bytes());
            w.extend_from_slice(&u.output.to_le_bytes());
        }
        w.extend_from_slice(&(self.messages.len() as u32).to_le_bytes());
        for m in &self.messages {
            w.extend_from_slice(&m.round.to_le_bytes());
            w.push(m.direction.code());
            w.push(m.tag.code());
            w.extend_from_slice(&(m.payload.len() as u32).to_le_bytes());
            w.extend_from_slice(&m.payload);
        }
        w
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Parse("bad transcript magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported transcript version {version}")));
        }
        let choice = match r.u8()? {
            0 => false,
            1 => true,
            c => return Err(Error::Parse(format!("bad choice byte {c}"))),
        };
        let mut alphabets = [Vec::new(), Vec::new()];
        for alphabet in &mut alphabets {
            for _ in 0..r.u16()? {
                let len = r.u16()? as usize;
                let label = std::str::from_utf8(r.take(len)?)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                alphabet.push(label.to_string());
            }
        }
        let [input_alphabet, output_alphabet] = alphabets;
        let uses = r.u32()? as usize;
        let mut channel_uses = Vec::with_capacity(uses.min(bytes.len()));
        for _ in 0..uses {
            channel_uses.push(ChannelUse {
                round: r.u32()?,
                input: r.u16()?,
                output: r.u16()?,
            });
        }
        let count = r.u32()? as usize;
        let mut messages = Vec::with_capacity(count.min(bytes.len()));
        for _ in 0..count {
            let round = r.u32()?;
            let direction = Direction::from_code(r.u8()?)?;
            let tag = Tag::from_code(r.u8()?)?;
            let len = r.u32()? as usize;
            messages.push(Message {
                round,
                direction,
                tag,
                payload: r.take(len)?.to_vec(),
            });
        }
        r.finish()?;
        Ok(Self {
            input_alphabet,
            output_alphabet,
            choice,
            channel_uses,
            messages,
        })
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Parse(format!("truncated input at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Parse(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Builds message payloads: index lists, bit strings and hash seeds,
/// each length-prefixed with a `u32`.
#[derive(Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn indices(mut self, list: &[usize]) -> Self {
        self.buf.extend_from_slice(&(list.len() as u32).to_le_bytes());
        for &i in list {
            self.buf.extend_from_slice(&(i as u32).to_le_bytes());
        }
        self
    }

    pub fn bits(mut self, bits: &BitString) -> Self {
        self.buf.extend_from_slice(&(bits.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(&bits.to_bytes());
        self
    }

    pub fn seed(mut self, seed: &HashSeed) -> Self {
        self.buf
            .extend_from_slice(&(seed.in_len() as u32).to_le_bytes());
        self.bits(seed.diagonal())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Parses payloads produced by [`PayloadWriter`].
pub struct PayloadReader<'a> {
    inner: ByteReader<'a>,
}

impl<'a> PayloadReader<'a> {
    pub fn new(payload: &'a [u8]) -> Self {
        Self {
            inner: ByteReader::new(payload),
        }
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.inner.u32()? as usize;
        (0..n).map(|_| Ok(self.inner.u32()? as usize)).collect()
    }

    pub fn bits(&mut self) -> Result<BitString> {
        let len = self.inner.u32()? as usize;
        let bytes = self.inner.take(len.div_ceil(8))?;
        BitString::from_bytes(bytes, len)
    }

    pub fn seed(&mut self) -> Result<HashSeed> {
        let m = self.inner.u32()? as usize;
        let diagonal = self.bits()?;
        let r = if diagonal.is_empty() {
            0
        } else {
            diagonal.len() + 1 - m
        };
        HashSeed::new(m, r, diagonal)
    }

    pub fn finish(self) -> Result<()> {
        self.inner.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::sample_seed;
    use crate::rng::{stream, Role};

    fn sample() -> Transcript {
        let mut t = Transcript::new(vec!["0".into(), "1".into()], vec!["0".into(), "1".into(), "e".into()], true);
        t.record_uses(1, &[0, 1, 1], &[0, 2, 1]);
        t.send(1, Direction::ReceiverToSender, Tag::IndexSets, PayloadWriter::new().indices(&[0]).indices(&[2]).indices(&[]).finish());
        t.send(1, Direction::SenderToReceiver, Tag::MaskedKeys, vec![0xab, 0x01]);
        t
    }

    #[test]
    fn binary_roundtrip() {
        let t = sample();
        let bytes = t.to_binary();
        assert_eq!(&bytes[..4], b"OTTR");
        assert_eq!(Transcript::from_binary(&bytes).unwrap(), t);
        assert!(Transcript::from_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Transcript::from_binary(&extra).is_err());
    }

    #[test]
    fn json_roundtrip_uses_hex_payloads() {
        let t = sample();
        let text = t.to_json().unwrap();
        assert!(text.contains("\"payload\": \"ab01\""));
        assert!(text.contains("\"tag\": \"masked-keys\""));
        assert_eq!(Transcript::from_json(&text).unwrap(), t);
    }

    #[test]
    fn views_split_inputs_and_outputs() {
        let t = sample();
        let s = t.sender_view();
        let r = t.receiver_view();
        assert_eq!(s.inputs, vec![0, 1, 1]);
        assert_eq!(r.outputs, vec![0, 2, 1]);
        assert!(r.choice);
        let sender_json = serde_json::to_string(&s).unwrap();
        assert!(!sender_json.contains("outputs") && !sender_json.contains("choice"));
        let receiver_json = serde_json::to_string(&r).unwrap();
        assert!(!receiver_json.contains("inputs"));
        assert_eq!(s.messages, r.messages);
    }

    #[test]
    fn payload_roundtrip() {
        let mut rng = stream(3, 0, Role::Hashing);
        let seed = sample_seed(17, 5, &mut rng).unwrap();
        let empty = sample_seed(9, 0, &mut rng).unwrap();
        let bits = BitString::random(13, &mut rng);
        let payload = PayloadWriter::new()
            .indices(&[4, 9, 70_000])
            .bits(&bits)
            .seed(&seed)
            .seed(&empty)
            .finish();
        let mut r = PayloadReader::new(&payload);
        assert_eq!(r.indices().unwrap(), vec![4, 9, 70_000]);
        assert_eq!(r.bits().unwrap(), bits);
        assert_eq!(r.seed().unwrap(), seed);
        assert_eq!(r.seed().unwrap(), empty);
        r.finish().unwrap();
    }
}
