//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator keyed by
//! `SHA-256("otforge/stream/v1" || master_le64 || trial_le64 || role_label)`.
//! Trials therefore draw from disjoint streams regardless of scheduling,
//! which keeps multi-threaded runs bit-identical to single-threaded ones.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha20Rng;

const DOMAIN: &[u8] = b"otforge/stream/v1";

/// Random stream roles inside one protocol trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Sender's channel inputs.
    Sender,
    /// Receiver's discard sampling.
    Receiver,
    /// Hash-function seeds picked by the sender.
    Hashing,
    /// Channel noise.
    Channel,
    /// Sender's OT inputs K0, K1.
    SenderInput,
    /// Receiver's choice bit B.
    ReceiverInput,
    /// Optimiser restarts and other analysis randomness.
    Analysis,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Sender => "sender",
            Role::Receiver => "receiver",
            Role::Hashing => "hashing",
            Role::Channel => "channel",
            Role::SenderInput => "sender-input",
            Role::ReceiverInput => "receiver-input",
            Role::Analysis => "analysis",
        }
    }
}

pub fn derive_seed(master: u64, trial: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master.to_le_bytes());
    h.update(trial.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn stream(master: u64, trial: u64, role: Role) -> Stream {
    ChaCha20Rng::from_seed(derive_seed(master, trial, role.label()))
}

pub fn labeled_stream(master: u64, trial: u64, label: &str) -> Stream {
    ChaCha20Rng::from_seed(derive_seed(master, trial, label))
}

/// Independent seeds for the parties of one protocol run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartySeeds {
    pub sender: [u8; 32],
    pub receiver: [u8; 32],
    pub hashing: [u8; 32],
    pub channel: [u8; 32],
}

impl PartySeeds {
    pub fn for_trial(master: u64, trial: u64) -> Self {
        Self {
            sender: derive_seed(master, trial, Role::Sender.label()),
            receiver: derive_seed(master, trial, Role::Receiver.label()),
            hashing: derive_seed(master, trial, Role::Hashing.label()),
            channel: derive_seed(master, trial, Role::Channel.label()),
        }
    }

    pub(crate) fn streams(&self) -> PartyStreams {
        PartyStreams {
            sender: ChaCha20Rng::from_seed(self.sender),
            receiver: ChaCha20Rng::from_seed(self.receiver),
            hashing: ChaCha20Rng::from_seed(self.hashing),
            channel: ChaCha20Rng::from_seed(self.channel),
        }
    }
}

pub(crate) struct PartyStreams {
    pub sender: Stream,
    pub receiver: Stream,
    pub hashing: Stream,
    pub channel: Stream,
}
