//! Oblivious transfer over simulated noisy channels.
//!
//! The crate covers the full pipeline: channel models and erasure
//! emulation ([`channel`]), Toeplitz hashing ([`hashing`]), reconciliation
//! and key extraction ([`ir_pa`]), executable OT protocols with transcripts
//! ([`protocol`]), capacity bounds ([`bounds`]) and security checks
//! ([`seclab`]).

pub mod bits;
pub mod bounds;
pub mod channel;
pub mod error;
pub mod hashing;
pub mod ir_pa;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod seclab;

pub use bits::BitString;
pub use error::{Error, Result};
