//! Deterministic simulation and analysis of longest-chain proof-of-stake protocols.
//!
//! The crate is organised bottom-up:
//!
//! * [`block`] and [`chain`]: block identities, the block store, validity and fork choice.
//! * [`protocol`]: eligibility rules (random-oracle family, P1, P2, P3) and predictability.
//! * [`strategies`]: honest mining plus the deviations studied here (UNaS, selfish, double-spend, forking).
//! * [`engine`]: the slot-driven simulator, deviation detector and run logs.
//! * [`analysis`]: closed-form race probabilities, safe windows and bounds.

pub mod analysis;
pub mod block;
pub mod chain;
pub mod engine;
pub mod error;
pub mod protocol;
pub mod strategies;

pub use block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
pub use chain::ChainStore;
pub use error::{Error, Result};
