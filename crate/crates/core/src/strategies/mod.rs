//! Participant behaviours. Each strategy sees the public state at the start of
//! a slot and returns the blocks it announces in that slot.

mod double_spend;
mod ghost;
mod honest;
pub mod lookahead;
mod selfish;
mod unas;

pub use double_spend::{AbortPolicy, DoubleSpend, DoubleSpendConfig, DoubleSpendOutcome, DoubleSpendRecord};
pub use ghost::{ghost_fork_choice, ExpFork, ExpForkConfig, GhostWeights};
pub use honest::Honest;
pub use selfish::{Episode, EpisodeOutcome, Selfish, SelfishConfig, SelfishMode};
pub use unas::{AnnounceGuard, Unas};

use serde::Serialize;

use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
use crate::chain::{ChainStore, KnownSet};
use crate::error::Result;
use crate::protocol::ProtocolSpec;

/// Receiver of the payment in double-spend runs.
pub const VENDOR: ParticipantId = ParticipantId(u32::MAX - 1);
/// Second key of a double-spender, target of the conflicting transfer.
pub const ALIAS: ParticipantId = ParticipantId(u32::MAX - 2);

/// Everything a participant may look at in one slot.
pub struct SlotView<'a> {
    pub store: &'a ChainStore,
    pub protocol: &'a ProtocolSpec,
    /// Public blocks, i.e. everything announced before this slot.
    pub known: &'a KnownSet,
    /// Current fork-choice tip.
    pub tip: BlockId,
    pub now: Slot,
    /// Announced transfers not yet on the tip's chain.
    pub mempool: &'a [Transfer],
    /// Every coin with its genesis owner.
    pub coins: &'a [(CoinId, ParticipantId)],
    /// Subtree weights of public blocks, present when the fork choice is GHOST.
    pub ghost: Option<&'a GhostWeights>,
}

/// The acting participant.
#[derive(Clone, Debug)]
pub struct Me {
    pub id: ParticipantId,
    /// Coins this participant mines with.
    pub coins: Vec<CoinId>,
}

#[derive(Clone, Debug, Default)]
pub struct Action {
    pub announce: Vec<Block>,
    pub broadcast: Vec<Transfer>,
}

/// Strategy-specific results collected into the run log.
#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct StrategyReport {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub episodes: Vec<Episode>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub double_spends: Vec<DoubleSpendRecord>,
    /// Root of an exponential fork, if one was started.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fork_root: Option<(BlockId, Slot)>,
}

pub trait Strategy: Send {
    fn name(&self) -> &'static str;
    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action>;
    fn report(&self) -> StrategyReport {
        StrategyReport::default()
    }
    /// Whether the strategy has nothing left to resolve (used to end trials early).
    fn settled(&self) -> bool {
        true
    }
    /// Root and slot of an exponential fork, for subtree tracking.
    fn fork_root(&self) -> Option<(BlockId, Slot)> {
        None
    }
}

/// Transfers from the mempool that are spendable on `tip`, applied in order.
pub(crate) fn includable(store: &ChainStore, tip: &BlockId, mempool: &[Transfer]) -> Result<Vec<Transfer>> {
    let mut owners = std::collections::BTreeMap::new();
    let mut out = Vec::new();
    for t in mempool {
        let cur = match owners.get(&t.coin) {
            Some(p) => *p,
            None => match store.owner_at(tip, t.coin) {
                Ok(p) => p,
                Err(crate::Error::UnknownCoin(_)) => continue,
                Err(e) => return Err(e),
            },
        };
        if cur == t.from {
            owners.insert(t.coin, t.to);
            out.push(*t);
        }
    }
    Ok(out)
}

/// One block per coin on `tip` at the current slot, carrying `payload`.
pub(crate) fn mine_on(
    view: &SlotView<'_>,
    me: &Me,
    tip: &BlockId,
    payload: &[Transfer],
) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    for &c in &me.coins {
        if let Some(b) = view.protocol.mine(view.store, tip, c, me.id, view.now, payload.to_vec())? {
            out.push(b);
        }
    }
    Ok(out)
}
