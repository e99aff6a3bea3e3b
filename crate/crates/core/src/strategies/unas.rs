use std::collections::BTreeMap;

use super::{includable, Action, Me, SlotView, Strategy};
use crate::block::{Block, CoinId, Slot};
use crate::chain::ChainStore;
use crate::error::Result;

/// Per-coin record of what has been announced, used to stay clear of
/// provable deviations.
#[derive(Clone, Debug, Default)]
pub struct AnnounceGuard {
    last: BTreeMap<CoinId, (Slot, u64)>,
}

impl AnnounceGuard {
    /// A new block is safe if its slot is later than every earlier announcement
    /// of the coin and its predecessor is at least as long as all of them.
    pub fn allows(&self, store: &ChainStore, b: &Block) -> Result<bool> {
        let Some(c) = b.coin() else { return Ok(false) };
        let Some(&(slot, max_score)) = self.last.get(&c) else { return Ok(true) };
        let pred_score = store.score(&b.pred().expect("mined block"))?;
        Ok(b.slot() > slot && pred_score >= max_score)
    }

    pub fn record(&mut self, store: &ChainStore, b: &Block) -> Result<()> {
        let Some(c) = b.coin() else { return Ok(()) };
        let score = store.score(&b.pred().expect("mined block"))? + 1;
        let e = self.last.entry(c).or_insert((b.slot(), score));
        e.0 = e.0.max(b.slot());
        e.1 = e.1.max(score);
        Ok(())
    }
}

/// Undetectable nothing-at-stake: besides the tip `A`, also mine on the best
/// known block outside the subtree of `Pred^D(A)`, announcing only what the
/// guard allows. With the guard disabled this is the naive variant.
#[derive(Clone, Debug)]
pub struct Unas {
    depth: u64,
    guarded: bool,
    guard: AnnounceGuard,
}

impl Unas {
    pub fn new(depth: u64) -> Self {
        Unas { depth, guarded: true, guard: AnnounceGuard::default() }
    }

    /// Control miner that ignores the safety check.
    pub fn naive(depth: u64) -> Self {
        Unas { depth, guarded: false, guard: AnnounceGuard::default() }
    }
}

impl Strategy for Unas {
    fn name(&self) -> &'static str {
        if self.guarded {
            "unas"
        } else {
            "naive-nas"
        }
    }

    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let a = view.tip;
        let alt = match view.store.predecessor(&a, self.depth)? {
            Some(x) => view.known.best_outside(view.store, &x)?,
            None => None,
        };
        let mut targets = vec![a];
        targets.extend(alt);
        let mut announce = Vec::new();
        for tip in targets {
            let payload = includable(view.store, &tip, view.mempool)?;
            for &c in &me.coins {
                let Some(b) = view.protocol.mine(view.store, &tip, c, me.id, view.now, payload.clone())? else {
                    continue;
                };
                if !self.guarded || self.guard.allows(view.store, &b)? {
                    self.guard.record(view.store, &b)?;
                    announce.push(b);
                }
            }
        }
        Ok(Action { announce, broadcast: Vec::new() })
    }
}
