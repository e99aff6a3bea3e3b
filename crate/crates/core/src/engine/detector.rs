//! Provable deviations: evidence that a coin's blocks cannot all come from an
//! honest miner, whatever it may have seen.

use rustc_hash::FxHashMap;

use serde::Serialize;

use crate::block::{BlockId, CoinId, ParticipantId, Slot};
use crate::chain::ChainStore;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// Two blocks from one coin in one slot.
    SameSlot,
    /// A later block extends a chain shorter than an earlier block of the same coin.
    Regressive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeviationEvidence {
    pub coin: CoinId,
    pub miner: ParticipantId,
    pub kind: DeviationKind,
    /// The block with the smaller slot (or the first announced, for same-slot pairs).
    pub earlier: BlockId,
    pub later: BlockId,
    pub slot: Slot,
}

#[derive(Clone, Copy, Debug)]
struct Seen {
    id: BlockId,
    slot: Slot,
    score: u64,
    pred_score: u64,
}

fn seen(store: &ChainStore, id: &BlockId) -> Result<Seen> {
    let b = store.get(id)?;
    let score = store.score(id)?;
    Ok(Seen { id: *id, slot: b.slot(), score, pred_score: score.saturating_sub(1) })
}

/// First conflict between `new` and `prior` blocks of the same coin.
fn conflict(prior: &[Seen], new: &Seen) -> Option<(DeviationKind, BlockId, BlockId)> {
    for old in prior {
        if old.slot == new.slot {
            return Some((DeviationKind::SameSlot, old.id, new.id));
        }
        let (e, l) = if old.slot < new.slot { (old, new) } else { (new, old) };
        if e.score > l.pred_score {
            return Some((DeviationKind::Regressive, e.id, l.id));
        }
    }
    None
}

/// Streaming detector fed with public blocks in announcement order.
#[derive(Debug, Default)]
pub struct Detector {
    per_coin: FxHashMap<CoinId, Vec<Seen>>,
    evidence: Vec<DeviationEvidence>,
}

impl Detector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, store: &ChainStore, id: &BlockId) -> Result<Option<DeviationEvidence>> {
        let b = store.get(id)?;
        let Some(coin) = b.coin() else { return Ok(None) };
        let s = seen(store, id)?;
        let list = self.per_coin.entry(coin).or_default();
        let found = conflict(list, &s).map(|(kind, earlier, later)| DeviationEvidence {
            coin,
            miner: b.miner(),
            kind,
            earlier,
            later,
            slot: s.slot,
        });
        list.push(s);
        if let Some(e) = &found {
            self.evidence.push(e.clone());
        }
        Ok(found)
    }

    pub fn evidence(&self) -> &[DeviationEvidence] {
        &self.evidence
    }
}

/// Batch form of [`Detector`]: same evidence for the same order of blocks.
pub fn detect(store: &ChainStore, announced: &[BlockId]) -> Result<Vec<DeviationEvidence>> {
    let mut d = Detector::new();
    for id in announced {
        d.observe(store, id)?;
    }
    Ok(d.evidence)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Explanation {
    /// `awareness[i]` generates a view in which block `i` extends a longest chain.
    Explained { order: Vec<BlockId>, awareness: Vec<Vec<BlockId>> },
    Impossible { evidence: DeviationEvidence },
}

/// Tries to explain one coin's blocks as honest behaviour.
///
/// Blocks are taken in slot order; block `i` is explained by the view generated
/// by all earlier blocks plus its own predecessor. The explanation exists exactly
/// when no deviation is present.
pub fn honest_explanation(store: &ChainStore, blocks: &[BlockId]) -> Result<Explanation> {
    if let Some(e) = detect(store, blocks)?.into_iter().next() {
        return Ok(Explanation::Impossible { evidence: e });
    }
    let mut order: Vec<Seen> = blocks.iter().map(|id| seen(store, id)).collect::<Result<_>>()?;
    order.sort_by_key(|s| (s.slot, s.id));
    let mut awareness = Vec::with_capacity(order.len());
    for (i, s) in order.iter().enumerate() {
        let pred = store.get(&s.id)?.pred().expect("coin blocks have predecessors");
        let mut gens: Vec<BlockId> = order[..i].iter().map(|x| x.id).collect();
        gens.push(pred);
        let best = order[..i].iter().map(|x| x.score).max().unwrap_or(0);
        debug_assert!(best <= s.pred_score, "deviation-free sequences extend a longest chain");
        awareness.push(gens);
    }
    Ok(Explanation::Explained { order: order.iter().map(|s| s.id).collect(), awareness })
}
