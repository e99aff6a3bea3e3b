use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashSet;

use super::ChainStore;
use crate::block::BlockId;
use crate::error::Result;

/// The set of blocks a participant has seen, indexed by score.
///
/// Callers only insert blocks that were valid when they arrived; validity is
/// monotone in time, so `best` equals [`ChainStore::best_tip`] over the set.
#[derive(Clone, Debug)]
pub struct KnownSet {
    ids: FxHashSet<BlockId>,
    by_score: BTreeMap<u64, BTreeSet<BlockId>>,
    best: (u64, BlockId),
}

impl KnownSet {
    pub fn new(genesis: BlockId) -> Self {
        let mut by_score = BTreeMap::new();
        by_score.insert(0, BTreeSet::from([genesis]));
        KnownSet { ids: FxHashSet::from_iter([genesis]), by_score, best: (0, genesis) }
    }

    pub fn insert(&mut self, store: &ChainStore, id: BlockId) -> Result<bool> {
        if self.ids.contains(&id) {
            return Ok(false);
        }
        let s = store.score(&id)?;
        self.ids.insert(id);
        self.by_score.entry(s).or_default().insert(id);
        if s > self.best.0 || (s == self.best.0 && id < self.best.1) {
            self.best = (s, id);
        }
        Ok(true)
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.ids.contains(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn best(&self) -> BlockId {
        self.best.1
    }

    pub fn max_score(&self) -> u64 {
        self.best.0
    }

    /// Blocks at exactly `score`, ascending by id.
    pub fn at_score(&self, score: u64) -> impl Iterator<Item = &BlockId> {
        self.by_score.get(&score).into_iter().flatten()
    }

    /// All blocks ordered by score descending, then id ascending.
    pub fn iter_desc(&self) -> impl Iterator<Item = (u64, &BlockId)> {
        self.by_score.iter().rev().flat_map(|(s, ids)| ids.iter().map(move |id| (*s, id)))
    }

    /// Blocks sorted by id, for deterministic output.
    pub fn sorted(&self) -> Vec<BlockId> {
        let mut v: Vec<_> = self.ids.iter().copied().collect();
        v.sort();
        v
    }

    /// Best known block that does not descend from `root`.
    pub fn best_outside(&self, store: &ChainStore, root: &BlockId) -> Result<Option<BlockId>> {
        let rs = store.score(root)?;
        for (s, id) in self.iter_desc() {
            if s <= rs {
                if id != root {
                    return Ok(Some(*id));
                }
                continue;
            }
            if !store.is_descendant(id, root)? {
                return Ok(Some(*id));
            }
        }
        Ok(None)
    }
}

/// Sticky longest-chain view: switches only to a strictly higher score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TipTracker {
    tip: BlockId,
    score: u64,
}

impl TipTracker {
    pub fn new(genesis: BlockId) -> Self {
        TipTracker { tip: genesis, score: 0 }
    }

    pub fn tip(&self) -> BlockId {
        self.tip
    }

    pub fn score(&self) -> u64 {
        self.score
    }

    /// Processes a delivery batch in (score desc, id asc) order. Returns true if the tip moved.
    pub fn observe(&mut self, store: &ChainStore, batch: &[BlockId]) -> Result<bool> {
        let mut best: Option<(u64, BlockId)> = None;
        for id in batch {
            let s = store.score(id)?;
            if best.map_or(true, |(bs, bid)| s > bs || (s == bs && *id < bid)) {
                best = Some((s, *id));
            }
        }
        match best {
            Some((s, id)) if s > self.score => {
                self.tip = id;
                self.score = s;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}
