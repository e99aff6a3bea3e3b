//! Block store, ownership ledger, validity and fork choice.

mod known;

pub use known::{KnownSet, TipTracker};

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use std::sync::{Arc, RwLock};

use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot};
use crate::error::{Error, Result};
use crate::protocol::ProtocolSpec;

type Owners = Arc<BTreeMap<CoinId, ParticipantId>>;

#[derive(Clone)]
struct Entry {
    block: Block,
    score: u64,
    /// Ownership overrides relative to the genesis allocation, shared with the
    /// predecessor unless this block carries transfers.
    owners: Owners,
    children: Vec<BlockId>,
}

/// Append-only block DAG rooted at a single genesis block.
pub struct ChainStore {
    blocks: FxHashMap<BlockId, Entry>,
    genesis: BlockId,
    allocation: BTreeMap<CoinId, ParticipantId>,
    order: Vec<BlockId>,
    valid_cache: RwLock<FxHashMap<(u64, BlockId), bool>>,
}

impl Clone for ChainStore {
    fn clone(&self) -> Self {
        ChainStore {
            blocks: self.blocks.clone(),
            genesis: self.genesis,
            allocation: self.allocation.clone(),
            order: self.order.clone(),
            valid_cache: RwLock::new(self.valid_cache.read().expect("cache lock").clone()),
        }
    }
}

impl ChainStore {
    pub fn new(genesis_tag: &[u8], allocation: BTreeMap<CoinId, ParticipantId>) -> Self {
        let g = Block::genesis(genesis_tag);
        let id = g.id();
        let mut blocks = FxHashMap::default();
        blocks.insert(
            id,
            Entry { block: g, score: 0, owners: Arc::new(BTreeMap::new()), children: Vec::new() },
        );
        ChainStore {
            blocks,
            genesis: id,
            allocation,
            order: vec![id],
            valid_cache: RwLock::new(FxHashMap::default()),
        }
    }

    pub fn genesis(&self) -> BlockId {
        self.genesis
    }

    pub fn allocation(&self) -> &BTreeMap<CoinId, ParticipantId> {
        &self.allocation
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.blocks.contains_key(id)
    }

    /// Block ids in insertion order, genesis first.
    pub fn ids(&self) -> &[BlockId] {
        &self.order
    }

    fn entry(&self, id: &BlockId) -> Result<&Entry> {
        self.blocks.get(id).ok_or(Error::UnknownBlock(*id))
    }

    pub fn get(&self, id: &BlockId) -> Result<&Block> {
        self.entry(id).map(|e| &e.block)
    }

    pub fn children(&self, id: &BlockId) -> Result<&[BlockId]> {
        self.entry(id).map(|e| e.children.as_slice())
    }

    /// Inserts a block whose predecessor is already stored. Returns `false` if it was present.
    pub fn insert(&mut self, block: Block) -> Result<bool> {
        let id = block.id();
        if self.blocks.contains_key(&id) {
            return Ok(false);
        }
        let pred = match block.pred() {
            Some(p) => p,
            None => return Err(Error::Duplicate(id)),
        };
        let parent = self
            .blocks
            .get_mut(&pred)
            .ok_or(Error::MissingAncestor { block: id, missing: pred })?;
        parent.children.push(id);
        let score = parent.score + 1;
        let owners = if block.payload().is_empty() {
            parent.owners.clone()
        } else {
            let mut next = (*parent.owners).clone();
            for t in block.payload() {
                next.insert(t.coin, t.to);
            }
            Arc::new(next)
        };
        self.blocks.insert(id, Entry { block, score, owners, children: Vec::new() });
        self.order.push(id);
        Ok(true)
    }

    /// Chain length from genesis (genesis scores 0).
    pub fn score(&self, id: &BlockId) -> Result<u64> {
        self.entry(id).map(|e| e.score)
    }

    pub fn slot(&self, id: &BlockId) -> Result<Slot> {
        self.entry(id).map(|e| e.block.slot())
    }

    /// `Pred^d(id)`, or `None` when the walk runs past genesis.
    pub fn predecessor(&self, id: &BlockId, d: u64) -> Result<Option<BlockId>> {
        let e = self.entry(id)?;
        if d > e.score {
            return Ok(None);
        }
        if d == e.score {
            return Ok(Some(self.genesis));
        }
        let mut cur = *id;
        for _ in 0..d {
            cur = self.entry(&cur)?.block.pred().expect("score > 0 implies a predecessor");
        }
        Ok(Some(cur))
    }

    /// Like [`predecessor`](Self::predecessor) but clamps at genesis.
    pub fn ancestor_or_genesis(&self, id: &BlockId, d: u64) -> Result<BlockId> {
        Ok(self.predecessor(id, d)?.unwrap_or(self.genesis))
    }

    /// Owner of `coin` after applying every transfer on the chain ending at `id`.
    pub fn owner_at(&self, id: &BlockId, coin: CoinId) -> Result<ParticipantId> {
        let e = self.entry(id)?;
        if let Some(p) = e.owners.get(&coin) {
            return Ok(*p);
        }
        self.allocation.get(&coin).copied().ok_or(Error::UnknownCoin(coin))
    }

    /// Reference implementation of [`owner_at`](Self::owner_at): replays the whole chain.
    pub fn owner_at_replay(&self, id: &BlockId, coin: CoinId) -> Result<ParticipantId> {
        let mut owner = *self.allocation.get(&coin).ok_or(Error::UnknownCoin(coin))?;
        for b in self.path_from_genesis(id)? {
            for t in self.get(&b)?.payload() {
                if t.coin == coin {
                    owner = t.to;
                }
            }
        }
        Ok(owner)
    }

    /// Ids from genesis to `id`, both inclusive.
    pub fn path_from_genesis(&self, id: &BlockId) -> Result<Vec<BlockId>> {
        let mut path = Vec::with_capacity(self.score(id)? as usize + 1);
        let mut cur = Some(*id);
        while let Some(c) = cur {
            path.push(c);
            cur = self.entry(&c)?.block.pred();
        }
        path.reverse();
        Ok(path)
    }

    /// True when `anc` lies on the chain ending at `id` (a block descends from itself).
    pub fn is_descendant(&self, id: &BlockId, anc: &BlockId) -> Result<bool> {
        let s = self.score(id)?;
        let sa = self.score(anc)?;
        if sa > s {
            return Ok(false);
        }
        Ok(self.predecessor(id, s - sa)? == Some(*anc))
    }

    /// Deepest block that both chains share.
    pub fn common_ancestor(&self, a: &BlockId, b: &BlockId) -> Result<BlockId> {
        let (sa, sb) = (self.score(a)?, self.score(b)?);
        let mut x = self.predecessor(a, sa.saturating_sub(sb))?.expect("within chain");
        let mut y = self.predecessor(b, sb.saturating_sub(sa))?.expect("within chain");
        while x != y {
            x = self.get(&x)?.pred().expect("distinct blocks above genesis");
            y = self.get(&y)?.pred().expect("distinct blocks above genesis");
        }
        Ok(x)
    }

    /// Local rule for a block whose predecessor is stored: slot ordering, the
    /// frozen-ownership check, payload ownership, and the protocol predicate.
    fn local_ok(&self, block: &Block, protocol: &ProtocolSpec) -> Result<bool> {
        let pred = block.pred().expect("local_ok is never called on genesis");
        let pe = self.blocks.get(&pred).ok_or(Error::MissingAncestor { block: block.id(), missing: pred })?;
        if pe.block.slot() >= block.slot() {
            return Ok(false);
        }
        let coin = match block.coin() {
            Some(c) if self.allocation.contains_key(&c) => c,
            _ => return Ok(false),
        };
        let mut cur = Some(pred);
        for _ in 0..protocol.freeze().max(1) {
            let Some(a) = cur else { break };
            if self.owner_at(&a, coin)? != block.miner() {
                return Ok(false);
            }
            cur = self.get(&a)?.pred();
        }
        let mut running: BTreeMap<CoinId, ParticipantId> = BTreeMap::new();
        for t in block.payload() {
            let current = match running.get(&t.coin) {
                Some(p) => *p,
                None => match self.owner_at(&pred, t.coin) {
                    Ok(p) => p,
                    Err(Error::UnknownCoin(_)) => return Ok(false),
                    Err(e) => return Err(e),
                },
            };
            if current != t.from {
                return Ok(false);
            }
            running.insert(t.coin, t.to);
        }
        protocol.verify(self, block)
    }

    /// Validity of a stored block ignoring the `t_B <= now` clause, memoized per protocol.
    pub fn chain_ok(&self, id: &BlockId, protocol: &ProtocolSpec) -> Result<bool> {
        let fp = protocol.fingerprint();
        let mut pending = Vec::new();
        let mut cur = *id;
        let mut verdict = loop {
            if cur == self.genesis {
                break true;
            }
            if let Some(v) = self.valid_cache.read().expect("cache lock").get(&(fp, cur)) {
                break *v;
            }
            pending.push(cur);
            cur = self.entry(&cur)?.block.pred().expect("non-genesis block has a predecessor");
        };
        let mut computed = Vec::with_capacity(pending.len());
        for b in pending.into_iter().rev() {
            verdict = verdict && self.local_ok(self.get(&b)?, protocol)?;
            computed.push((b, verdict));
        }
        let mut cache = self.valid_cache.write().expect("cache lock");
        for (b, v) in computed {
            cache.insert((fp, b), v);
        }
        Ok(verdict)
    }

    /// Validity of a stored block at time `now`.
    pub fn is_valid(&self, id: &BlockId, now: Slot, protocol: &ProtocolSpec) -> Result<bool> {
        if *id == self.genesis {
            return Ok(true);
        }
        Ok(self.slot(id)? <= now && self.chain_ok(id, protocol)?)
    }

    /// Validity at `now` of a block that need not be stored; its predecessor must be.
    pub fn is_valid_block(&self, block: &Block, now: Slot, protocol: &ProtocolSpec) -> Result<bool> {
        let Some(pred) = block.pred() else {
            return Ok(block.id() == self.genesis);
        };
        if !self.contains(&pred) {
            return Err(Error::MissingAncestor { block: block.id(), missing: pred });
        }
        if block.slot() > now {
            return Ok(false);
        }
        Ok(self.chain_ok(&pred, protocol)? && self.local_ok(block, protocol)?)
    }

    /// Unmemoized recursive validity, kept as a test oracle for [`is_valid`](Self::is_valid).
    pub fn is_valid_naive(&self, id: &BlockId, now: Slot, protocol: &ProtocolSpec) -> Result<bool> {
        let b = self.get(id)?;
        let Some(pred) = b.pred() else { return Ok(true) };
        if b.slot() > now {
            return Ok(false);
        }
        Ok(self.is_valid_naive(&pred, now, protocol)? && self.local_ok(b, protocol)?)
    }

    /// Longest-chain rule over `candidates`: highest score among blocks valid at
    /// `now`, ties to the smallest id. Falls back to genesis.
    pub fn best_tip<'a, I>(&self, candidates: I, now: Slot, protocol: &ProtocolSpec) -> Result<BlockId>
    where
        I: IntoIterator<Item = &'a BlockId>,
    {
        let mut best = (0u64, self.genesis);
        for id in candidates {
            if !self.is_valid(id, now, protocol)? {
                continue;
            }
            let s = self.score(id)?;
            if s > best.0 || (s == best.0 && *id < best.1) {
                best = (s, *id);
            }
        }
        Ok(best.1)
    }
}

#[cfg(test)]
mod tests;
