//! Earliest-arrival search over hypothetical chains.
//!
//! Nodes are expanded best-first in slot order, and each node's children are
//! generated lazily, so the first node popped at depth `k` gives the exact
//! earliest slot at which a chain `k` blocks above the roots can exist.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashSet;

use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
use crate::chain::ChainStore;
use crate::protocol::{Ancestry, Capability, ProtocolKind, ProtocolSpec};

#[derive(Clone, Debug)]
pub struct SearchParams {
    /// Earliest slot a new block may use.
    pub from_slot: Slot,
    /// Last slot considered, inclusive.
    pub horizon: Slot,
    pub max_depth: u32,
    /// Maximum number of materialized nodes.
    pub budget: usize,
}

/// Result of a search. `reach[k-1]` is the earliest slot at which depth `k`
/// is reached; `None` means no chain reaches it at or before `exact_through`.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub reach: Vec<Option<Slot>>,
    pub exact_through: Slot,
    /// Chain realizing `reach[k-1]`, when chains were requested.
    pub chains: Vec<Vec<Block>>,
}

impl Forecast {
    pub fn reach(&self, k: u32) -> Option<Slot> {
        self.reach.get(k as usize - 1).copied().flatten()
    }

    /// Whether depth `k` is certainly not reached at or before `slot`.
    pub fn not_by(&self, k: u32, slot: Slot) -> bool {
        match self.reach(k) {
            Some(t) => t > slot,
            None => slot <= self.exact_through,
        }
    }
}

struct Node {
    id: BlockId,
    slot: Slot,
    aux: Vec<u8>,
    depth: u32,
    parent: Option<usize>,
    root: u32,
    block: Option<Block>,
}

#[derive(Hash, PartialEq, Eq)]
enum Key {
    Node(BlockId),
    Anchors(u32, Vec<BlockId>),
    Root(u32),
}

struct NodeView<'a> {
    store: &'a ChainStore,
    nodes: &'a [Node],
    idx: usize,
}

impl Ancestry for NodeView<'_> {
    fn tip(&self) -> BlockId {
        self.nodes[self.idx].id
    }
    fn tip_slot(&self) -> Slot {
        self.nodes[self.idx].slot
    }
    fn tip_aux(&self) -> &[u8] {
        &self.nodes[self.idx].aux
    }
    fn ancestor(&self, d: u64) -> (BlockId, bool) {
        let mut cur = self.idx;
        for i in 0..d {
            match self.nodes[cur].parent {
                Some(p) => cur = p,
                None => {
                    let id = self.store.ancestor_or_genesis(&self.nodes[cur].id, d - i).expect("root is stored");
                    return (id, true);
                }
            }
        }
        (self.nodes[cur].id, self.nodes[cur].parent.is_none())
    }
}

pub struct Search<'a> {
    store: &'a ChainStore,
    protocol: &'a ProtocolSpec,
    coins: &'a [(CoinId, ParticipantId)],
    cap: Capability,
    first_payload: Vec<Transfer>,
    params: SearchParams,
    nodes: Vec<Node>,
    pending: Vec<Block>,
    heap: BinaryHeap<Reverse<(Slot, usize, usize, usize)>>,
    seen: FxHashSet<(u32, Key)>,
    uncomputable: Option<Slot>,
}

impl<'a> Search<'a> {
    pub fn new(
        store: &'a ChainStore,
        protocol: &'a ProtocolSpec,
        coins: &'a [(CoinId, ParticipantId)],
        cap: Capability,
        params: SearchParams,
    ) -> Self {
        Search {
            store,
            protocol,
            coins,
            cap,
            first_payload: Vec::new(),
            params,
            nodes: Vec::new(),
            pending: Vec::new(),
            heap: BinaryHeap::new(),
            seen: FxHashSet::default(),
            uncomputable: None,
        }
    }

    /// Payload for blocks directly on a root.
    pub fn with_first_payload(mut self, payload: Vec<Transfer>) -> Self {
        self.first_payload = payload;
        self
    }

    fn key(&self, idx: usize) -> Key {
        let n = &self.nodes[idx];
        match self.protocol.kind() {
            ProtocolKind::P2 => Key::Root(n.root),
            ProtocolKind::RandomOracle { recency } if n.depth + recency >= self.params.max_depth => {
                let view = NodeView { store: self.store, nodes: &self.nodes, idx };
                let anchors = (n.depth + 1..=self.params.max_depth)
                    .map(|d| view.ancestor(u64::from(n.depth + recency - d)).0)
                    .collect();
                Key::Anchors(n.root, anchors)
            }
            _ => Key::Node(n.id),
        }
    }

    /// Pushes the next eligible child of `idx` at or after (`slot`, coin `ci`).
    fn advance(&mut self, idx: usize, mut slot: Slot, mut ci: usize) {
        let payload = if self.nodes[idx].parent.is_none() { self.first_payload.clone() } else { Vec::new() };
        while slot <= self.params.horizon {
            while ci < self.coins.len() {
                let (coin, owner) = self.coins[ci];
                let view = NodeView { store: self.store, nodes: &self.nodes, idx };
                match self.protocol.hypothetical_child(&view, coin, owner, slot, self.cap, payload.clone()) {
                    None => {
                        self.uncomputable = Some(self.uncomputable.map_or(slot, |u| u.min(slot)));
                        return;
                    }
                    Some(Some(b)) => {
                        self.pending.push(b);
                        self.heap.push(Reverse((slot, ci, idx, self.pending.len() - 1)));
                        return;
                    }
                    Some(None) => ci += 1,
                }
            }
            ci = 0;
            slot += 1;
        }
    }

    fn root(&mut self, id: BlockId, r: u32) {
        let b = self.store.get(&id).expect("roots are stored");
        self.nodes.push(Node { id, slot: b.slot(), aux: b.aux().to_vec(), depth: 0, parent: None, root: r, block: None });
        let idx = self.nodes.len() - 1;
        let start = self.params.from_slot.max(b.slot() + 1);
        self.advance(idx, start, 0);
    }

    /// Runs the search from `roots`; when `want_chains`, also returns the realizing chains.
    pub fn run(mut self, roots: &[BlockId], want_chains: bool) -> Forecast {
        let k_max = self.params.max_depth as usize;
        let mut reach = vec![None; k_max];
        let mut first = vec![usize::MAX; k_max];
        for (r, id) in roots.iter().enumerate() {
            self.root(*id, r as u32);
        }
        let mut found = 0;
        let mut exact_through = self.params.horizon;
        while let Some(Reverse((t, ci, parent, pi))) = self.heap.pop() {
            if let Some(u) = self.uncomputable {
                if t >= u {
                    exact_through = u - 1;
                    break;
                }
            }
            if self.nodes.len() >= self.params.budget {
                exact_through = t - 1;
                break;
            }
            let b = std::mem::replace(&mut self.pending[pi], Block::genesis(b""));
            let depth = self.nodes[parent].depth + 1;
            let root = self.nodes[parent].root;
            let d = depth as usize - 1;
            let first_at_depth = reach[d].is_none();
            if first_at_depth {
                reach[d] = Some(t);
                found += 1;
            }
            let expand = depth < self.params.max_depth;
            if expand || first_at_depth {
                self.nodes.push(Node {
                    id: b.id(),
                    slot: t,
                    aux: b.aux().to_vec(),
                    depth,
                    parent: Some(parent),
                    root,
                    block: Some(b),
                });
                let idx = self.nodes.len() - 1;
                if first_at_depth {
                    first[d] = idx;
                }
                if expand && self.seen.insert((depth, self.key(idx))) {
                    self.advance(idx, t + 1, 0);
                }
            }
            if found == k_max {
                break;
            }
            self.advance(parent, t, ci + 1);
        }
        if self.heap.is_empty() {
            if let Some(u) = self.uncomputable {
                exact_through = exact_through.min(u - 1);
            }
        }
        let chains = if want_chains {
            first
                .iter()
                .map(|&idx| {
                    let mut chain = Vec::new();
                    let mut cur = idx;
                    while cur != usize::MAX {
                        match &self.nodes[cur].block {
                            Some(b) => {
                                chain.push(b.clone());
                                cur = self.nodes[cur].parent.unwrap_or(usize::MAX);
                            }
                            None => break,
                        }
                    }
                    chain.reverse();
                    chain
                })
                .collect()
        } else {
            Vec::new()
        };
        Forecast { reach, exact_through, chains }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn setup(n: u32) -> (ChainStore, Vec<(CoinId, ParticipantId)>) {
        let coins: Vec<_> = (0..n).map(|i| (CoinId(i), ParticipantId(i))).collect();
        let store = ChainStore::new(b"la", coins.iter().copied().collect::<BTreeMap<_, _>>());
        (store, coins)
    }

    /// Brute force: breadth-first over every chain within the horizon.
    fn brute(
        store: &ChainStore,
        spec: &ProtocolSpec,
        coins: &[(CoinId, ParticipantId)],
        horizon: Slot,
        k_max: u32,
    ) -> Vec<Option<Slot>> {
        let mut reach = vec![None; k_max as usize];
        let mut frontier: Vec<Vec<Block>> = vec![Vec::new()];
        for depth in 1..=k_max {
            let mut next = Vec::new();
            for path in &frontier {
                let mut hp = crate::protocol::HypoPath::new(store, store.genesis());
                for b in path {
                    hp.push(b.clone());
                }
                for t in hp.tip_slot() + 1..=horizon {
                    for &(c, o) in coins {
                        if let Some(Some(b)) = spec.hypothetical_child(&hp, c, o, t, Capability::Full, vec![]) {
                            let r: &mut Option<Slot> = &mut reach[depth as usize - 1];
                            *r = Some(r.map_or(t, |x: Slot| x.min(t)));
                            let mut p = path.clone();
                            p.push(b);
                            next.push(p);
                        }
                    }
                }
            }
            frontier = next;
        }
        reach
    }

    #[test]
    fn matches_brute_force() {
        for (spec, seed) in [
            (ProtocolSpec::new(ProtocolKind::P1, 0.15, 1, 1).unwrap(), 1),
            (ProtocolSpec::new(ProtocolKind::P2, 0.15, 1, 2).unwrap(), 2),
            (ProtocolSpec::random_oracle(2, 0.15, 3).unwrap(), 3),
            (ProtocolSpec::new(ProtocolKind::P3, 0.15, 1, 4).unwrap(), 4),
        ] {
            let (store, coins) = setup(3);
            let want = brute(&store, &spec, &coins, 14, 4);
            let params = SearchParams { from_slot: 1, horizon: 14, max_depth: 4, budget: 1 << 20 };
            let got = Search::new(&store, &spec, &coins, Capability::Full, params).run(&[store.genesis()], true);
            assert_eq!(got.reach, want, "{} seed {seed}", spec.name());
            for (k, chain) in got.chains.iter().enumerate() {
                if let Some(t) = got.reach[k] {
                    assert_eq!(chain.len(), k + 1);
                    assert_eq!(chain.last().unwrap().slot(), t);
                }
            }
        }
    }

    #[test]
    fn recent_protocols_are_unknown_beyond_their_window() {
        let (store, coins) = setup(3);
        let spec = ProtocolSpec::random_oracle(1, 0.5, 9).unwrap();
        let params = SearchParams { from_slot: 1, horizon: 50, max_depth: 5, budget: 1 << 16 };
        let f = Search::new(&store, &spec, &coins, Capability::Observer(ParticipantId(99)), params).run(&[store.genesis()], false);
        assert!(f.reach(1).is_some());
        assert!(f.reach(2).is_none());
        assert!(f.exact_through < 50);
    }

    #[test]
    fn chains_replay_as_valid_blocks() {
        let (mut store, coins) = setup(2);
        let spec = ProtocolSpec::new(ProtocolKind::P1, 0.3, 1, 5).unwrap();
        let params = SearchParams { from_slot: 1, horizon: 40, max_depth: 6, budget: 1 << 16 };
        let f = Search::new(&store, &spec, &coins, Capability::Full, params).run(&[store.genesis()], true);
        let chain = f.chains[5].clone();
        for b in chain {
            assert!(store.is_valid_block(&b, b.slot(), &spec).unwrap());
            store.insert(b).unwrap();
        }
    }
}
