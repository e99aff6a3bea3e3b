use rustc_hash::FxHashMap;

use serde::{Deserialize, Serialize};

use super::{Action, Me, SlotView, Strategy, StrategyReport};
use crate::block::{BlockId, Slot};
use crate::chain::ChainStore;
use crate::error::Result;

/// Subtree sizes over the public blocks.
#[derive(Clone, Debug)]
pub struct GhostWeights {
    genesis: BlockId,
    w: FxHashMap<BlockId, u64>,
}

impl GhostWeights {
    pub fn new(genesis: BlockId) -> Self {
        GhostWeights { genesis, w: FxHashMap::from_iter([(genesis, 1)]) }
    }

    pub fn add(&mut self, store: &ChainStore, id: BlockId) -> Result<()> {
        if self.w.contains_key(&id) {
            return Ok(());
        }
        self.w.insert(id, 0);
        let mut cur = Some(id);
        while let Some(c) = cur {
            *self.w.entry(c).or_insert(0) += 1;
            cur = store.get(&c)?.pred();
        }
        Ok(())
    }

    /// Number of public blocks in the subtree rooted at `id` (0 if unknown).
    pub fn weight(&self, id: &BlockId) -> u64 {
        self.w.get(id).copied().unwrap_or(0)
    }

    pub fn genesis(&self) -> BlockId {
        self.genesis
    }
}

/// Greedy heaviest-subtree walk from genesis, ties to the smallest id.
pub fn ghost_fork_choice(store: &ChainStore, weights: &GhostWeights) -> Result<BlockId> {
    let mut cur = weights.genesis();
    loop {
        let mut best: Option<(u64, BlockId)> = None;
        for c in store.children(&cur)? {
            let w = weights.weight(c);
            if w == 0 {
                continue;
            }
            if best.map_or(true, |(bw, bid)| w > bw || (w == bw && *c < bid)) {
                best = Some((w, *c));
            }
        }
        match best {
            Some((_, c)) => cur = c,
            None => return Ok(cur),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpForkConfig {
    /// Honest blocks required before the attacker forks off genesis.
    #[serde(default = "default_lead")]
    pub honest_lead: u64,
    #[serde(default = "one")]
    pub start_slot: Slot,
    /// Stop forking this many slots after the root was mined.
    #[serde(default)]
    pub run_for: Option<u64>,
}

fn default_lead() -> u64 {
    5
}

fn one() -> Slot {
    1
}

/// Exponential forking against GHOST: once a private root exists, mine on every
/// block of its subtree in every slot.
#[derive(Clone, Debug)]
pub struct ExpFork {
    cfg: ExpForkConfig,
    root: Option<(BlockId, Slot)>,
    done: bool,
}

impl ExpFork {
    pub fn new(cfg: ExpForkConfig) -> Self {
        ExpFork { cfg, root: None, done: false }
    }
}

impl Strategy for ExpFork {
    fn name(&self) -> &'static str {
        "exp-fork"
    }

    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let mut announce = Vec::new();
        match self.root {
            None => {
                let public = view.known.len() as u64 - 1;
                if view.now < self.cfg.start_slot || public < self.cfg.honest_lead {
                    return Ok(Action::default());
                }
                let g = view.store.genesis();
                for &c in &me.coins {
                    if let Some(b) = view.protocol.mine(view.store, &g, c, me.id, view.now, Vec::new())? {
                        self.root = Some((b.id(), view.now));
                        announce.push(b);
                        break;
                    }
                }
            }
            Some((root, at)) => {
                if self.cfg.run_for.is_some_and(|n| view.now > at + n) {
                    self.done = true;
                    return Ok(Action::default());
                }
                let sites: Vec<BlockId> = view
                    .known
                    .sorted()
                    .into_iter()
                    .filter(|id| view.store.is_descendant(id, &root).unwrap_or(false))
                    .collect();
                for site in sites {
                    for &c in &me.coins {
                        if let Some(b) = view.protocol.mine(view.store, &site, c, me.id, view.now, Vec::new())? {
                            announce.push(b);
                        }
                    }
                }
            }
        }
        Ok(Action { announce, broadcast: Vec::new() })
    }

    fn report(&self) -> StrategyReport {
        StrategyReport { fork_root: self.root, ..Default::default() }
    }

    fn fork_root(&self) -> Option<(BlockId, Slot)> {
        self.root
    }

    fn settled(&self) -> bool {
        self.done
    }
}
