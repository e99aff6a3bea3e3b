use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ForkChoice, ParticipantConfig, SimConfig, StrategyConfig};
use super::detector::{DeviationEvidence, Detector};
use super::runlog::*;
use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
use crate::chain::{ChainStore, KnownSet, TipTracker};
use crate::error::{Error, Result};
use crate::analysis::unas_rate_bound;
use crate::protocol::ProtocolSpec;
use crate::strategies::{
    ghost_fork_choice, DoubleSpend, ExpFork, GhostWeights, Honest, Me, Selfish, SlotView, Strategy, Unas,
};

struct Participant {
    info: ParticipantInfo,
    me: Me,
    honest: bool,
    unas_depth: Option<u64>,
    strategy: Box<dyn Strategy>,
    announced: u64,
}

/// Slot-driven simulator. Announcements made in slot `t` become public at the
/// start of slot `t + 1`.
pub struct Simulation {
    cfg: SimConfig,
    protocol: ProtocolSpec,
    store: ChainStore,
    known: KnownSet,
    tracker: TipTracker,
    ghost: Option<GhostWeights>,
    participants: Vec<Participant>,
    order: Vec<usize>,
    coins: Vec<(CoinId, ParticipantId)>,
    pending: Vec<BlockId>,
    pending_tx: Vec<Transfer>,
    mempool: Vec<Transfer>,
    detector: Option<Detector>,
    slots: Vec<SlotRecord>,
    fork_steps: Vec<ForkStep>,
    now: Slot,
    rejected: u64,
    max_reorg: u64,
    public_best: BlockId,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let protocol = cfg.protocol_spec()?;
        let expanded: Vec<(&ParticipantConfig, u32)> =
            cfg.participants.iter().flat_map(|pc| (0..pc.count).map(move |copy| (pc, copy))).collect();
        let mut allocation = BTreeMap::new();
        let mut participants = Vec::new();
        let mut next_coin = 0u32;
        for (i, &(pc, copy)) in expanded.iter().enumerate() {
            let id = ParticipantId(i as u32);
            let coins: Vec<CoinId> = (0..pc.coins).map(|k| CoinId(next_coin + k)).collect();
            next_coin += pc.coins;
            for &c in &coins {
                allocation.insert(c, id);
            }
            participants.push(Participant {
                info: ParticipantInfo {
                    id,
                    name: if pc.count == 1 { pc.name.clone() } else { format!("{}-{copy}", pc.name) },
                    strategy: pc.strategy.label().to_string(),
                    coins: coins.clone(),
                },
                me: Me { id, coins },
                honest: matches!(pc.strategy, StrategyConfig::Honest),
                unas_depth: None,
                strategy: Box::new(Honest),
                announced: 0,
            });
        }
        // payment coins come after every mining coin so mining coin ids do not shift
        for (p, (pc, _)) in participants.iter_mut().zip(&expanded) {
            p.strategy = match &pc.strategy {
                StrategyConfig::Honest => Box::new(Honest),
                StrategyConfig::Unas { depth } => {
                    p.unas_depth = Some(*depth);
                    Box::new(Unas::new(*depth))
                }
                StrategyConfig::NaiveNas { depth } => Box::new(Unas::naive(*depth)),
                StrategyConfig::Selfish(s) => Box::new(Selfish::new(s.clone())),
                StrategyConfig::DoubleSpend(d) => {
                    let coin = CoinId(next_coin);
                    next_coin += 1;
                    allocation.insert(coin, p.me.id);
                    Box::new(DoubleSpend::new(d.clone(), coin))
                }
                StrategyConfig::ExpFork(e) => Box::new(ExpFork::new(e.clone())),
            };
        }
        let coins: Vec<_> = allocation.iter().map(|(c, p)| (*c, *p)).collect();
        let store = ChainStore::new(&cfg.seed.to_be_bytes(), allocation);
        let g = store.genesis();
        let mut order: Vec<usize> = (0..participants.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_0bde));
        Ok(Simulation {
            ghost: (cfg.fork_choice == ForkChoice::Ghost).then(|| GhostWeights::new(g)),
            detector: cfg.detector.then(Detector::new),
            known: KnownSet::new(g),
            tracker: TipTracker::new(g),
            protocol,
            store,
            participants,
            order,
            coins,
            pending: Vec::new(),
            pending_tx: Vec::new(),
            mempool: Vec::new(),
            slots: Vec::new(),
            fork_steps: Vec::new(),
            now: 1,
            rejected: 0,
            max_reorg: 0,
            public_best: g,
            cfg,
        })
    }

    pub fn store(&self) -> &ChainStore {
        &self.store
    }
    pub fn known(&self) -> &KnownSet {
        &self.known
    }
    pub fn protocol(&self) -> &ProtocolSpec {
        &self.protocol
    }
    /// Next slot to be run.
    pub fn now(&self) -> Slot {
        self.now
    }
    pub fn evidence(&self) -> &[DeviationEvidence] {
        self.detector.as_ref().map(|d| d.evidence()).unwrap_or(&[])
    }

    /// Current fork-choice tip of honest participants.
    pub fn tip(&self) -> Result<BlockId> {
        match &self.ghost {
            Some(w) => ghost_fork_choice(&self.store, w),
            None => Ok(self.tracker.tip()),
        }
    }

    fn deliver(&mut self) -> Result<()> {
        let batch = std::mem::take(&mut self.pending);
        for id in &batch {
            self.known.insert(&self.store, *id)?;
            if let Some(d) = &mut self.detector {
                d.observe(&self.store, id)?;
            }
            if let Some(w) = &mut self.ghost {
                w.add(&self.store, *id)?;
            }
        }
        self.tracker.observe(&self.store, &batch)?;
        let best = self.tip()?;
        if best != self.public_best {
            if !self.store.is_descendant(&best, &self.public_best)? {
                let ca = self.store.common_ancestor(&best, &self.public_best)?;
                let depth = self.store.score(&self.public_best)? - self.store.score(&ca)?;
                self.max_reorg = self.max_reorg.max(depth);
            }
            self.public_best = best;
        }
        for t in std::mem::take(&mut self.pending_tx) {
            if !self.mempool.contains(&t) {
                self.mempool.push(t);
            }
        }
        let tip = self.tip()?;
        let store = &self.store;
        self.mempool.retain(|t| store.owner_at(&tip, t.coin).map(|o| o == t.from).unwrap_or(false));
        Ok(())
    }

    fn record_fork(&mut self) -> Result<()> {
        let (Some(w), Some((root, root_slot))) =
            (&self.ghost, self.participants.iter().find_map(|p| p.strategy.fork_root()))
        else {
            return Ok(());
        };
        // blocks announced through slot now - 1 are public
        if self.now <= root_slot {
            return Ok(());
        }
        let tip = ghost_fork_choice(&self.store, w)?;
        self.fork_steps.push(ForkStep {
            k: self.now - 1 - root_slot,
            subtree: w.weight(&root),
            honest_inside: self.store.is_descendant(&tip, &root)?,
        });
        Ok(())
    }

    /// Runs one slot.
    pub fn step(&mut self) -> Result<()> {
        self.deliver()?;
        self.record_fork()?;
        let now = self.now;
        let tip = self.tip()?;
        let mut actions = Vec::with_capacity(self.participants.len());
        for &i in &self.order {
            let view = SlotView {
                store: &self.store,
                protocol: &self.protocol,
                known: &self.known,
                tip,
                now,
                mempool: &self.mempool,
                coins: &self.coins,
                ghost: self.ghost.as_ref(),
            };
            let p = &mut self.participants[i];
            actions.push((i, p.strategy.on_slot(&p.me, &view)?));
        }
        let mut announced = Vec::new();
        let mut rejected = 0;
        for (i, action) in actions {
            let who = self.participants[i].me.id;
            for b in action.announce {
                if !self.admit(&b, who, now)? {
                    rejected += 1;
                    continue;
                }
                self.participants[i].announced += 1;
                if self.cfg.record_slots {
                    announced.push(Announcement {
                        block: b.id(),
                        pred: b.pred().expect("non-genesis"),
                        by: who,
                        coin: b.coin().expect("non-genesis"),
                        t: b.slot(),
                        score: self.store.score(&b.id())?,
                        txs: b.payload().len(),
                    });
                }
            }
            self.pending_tx.extend(action.broadcast);
        }
        self.rejected += rejected as u64;
        if self.cfg.record_slots && (!announced.is_empty() || rejected > 0) {
            self.slots.push(SlotRecord {
                slot: now,
                best_tip: tip,
                best_score: self.store.score(&tip)?,
                announced,
                rejected,
            });
        }
        self.now += 1;
        Ok(())
    }

    fn admit(&mut self, b: &Block, who: ParticipantId, now: Slot) -> Result<bool> {
        if b.miner() != who || self.pending.contains(&b.id()) || self.known.contains(&b.id()) {
            return Ok(false);
        }
        let valid = match self.store.is_valid_block(b, now, &self.protocol) {
            Ok(v) => v,
            Err(Error::MissingAncestor { .. }) => false,
            Err(e) => return Err(e),
        };
        if !valid {
            return Ok(false);
        }
        self.store.insert(b.clone())?;
        self.pending.push(b.id());
        Ok(true)
    }

    fn settled(&self) -> bool {
        self.participants.iter().all(|p| p.strategy.settled())
    }

    /// Runs all configured slots (or until settled) and produces the log.
    pub fn run(mut self) -> Result<RunLog> {
        while self.now <= self.cfg.slots {
            self.step()?;
            if self.cfg.stop_when_settled && self.settled() {
                break;
            }
        }
        self.deliver()?;
        self.record_fork()?;
        self.finish()
    }

    fn finish(self) -> Result<RunLog> {
        let final_tip = self.tip()?;
        let final_score = self.store.score(&final_tip)?;
        let mut on_chain: BTreeMap<ParticipantId, u64> = BTreeMap::new();
        for id in self.store.path_from_genesis(&final_tip)?.iter().skip(1) {
            *on_chain.entry(self.store.get(id)?.miner()).or_default() += 1;
        }
        let (honest_blocks, honest_coins) = self
            .participants
            .iter()
            .filter(|p| p.honest)
            .fold((0u64, 0usize), |(b, c), p| (b + p.announced, c + p.me.coins.len()));
        let honest_rate = if honest_coins > 0 { honest_blocks as f64 / honest_coins as f64 } else { 0.0 };
        let evidence: Vec<DeviationEvidence> = self.detector.as_ref().map(|d| d.evidence().to_vec()).unwrap_or_default();
        let flagged: BTreeSet<ParticipantId> = evidence.iter().map(|e| e.miner).collect();
        let total_coins = self.coins.len() as f64;
        let tallies = self
            .participants
            .iter()
            .map(|p| {
                let chain = on_chain.get(&p.me.id).copied().unwrap_or(0);
                let held = self.coins.iter().filter(|(_, o)| *o == p.me.id).count();
                Tally {
                    id: p.me.id,
                    name: p.info.name.clone(),
                    strategy: p.info.strategy.clone(),
                    coins: p.me.coins.len(),
                    stake: held as f64 / total_coins,
                    announced: p.announced,
                    on_chain: chain,
                    chain_share: if final_score > 0 { chain as f64 / final_score as f64 } else { 0.0 },
                    rate_ratio: (honest_rate > 0.0)
                        .then(|| p.announced as f64 / p.me.coins.len() as f64 / honest_rate),
                    flagged: flagged.contains(&p.me.id),
                    unas_bound: p
                        .unas_depth
                        .and_then(|d| unas_rate_bound(d, self.coins.len() as u64).ok())
                        .map(|b| b.multiplier),
                    report: p.strategy.report(),
                }
            })
            .collect();
        let fork = self
            .participants
            .iter()
            .find_map(|p| p.strategy.fork_root())
            .map(|(root, root_slot)| ForkTrace { root, root_slot, steps: self.fork_steps.clone() });
        let summary = Summary {
            schema: SUMMARY_SCHEMA,
            seed: self.cfg.seed,
            slots_run: self.now - 1,
            protocol: self.protocol.name(),
            final_tip,
            final_score,
            blocks_stored: self.store.len(),
            announced: self.participants.iter().map(|p| p.announced).sum(),
            rejected: self.rejected,
            honest_rate_per_coin: honest_rate,
            max_reorg_depth: self.max_reorg,
            deviations: evidence.len(),
            participants: tallies,
            fork,
        };
        Ok(RunLog {
            schema: RUNLOG_SCHEMA,
            genesis: self.store.genesis(),
            participants: self.participants.iter().map(|p| p.info.clone()).collect(),
            slots: self.slots,
            deviations: evidence,
            summary,
            config: self.cfg,
        })
    }
}

/// Runs a configuration to completion.
pub fn run(cfg: &SimConfig) -> Result<RunLog> {
    Simulation::new(cfg.clone())?.run()
}
