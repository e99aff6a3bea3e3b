#![allow(dead_code)]

use std::collections::BTreeMap;

use lcpos_core::protocol::{Capability, ProtocolKind, ProtocolSpec, StoredTip};
use lcpos_core::{Block, BlockId, ChainStore, CoinId, ParticipantId, Slot, Transfer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const COINS: u32 = 5;

pub fn allocation() -> BTreeMap<CoinId, ParticipantId> {
    // participant 3 holds two coins
    (0..COINS).map(|c| (CoinId(c), ParticipantId(c.min(3)))).collect()
}

pub fn protocol(which: u8, p: f64, freeze: u32, seed: u64) -> ProtocolSpec {
    let kind = match which % 6 {
        0 => ProtocolKind::RandomOracle { recency: 1 },
        1 => ProtocolKind::RandomOracle { recency: 3 },
        2 => ProtocolKind::P1,
        3 => ProtocolKind::P2,
        4 => ProtocolKind::P3,
        _ => ProtocolKind::RandomOracle { recency: 2 },
    };
    ProtocolSpec::new(kind, p, freeze, seed).unwrap()
}

/// Blocks in insertion order, a mix of honestly mined and arbitrary ones.
pub fn random_blocks(store: &ChainStore, proto: &ProtocolSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<Block> {
    let mut scratch = store.clone();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n && tries < 20 * n {
        tries += 1;
        let ids = scratch.ids().to_vec();
        let pred = *ids.choose(rng).unwrap();
        let coin = CoinId(rng.gen_range(0..COINS));
        let pslot = scratch.slot(&pred).unwrap();
        let t = pslot + rng.gen_range(0..4);
        let owner = scratch.owner_at(&pred, coin).unwrap();
        let payload = if rng.gen_bool(0.15) {
            let c = CoinId(rng.gen_range(0..COINS));
            let from = if rng.gen_bool(0.8) { scratch.owner_at(&pred, c).unwrap() } else { ParticipantId(rng.gen_range(0..4)) };
            vec![Transfer { coin: c, from, to: ParticipantId(rng.gen_range(0..4)) }]
        } else {
            Vec::new()
        };
        let b = if rng.gen_bool(0.7) {
            match proto.mine(&scratch, &pred, coin, owner, t, payload).unwrap() {
                Some(b) => b,
                None => continue,
            }
        } else {
            let miner = if rng.gen_bool(0.7) { owner } else { ParticipantId(rng.gen_range(0..4)) };
            let aux = if rng.gen_bool(0.5) {
                let tip = StoredTip::new(&scratch, &pred).unwrap();
                proto.draw(&tip, coin, t, miner, Capability::Full).unwrap().1
            } else {
                Vec::new()
            };
            Block::new(pred, miner, t, coin, payload, aux)
        };
        if scratch.insert(b.clone()).unwrap() {
            out.push(b);
        }
    }
    out
}

pub struct Case {
    pub store: ChainStore,
    pub proto: ProtocolSpec,
    pub blocks: Vec<Block>,
}

pub fn random_case(seed: u64, n: usize, which: u8) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = [0.35, 0.7, 1.0][rng.gen_range(0..3)];
    let freeze = rng.gen_range(1..=2);
    let proto = protocol(which, p, freeze, seed);
    let mut store = ChainStore::new(&seed.to_le_bytes(), allocation());
    let blocks = random_blocks(&store, &proto, n, &mut rng);
    for b in &blocks {
        store.insert(b.clone()).unwrap();
    }
    Case { store, proto, blocks }
}

/// Same blocks plus `extra` unrelated ones, interleaved.
pub fn superset(case: &Case, extra: usize, seed: u64) -> ChainStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut big = case.store.clone();
    let more = random_blocks(&big, &case.proto, extra, &mut rng);
    for b in more {
        big.insert(b).unwrap();
    }
    // rebuild in a different order so no cached verdict carries over
    let mut fresh = ChainStore::new(&seed.to_le_bytes(), allocation());
    let mut ids: Vec<BlockId> = big.ids().to_vec();
    ids.sort_by_key(|id| (big.score(id).unwrap(), std::cmp::Reverse(*id)));
    for id in ids {
        if id != big.genesis() {
            fresh.insert(big.get(&id).unwrap().clone()).unwrap();
        }
    }
    fresh
}

/// Checks the validity laws on one case; returns a description of the first violation.
pub fn validity_laws(case: &Case, seed: u64) -> Result<(), String> {
    let Case { store, proto, .. } = case;
    let big = superset(case, 20, seed);
    let horizon: Slot = store.ids().iter().map(|id| store.slot(id).unwrap()).max().unwrap_or(0) + 3;
    for id in store.ids() {
        let b = store.get(id).unwrap();
        let Some(pred) = b.pred() else { continue };
        let (s, sp) = (store.score(id).unwrap(), store.score(&pred).unwrap());
        if s <= sp {
            return Err(format!("score {s} of {id} not above predecessor's {sp}"));
        }
        let t0 = b.slot();
        let mut seen_valid = false;
        for now in [t0.saturating_sub(1), t0, t0 + 1, horizon, horizon + 1000] {
            let v = store.is_valid(id, now, proto).unwrap();
            if v != big.is_valid(id, now, proto).unwrap() {
                return Err(format!("validity of {id} at {now} changed when unrelated blocks were added"));
            }
            if v != store.is_valid_naive(id, now, proto).unwrap() {
                return Err(format!("memoized validity of {id} at {now} disagrees with recursion"));
            }
            if seen_valid && !v {
                return Err(format!("{id} valid earlier but not at {now}"));
            }
            if v && !store.is_valid(&pred, now, proto).unwrap() {
                return Err(format!("{id} valid at {now} on an invalid predecessor"));
            }
            if v && t0 <= store.slot(&pred).unwrap() && pred != store.genesis() {
                return Err(format!("{id} valid with a non-increasing slot"));
            }
            seen_valid |= v;
        }
    }
    coherence(store, proto, seed)
}

/// mine returns a block exactly when a valid block with those coordinates exists.
pub fn coherence(store: &ChainStore, proto: &ProtocolSpec, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
    for _ in 0..8 {
        let pred = *store.ids().choose(&mut rng).unwrap();
        let coin = CoinId(rng.gen_range(0..COINS));
        let t = store.slot(&pred).unwrap() + rng.gen_range(0..4);
        let caller = if rng.gen_bool(0.7) { store.owner_at(&pred, coin).unwrap() } else { ParticipantId(rng.gen_range(0..4)) };
        let mined = proto.mine(store, &pred, coin, caller, t, Vec::new()).unwrap();
        let tip = StoredTip::new(store, &pred).unwrap();
        let aux = proto.draw(&tip, coin, t, caller, Capability::Full).unwrap().1;
        let candidate = Block::new(pred, caller, t, coin, Vec::new(), aux);
        let exists = store.is_valid_block(&candidate, t, proto).unwrap();
        match mined {
            Some(b) if b != candidate => return Err(format!("mine returned an unexpected block at {pred}")),
            Some(b) if !store.is_valid_block(&b, t, proto).unwrap() || !proto.verify(store, &b).unwrap() => {
                return Err(format!("mined block {} fails validation", b.id()))
            }
            None if exists => return Err(format!("mine missed a valid block on {pred} at {t}")),
            _ => {}
        }
    }
    Ok(())
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
