mod common;

use std::collections::BTreeMap;

use lcpos_core::engine::{self, honest_explanation, Explanation, SimConfig, Simulation};
use lcpos_core::protocol::{Capability, ProtocolKind, ProtocolSpec};
use lcpos_core::strategies::lookahead::{Search, SearchParams};
use lcpos_core::strategies::{ghost_fork_choice, GhostWeights};
use lcpos_core::{Block, BlockId, ChainStore, CoinId, ParticipantId};

fn honest_config(seed: u64, kind: &str) -> SimConfig {
    SimConfig::from_toml(&format!(
        r#"
seed = {seed}
slots = 3000

[protocol]
kind = "{kind}"
p = 0.02

[[participants]]
name = "big"
coins = 6
strategy = {{ kind = "honest" }}

[[participants]]
name = "mid"
coins = 3
strategy = {{ kind = "honest" }}

[[participants]]
name = "small"
coins = 1
strategy = {{ kind = "honest" }}
"#
    ))
    .unwrap()
}

#[test]
fn honest_runs_have_no_deviations_and_conserve_the_chain() {
    for (seed, kind) in [(1, "oracle"), (2, "p1"), (3, "p2"), (4, "p3")] {
        let log = engine::run(&honest_config(seed, kind)).unwrap();
        let s = &log.summary;
        assert_eq!(s.deviations, 0, "{kind}");
        assert!(log.deviations.is_empty());
        assert!(s.final_score > 0);
        let total: f64 = s.participants.iter().map(|t| t.chain_share).sum();
        assert!((total - 1.0).abs() < 1e-12, "{kind}: shares sum to {total}");
        let on_chain: u64 = s.participants.iter().map(|t| t.on_chain).sum();
        assert_eq!(on_chain, s.final_score, "{kind}");
        assert!(s.participants.iter().all(|t| !t.flagged && t.on_chain <= t.announced));
    }
}

#[test]
fn honest_shares_track_stake() {
    let mut share = BTreeMap::<String, Vec<f64>>::new();
    for seed in 0..8 {
        let mut cfg = honest_config(100 + seed, "oracle");
        cfg.slots = 5000;
        cfg.record_slots = false;
        for t in engine::run(&cfg).unwrap().summary.participants {
            share.entry(t.name).or_default().push(t.chain_share - t.stake);
        }
    }
    for (name, diffs) in share {
        let (m, se) = common::mean_se(&diffs);
        assert!(m.abs() <= 4.0 * se + 0.02, "{name}: share minus stake {m:.4} (se {se:.4})");
    }
}

#[test]
fn runs_are_deterministic_in_the_seed() {
    let cfg = honest_config(9, "p1");
    let a = engine::run(&cfg).unwrap().to_jsonl();
    let b = engine::run(&cfg).unwrap().to_jsonl();
    assert_eq!(a, b);
    let c = engine::run(&honest_config(10, "p1")).unwrap().to_jsonl();
    assert_ne!(a, c);
}

#[test]
fn unas_blocks_admit_an_honest_explanation() {
    let cfg = SimConfig::from_toml(
        r#"
seed = 5
slots = 4000

[protocol]
kind = "oracle"
p = 0.01

[[participants]]
name = "unas"
coins = 1
strategy = { kind = "unas", depth = 6 }

[[participants]]
name = "honest"
coins = 1
count = 30
strategy = { kind = "honest" }
"#,
    )
    .unwrap();
    let slots = cfg.slots;
    let mut sim = Simulation::new(cfg).unwrap();
    while sim.now() <= slots {
        sim.step().unwrap();
    }
    assert!(sim.evidence().is_empty());
    let store = sim.store();
    let theirs: Vec<BlockId> = sim
        .known()
        .sorted()
        .into_iter()
        .filter(|id| store.get(id).unwrap().miner() == ParticipantId(0))
        .collect();
    assert!(theirs.len() > 10, "only {} blocks", theirs.len());
    match honest_explanation(store, &theirs).unwrap() {
        Explanation::Explained { order, awareness } => {
            assert_eq!(order.len(), theirs.len());
            assert_eq!(awareness.len(), theirs.len());
        }
        Explanation::Impossible { evidence } => panic!("{evidence:?}"),
    }
}

fn lone_store(coins: u32) -> (ChainStore, Vec<(CoinId, ParticipantId)>) {
    let alloc: BTreeMap<_, _> = (0..coins).map(|c| (CoinId(c), ParticipantId(c))).collect();
    let coins = alloc.iter().map(|(c, p)| (*c, *p)).collect();
    (ChainStore::new(b"lookahead", alloc), coins)
}

#[test]
fn lookahead_with_certain_success_advances_one_slot_per_block() {
    let (store, coins) = lone_store(2);
    for kind in [ProtocolKind::RandomOracle { recency: 1 }, ProtocolKind::P1, ProtocolKind::P2] {
        let spec = ProtocolSpec::new(kind, 1.0, 1, 3).unwrap();
        let params = SearchParams { from_slot: 1, horizon: 30, max_depth: 8, budget: 1 << 16 };
        let f = Search::new(&store, &spec, &coins, Capability::Full, params).run(&[store.genesis()], true);
        for k in 1..=8 {
            assert_eq!(f.reach(k), Some(u64::from(k)), "{} depth {k}", spec.name());
        }
    }
}

#[test]
fn lookahead_with_no_success_finds_nothing() {
    let (store, coins) = lone_store(3);
    let spec = ProtocolSpec::new(ProtocolKind::P1, 0.0, 1, 3).unwrap();
    let params = SearchParams { from_slot: 1, horizon: 40, max_depth: 4, budget: 1 << 16 };
    let f = Search::new(&store, &spec, &coins, Capability::Full, params).run(&[store.genesis()], true);
    assert!((1..=4).all(|k| f.reach(k).is_none()));
    assert_eq!(f.exact_through, 40);
    assert!(f.not_by(1, 40));
}

#[test]
fn ghost_prefers_a_bushy_subtree_over_a_longer_chain() {
    let (mut store, _) = lone_store(4);
    let g = store.genesis();
    let mut w = GhostWeights::new(g);
    let mut add = |store: &mut ChainStore, pred: BlockId, c: u32, t: u64| {
        let b = Block::new(pred, ParticipantId(c), t, CoinId(c), vec![], vec![]);
        let id = b.id();
        store.insert(b).unwrap();
        w.add(store, id).unwrap();
        id
    };
    // five blocks in a line
    let mut line = g;
    for t in 1..=5 {
        line = add(&mut store, line, 0, t);
    }
    // three levels, six blocks
    let r = add(&mut store, g, 1, 1);
    let x = add(&mut store, r, 2, 2);
    let y = add(&mut store, r, 3, 2);
    add(&mut store, x, 1, 3);
    add(&mut store, x, 2, 3);
    add(&mut store, y, 3, 3);
    assert_eq!(w.weight(&g), 12);
    let tip = ghost_fork_choice(&store, &w).unwrap();
    assert_eq!(store.score(&tip).unwrap(), 3);
    assert!(store.is_descendant(&tip, &r).unwrap());
    let longest = store.ids().iter().max_by_key(|id| store.score(id).unwrap()).unwrap();
    assert_eq!(*longest, line);
}
