mod common;

use std::collections::BTreeSet;

use common::{random_case, COINS};
use lcpos_core::analysis::race_probability;
use lcpos_core::chain::KnownSet;
use lcpos_core::engine::{detect, honest_explanation, DeviationKind, Detector, Explanation};
use lcpos_core::protocol::{classify, Predictability};
use lcpos_core::{BlockId, ChainStore, CoinId};
use proptest::prelude::*;

fn by_coin(store: &ChainStore, coin: CoinId) -> Vec<BlockId> {
    store.ids().iter().copied().filter(|id| store.get(id).unwrap().coin() == Some(coin)).collect()
}

/// Pairwise reading of the deviation rules, independent of the streaming detector.
fn conflicting(store: &ChainStore, a: &BlockId, b: &BlockId) -> bool {
    let (ta, tb) = (store.slot(a).unwrap(), store.slot(b).unwrap());
    if ta == tb {
        return true;
    }
    let (e, l) = if ta < tb { (a, b) } else { (b, a) };
    let pred = store.get(l).unwrap().pred().unwrap();
    store.score(e).unwrap() > store.score(&pred).unwrap()
}

/// Ancestor closure of a set of blocks.
fn view(store: &ChainStore, gens: &[BlockId]) -> BTreeSet<BlockId> {
    let mut out = BTreeSet::new();
    for g in gens {
        for id in store.path_from_genesis(g).unwrap() {
            out.insert(id);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cached_ownership_matches_replay(seed in any::<u64>(), n in 0usize..120, which in 0u8..6) {
        let case = random_case(seed, n, which);
        for id in case.store.ids() {
            for c in 0..COINS {
                let c = CoinId(c);
                prop_assert_eq!(case.store.owner_at(id, c).unwrap(), case.store.owner_at_replay(id, c).unwrap());
            }
        }
    }

    #[test]
    fn known_set_best_is_the_longest_chain(seed in any::<u64>(), n in 0usize..120, which in 0u8..6) {
        let case = random_case(seed, n, which);
        let store = &case.store;
        let now = u64::MAX / 2;
        let valid: Vec<BlockId> = store.ids().iter().copied()
            .filter(|id| store.is_valid(id, now, &case.proto).unwrap())
            .collect();
        let mut known = KnownSet::new(store.genesis());
        for id in &valid {
            known.insert(store, *id).unwrap();
        }
        prop_assert_eq!(known.best(), store.best_tip(store.ids(), now, &case.proto).unwrap());
        prop_assert_eq!(known.len(), valid.len());
        let listed: Vec<(u64, BlockId)> = known.iter_desc().map(|(s, id)| (s, *id)).collect();
        let mut sorted = listed.clone();
        sorted.sort_by_key(|(s, id)| (std::cmp::Reverse(*s), *id));
        prop_assert_eq!(listed, sorted);
    }

    #[test]
    fn detector_streaming_matches_batch_and_pairwise(seed in any::<u64>(), n in 0usize..150, which in 0u8..6) {
        let case = random_case(seed, n, which);
        let store = &case.store;
        let order: Vec<BlockId> = store.ids()[1..].to_vec();
        let mut d = Detector::new();
        let mut flagged = Vec::new();
        for id in &order {
            if d.observe(store, id).unwrap().is_some() {
                flagged.push(*id);
            }
        }
        let batch = detect(store, &order).unwrap();
        prop_assert_eq!(d.evidence(), batch.as_slice());
        for (j, id) in order.iter().enumerate() {
            let coin = store.get(id).unwrap().coin();
            let expect = order[..j].iter()
                .any(|o| store.get(o).unwrap().coin() == coin && conflicting(store, o, id));
            prop_assert_eq!(flagged.contains(id), expect, "block {}", id);
        }
        for e in d.evidence() {
            let same = store.slot(&e.earlier).unwrap() == store.slot(&e.later).unwrap();
            prop_assert_eq!(same, e.kind == DeviationKind::SameSlot);
        }
    }

    #[test]
    fn explanation_exists_iff_no_deviation(seed in any::<u64>(), n in 0usize..150, which in 0u8..6) {
        let case = random_case(seed, n, which);
        let store = &case.store;
        for c in 0..COINS {
            let blocks = by_coin(store, CoinId(c));
            let clean = detect(store, &blocks).unwrap().is_empty();
            match honest_explanation(store, &blocks).unwrap() {
                Explanation::Impossible { .. } => prop_assert!(!clean),
                Explanation::Explained { order, awareness } => {
                    prop_assert!(clean);
                    prop_assert_eq!(order.len(), blocks.len());
                    let mut prev = BTreeSet::new();
                    for (i, id) in order.iter().enumerate() {
                        if i > 0 {
                            prop_assert!(store.slot(&order[i - 1]).unwrap() < store.slot(id).unwrap());
                        }
                        let seen = view(store, &awareness[i]);
                        prop_assert!(seen.is_superset(&prev));
                        let pred = store.get(id).unwrap().pred().unwrap();
                        let top = seen.iter().map(|b| store.score(b).unwrap()).max().unwrap();
                        prop_assert!(seen.contains(&pred));
                        prop_assert_eq!(store.score(&pred).unwrap(), top);
                        prev = seen;
                        prev.insert(*id);
                    }
                }
            }
        }
    }

    #[test]
    fn race_is_monotone(alpha in 0.0f64..0.5, ell in 1u64..400) {
        let p = race_probability(alpha, ell).unwrap();
        let longer = race_probability(alpha, ell + 1).unwrap();
        prop_assert!(longer <= p * (1.0 + 1e-12), "p({alpha}, {ell}) = {p} < {longer}");
        let stronger = race_probability((alpha + 0.01).min(0.5), ell).unwrap();
        prop_assert!(stronger >= p * (1.0 - 1e-12));
    }

    #[test]
    fn race_complement(alpha in 0.0f64..=1.0, ell in 1u64..400) {
        let a = race_probability(alpha, ell).unwrap();
        let b = race_probability(1.0 - alpha, ell).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12, "{a} + {b}");
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn every_builtin_protocol_is_classified_once_and_monotonically() {
    for which in 0..6 {
        let spec = common::protocol(which, 0.5, 1, 1);
        let mut became_recent = false;
        for d in 1..12 {
            let c = classify(&spec, d);
            assert_ne!(c, Predictability::Unclassified, "{} at {d}", spec.name());
            if became_recent {
                assert_eq!(c, Predictability::Recent, "{} at {d}", spec.name());
            }
            became_recent |= c == Predictability::Recent;
        }
        assert_ne!(classify(&spec, 1), Predictability::Recent, "{}", spec.name());
    }
}
