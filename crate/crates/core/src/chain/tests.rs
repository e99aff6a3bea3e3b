use std::collections::BTreeMap;

use super::*;
use crate::block::Transfer;
use crate::protocol::{ProtocolKind, ProtocolSpec};

fn alloc(n: u32) -> BTreeMap<CoinId, ParticipantId> {
    (0..n).map(|i| (CoinId(i), ParticipantId(i))).collect()
}

fn always() -> ProtocolSpec {
    ProtocolSpec::new(ProtocolKind::P2, 1.0, 1, 0).unwrap()
}

fn child(store: &mut ChainStore, pred: BlockId, coin: u32, t: Slot) -> BlockId {
    let b = Block::new(pred, ParticipantId(coin), t, CoinId(coin), vec![], vec![]);
    let id = b.id();
    store.insert(b).unwrap();
    id
}

#[test]
fn scores_and_predecessors() {
    let mut s = ChainStore::new(b"g", alloc(3));
    let g = s.genesis();
    let a = child(&mut s, g, 0, 1);
    let b = child(&mut s, a, 1, 2);
    assert_eq!(s.score(&g).unwrap(), 0);
    assert_eq!(s.score(&b).unwrap(), 2);
    assert_eq!(s.predecessor(&b, 2).unwrap(), Some(g));
    assert_eq!(s.predecessor(&b, 3).unwrap(), None);
    assert_eq!(s.ancestor_or_genesis(&b, 9).unwrap(), g);
    assert!(s.is_descendant(&b, &a).unwrap());
    assert!(s.is_descendant(&b, &b).unwrap());
    assert!(!s.is_descendant(&a, &b).unwrap());
}

#[test]
fn missing_ancestor_is_structural() {
    let mut s = ChainStore::new(b"g", alloc(1));
    let other = Block::genesis(b"elsewhere");
    let orphan = Block::new(other.id(), ParticipantId(0), 1, CoinId(0), vec![], vec![]);
    assert!(matches!(s.insert(orphan.clone()), Err(Error::MissingAncestor { .. })));
    assert!(matches!(s.is_valid_block(&orphan, 5, &always()), Err(Error::MissingAncestor { .. })));
    assert!(matches!(s.score(&orphan.id()), Err(Error::UnknownBlock(_))));
}

#[test]
fn ownership_follows_transfers() {
    let mut s = ChainStore::new(b"g", alloc(2));
    let g = s.genesis();
    let t = Transfer { coin: CoinId(1), from: ParticipantId(1), to: ParticipantId(0) };
    let b = Block::new(g, ParticipantId(0), 1, CoinId(0), vec![t], vec![]);
    let bid = b.id();
    s.insert(b).unwrap();
    let c = child(&mut s, bid, 0, 2);
    assert_eq!(s.owner_at(&g, CoinId(1)).unwrap(), ParticipantId(1));
    assert_eq!(s.owner_at(&c, CoinId(1)).unwrap(), ParticipantId(0));
    assert_eq!(s.owner_at_replay(&c, CoinId(1)).unwrap(), ParticipantId(0));
    assert_eq!(s.owner_at(&c, CoinId(7)), Err(Error::UnknownCoin(CoinId(7))));
    assert!(s.is_valid(&c, 2, &always()).unwrap());
    // coin 1 now belongs to P0, so P1 can no longer mine with it
    let stolen = Block::new(c, ParticipantId(1), 3, CoinId(1), vec![], vec![]);
    assert!(!s.is_valid_block(&stolen, 3, &always()).unwrap());
}

#[test]
fn payload_must_spend_owned_coins() {
    let s = ChainStore::new(b"g", alloc(2));
    let g = s.genesis();
    let bad = Transfer { coin: CoinId(1), from: ParticipantId(0), to: ParticipantId(0) };
    let b = Block::new(g, ParticipantId(0), 1, CoinId(0), vec![bad], vec![]);
    assert!(!s.is_valid_block(&b, 1, &always()).unwrap());
    let hop = vec![
        Transfer { coin: CoinId(1), from: ParticipantId(1), to: ParticipantId(0) },
        Transfer { coin: CoinId(1), from: ParticipantId(0), to: ParticipantId(1) },
    ];
    let ok = Block::new(g, ParticipantId(0), 1, CoinId(0), hop, vec![]);
    assert!(s.is_valid_block(&ok, 1, &always()).unwrap());
}

#[test]
fn slots_strictly_increase_and_future_blocks_wait() {
    let mut s = ChainStore::new(b"g", alloc(2));
    let g = s.genesis();
    let a = child(&mut s, g, 0, 5);
    let same = child(&mut s, a, 1, 5);
    let later = child(&mut s, a, 1, 9);
    let p = always();
    assert!(!s.is_valid(&same, 100, &p).unwrap());
    assert!(!s.is_valid(&later, 8, &p).unwrap());
    assert!(s.is_valid(&later, 9, &p).unwrap());
    let under = child(&mut s, same, 0, 10);
    assert!(!s.is_valid(&under, 10, &p).unwrap());
    for id in [a, same, later, under] {
        for now in [4, 5, 9, 10] {
            assert_eq!(s.is_valid(&id, now, &p).unwrap(), s.is_valid_naive(&id, now, &p).unwrap());
        }
    }
}

#[test]
fn best_tip_prefers_score_then_small_id() {
    let mut s = ChainStore::new(b"g", alloc(3));
    let g = s.genesis();
    let a = child(&mut s, g, 0, 1);
    let b = child(&mut s, g, 1, 1);
    let p = always();
    let all = [g, a, b];
    assert_eq!(s.best_tip(&all, 1, &p).unwrap(), a.min(b));
    let c = child(&mut s, a.max(b), 2, 2);
    let all = [g, a, b, c];
    assert_eq!(s.best_tip(&all, 1, &p).unwrap(), a.min(b));
    assert_eq!(s.best_tip(&all, 2, &p).unwrap(), c);

    let mut known = KnownSet::new(g);
    for id in &all {
        known.insert(&s, *id).unwrap();
    }
    assert_eq!(known.best(), c);
    assert_eq!(known.best_outside(&s, &a.max(b)).unwrap(), Some(a.min(b)));
    assert_eq!(known.best_outside(&s, &g).unwrap(), None);
}

#[test]
fn tracker_is_sticky_on_ties() {
    let mut s = ChainStore::new(b"g", alloc(3));
    let g = s.genesis();
    let a = child(&mut s, g, 0, 1);
    let b = child(&mut s, g, 1, 1);
    let mut tr = TipTracker::new(g);
    assert!(tr.observe(&s, &[a.max(b)]).unwrap());
    assert!(!tr.observe(&s, &[a.min(b)]).unwrap());
    assert_eq!(tr.tip(), a.max(b));
    let c = child(&mut s, a.min(b), 2, 2);
    assert!(tr.observe(&s, &[c]).unwrap());
    assert_eq!(tr.tip(), c);
}

#[test]
fn common_ancestor_of_forks() {
    let mut s = ChainStore::new(b"g", alloc(3));
    let g = s.genesis();
    let a = child(&mut s, g, 0, 1);
    let b1 = child(&mut s, a, 1, 2);
    let b2 = child(&mut s, b1, 1, 3);
    let c1 = child(&mut s, a, 2, 4);
    assert_eq!(s.common_ancestor(&b2, &c1).unwrap(), a);
    assert_eq!(s.common_ancestor(&b2, &b1).unwrap(), b1);
}
