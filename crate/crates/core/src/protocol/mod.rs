//! Eligibility rules: the random-oracle family and the concrete protocols P1, P2, P3.

mod predict;
mod prf;

pub use predict::{classify, prediction_game, prediction_game_as, GameReport, Observer, Predictability};
pub use prf::{unit_interval, KeyRing, PrfKey, Signer};

use std::fmt;
use std::sync::Arc;

use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
use crate::chain::ChainStore;
use crate::error::{Error, Result};
use prf::Domain;

/// A user-supplied eligibility rule, used to exercise code paths that must not
/// assume one of the built-in protocols.
pub trait CustomRule: Send + Sync {
    fn name(&self) -> &str;
    fn eligible(&self, pred: &BlockId, coin: CoinId, t: Slot) -> bool;
    /// Declared predictability at depth `d`; `None` leaves the rule unclassified.
    fn profile(&self, _d: u32) -> Option<Predictability> {
        None
    }
}

#[derive(Clone)]
pub enum ProtocolKind {
    /// Idealized protocol: eligibility from a random oracle keyed on the block
    /// `recency` steps back from the new block.
    RandomOracle { recency: u32 },
    /// Public hash of (predecessor, slot, coin).
    P1,
    /// Public hash of (slot, coin).
    P2,
    /// Chained unique signatures.
    P3,
    Custom(Arc<dyn CustomRule>),
}

impl fmt::Debug for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::RandomOracle { recency } => write!(f, "RandomOracle{{recency: {recency}}}"),
            ProtocolKind::P1 => f.write_str("P1"),
            ProtocolKind::P2 => f.write_str("P2"),
            ProtocolKind::P3 => f.write_str("P3"),
            ProtocolKind::Custom(r) => write!(f, "Custom({})", r.name()),
        }
    }
}

/// Who is evaluating eligibility, and therefore which inputs are computable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capability {
    /// The simulator itself: every query is answerable.
    Full,
    /// A participant: oracle queries need an existing anchor, signatures need the owner's key.
    Observer(ParticipantId),
}

/// Read access to the chain a new block would extend, possibly hypothetical.
pub trait Ancestry {
    fn tip(&self) -> BlockId;
    fn tip_slot(&self) -> Slot;
    fn tip_aux(&self) -> &[u8];
    /// `Pred^d(tip)` clamped at genesis, plus whether that block actually exists.
    fn ancestor(&self, d: u64) -> (BlockId, bool);
}

/// A stored block seen as a tip.
pub struct StoredTip<'a> {
    store: &'a ChainStore,
    block: &'a Block,
}

impl<'a> StoredTip<'a> {
    pub fn new(store: &'a ChainStore, id: &BlockId) -> Result<Self> {
        Ok(StoredTip { store, block: store.get(id)? })
    }
}

impl Ancestry for StoredTip<'_> {
    fn tip(&self) -> BlockId {
        self.block.id()
    }
    fn tip_slot(&self) -> Slot {
        self.block.slot()
    }
    fn tip_aux(&self) -> &[u8] {
        self.block.aux()
    }
    fn ancestor(&self, d: u64) -> (BlockId, bool) {
        let id = self.store.ancestor_or_genesis(&self.block.id(), d).expect("tip is stored");
        (id, true)
    }
}

/// A stored base extended by blocks that do not exist (yet).
pub struct HypoPath<'a> {
    store: &'a ChainStore,
    base: BlockId,
    ext: Vec<Block>,
}

impl<'a> HypoPath<'a> {
    pub fn new(store: &'a ChainStore, base: BlockId) -> Self {
        HypoPath { store, base, ext: Vec::new() }
    }

    pub fn push(&mut self, b: Block) {
        debug_assert_eq!(b.pred(), Some(self.tip()));
        self.ext.push(b);
    }

    pub fn blocks(&self) -> &[Block] {
        &self.ext
    }
}

impl Ancestry for HypoPath<'_> {
    fn tip(&self) -> BlockId {
        self.ext.last().map(|b| b.id()).unwrap_or(self.base)
    }
    fn tip_slot(&self) -> Slot {
        match self.ext.last() {
            Some(b) => b.slot(),
            None => self.store.slot(&self.base).expect("base is stored"),
        }
    }
    fn tip_aux(&self) -> &[u8] {
        match self.ext.last() {
            Some(b) => b.aux(),
            None => self.store.get(&self.base).expect("base is stored").aux(),
        }
    }
    fn ancestor(&self, d: u64) -> (BlockId, bool) {
        let n = self.ext.len() as u64;
        if d < n {
            (self.ext[(n - 1 - d) as usize].id(), false)
        } else {
            (self.store.ancestor_or_genesis(&self.base, d - n).expect("base is stored"), true)
        }
    }
}

/// A protocol instance: rule, per-slot success probability, freeze depth and keys.
#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    kind: ProtocolKind,
    success_prob: f64,
    freeze: u32,
    keys: KeyRing,
    fingerprint: u64,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind, success_prob: f64, freeze: u32, key_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(Error::domain("success probability", format!("{success_prob} not in [0, 1]")));
        }
        if freeze == 0 {
            return Err(Error::domain("freeze depth", "must be at least 1"));
        }
        if let ProtocolKind::RandomOracle { recency: 0 } = kind {
            return Err(Error::domain("recency", "must be at least 1"));
        }
        let keys = KeyRing::from_seed(key_seed);
        let mut spec = ProtocolSpec { kind, success_prob, freeze, keys, fingerprint: 0 };
        spec.fingerprint = spec.compute_fingerprint();
        Ok(spec)
    }

    pub fn random_oracle(recency: u32, p: f64, key_seed: u64) -> Result<Self> {
        Self::new(ProtocolKind::RandomOracle { recency }, p, 1, key_seed)
    }

    /// Same rule with fresh keys.
    pub fn rekeyed(&self, key_seed: u64) -> Self {
        Self::new(self.kind.clone(), self.success_prob, self.freeze, key_seed).expect("already validated")
    }

    fn compute_fingerprint(&self) -> u64 {
        let (tag, param): (&[u8], u32) = match &self.kind {
            ProtocolKind::RandomOracle { recency } => (b"oracle", *recency),
            ProtocolKind::P1 => (b"p1", 0),
            ProtocolKind::P2 => (b"p2", 0),
            ProtocolKind::P3 => (b"p3", 0),
            ProtocolKind::Custom(r) => (r.name().as_bytes(), u32::MAX),
        };
        let k = self.keys.public();
        k.eval(
            Domain::Fingerprint,
            &[
                tag,
                &param.to_be_bytes(),
                &self.success_prob.to_bits().to_be_bytes(),
                &self.freeze.to_be_bytes(),
                self.keys.master(),
            ],
        ) as u64
    }

    pub fn kind(&self) -> &ProtocolKind {
        &self.kind
    }
    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }
    pub fn freeze(&self) -> u32 {
        self.freeze
    }
    pub fn keys(&self) -> &KeyRing {
        &self.keys
    }
    /// Stable identity used to key validity caches.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ProtocolKind::RandomOracle { recency } => format!("oracle(l={recency})"),
            ProtocolKind::P1 => "P1".into(),
            ProtocolKind::P2 => "P2".into(),
            ProtocolKind::P3 => "P3".into(),
            ProtocolKind::Custom(r) => r.name().to_string(),
        }
    }

    fn below(&self, x: u128) -> bool {
        unit_interval(x) < self.success_prob
    }

    /// Raw random-oracle eligibility for an explicit anchor.
    pub fn oracle_eligible(&self, anchor: &BlockId, coin: CoinId, t: Slot) -> bool {
        self.below(self.keys.oracle().eval(Domain::Oracle, &[&anchor.0, &coin.0.to_be_bytes(), &t.to_be_bytes()]))
    }

    fn digest(&self, s: &[u8]) -> [u8; 16] {
        self.keys.public().eval(Domain::Digest, &[s]).to_be_bytes()
    }

    /// P3 signature of `owner` for a child of a block carrying `s_pred`.
    fn p3_seed(&self, owner: ParticipantId, s_pred: &[u8], coin: CoinId, t: Slot) -> [u8; 16] {
        let h = self.digest(s_pred);
        self.keys.signer(owner).sign(&[&h, &t.to_be_bytes(), &coin.0.to_be_bytes()])
    }

    /// Whether a child of `anc` at slot `t` using `coin` (held by `owner`) is
    /// eligible, and the aux bytes it must carry. `None` when `cap` cannot evaluate it.
    pub fn draw<A: Ancestry>(
        &self,
        anc: &A,
        coin: CoinId,
        t: Slot,
        owner: ParticipantId,
        cap: Capability,
    ) -> Option<(bool, Vec<u8>)> {
        let tb = t.to_be_bytes();
        let cb = coin.0.to_be_bytes();
        match &self.kind {
            ProtocolKind::RandomOracle { recency } => {
                let (anchor, exists) = anc.ancestor(u64::from(*recency) - 1);
                if !exists && cap != Capability::Full {
                    return None;
                }
                Some((self.oracle_eligible(&anchor, coin, t), Vec::new()))
            }
            ProtocolKind::P1 => {
                let pred = anc.tip();
                Some((self.below(self.keys.public().eval(Domain::P1, &[&pred.0, &tb, &cb])), Vec::new()))
            }
            ProtocolKind::P2 => Some((self.below(self.keys.public().eval(Domain::P2, &[&tb, &cb])), Vec::new())),
            ProtocolKind::P3 => {
                if let Capability::Observer(me) = cap {
                    if me != owner {
                        return None;
                    }
                }
                let s = self.p3_seed(owner, anc.tip_aux(), coin, t);
                let ok = self.below(self.keys.public().eval(Domain::P3Hash, &[&s]));
                Some((ok, s.to_vec()))
            }
            ProtocolKind::Custom(r) => Some((r.eligible(&anc.tip(), coin, t), Vec::new())),
        }
    }

    /// The protocol predicate V_P for a block whose predecessor is stored.
    pub fn verify(&self, store: &ChainStore, block: &Block) -> Result<bool> {
        let (Some(pred), Some(coin)) = (block.pred(), block.coin()) else {
            return Ok(false);
        };
        let tip = StoredTip::new(store, &pred)?;
        let (ok, aux) = self
            .draw(&tip, coin, block.slot(), block.miner(), Capability::Full)
            .expect("full capability always evaluates");
        Ok(ok && aux == block.aux())
    }

    /// Mining function M_P: a block on `pred` at slot `t` using `coin`, or `None`
    /// when no valid such block exists for `caller`.
    pub fn mine(
        &self,
        store: &ChainStore,
        pred: &BlockId,
        coin: CoinId,
        caller: ParticipantId,
        t: Slot,
        payload: Vec<Transfer>,
    ) -> Result<Option<Block>> {
        let tip = StoredTip::new(store, pred)?;
        if !store.allocation().contains_key(&coin) {
            return Err(Error::UnknownCoin(coin));
        }
        if t <= tip.tip_slot() {
            return Ok(None);
        }
        let mut cur = Some(*pred);
        for _ in 0..self.freeze {
            let Some(a) = cur else { break };
            if store.owner_at(&a, coin)? != caller {
                return Ok(None);
            }
            cur = store.get(&a)?.pred();
        }
        let (ok, aux) = self.draw(&tip, coin, t, caller, Capability::Observer(caller)).expect("own coin on a stored tip");
        if !ok {
            return Ok(None);
        }
        let b = Block::new(*pred, caller, t, coin, payload, aux);
        Ok(store.is_valid_block(&b, t, self)?.then_some(b))
    }

    /// Hypothetical child with an empty (or given) payload for planning.
    /// Outer `None`: `cap` cannot evaluate; inner `None`: not eligible.
    pub fn hypothetical_child<A: Ancestry>(
        &self,
        anc: &A,
        coin: CoinId,
        owner: ParticipantId,
        t: Slot,
        cap: Capability,
        payload: Vec<Transfer>,
    ) -> Option<Option<Block>> {
        if t <= anc.tip_slot() {
            return Some(None);
        }
        let (ok, aux) = self.draw(anc, coin, t, owner, cap)?;
        Some(ok.then(|| Block::new(anc.tip(), owner, t, coin, payload, aux)))
    }
}
