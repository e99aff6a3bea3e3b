use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Ancestry, Capability, HypoPath, ProtocolKind, ProtocolSpec};
use crate::block::{CoinId, ParticipantId, Slot};
use crate::chain::ChainStore;
use crate::error::{Error, Result};

/// How far ahead eligibility can be computed, and by whom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Predictability {
    /// Anyone can compute eligibility `D` blocks ahead.
    Global,
    /// Only the coin's owner can.
    Local,
    /// Nobody can; eligibility depends on blocks that do not exist yet.
    Recent,
    /// A custom rule that declared no profile.
    Unclassified,
}

/// Predictability of `spec` at depth `d >= 1`.
pub fn classify(spec: &ProtocolSpec, d: u32) -> Predictability {
    match spec.kind() {
        ProtocolKind::RandomOracle { recency } => {
            if d <= *recency {
                Predictability::Global
            } else {
                Predictability::Recent
            }
        }
        ProtocolKind::P1 | ProtocolKind::P2 => Predictability::Global,
        ProtocolKind::P3 => {
            if d <= 1 {
                Predictability::Local
            } else {
                Predictability::Recent
            }
        }
        ProtocolKind::Custom(r) => r.profile(d).unwrap_or(Predictability::Unclassified),
    }
}

/// Which participant plays predictor in the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Observer {
    Owner,
    Outsider,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameReport {
    pub protocol: String,
    pub depth: u32,
    pub trials: usize,
    /// Trials in which the predictor could compute the outcome exactly.
    pub computed: usize,
    pub accuracy: f64,
    pub base_rate: f64,
    pub advantage: f64,
    pub std_err: f64,
}

const PARTICIPANTS: u32 = 4;
const WINDOW: Slot = 8;
const TARGET: CoinId = CoinId(0);

/// Extends `path` by one block: earliest slot in the window with an eligible
/// coin, the target coin last. `Err(())` when `cap` cannot evaluate a needed draw.
fn network_step(
    spec: &ProtocolSpec,
    path: &mut HypoPath<'_>,
    cap: Capability,
) -> std::result::Result<bool, ()> {
    let start = path.tip_slot() + 1;
    for t in start..start + WINDOW {
        for c in (1..=PARTICIPANTS).map(|i| i % PARTICIPANTS) {
            match spec.hypothetical_child(path, CoinId(c), ParticipantId(c), t, cap, Vec::new()) {
                None => return Err(()),
                Some(Some(b)) => {
                    path.push(b);
                    return Ok(true);
                }
                Some(None) => {}
            }
        }
    }
    Ok(false)
}

/// Outcome of "a depth-`d` descendant of the tip using the target coin exists
/// at the target slot", or `None` if `cap` cannot compute it.
fn outcome(spec: &ProtocolSpec, store: &ChainStore, tip: crate::block::BlockId, d: u32, cap: Capability) -> Option<bool> {
    let mut path = HypoPath::new(store, tip);
    let t_a = path.tip_slot();
    for _ in 1..d {
        match network_step(spec, &mut path, cap) {
            Err(()) => return None,
            Ok(false) => return Some(false),
            Ok(true) => {}
        }
    }
    let target_slot = t_a + u64::from(d - 1) * WINDOW + 1;
    spec.hypothetical_child(&path, TARGET, ParticipantId(0), target_slot, cap, Vec::new())
        .map(|b| b.is_some())
}

/// Empirical predictability of `spec` at depth `d`, with the target coin's owner predicting.
pub fn prediction_game(spec: &ProtocolSpec, d: u32, trials: usize, seed: u64) -> Result<GameReport> {
    prediction_game_as(spec, d, trials, seed, Observer::Owner)
}

/// The prediction game with an explicit predictor.
///
/// Each trial re-keys the protocol, grows a random public history, then asks
/// whether a block `d` levels above the tip using coin 0 will exist at a fixed
/// slot. The predictor answers exactly when its capability lets it simulate the
/// network; otherwise it guesses the majority outcome.
pub fn prediction_game_as(
    spec: &ProtocolSpec,
    d: u32,
    trials: usize,
    seed: u64,
    who: Observer,
) -> Result<GameReport> {
    if d == 0 {
        return Err(Error::domain("depth", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::domain("trials", "must be positive"));
    }
    let observer = match who {
        Observer::Owner => ParticipantId(0),
        Observer::Outsider => ParticipantId(PARTICIPANTS),
    };
    let allocation: BTreeMap<_, _> = (0..PARTICIPANTS).map(|i| (CoinId(i), ParticipantId(i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::with_capacity(trials);
    for _ in 0..trials {
        let trial_spec = spec.rekeyed(rng.gen());
        let mut store = ChainStore::new(&rng.gen::<u64>().to_be_bytes(), allocation.clone());
        let history = rng.gen_range(0..6);
        let mut tip = store.genesis();
        for _ in 0..history {
            let mut path = HypoPath::new(&store, tip);
            if network_step(&trial_spec, &mut path, Capability::Full) != Ok(true) {
                break;
            }
            let b = path.blocks()[0].clone();
            tip = b.id();
            store.insert(b)?;
        }
        let truth = outcome(&trial_spec, &store, tip, d, Capability::Full).expect("full capability");
        rounds.push((truth, outcome(&trial_spec, &store, tip, d, Capability::Observer(observer))));
    }
    let n = trials as f64;
    let positives = rounds.iter().filter(|r| r.0).count();
    let computed = rounds.iter().filter(|r| r.1.is_some()).count();
    // an uninformed predictor can do no better than the majority outcome
    let majority = 2 * positives >= trials;
    let correct = rounds.iter().filter(|(truth, guess)| guess.unwrap_or(majority) == *truth).count();
    let accuracy = correct as f64 / n;
    let freq = positives as f64 / n;
    let base_rate = freq.max(1.0 - freq);
    let std_err = (base_rate * (1.0 - base_rate) / n).sqrt().max(1.0 / n);
    Ok(GameReport {
        protocol: spec.name(),
        depth: d,
        trials,
        computed,
        accuracy,
        base_rate,
        advantage: (accuracy - base_rate).abs(),
        std_err,
    })
}
