use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::lookahead::{Forecast, Search, SearchParams};
use super::{includable, mine_on, Action, Me, SlotView, Strategy, StrategyReport};
use crate::block::{Block, BlockId, CoinId, ParticipantId, Slot, Transfer};
use crate::error::Result;
use crate::protocol::Capability;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfishMode {
    /// Everyone's eligibility is computable: withhold only when it cannot backfire.
    Global,
    /// Only own eligibility is computable: compare against median honest arrival times.
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfishConfig {
    pub mode: SelfishMode,
    #[serde(default = "defaults::k_min")]
    pub k_min: u32,
    #[serde(default = "defaults::k_max")]
    pub k_max: u32,
    #[serde(default = "defaults::horizon")]
    pub horizon: Slot,
    #[serde(default = "defaults::budget")]
    pub budget: usize,
}

pub(crate) mod defaults {
    pub fn k_min() -> u32 {
        2
    }
    pub fn k_max() -> u32 {
        32
    }
    pub fn horizon() -> u64 {
        256
    }
    pub fn budget() -> usize {
        200_000
    }
}

impl Default for SelfishConfig {
    fn default() -> Self {
        SelfishConfig {
            mode: SelfishMode::Global,
            k_min: defaults::k_min(),
            k_max: defaults::k_max(),
            horizon: defaults::horizon(),
            budget: defaults::budget(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Released,
    Abandoned,
}

/// One withholding episode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Episode {
    pub base: BlockId,
    pub base_score: u64,
    pub k: u32,
    pub planned_at: Slot,
    pub release: Slot,
    pub tip: BlockId,
    pub outcome: EpisodeOutcome,
    /// Whether the plan was deemed risk-free when made.
    pub risk_free: bool,
}

/// A chain of own blocks to be published at `release`.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub base: BlockId,
    pub base_score: u64,
    pub k: u32,
    pub planned_at: Slot,
    pub release: Slot,
    pub blocks: Vec<Block>,
    /// Earliest slot at which the others could match the plan, if known.
    pub others_reach: Option<Slot>,
}

/// Coins the rest of the network mines with on `base`.
pub(crate) fn other_coins(view: &SlotView<'_>, me: &Me, base: &BlockId) -> Result<Vec<(CoinId, ParticipantId)>> {
    let mut out = Vec::new();
    for &(c, _) in view.coins {
        let owner = view.store.owner_at(base, c)?;
        if owner != me.id && !me.coins.contains(&c) {
            out.push((c, owner));
        }
    }
    Ok(out)
}

/// Median number of slots (from now) until the others' `k`-th success when each
/// slot succeeds independently with probability `q`.
pub(crate) fn median_arrival(q: f64, k: u32, cap: Slot) -> Option<Slot> {
    if q <= 0.0 {
        return None;
    }
    if q >= 1.0 {
        return Some(u64::from(k) - 1);
    }
    // smallest m with P(Bin(m + 1, q) >= k) >= 1/2
    let at_least = |m: u64| {
        let b = Binomial::new(q, m + 1).expect("valid binomial");
        1.0 - if k == 0 { 0.0 } else { b.cdf(u64::from(k) - 1) }
    };
    let (mut lo, mut hi) = (u64::from(k).saturating_sub(1), u64::from(k).saturating_sub(1).max(1));
    while at_least(hi) < 0.5 {
        lo = hi;
        hi *= 2;
        if hi > cap {
            return None;
        }
    }
    if at_least(lo) >= 0.5 {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at_least(mid) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Searches own chains on the tip and, in global mode, every chain the others can
/// build on the current best blocks. Returns the plan for the largest winning `k`
/// and the slot of the earliest own block found.
pub(crate) fn make_plan(
    cfg: &SelfishConfig,
    k_range: (u32, u32),
    first_payload: Vec<Transfer>,
    others_payload: Vec<Transfer>,
    me: &Me,
    view: &SlotView<'_>,
) -> Result<(Option<Plan>, Option<Slot>)> {
    let base = view.tip;
    let base_score = view.store.score(&base)?;
    let (k_min, k_max) = k_range;
    let mine: Vec<(CoinId, ParticipantId)> = me
        .coins
        .iter()
        .filter(|&&c| view.store.owner_at(&base, c).map(|o| o == me.id).unwrap_or(false))
        .map(|&c| (c, me.id))
        .collect();
    if mine.is_empty() || k_max == 0 {
        return Ok((None, None));
    }
    let horizon = view.now + cfg.horizon - 1;
    let own = Search::new(
        view.store,
        view.protocol,
        &mine,
        Capability::Observer(me.id),
        SearchParams { from_slot: view.now, horizon, max_depth: k_max, budget: cfg.budget },
    )
    .with_first_payload(first_payload)
    .run(&[base], true);
    let first_own = own.reach(1);
    let Some(latest) = (k_min..=k_max).filter_map(|k| own.reach(k)).max() else {
        return Ok((None, first_own));
    };
    let others = other_coins(view, me, &base)?;
    let q = 1.0 - (1.0 - view.protocol.success_prob()).powi(others.len() as i32);
    let decide = |k: u32, x: Slot, forecast: &Option<Forecast>| -> (bool, Option<Slot>) {
        match (cfg.mode, forecast) {
            (SelfishMode::Global, Some(f)) => (f.not_by(k, x), f.reach(k)),
            _ => {
                match median_arrival(q, k, cfg.horizon * 64) {
                    Some(m) => (x < view.now + m, None),
                    None => (true, None),
                }
            }
        }
    };
    let forecast = match cfg.mode {
        SelfishMode::Global => {
            let roots: Vec<BlockId> = view.known.at_score(view.known.max_score()).copied().collect();
            Some(
                Search::new(
                    view.store,
                    view.protocol,
                    &others,
                    Capability::Observer(me.id),
                    SearchParams { from_slot: view.now, horizon: latest, max_depth: k_max, budget: cfg.budget },
                )
                .with_first_payload(others_payload)
                .run(&roots, false),
            )
        }
        SelfishMode::Local => None,
    };
    for k in (k_min..=k_max).rev() {
        let Some(x) = own.reach(k) else { continue };
        let (wins, others_reach) = decide(k, x, &forecast);
        if wins {
            return Ok((Some(Plan {
                base,
                base_score,
                k,
                planned_at: view.now,
                release: x,
                blocks: own.chains[k as usize - 1].clone(),
                others_reach,
            }), first_own));
        }
    }
    Ok((None, first_own))
}

#[derive(Clone, Debug)]
enum State {
    Idle,
    Withholding(Plan),
}

/// Selfish mining driven by exact (global) or estimated (local) lookahead.
#[derive(Clone, Debug)]
pub struct Selfish {
    cfg: SelfishConfig,
    state: State,
    episodes: Vec<Episode>,
    /// Tip of the last fruitless search and the last slot its result stays current.
    checked: Option<(BlockId, Slot)>,
}

impl Selfish {
    pub fn new(cfg: SelfishConfig) -> Self {
        Selfish { cfg, state: State::Idle, episodes: Vec::new(), checked: None }
    }

    fn close(&mut self, plan: &Plan, outcome: EpisodeOutcome) {
        self.episodes.push(Episode {
            base: plan.base,
            base_score: plan.base_score,
            k: plan.k,
            planned_at: plan.planned_at,
            release: plan.release,
            tip: plan.blocks.last().map(|b| b.id()).unwrap_or(plan.base),
            outcome,
            risk_free: self.cfg.mode == SelfishMode::Global,
        });
    }

    fn honest(&self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let payload = includable(view.store, &view.tip, view.mempool)?;
        Ok(Action { announce: mine_on(view, me, &view.tip, &payload)?, broadcast: Vec::new() })
    }
}

impl Strategy for Selfish {
    fn name(&self) -> &'static str {
        match self.cfg.mode {
            SelfishMode::Global => "selfish-global",
            SelfishMode::Local => "selfish-local",
        }
    }

    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        if let State::Withholding(plan) = &self.state {
            let plan = plan.clone();
            if view.known.max_score() >= plan.base_score + u64::from(plan.k) {
                self.close(&plan, EpisodeOutcome::Abandoned);
                self.state = State::Idle;
            } else if view.now >= plan.release {
                self.close(&plan, EpisodeOutcome::Released);
                self.state = State::Idle;
                return Ok(Action { announce: plan.blocks, broadcast: Vec::new() });
            } else {
                return Ok(Action::default());
            }
        }
        if let Some((tip, until)) = self.checked {
            if tip == view.tip && view.now <= until {
                return self.honest(me, view);
            }
        }
        let (plan, first_own) =
            make_plan(&self.cfg, (self.cfg.k_min, self.cfg.k_max), Vec::new(), Vec::new(), me, view)?;
        self.checked = Some((view.tip, first_own.unwrap_or(view.now + self.cfg.horizon - 1)));
        match plan {
            Some(plan) if plan.release == view.now => {
                self.close(&plan, EpisodeOutcome::Released);
                Ok(Action { announce: plan.blocks, broadcast: Vec::new() })
            }
            Some(plan) => {
                self.state = State::Withholding(plan);
                Ok(Action::default())
            }
            None => self.honest(me, view),
        }
    }

    fn report(&self) -> StrategyReport {
        StrategyReport { episodes: self.episodes.clone(), ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_arrival_matches_direct_sum() {
        for (q, k) in [(0.1, 1u32), (0.1, 3), (0.5, 4), (0.02, 5)] {
            let m = median_arrival(q, k, 1 << 20).unwrap();
            let p = |m: u64| 1.0 - Binomial::new(q, m + 1).unwrap().cdf(u64::from(k) - 1);
            assert!(p(m) >= 0.5);
            if m + 1 > u64::from(k) {
                assert!(p(m - 1) < 0.5);
            }
        }
        assert_eq!(median_arrival(1.0, 3, 10), Some(2));
        assert_eq!(median_arrival(0.0, 3, 10), None);
    }
}
