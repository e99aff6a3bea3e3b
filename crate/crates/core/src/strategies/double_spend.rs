use serde::{Deserialize, Serialize};

use super::selfish::{defaults, make_plan, Plan, SelfishConfig, SelfishMode};
use super::{includable, mine_on, Action, Me, SlotView, Strategy, StrategyReport, ALIAS, VENDOR};
use crate::block::{BlockId, CoinId, Slot, Transfer};
use crate::chain::ChainStore;
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortPolicy {
    /// Drop the private chain.
    #[default]
    Discard,
    /// Publish it anyway.
    Release,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSpendConfig {
    /// The vendor ships once the public chain is `confirm_depth - 1` blocks above
    /// the attack base and contains the payment.
    pub confirm_depth: u32,
    #[serde(default)]
    pub k_min: Option<u32>,
    #[serde(default)]
    pub k_max: Option<u32>,
    #[serde(default = "defaults::horizon")]
    pub horizon: Slot,
    #[serde(default = "defaults::budget")]
    pub budget: usize,
    #[serde(default = "one")]
    pub start_slot: Slot,
    /// Number of slots in which to try triggering; unlimited when absent.
    #[serde(default)]
    pub attempts: Option<u32>,
    #[serde(default)]
    pub abort: AbortPolicy,
}

fn one() -> Slot {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleSpendOutcome {
    /// No winning private chain was found within the allowed attempts.
    NoTrigger,
    /// The race was lost or goods never arrived in time.
    Aborted,
    /// Released but not adopted.
    Failed,
    Succeeded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoubleSpendRecord {
    pub outcome: DoubleSpendOutcome,
    pub planned_at: Option<Slot>,
    pub k: Option<u32>,
    pub goods_at: Option<Slot>,
    pub release: Option<Slot>,
}

#[derive(Clone, Debug)]
enum State {
    Dormant { tries: u32 },
    Withholding { plan: Plan, goods: Option<Slot> },
    Released { plan: Plan, goods: Slot, release: Slot },
    Done,
}

/// Pays the vendor on the public chain while withholding a longer chain that
/// moves the same coin to the attacker's second key.
#[derive(Clone, Debug)]
pub struct DoubleSpend {
    cfg: DoubleSpendConfig,
    pay_coin: CoinId,
    state: State,
    records: Vec<DoubleSpendRecord>,
}

impl DoubleSpend {
    pub fn new(cfg: DoubleSpendConfig, pay_coin: CoinId) -> Self {
        let tries = cfg.attempts.unwrap_or(u32::MAX);
        DoubleSpend { cfg, pay_coin, state: State::Dormant { tries }, records: Vec::new() }
    }

    pub fn records(&self) -> &[DoubleSpendRecord] {
        &self.records
    }

    fn honest(me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let payload = includable(view.store, &view.tip, view.mempool)?;
        Ok(Action { announce: mine_on(view, me, &view.tip, &payload)?, broadcast: Vec::new() })
    }

    fn payment(&self, me: &Me) -> Transfer {
        Transfer { coin: self.pay_coin, from: me.id, to: VENDOR }
    }

    fn conflict(&self, me: &Me) -> Transfer {
        Transfer { coin: self.pay_coin, from: me.id, to: ALIAS }
    }

    fn finish(&mut self, plan: Option<&Plan>, outcome: DoubleSpendOutcome, goods: Option<Slot>, release: Option<Slot>) {
        self.records.push(DoubleSpendRecord {
            outcome,
            planned_at: plan.map(|p| p.planned_at),
            k: plan.map(|p| p.k),
            goods_at: goods,
            release,
        });
        self.state = State::Done;
    }
}

/// Whether `tx` sits on the chain from `tip` down to (excluding) `base`.
fn carries(store: &ChainStore, tip: &BlockId, base: &BlockId, tx: &Transfer) -> Result<bool> {
    let mut cur = *tip;
    while cur != *base {
        let b = store.get(&cur)?;
        if b.payload().contains(tx) {
            return Ok(true);
        }
        match b.pred() {
            Some(p) => cur = p,
            None => break,
        }
    }
    Ok(false)
}

impl Strategy for DoubleSpend {
    fn name(&self) -> &'static str {
        "double-spend"
    }

    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let z = self.cfg.confirm_depth;
        match self.state.clone() {
            State::Done => Self::honest(me, view),
            State::Dormant { tries } => {
                if view.now < self.cfg.start_slot {
                    return Self::honest(me, view);
                }
                let sc = SelfishConfig {
                    mode: SelfishMode::Global,
                    k_min: 1,
                    k_max: 1,
                    horizon: self.cfg.horizon,
                    budget: self.cfg.budget,
                };
                let k_min = self.cfg.k_min.unwrap_or(z).max(1);
                let k_max = self.cfg.k_max.unwrap_or(z).max(k_min);
                let (plan, _) =
                    make_plan(&sc, (k_min, k_max), vec![self.conflict(me)], vec![self.payment(me)], me, view)?;
                match plan {
                    Some(plan) => {
                        self.state = State::Withholding { plan, goods: None };
                        Ok(Action { announce: Vec::new(), broadcast: vec![self.payment(me)] })
                    }
                    None => {
                        if tries <= 1 {
                            self.finish(None, DoubleSpendOutcome::NoTrigger, None, None);
                        } else {
                            self.state = State::Dormant { tries: tries - 1 };
                        }
                        Self::honest(me, view)
                    }
                }
            }
            State::Withholding { plan, mut goods } => {
                let target = plan.base_score + u64::from(plan.k);
                if goods.is_none()
                    && view.store.score(&view.tip)? + 1 >= plan.base_score + u64::from(z)
                    && carries(view.store, &view.tip, &plan.base, &self.payment(me))?
                {
                    goods = Some(view.now);
                }
                let too_late = view.known.max_score() >= target || plan.others_reach.is_some_and(|y| view.now >= y);
                if too_late {
                    let announce = match self.cfg.abort {
                        AbortPolicy::Discard => Vec::new(),
                        AbortPolicy::Release => plan.blocks.clone(),
                    };
                    self.finish(Some(&plan), DoubleSpendOutcome::Aborted, goods, None);
                    return Ok(Action { announce, broadcast: Vec::new() });
                }
                if let Some(g) = goods {
                    if view.now >= plan.release {
                        let announce = plan.blocks.clone();
                        self.state = State::Released { plan, goods: g, release: view.now };
                        return Ok(Action { announce, broadcast: Vec::new() });
                    }
                }
                self.state = State::Withholding { plan, goods };
                Ok(Action::default())
            }
            State::Released { plan, goods, release } => {
                let tip = plan.blocks.last().map(|b| b.id()).unwrap_or(plan.base);
                let adopted = view.tip == tip || view.store.is_descendant(&view.tip, &tip)?;
                let outcome = if adopted { DoubleSpendOutcome::Succeeded } else { DoubleSpendOutcome::Failed };
                self.finish(Some(&plan), outcome, Some(goods), Some(release));
                Self::honest(me, view)
            }
        }
    }

    fn report(&self) -> StrategyReport {
        StrategyReport { double_spends: self.records.clone(), ..Default::default() }
    }

    fn settled(&self) -> bool {
        matches!(self.state, State::Done)
    }
}
