use super::{includable, mine_on, Action, Me, SlotView, Strategy};
use crate::error::Result;

/// Mines on the fork-choice tip with every coin, including pending transfers.
#[derive(Clone, Debug, Default)]
pub struct Honest;

impl Strategy for Honest {
    fn name(&self) -> &'static str {
        "honest"
    }

    fn on_slot(&mut self, me: &Me, view: &SlotView<'_>) -> Result<Action> {
        let payload = includable(view.store, &view.tip, view.mempool)?;
        Ok(Action { announce: mine_on(view, me, &view.tip, &payload)?, broadcast: Vec::new() })
    }
}
