use std::io::{self, Write};

use serde::Serialize;

use super::config::SimConfig;
use super::detector::DeviationEvidence;
use crate::block::{BlockId, CoinId, ParticipantId, Slot};
use crate::strategies::StrategyReport;

pub const RUNLOG_SCHEMA: &str = "lcpos.runlog/1";
pub const SUMMARY_SCHEMA: &str = "lcpos.summary/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticipantInfo {
    pub id: ParticipantId,
    pub name: String,
    pub strategy: String,
    pub coins: Vec<CoinId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Announcement {
    pub block: BlockId,
    pub pred: BlockId,
    pub by: ParticipantId,
    pub coin: CoinId,
    pub t: Slot,
    pub score: u64,
    pub txs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: Slot,
    pub best_tip: BlockId,
    pub best_score: u64,
    pub announced: Vec<Announcement>,
    #[serde(skip_serializing_if = "is_zero")]
    pub rejected: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tally {
    pub id: ParticipantId,
    pub name: String,
    pub strategy: String,
    pub coins: usize,
    pub stake: f64,
    pub announced: u64,
    pub on_chain: u64,
    /// Fraction of the final longest chain mined by this participant.
    pub chain_share: f64,
    /// Announcements per coin relative to the honest per-coin rate.
    pub rate_ratio: Option<f64>,
    pub flagged: bool,
    /// Lower bound on `rate_ratio` for an undetectable nothing-at-stake miner, with lambda = total coins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unas_bound: Option<f64>,
    #[serde(skip_serializing_if = "report_is_empty")]
    pub report: StrategyReport,
}

fn report_is_empty(r: &StrategyReport) -> bool {
    *r == StrategyReport::default()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForkStep {
    pub k: u64,
    pub subtree: u64,
    pub honest_inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForkTrace {
    pub root: BlockId,
    pub root_slot: Slot,
    pub steps: Vec<ForkStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub seed: u64,
    pub slots_run: Slot,
    pub protocol: String,
    pub final_tip: BlockId,
    pub final_score: u64,
    pub blocks_stored: usize,
    pub announced: u64,
    pub rejected: u64,
    pub honest_rate_per_coin: f64,
    pub max_reorg_depth: u64,
    pub deviations: usize,
    pub participants: Vec<Tally>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fork: Option<ForkTrace>,
}

/// Complete record of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunLog {
    pub schema: &'static str,
    pub config: SimConfig,
    pub genesis: BlockId,
    pub participants: Vec<ParticipantInfo>,
    pub slots: Vec<SlotRecord>,
    pub deviations: Vec<DeviationEvidence>,
    pub summary: Summary,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<'a> {
    Header {
        schema: &'a str,
        config: &'a SimConfig,
        genesis: &'a BlockId,
        participants: &'a [ParticipantInfo],
    },
    Slot(&'a SlotRecord),
    Deviation(&'a DeviationEvidence),
    Summary(&'a Summary),
}

impl RunLog {
    /// JSON lines: a header, one line per recorded slot, deviations, then the summary.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut put = |line: &Line<'_>| -> io::Result<()> {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")
        };
        put(&Line::Header {
            schema: self.schema,
            config: &self.config,
            genesis: &self.genesis,
            participants: &self.participants,
        })?;
        for s in &self.slots {
            put(&Line::Slot(s))?;
        }
        for d in &self.deviations {
            put(&Line::Deviation(d))?;
        }
        put(&Line::Summary(&self.summary))
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn tally(&self, name: &str) -> Option<&Tally> {
        self.summary.participants.iter().find(|t| t.name == name)
    }
}
