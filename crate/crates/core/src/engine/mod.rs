//! Slot-driven simulation, deviation detection and run logs.

mod config;
mod detector;
mod runlog;
mod sim;

pub use config::{ForkChoice, ParticipantConfig, ProtocolConfig, ProtocolName, SimConfig, StrategyConfig};
pub use detector::{detect, honest_explanation, DeviationEvidence, DeviationKind, Detector, Explanation};
pub use runlog::{
    Announcement, ForkStep, ForkTrace, ParticipantInfo, RunLog, SlotRecord, Summary, Tally, RUNLOG_SCHEMA,
    SUMMARY_SCHEMA,
};
pub use sim::{run, Simulation};
