use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ProtocolKind, ProtocolSpec};
use crate::strategies::{DoubleSpendConfig, ExpForkConfig, SelfishConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForkChoice {
    #[default]
    Longest,
    Ghost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Oracle,
    P1,
    P2,
    P3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolName,
    /// Per-coin, per-slot success probability.
    pub p: f64,
    #[serde(default = "one_u32")]
    pub recency: u32,
    #[serde(default = "one_u32")]
    pub freeze: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategyConfig {
    Honest,
    Unas { depth: u64 },
    NaiveNas { depth: u64 },
    Selfish(SelfishConfig),
    DoubleSpend(DoubleSpendConfig),
    ExpFork(ExpForkConfig),
}

impl StrategyConfig {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyConfig::Honest => "honest",
            StrategyConfig::Unas { .. } => "unas",
            StrategyConfig::NaiveNas { .. } => "naive-nas",
            StrategyConfig::Selfish(_) => "selfish",
            StrategyConfig::DoubleSpend(_) => "double-spend",
            StrategyConfig::ExpFork(_) => "exp-fork",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub name: String,
    /// Coins held by each copy of this participant.
    pub coins: u32,
    /// Number of identical participants to create.
    #[serde(default = "one_u32")]
    pub count: u32,
    pub strategy: StrategyConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub slots: u64,
    #[serde(default)]
    pub fork_choice: ForkChoice,
    #[serde(default = "yes")]
    pub detector: bool,
    /// Keep per-slot announcement records in the run log.
    #[serde(default = "yes")]
    pub record_slots: bool,
    /// End early once every strategy reports it has nothing left to resolve.
    #[serde(default)]
    pub stop_when_settled: bool,
    pub protocol: ProtocolConfig,
    pub participants: Vec<ParticipantConfig>,
}

fn one_u32() -> u32 {
    1
}

fn yes() -> bool {
    true
}

/// 1-based line of the key named by a validation path such as `participants[1].strategy.depth`.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut segs = path.split('.');
    let first = segs.next()?;
    let (header, key) = match first.split_once('[') {
        Some((table, idx)) => {
            let i: usize = idx.trim_end_matches(']').parse().ok()?;
            ((format!("[[{table}]]"), i), segs.next()?)
        }
        None => match segs.next() {
            Some(k) => ((format!("[{first}]"), 0), k),
            None => ((String::new(), 0), first),
        },
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut start = 0;
    if !header.0.is_empty() {
        let mut seen = 0;
        start = lines.iter().position(|l| {
            let hit = l.trim() == header.0;
            if hit {
                seen += 1;
            }
            hit && seen == header.1 + 1
        })? + 1;
    }
    for (n, l) in lines.iter().enumerate().skip(start) {
        let t = l.trim_start();
        if t.starts_with('[') {
            break;
        }
        if let Some(rest) = t.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(n + 1);
            }
        }
    }
    None
}

fn bad(field: impl Into<String>, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {msg}", field.into()))
}

impl SimConfig {
    /// Parses and validates; validation errors are prefixed with the offending line when it can be found.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let path = msg.split(':').next().unwrap_or_default();
                match locate(text, path) {
                    Some(line) => Error::Config(format!("line {line}: {msg}")),
                    None => Error::Config(msg),
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(bad("slots", "must be at least 1"));
        }
        let p = &self.protocol;
        if !(0.0..=1.0).contains(&p.p) {
            return Err(bad("protocol.p", format_args!("{} not in [0, 1]", p.p)));
        }
        if p.recency == 0 {
            return Err(bad("protocol.recency", "must be at least 1"));
        }
        if p.freeze == 0 {
            return Err(bad("protocol.freeze", "must be at least 1"));
        }
        if self.participants.is_empty() {
            return Err(bad("participants", "at least one participant is required"));
        }
        for (i, pc) in self.participants.iter().enumerate() {
            let at = |f: &str| format!("participants[{i}].{f}");
            if pc.coins == 0 {
                return Err(bad(at("coins"), "must be at least 1"));
            }
            if pc.count == 0 {
                return Err(bad(at("count"), "must be at least 1"));
            }
            match &pc.strategy {
                StrategyConfig::Unas { depth } | StrategyConfig::NaiveNas { depth } => {
                    if *depth == 0 {
                        return Err(bad(at("strategy.depth"), "must be at least 1"));
                    }
                    if pc.coins != 1 {
                        return Err(bad(
                            at("coins"),
                            "nothing-at-stake miners need one key per coin; use count instead",
                        ));
                    }
                }
                StrategyConfig::Selfish(s) => {
                    if s.k_min == 0 || s.k_min > s.k_max {
                        return Err(bad(at("strategy.k_min"), "need 1 <= k_min <= k_max"));
                    }
                    if s.horizon == 0 || s.budget == 0 {
                        return Err(bad(at("strategy.horizon"), "horizon and budget must be positive"));
                    }
                }
                StrategyConfig::DoubleSpend(d) => {
                    if d.confirm_depth == 0 {
                        return Err(bad(at("strategy.confirm_depth"), "must be at least 1"));
                    }
                    if d.horizon == 0 || d.budget == 0 {
                        return Err(bad(at("strategy.horizon"), "horizon and budget must be positive"));
                    }
                    if let (Some(a), Some(b)) = (d.k_min, d.k_max) {
                        if a == 0 || a > b {
                            return Err(bad(at("strategy.k_min"), "need 1 <= k_min <= k_max"));
                        }
                    }
                }
                StrategyConfig::Honest | StrategyConfig::ExpFork(_) => {}
            }
        }
        Ok(())
    }

    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let p = &self.protocol;
        let kind = match p.kind {
            ProtocolName::Oracle => ProtocolKind::RandomOracle { recency: p.recency },
            ProtocolName::P1 => ProtocolKind::P1,
            ProtocolName::P2 => ProtocolKind::P2,
            ProtocolName::P3 => ProtocolKind::P3,
        };
        ProtocolSpec::new(kind, p.p, p.freeze, self.seed)
    }
}
