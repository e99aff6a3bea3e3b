use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use lcpos_core::engine::{self, RunLog, SimConfig, RUNLOG_SCHEMA};
use serde::Serialize;

use crate::Format;

pub const MANIFEST_SCHEMA: &str = "lcpos.manifest/1";

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of slots.
    #[arg(long)]
    slots: Option<u64>,
    /// Directory for manifest.json, runlog.jsonl and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    config_path: String,
    out_dir: String,
    runlog_schema: &'static str,
    config: &'a SimConfig,
}

fn load(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SimConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

pub fn run(args: Args, format: Format) -> Result<ExitCode> {
    let mut cfg = load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.slots {
        cfg.slots = n;
    }
    cfg.validate()?;
    let log = engine::run(&cfg)?;
    if let Some(dir) = &args.out {
        write_outputs(dir, &args.config, &log)?;
    }
    match format {
        Format::Text => print!("{}", headline(&log)),
        Format::Structured => println!("{}", log.summary_json()),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_outputs(dir: &Path, config_path: &Path, log: &RunLog) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        config_path: config_path.display().to_string(),
        out_dir: dir.display().to_string(),
        runlog_schema: RUNLOG_SCHEMA,
        config: &log.config,
    };
    let files = [
        ("manifest.json", serde_json::to_vec_pretty(&manifest)?),
        ("runlog.jsonl", log.to_jsonl()),
        ("summary.json", log.summary_json().into_bytes()),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn headline(log: &RunLog) -> String {
    use std::fmt::Write;
    let s = &log.summary;
    let mut out = String::new();
    let _ = writeln!(out, "protocol {}  seed {}  slots {}", s.protocol, s.seed, s.slots_run);
    let _ = writeln!(
        out,
        "final score {}  blocks {}  max reorg {}  deviations {}",
        s.final_score, s.blocks_stored, s.max_reorg_depth, s.deviations
    );
    let _ = writeln!(out, "{:<14} {:<13} {:>6} {:>9} {:>9} {:>7} {:>7}", "participant", "strategy", "stake", "announced", "on-chain", "share", "rate");
    for t in &s.participants {
        let rate = t.rate_ratio.map_or("-".to_string(), |r| format!("{r:.3}"));
        let _ = writeln!(
            out,
            "{:<14} {:<13} {:>6.3} {:>9} {:>9} {:>7.3} {:>7}{}",
            t.name,
            t.strategy,
            t.stake,
            t.announced,
            t.on_chain,
            t.chain_share,
            rate,
            if t.flagged { "  FLAGGED" } else { "" }
        );
        if let (Some(r), Some(b)) = (t.rate_ratio, t.unas_bound) {
            let _ = writeln!(out, "  announce-rate ratio {r:.3} vs bound {b:.3}");
        }
        for d in &t.report.double_spends {
            let _ = writeln!(out, "  double spend: {:?}", d.outcome);
        }
        if !t.report.episodes.is_empty() {
            let _ = writeln!(out, "  withholding episodes: {}", t.report.episodes.len());
        }
    }
    if let Some(f) = &s.fork {
        if let Some(last) = f.steps.last() {
            let _ = writeln!(
                out,
                "fork root {} at slot {}: subtree {} after {} slots, honest inside: {}",
                f.root, f.root_slot, last.subtree, last.k, last.honest_inside
            );
        }
    }
    out
}
