use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Subcommand;
use lcpos_core::analysis::{
    alpha_grid, exp_fork_crossover, exp_fork_trajectory, lifetime_threshold, min_safe_window, race_probability,
    sweep as sweep_rows, sweep_csv, unas_rate_bound, SafeWindow,
};
use serde_json::{json, Value};

use crate::Format;

#[derive(Subcommand)]
pub enum Query {
    /// Probability that stake `alpha` wins `ell` of `2 ell - 1` blocks.
    Race { alpha: f64, ell: u64 },
    /// Smallest window whose race probability is below `threshold`.
    Window { alpha: f64, threshold: f64 },
    /// Per-window tolerance for `blocks` windows and a total failure budget.
    Threshold { blocks: f64, failure: f64 },
    /// Announce-rate multiplier of an undetectable nothing-at-stake coin.
    UnasBound { depth: u64, lambda: u64 },
    /// Expected attacker subtree and honest chain sizes under exponential forking.
    ForkTrajectory {
        alpha: f64,
        /// Last slot to tabulate.
        k: u64,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, default_value_t = 0.0)]
        y0: f64,
    },
}

fn evaluate(q: &Query) -> Result<(String, Value)> {
    Ok(match *q {
        Query::Race { alpha, ell } => {
            let p = race_probability(alpha, ell)?;
            (format!("{p}"), json!({"query": "race", "alpha": alpha, "ell": ell, "probability": p}))
        }
        Query::Window { alpha, threshold } => {
            let w = min_safe_window(alpha, threshold)?;
            let text = match w {
                SafeWindow::Window { ell, probability } => format!("{ell}\t(p = {probability:e})"),
                SafeWindow::NoSafeWindow => "no safe window".to_string(),
            };
            (text, json!({"query": "window", "alpha": alpha, "threshold": threshold, "result": w}))
        }
        Query::Threshold { blocks, failure } => {
            let t = lifetime_threshold(blocks, failure)?;
            (format!("{t:e}"), json!({"query": "threshold", "blocks": blocks, "failure": failure, "threshold": t}))
        }
        Query::UnasBound { depth, lambda } => {
            let b = unas_rate_bound(depth, lambda)?;
            let text = format!("{}\t(defended: {})", b.multiplier, b.defended);
            (text, json!({"query": "unas-bound", "depth": depth, "lambda": lambda, "result": b}))
        }
        Query::ForkTrajectory { alpha, k, x0, y0 } => {
            let points = (0..=k).map(|i| exp_fork_trajectory(alpha, x0, y0, i)).collect::<Result<Vec<_>, _>>()?;
            let cross = exp_fork_crossover(alpha, x0, y0)?;
            let mut text = String::from("k\tattacker\thonest\n");
            for p in &points {
                text.push_str(&format!("{}\t{:.6}\t{:.6}\n", p.k, p.attacker, p.honest));
            }
            match cross {
                Some(c) => text.push_str(&format!("crossover at k = {c}")),
                None => text.push_str("no crossover"),
            }
            (
                text,
                json!({"query": "fork-trajectory", "alpha": alpha, "x0": x0, "y0": y0, "points": points, "crossover": cross}),
            )
        }
    })
}

pub fn run(q: Query, out: Option<PathBuf>, format: Format) -> Result<ExitCode> {
    let (text, value) = evaluate(&q)?;
    if let Some(path) = out {
        let bytes = serde_json::to_vec_pretty(&value)?;
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    match format {
        Format::Text => println!("{text}"),
        Format::Structured => println!("{value}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(clap::Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2e-16)]
    threshold: f64,
    #[arg(long, default_value_t = 0.05)]
    from: f64,
    #[arg(long, default_value_t = 0.45)]
    to: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Table destination; `.json` writes the structured variant, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn sweep(a: SweepArgs, format: Format) -> Result<ExitCode> {
    let alphas = alpha_grid(a.from, a.to, a.step)?;
    let rows = sweep_rows(a.threshold, &alphas)?;
    let csv = sweep_csv(&rows);
    let json = serde_json::to_string_pretty(&rows)?;
    if let Some(path) = &a.out {
        let body = if path.extension().is_some_and(|e| e == "json") { json.clone() } else { csv.clone() };
        fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    match format {
        Format::Text => print!("{csv}"),
        Format::Structured => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
