use std::process::ExitCode;

use anyhow::Result;
use lcpos_core::analysis::{exhaustive_race, monte_carlo_race, race_probability};
use lcpos_core::engine::{self, SimConfig};
use lcpos_core::strategies::DoubleSpendOutcome;
use serde::Serialize;

use crate::Format;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo trials per race point.
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    /// Multiplies every tolerance; a value of 0 makes any nonzero error fail.
    #[arg(long, default_value_t = 1.0, hide = true)]
    tolerance_scale: f64,
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

const ALPHAS: [f64; 5] = [0.1, 0.25, 1.0 / 3.0, 0.4, 0.49];

const HONEST: &str = r#"
seed = 0
slots = 400
[protocol]
kind = "oracle"
p = 0.1
[[participants]]
name = "miner"
coins = 1
count = 8
strategy = { kind = "honest" }
"#;

const DOUBLE_SPEND: &str = r#"
seed = 0
slots = 100000
record_slots = false
stop_when_settled = true
[protocol]
kind = "oracle"
p = 0.002
recency = 64
[[participants]]
name = "attacker"
coins = 2
strategy = { kind = "double-spend", confirm_depth = 2, attempts = 1, horizon = 100000 }
[[participants]]
name = "honest"
coins = 1
count = 3
strategy = { kind = "honest" }
"#;

fn checks(a: &Args) -> Result<Vec<Check>> {
    let tol = a.tolerance_scale;
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for ell in 1..=6 {
        for alpha in ALPHAS {
            worst = worst.max((race_probability(alpha, ell)? - exhaustive_race(alpha, ell)?).abs());
        }
    }
    out.push(Check { name: "race-exhaustive", pass: worst <= 1e-12 * tol, detail: format!("max error {worst:.1e}") });

    let mut worst: f64 = 0.0;
    for ell in 1..=1000 {
        worst = worst.max((race_probability(0.5, ell)? - 0.5).abs());
    }
    out.push(Check { name: "race-symmetry", pass: worst <= 1e-12 * tol, detail: format!("max error {worst:.1e}") });

    let mut worst: f64 = 0.0;
    for ell in [1, 7, 50, 400] {
        for alpha in ALPHAS {
            worst = worst.max((race_probability(alpha, ell)? + race_probability(1.0 - alpha, ell)? - 1.0).abs());
        }
    }
    out.push(Check { name: "race-complement", pass: worst <= 1e-12 * tol, detail: format!("max error {worst:.1e}") });

    let mut worst: f64 = 0.0;
    for (i, (alpha, ell)) in [(0.3, 2), (0.4, 5), (0.45, 20)].into_iter().enumerate() {
        let est = monte_carlo_race(alpha, ell, a.trials, a.seed.wrapping_add(i as u64))?;
        let exact = race_probability(alpha, ell)?;
        worst = worst.max((est.mean - exact).abs() / est.std_err.max(f64::MIN_POSITIVE));
    }
    out.push(Check { name: "race-monte-carlo", pass: worst <= 4.0 * tol, detail: format!("max deviation {worst:.2} sd") });

    let mut honest = SimConfig::from_toml(HONEST)?;
    honest.seed = a.seed;
    let first = engine::run(&honest)?;
    let again = engine::run(&honest)?;
    out.push(Check {
        name: "engine-honest",
        pass: first.deviations.is_empty() && first.to_jsonl() == again.to_jsonl(),
        detail: format!("{} deviations, repeat identical: {}", first.deviations.len(), first.to_jsonl() == again.to_jsonl()),
    });

    let trials = (a.trials / 40).max(100);
    let mut wins = 0u64;
    for i in 0..trials {
        let mut cfg = SimConfig::from_toml(DOUBLE_SPEND)?;
        cfg.seed = a.seed.wrapping_mul(1_000_003).wrapping_add(i);
        let log = engine::run(&cfg)?;
        let rep = &log.summary.participants[0].report;
        wins += u64::from(rep.double_spends.iter().any(|r| r.outcome == DoubleSpendOutcome::Succeeded));
    }
    let freq = wins as f64 / trials as f64;
    let exact = race_probability(0.4, 2)?;
    let dev = (freq - exact) / (exact * (1.0 - exact) / trials as f64).sqrt();
    out.push(Check {
        name: "engine-double-spend",
        pass: dev.abs() <= 4.0 * tol,
        detail: format!("{freq:.4} over {trials} trials vs {exact:.4} ({dev:+.2} sd)"),
    });
    Ok(out)
}

pub fn run(a: Args, format: Format) -> Result<ExitCode> {
    let checks = checks(&a)?;
    match format {
        Format::Text => {
            for c in &checks {
                println!("{:<20} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
        }
        Format::Structured => println!("{}", serde_json::to_string_pretty(&checks)?),
    }
    Ok(if checks.iter().all(|c| c.pass) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
