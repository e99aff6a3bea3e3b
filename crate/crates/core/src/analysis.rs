//! Closed-form security quantities and their Monte Carlo cross-checks.
//!
//! The race probability `p(alpha, l)` is the chance that an adversary holding
//! stake fraction `alpha` wins at least `l` of `2l - 1` independent trials,
//! i.e. produces `l` blocks before the rest of the network does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest window [`min_safe_window`] will search.
pub const MAX_WINDOW: u64 = 1 << 40;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("alpha", format!("{alpha} not in [0, 1]")));
    }
    Ok(())
}

/// Compensated summation.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }
    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`, Loader's Stirling remainder.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x = n as f64;
    if n <= 15 {
        let ln_fact: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
        return ln_fact - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let nn = x * x;
    if n > 500 {
        (S0 - S1 / nn) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / x
    }
}

/// Deviance term `x ln(x / np) + np - x`, stable when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1.. {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        unreachable!()
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P[Bin(n, alpha) = k]` for `0 < k < n`, via the saddle-point form.
fn ln_binom_pmf(k: u64, n: u64, alpha: f64) -> f64 {
    let (x, nf) = (k as f64, n as f64);
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(x, nf * alpha) - bd0(nf - x, nf * (1.0 - alpha));
    let lf = (2.0 * std::f64::consts::PI).ln() + x.ln() + (-x / nf).ln_1p();
    lc - 0.5 * lf
}

/// Tail sum for `alpha <= 0.5`, where the terms decrease from `k = l` onwards.
fn lower_tail(alpha: f64, ell: u64) -> f64 {
    let n = 2 * ell - 1;
    if n == 1 {
        return alpha;
    }
    let first = ln_binom_pmf(ell, n, alpha);
    let ratio = alpha / (1.0 - alpha);
    // terms relative to the first; the first is the largest
    let mut acc = Neumaier::default();
    let mut term = 1.0f64;
    let mut k = ell;
    loop {
        acc.add(term);
        if k == n || term < acc.total() * 1e-18 {
            break;
        }
        term *= (n - k) as f64 / (k + 1) as f64 * ratio;
        k += 1;
    }
    (first + acc.total().ln()).exp()
}

/// `p(alpha, l)`.
pub fn race_probability(alpha: f64, ell: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if ell == 0 {
        return Err(Error::domain("window", "must be at least 1"));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return Ok(1.0);
    }
    if alpha <= 0.5 {
        Ok(lower_tail(alpha, ell))
    } else {
        // with an odd number of trials, exactly one side reaches l
        Ok(1.0 - lower_tail(1.0 - alpha, ell))
    }
}

/// Reference value by enumerating all `2^(2l-1)` outcome sequences. Only for `l <= 10`.
pub fn exhaustive_race(alpha: f64, ell: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(1..=10).contains(&ell) {
        return Err(Error::domain("window", format!("exhaustive enumeration needs 1 <= l <= 10, got {ell}")));
    }
    let n = 2 * ell - 1;
    let mut acc = Neumaier::default();
    for mask in 0u32..(1 << n) {
        let wins = u64::from(mask.count_ones());
        if wins >= ell {
            acc.add(alpha.powi(wins as i32) * (1.0 - alpha).powi((n - wins) as i32));
        }
    }
    Ok(acc.total())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: u64,
}

/// Monte Carlo estimate of `p(alpha, l)`.
pub fn monte_carlo_race(alpha: f64, ell: u64, trials: u64, seed: u64) -> Result<Estimate> {
    check_alpha(alpha)?;
    if ell == 0 || trials == 0 {
        return Err(Error::domain("monte carlo", "window and trials must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * ell - 1;
    let mut hits = 0u64;
    for _ in 0..trials {
        let wins = (0..n).filter(|_| rng.gen::<f64>() < alpha).count() as u64;
        hits += u64::from(wins >= ell);
    }
    let mean = hits as f64 / trials as f64;
    Ok(Estimate { mean, std_err: (mean * (1.0 - mean) / trials as f64).sqrt(), trials })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SafeWindow {
    Window { ell: u64, probability: f64 },
    /// No finite window brings the race probability below the threshold.
    NoSafeWindow,
}

impl SafeWindow {
    pub fn ell(&self) -> Option<u64> {
        match self {
            SafeWindow::Window { ell, .. } => Some(*ell),
            SafeWindow::NoSafeWindow => None,
        }
    }
}

/// Smallest `l` with `p(alpha, l) < threshold`.
pub fn min_safe_window(alpha: f64, threshold: f64) -> Result<SafeWindow> {
    check_alpha(alpha)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::domain("threshold", format!("{threshold} not in (0, 1]")));
    }
    if alpha >= 0.5 {
        return Ok(SafeWindow::NoSafeWindow);
    }
    let p = |l| race_probability(alpha, l);
    if p(1)? < threshold {
        return Ok(SafeWindow::Window { ell: 1, probability: p(1)? });
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while p(hi)? >= threshold {
        lo = hi;
        hi *= 2;
        if hi > MAX_WINDOW {
            return Ok(SafeWindow::NoSafeWindow);
        }
    }
    // p(lo) >= threshold > p(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if p(mid)? < threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SafeWindow::Window { ell: hi, probability: p(hi)? })
}

/// Per-block failure budget so that `blocks` blocks fail with probability at most `failure`.
pub fn lifetime_threshold(blocks: f64, failure: f64) -> Result<f64> {
    if !(blocks >= 1.0 && blocks.is_finite()) {
        return Err(Error::domain("blocks", format!("{blocks} must be a finite count >= 1")));
    }
    if !(failure > 0.0 && failure <= 1.0) {
        return Err(Error::domain("failure", format!("{failure} not in (0, 1]")));
    }
    Ok(failure / blocks)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnasBound {
    /// Lower bound on the UNaS announce rate as a multiple of an honest coin's rate.
    pub multiplier: f64,
    /// Whether the recency window defends against depth-`d` nothing-at-stake (`d < l/2`).
    pub defended: bool,
}

/// Announce-rate gain available to an undetectable nothing-at-stake miner at depth `d`.
pub fn unas_rate_bound(d: u64, lambda: u64) -> Result<UnasBound> {
    if d == 0 || lambda == 0 {
        return Err(Error::domain("unas bound", "depth and lambda must be positive"));
    }
    let multiplier = 2.0 - 2.0 * d as f64 / (lambda as f64 + 1.0);
    Ok(UnasBound { multiplier, defended: (d as f64) < lambda as f64 / 2.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForkPoint {
    pub k: u64,
    pub attacker: f64,
    pub honest: f64,
}

/// Expected subtree sizes after `k` slots of exponential forking against GHOST.
pub fn exp_fork_trajectory(alpha: f64, x0: f64, y0: f64, k: u64) -> Result<ForkPoint> {
    check_alpha(alpha)?;
    if x0 < 0.0 || y0 < 0.0 {
        return Err(Error::domain("subtree size", "must be non-negative"));
    }
    Ok(ForkPoint {
        k,
        attacker: (1.0 + alpha).powf(k as f64) * x0,
        honest: y0 + (1.0 - alpha) * k as f64,
    })
}

/// First `k` at which the expected attacker subtree outweighs the honest one.
pub fn exp_fork_crossover(alpha: f64, x0: f64, y0: f64) -> Result<Option<u64>> {
    if alpha == 0.0 || x0 == 0.0 {
        return Ok((x0 > y0).then_some(0));
    }
    for k in 0..100_000 {
        let p = exp_fork_trajectory(alpha, x0, y0, k)?;
        if p.attacker > p.honest {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub ell_star: Option<u64>,
    pub p_at_ell_star: Option<f64>,
}

/// Evenly spaced alphas from `from` to `to` inclusive.
pub fn alpha_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || to < from {
        return Err(Error::domain("alpha range", format!("from={from} to={to} step={step}")));
    }
    check_alpha(from)?;
    check_alpha(to)?;
    let n = ((to - from) / step + 1e-9).floor() as u64;
    // snap to 12 decimals so 0.05 + 1 * 0.01 prints as 0.06
    Ok((0..=n).map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Minimum safe window for each alpha; rows with no safe window carry `None`.
pub fn sweep(threshold: f64, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            Ok(match min_safe_window(alpha, threshold)? {
                SafeWindow::Window { ell, probability } => {
                    SweepRow { alpha, ell_star: Some(ell), p_at_ell_star: Some(probability) }
                }
                SafeWindow::NoSafeWindow => SweepRow { alpha, ell_star: None, p_at_ell_star: None },
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,ell_star,p_at_ell_star\n");
    for r in rows {
        match (r.ell_star, r.p_at_ell_star) {
            (Some(l), Some(p)) => out.push_str(&format!("{},{},{:e}\n", r.alpha, l, p)),
            _ => out.push_str(&format!("{},none,none\n", r.alpha)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_windows_by_hand() {
        assert!((race_probability(0.3, 1).unwrap() - 0.3).abs() < 1e-15);
        // l = 2: 3a^2(1-a) + a^3
        let a: f64 = 0.3;
        let want = 3.0 * a * a * (1.0 - a) + a.powi(3);
        assert!((race_probability(a, 2).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn edges_and_domain() {
        assert_eq!(race_probability(0.0, 7).unwrap(), 0.0);
        assert_eq!(race_probability(1.0, 7).unwrap(), 1.0);
        assert!(race_probability(-0.1, 1).is_err());
        assert!(race_probability(0.2, 0).is_err());
        assert!(min_safe_window(0.2, 0.0).is_err());
        assert_eq!(min_safe_window(0.5, 1e-3).unwrap(), SafeWindow::NoSafeWindow);
        assert_eq!(min_safe_window(0.7, 1e-3).unwrap(), SafeWindow::NoSafeWindow);
        assert!(lifetime_threshold(0.0, 0.1).is_err());
    }

    #[test]
    fn upper_half_is_complement() {
        for ell in [1, 3, 10, 57] {
            let lo = race_probability(0.35, ell).unwrap();
            let hi = race_probability(0.65, ell).unwrap();
            assert!((lo + hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_is_minimal() {
        for (a, t) in [(0.1, 1e-6), (0.25, 1e-9), (0.4, 1e-3), (0.45, 2e-16)] {
            let l = min_safe_window(a, t).unwrap().ell().unwrap();
            assert!(race_probability(a, l).unwrap() < t);
            if l > 1 {
                assert!(race_probability(a, l - 1).unwrap() >= t);
            }
        }
    }

    #[test]
    fn alpha_below_threshold_gives_unit_window() {
        assert_eq!(min_safe_window(0.01, 0.05).unwrap().ell(), Some(1));
    }

    #[test]
    fn unas_bound_values() {
        let b = unas_rate_bound(10, 101).unwrap();
        assert!((b.multiplier - (2.0 - 20.0 / 102.0)).abs() < 1e-15);
        assert!(b.defended);
        assert!(!unas_rate_bound(51, 101).unwrap().defended);
    }

    #[test]
    fn trajectory_and_crossover() {
        let p = exp_fork_trajectory(0.1, 1.0, 5.0, 10).unwrap();
        assert!((p.attacker - 1.1f64.powi(10)).abs() < 1e-12);
        assert!((p.honest - 14.0).abs() < 1e-12);
        let k = exp_fork_crossover(0.1, 1.0, 5.0).unwrap().unwrap();
        let before = exp_fork_trajectory(0.1, 1.0, 5.0, k - 1).unwrap();
        let at = exp_fork_trajectory(0.1, 1.0, 5.0, k).unwrap();
        assert!(before.attacker <= before.honest && at.attacker > at.honest);
    }

    #[test]
    fn grid_is_inclusive() {
        let g = alpha_grid(0.30, 0.50, 0.05).unwrap();
        assert_eq!(g.len(), 5);
        let rows = sweep(1e-3, &g).unwrap();
        assert!(rows.last().unwrap().ell_star.is_none());
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("alpha,ell_star,p_at_ell_star\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
