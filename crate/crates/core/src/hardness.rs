//! Executable lower-bound constructions.
//!
//! * Two equally likely quadratic cost functions drawn i.i.d. each period, with
//!   demand 1: every fixed price has expected per-period regret at least 7/64.
//! * A single linear supplier: production jumps from 0 to its cap at the unit
//!   cost, so any price other than the unit cost incurs a constant regret.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{format_g17, simulate, RunRecord, SimOptions};
use crate::market::{check_price, equilibrium_baseline, step_increment, CostSpec, MarketInstance};
use crate::policy::PricingPolicy;
use crate::rng::{stream_rng, uniform, Stream};

/// `x²/8` and `x²/16`, with equilibrium prices 1/4 and 1/8 at demand 1.
pub fn iid_costs() -> [CostSpec; 2] {
    [CostSpec::quadratic(0.25, 0.0), CostSpec::quadratic(0.125, 0.0)]
}

/// Demand of the i.i.d. construction.
pub const IID_DEMAND: f64 = 1.0;

/// Expected unmet demand plus cost and payment regret of posting `p` against the
/// two-point cost mixture.
pub fn expected_total_regret(p: f64) -> f64 {
    if p < 0.125 {
        9.0 * p * p - 6.0 * p + 23.0 / 32.0
    } else if p <= 0.25 {
        9.0 * p * p - 2.0 * p + 7.0 / 32.0
    } else {
        9.0 * p * p - 9.0 / 32.0
    }
}

/// Minimum of [`expected_total_regret`] over the grid `{0, step, 2 step, …, 1}`,
/// as `(argmin, min)`. Grid points are computed as `i / n` to hit 1/8 exactly
/// when `1/step` is a multiple of 8.
pub fn analytic_minimum(step: f64) -> (f64, f64) {
    let n = (1.0 / step).round() as usize;
    (0..=n)
        .map(|i| {
            let p = i as f64 / n as f64;
            (p, expected_total_regret(p))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Average per-period total regret of posting `p` for `periods` i.i.d. periods.
/// Draws come from stream [`Stream::Hardness`] of `seed`, so every price sees
/// the same cost sequence.
pub fn monte_carlo_regret(p: f64, periods: usize, seed: u64) -> Result<f64> {
    check_price(p)?;
    let costs = iid_costs();
    let baselines = [
        equilibrium_baseline(&costs[..1], IID_DEMAND, None)?,
        equilibrium_baseline(&costs[1..], IID_DEMAND, None)?,
    ];
    let incs = [
        step_increment(&costs[..1], IID_DEMAND, None, p, &baselines[0])?.0.total(),
        step_increment(&costs[1..], IID_DEMAND, None, p, &baselines[1])?.0.total(),
    ];
    let mut rng = stream_rng(seed, Stream::Hardness);
    let mut sum = 0.0;
    for _ in 0..periods {
        let i = usize::from(uniform(&mut rng) >= 0.5);
        sum += incs[i];
    }
    Ok(sum / periods as f64)
}

/// One row of the lower-bound report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardnessRow {
    pub p: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub n_periods: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub argmin: f64,
    pub minimum: f64,
    pub rows: Vec<HardnessRow>,
}

/// Grid minimum of the analytic formula plus Monte Carlo checks at `prices`.
pub fn verify_lower_bound(step: f64, prices: &[f64], periods: usize, seed: u64) -> Result<LowerBoundReport> {
    let (argmin, minimum) = analytic_minimum(step);
    let rows = prices
        .par_iter()
        .map(|&p| {
            Ok(HardnessRow {
                p,
                analytic: expected_total_regret(p),
                empirical: monte_carlo_regret(p, periods, seed)?,
                n_periods: periods,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowerBoundReport {
        argmin,
        minimum,
        rows,
    })
}

pub const HARDNESS_HEADER: [&str; 5] = ["p", "analytic", "empirical", "n_periods", "seed"];

pub fn write_hardness<W: Write>(rows: &[HardnessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HARDNESS_HEADER)?;
    for r in rows {
        w.write_record([
            format_g17(r.p),
            format_g17(r.analytic),
            format_g17(r.empirical),
            r.n_periods.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One linear supplier with unit cost `c` and cap `2d`, facing fixed demand `d`.
pub fn linear_instance(c: f64, d: f64, horizon: usize) -> Result<MarketInstance> {
    MarketInstance::fixed(vec![CostSpec::linear(c, 2.0 * d)], d, horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDemoReport {
    pub record: RunRecord,
    /// `U_T + C_T + P_T`.
    pub total: f64,
    /// Periods whose increments miss the per-period floor.
    pub violations: usize,
    /// Periods with `p_t ≠ c`.
    pub off_equilibrium: usize,
}

/// Runs `policy` on [`linear_instance`] and checks every period against the
/// floor: below `c` the whole demand is unmet; above `c` the cap is produced, so
/// cost and payment each exceed the equilibrium by at least `c (cap − d)`.
pub fn linear_cost_demo(
    policy: &mut dyn PricingPolicy,
    c: f64,
    d: f64,
    horizon: usize,
    seed: u64,
) -> Result<LinearDemoReport> {
    let instance = linear_instance(c, d, horizon)?;
    let cap = 2.0 * d;
    let opts = SimOptions {
        keep_trajectory: true,
        noise: 0.0,
    };
    let record = simulate(&instance, policy, seed, &opts)?;
    let floor = c * (cap - d);
    let mut violations = 0;
    let mut off = 0;
    for row in &record.trajectory {
        if row.price == c {
            continue;
        }
        off += 1;
        let ok = if row.price < c {
            row.inc.unmet == d
        } else {
            row.inc.cost >= floor - 1e-12 && row.inc.payment >= floor - 1e-12
        };
        if !ok {
            violations += 1;
        }
    }
    let total = record.ledger.total();
    Ok(LinearDemoReport {
        record,
        total,
        violations,
        off_equilibrium: off,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ConstantPrice;

    #[test]
    fn formula_examples() {
        assert_eq!(expected_total_regret(0.125), 7.0 / 64.0);
        assert_eq!(expected_total_regret(0.25), 9.0 / 32.0);
        assert_eq!(expected_total_regret(0.0), 23.0 / 32.0);
        assert_eq!(expected_total_regret(0.5), 1.96875);
    }

    #[test]
    fn pieces_agree_at_boundaries() {
        let left = |p: f64| 9.0 * p * p - 6.0 * p + 23.0 / 32.0;
        let mid = |p: f64| 9.0 * p * p - 2.0 * p + 7.0 / 32.0;
        let right = |p: f64| 9.0 * p * p - 9.0 / 32.0;
        assert!((left(0.125) - mid(0.125)).abs() < 1e-15);
        assert!((mid(0.25) - right(0.25)).abs() < 1e-15);
    }

    /// Direct evaluation of the mixture from the ledger, independent of the formula.
    fn mixture(p: f64) -> f64 {
        let costs = iid_costs();
        let mut acc = 0.0;
        for c in &costs {
            let s = std::slice::from_ref(c);
            let b = equilibrium_baseline(s, 1.0, None).unwrap();
            acc += 0.5 * step_increment(s, 1.0, None, p, &b).unwrap().0.total();
        }
        acc
    }

    #[test]
    fn formula_matches_ledger() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            assert!((expected_total_regret(p) - mixture(p)).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn grid_minimum() {
        let (argmin, min) = analytic_minimum(1e-4);
        assert_eq!(argmin, 0.125);
        assert!((min - 0.109375).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_near_formula() {
        for p in [0.125, 0.5] {
            let mc = monte_carlo_regret(p, 100_000, 7).unwrap();
            let exact = expected_total_regret(p);
            assert!((mc - exact).abs() <= 0.02 * exact, "p = {p}: {mc} vs {exact}");
        }
    }

    #[test]
    fn linear_constant_prices() {
        let (c, d, t) = (0.3, 1.0, 10_000);
        let mut below = ConstantPrice::new(c - 0.01).unwrap();
        let r = linear_cost_demo(&mut below, c, d, t, 0).unwrap();
        assert_eq!(r.record.ledger.unmet, d * t as f64);
        assert_eq!(r.violations, 0);

        let mut above = ConstantPrice::new(c + 0.01).unwrap();
        let r = linear_cost_demo(&mut above, c, d, t, 0).unwrap();
        let per = (c + 0.01) * 2.0 * d - c * d;
        assert!((r.record.ledger.payment_regret - per * t as f64).abs() < 1e-8);
        assert_eq!(r.record.ledger.unmet, 0.0);
        assert_eq!(r.violations, 0);
    }
}
