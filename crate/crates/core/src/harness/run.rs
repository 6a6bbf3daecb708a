use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{
    aggregate_production, equilibrium_baseline, lipschitz_constants, step_increment, Baseline,
    LipschitzConstants, MarketInstance, RegretLedger, StepIncrement,
};
use crate::policy::{PricingPolicy, Round};
use crate::rng::{stream_rng, uniform, Stream};

/// Knobs of a single simulated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Keep one [`TrajectoryRow`] per period.
    pub keep_trajectory: bool,
    /// Half-width `a` of uniform observation noise on `[−a, a]`; production
    /// reported to the policy is clipped at zero. Regret always uses the true response.
    pub noise: f64,
}

/// One period of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub demand: f64,
    pub price: f64,
    pub production: f64,
    pub inc: StepIncrement,
}

/// Outcome of one run of a policy on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: String,
    pub horizon: usize,
    pub replication: usize,
    pub seed: u64,
    /// Metrics of the prices actually posted.
    pub ledger: RegretLedger,
    /// Metrics in expectation over each period's sampling distribution. Equal to
    /// `ledger` for deterministic policies.
    pub expected: RegretLedger,
    /// `Σ_t E_{p∼Δ_t} |x*(p; θ_t) − d_t|`.
    pub proxy_regret: f64,
    /// `Σ_t L₁L₂(θ_t) · proxy_t` and `Σ_t L₁L₃(θ_t) · proxy_t`, when the market
    /// admits those constants in every period.
    pub payment_bound: Option<f64>,
    pub cost_bound: Option<f64>,
    pub final_price: f64,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Caches the most recent per-period reference, which repeats on fixed instances.
struct Reference {
    key: Option<(f64, Option<Vec<f64>>)>,
    baseline: Option<Baseline>,
    constants: Option<LipschitzConstants>,
}

impl Reference {
    fn update(&mut self, instance: &MarketInstance, d: f64, theta: Option<&[f64]>) -> Result<()> {
        let fresh = match &self.key {
            Some((kd, kt)) => *kd != d || kt.as_deref() != theta,
            None => true,
        };
        if fresh {
            self.baseline = Some(equilibrium_baseline(instance.suppliers(), d, theta)?);
            self.constants = lipschitz_constants(instance.suppliers(), theta)?;
            self.key = Some((d, theta.map(<[f64]>::to_vec)));
        }
        Ok(())
    }
}

/// Runs `policy` on `instance` for its whole horizon.
///
/// Randomness: the policy draws from stream [`Stream::Policy`] of `seed`, the
/// observation noise from [`Stream::Noise`].
pub fn simulate(
    instance: &MarketInstance,
    policy: &mut dyn PricingPolicy,
    seed: u64,
    opts: &SimOptions,
) -> Result<RunRecord> {
    let suppliers = instance.suppliers();
    let mut policy_rng = stream_rng(seed, Stream::Policy);
    let mut noise_rng = stream_rng(seed, Stream::Noise);
    let mut ledger = RegretLedger::without_history();
    let mut expected = RegretLedger::without_history();
    let mut proxy = 0.0;
    let mut bounds = Some((0.0, 0.0));
    let mut trajectory = Vec::with_capacity(if opts.keep_trajectory { instance.horizon() } else { 0 });
    let mut reference = Reference {
        key: None,
        baseline: None,
        constants: None,
    };
    let mut final_price = 0.0;

    for t in 0..instance.horizon() {
        let d = instance.demands()[t];
        let theta = instance.context(t);
        let round = Round {
            t,
            demand: d,
            context: theta,
        };
        reference.update(instance, d, theta)?;
        let baseline = reference.baseline.expect("set by update");

        let proposal = policy.propose(&round, &mut policy_rng)?;
        let (inc, alloc) = step_increment(suppliers, d, theta, proposal.price, &baseline)?;
        let observed = if opts.noise > 0.0 {
            (alloc.total + opts.noise * (2.0 * uniform(&mut noise_rng) - 1.0)).max(0.0)
        } else {
            alloc.total
        };
        policy.observe(&round, proposal.price, observed)?;
        ledger.push(inc);

        let (exp_inc, proxy_inc) = match &proposal.lottery {
            None => (inc, (alloc.total - d).abs()),
            Some(lottery) => {
                let mut e = StepIncrement::default();
                let mut r = 0.0;
                for &(p, q) in lottery {
                    let (i, a) = step_increment(suppliers, d, theta, p, &baseline)?;
                    e.unmet += q * i.unmet;
                    e.cost += q * i.cost;
                    e.payment += q * i.payment;
                    r += q * (a.total - d).abs();
                }
                (e, r)
            }
        };
        expected.push(exp_inc);
        proxy += proxy_inc;
        bounds = match (bounds, reference.constants) {
            (Some((pb, cb)), Some(c)) => Some((
                pb + c.price_in_demand * c.payment_in_price * proxy_inc,
                cb + c.price_in_demand * c.cost_in_price * proxy_inc,
            )),
            _ => None,
        };
        if opts.keep_trajectory {
            trajectory.push(TrajectoryRow {
                t,
                demand: d,
                price: proposal.price,
                production: alloc.total,
                inc,
            });
        }
        final_price = proposal.price;
    }

    Ok(RunRecord {
        policy: policy.name().to_string(),
        horizon: instance.horizon(),
        replication: 0,
        seed,
        ledger,
        expected,
        proxy_regret: proxy,
        payment_bound: bounds.map(|b| b.0),
        cost_bound: bounds.map(|b| b.1),
        final_price,
        trajectory,
    })
}

/// Total production at `p` for period `t` of `instance`.
pub fn production_at(instance: &MarketInstance, t: usize, p: f64) -> Result<f64> {
    Ok(aggregate_production(instance.suppliers(), p, instance.context(t))?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::CostSpec;
    use crate::policy::{ConstantPrice, FixedIntervalPolicy};

    #[test]
    fn equilibrium_price_is_regret_free() {
        let inst = MarketInstance::fixed(vec![CostSpec::quadratic(0.25, 0.0)], 1.0, 50).unwrap();
        let mut pol = ConstantPrice::new(0.25).unwrap();
        let r = simulate(&inst, &mut pol, 0, &SimOptions::default()).unwrap();
        assert_eq!(r.ledger.unmet, 0.0);
        assert_eq!(r.ledger.cost_regret, 0.0);
        assert_eq!(r.ledger.payment_regret, 0.0);
        assert_eq!(r.proxy_regret, 0.0);
    }

    #[test]
    fn fixed_interval_converges() {
        let t = 100_000;
        let inst = MarketInstance::fixed(vec![CostSpec::quadratic(0.3, 0.0)], 1.0, t).unwrap();
        let mut pol = FixedIntervalPolicy::new(t).unwrap();
        let opts = SimOptions {
            keep_trajectory: true,
            noise: 0.0,
        };
        let r = simulate(&inst, &mut pol, 0, &opts).unwrap();
        assert!((r.final_price - 0.3).abs() <= 1e-5 + 1e-10);
        let u: f64 = r.trajectory.iter().map(|row| row.inc.unmet).sum();
        assert_eq!(u, r.ledger.unmet);
        assert_eq!(r.trajectory.len(), t);
    }

    #[test]
    fn noise_only_changes_what_the_policy_sees() {
        let inst = MarketInstance::fixed(vec![CostSpec::quadratic(0.5, 0.0)], 1.0, 10).unwrap();
        let opts = SimOptions {
            keep_trajectory: true,
            noise: 0.1,
        };
        let mut pol = ConstantPrice::new(0.4).unwrap();
        let r = simulate(&inst, &mut pol, 3, &opts).unwrap();
        assert!(r.trajectory.iter().all(|row| (row.production - 0.8).abs() < 1e-15));
    }
}
