use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::equilibrium::{aggregate_production, equilibrium_baseline, Allocation, Baseline};
use crate::error::Result;

/// One period's contribution to the three regret metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepIncrement {
    /// `(d_t − Σ_i x_i*(p_t))₊`
    pub unmet: f64,
    /// `Σ_i c_i(x_i*(p_t)) − c_i(x_i*(p*_t))`, negative when under-pricing.
    pub cost: f64,
    /// `Σ_i p_t x_i*(p_t) − p*_t x_i*(p*_t)`, negative when under-pricing.
    pub payment: f64,
}

impl StepIncrement {
    pub fn total(&self) -> f64 {
        self.unmet + self.cost + self.payment
    }
}

/// Increments for playing `p` against a known equilibrium reference.
pub fn step_increment(
    suppliers: &[CostSpec],
    d: f64,
    theta: Option<&[f64]>,
    p: f64,
    baseline: &Baseline,
) -> Result<(StepIncrement, Allocation)> {
    let alloc = aggregate_production(suppliers, p, theta)?;
    let mut cost = 0.0;
    for (s, &x) in suppliers.iter().zip(&alloc.per_supplier) {
        cost += s.cost(x, theta)?;
    }
    let inc = StepIncrement {
        unmet: (d - alloc.total).max(0.0),
        cost: cost - baseline.cost,
        payment: p * alloc.total - baseline.payment,
    };
    Ok((inc, alloc))
}

/// Running unmet demand `U_T`, cost regret `C_T` and payment regret `P_T`.
///
/// Besides the signed totals the ledger keeps the gross (positive-part) sums of
/// the cost and payment increments, which upper-bound the signed totals and stay
/// meaningful on a log scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub unmet: f64,
    pub cost_regret: f64,
    pub payment_regret: f64,
    pub cost_gross: f64,
    pub payment_gross: f64,
    pub periods: usize,
    pub per_period: Vec<StepIncrement>,
    keep_history: bool,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self {
            keep_history: true,
            ..Self::default()
        }
    }

    /// A ledger that only tracks the cumulative fields.
    pub fn without_history() -> Self {
        Self::default()
    }

    pub fn push(&mut self, inc: StepIncrement) {
        debug_assert!(inc.unmet >= 0.0);
        self.unmet += inc.unmet;
        self.cost_regret += inc.cost;
        self.payment_regret += inc.payment;
        self.cost_gross += inc.cost.max(0.0);
        self.payment_gross += inc.payment.max(0.0);
        self.periods += 1;
        if self.keep_history {
            self.per_period.push(inc);
        }
    }

    /// Records price `p_t` for a period with demand `d_t`, computing the
    /// equilibrium reference from the suppliers' costs.
    pub fn record_step(
        &mut self,
        suppliers: &[CostSpec],
        d: f64,
        theta: Option<&[f64]>,
        p: f64,
    ) -> Result<StepIncrement> {
        let baseline = equilibrium_baseline(suppliers, d, theta)?;
        self.record_against(suppliers, d, theta, p, &baseline)
    }

    pub fn record_against(
        &mut self,
        suppliers: &[CostSpec],
        d: f64,
        theta: Option<&[f64]>,
        p: f64,
        baseline: &Baseline,
    ) -> Result<StepIncrement> {
        let (inc, _) = step_increment(suppliers, d, theta, p, baseline)?;
        self.push(inc);
        Ok(inc)
    }

    pub fn total(&self) -> f64 {
        self.unmet + self.cost_regret + self.payment_regret
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_play_is_free() {
        let s = [CostSpec::quadratic(0.3, 0.0), CostSpec::quadratic(0.7, 0.1)];
        let b = equilibrium_baseline(&s, 1.0, None).unwrap();
        let mut l = RegretLedger::new();
        let inc = l.record_against(&s, 1.0, None, b.price, &b).unwrap();
        // Bisection stops within EQ_TOL of market clearing.
        let tol = crate::market::EQ_TOL;
        assert!(inc.unmet <= tol && inc.cost.abs() <= tol && inc.payment.abs() <= tol);
    }

    #[test]
    fn single_quadratic_examples() {
        let s = [CostSpec::quadratic(0.25, 0.0)];
        let mut l = RegretLedger::new();
        let over = l.record_step(&s, 1.0, None, 0.5).unwrap();
        assert_eq!(over.payment, 0.75);
        assert_eq!(over.unmet, 0.0);
        // (1/8)(4p)^2 - 1/8 at p = 1/2.
        assert_eq!(over.cost, 0.375);
        let under = l.record_step(&s, 1.0, None, 0.125).unwrap();
        assert_eq!(under.unmet, 0.5);
        assert_eq!(l.unmet, 0.5);
        assert_eq!(l.payment_regret, 0.75 + under.payment);
        assert_eq!(l.payment_gross, 0.75);
        assert_eq!(l.per_period.len(), 2);
    }

    #[test]
    fn history_can_be_dropped() {
        let s = [CostSpec::quadratic(1.0, 0.0)];
        let mut l = RegretLedger::without_history();
        l.record_step(&s, 0.5, None, 0.2).unwrap();
        assert!(l.per_period.is_empty());
        assert_eq!(l.periods, 1);
        assert!((l.unmet - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cumulative_fields_are_exact_sums(
            prices in prop::collection::vec(0.0f64..=1.0, 1..200),
            mu in 0.2f64..1.0,
        ) {
            let s = [CostSpec::quadratic(mu, 0.0), CostSpec::quadratic(0.5, 0.05)];
            let b = equilibrium_baseline(&s, 0.8, None).unwrap();
            let mut l = RegretLedger::new();
            for p in &prices {
                l.record_against(&s, 0.8, None, *p, &b).unwrap();
            }
            let (mut u, mut c, mut pay) = (0.0, 0.0, 0.0);
            for inc in &l.per_period {
                prop_assert!(inc.unmet >= 0.0);
                u += inc.unmet;
                c += inc.cost;
                pay += inc.payment;
            }
            prop_assert_eq!(u, l.unmet);
            prop_assert_eq!(c, l.cost_regret);
            prop_assert_eq!(pay, l.payment_regret);
            prop_assert!(l.cost_regret <= l.cost_gross);
        }
    }
}
