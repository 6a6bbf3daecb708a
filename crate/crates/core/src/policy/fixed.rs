use super::{PricingPolicy, Proposal, Round};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Searching,
    Frozen,
}

/// Interval tracking with precision squaring, for a fixed demand and fixed costs.
///
/// Within a sub-phase the policy offers `a, a + ε, a + 2ε, …` (capped at `b`)
/// until production reaches demand at some price `q`. The interval then becomes
/// `[q − ε, q]` and `ε ← ε²`. Once `b − a ≤ 1/T` the policy posts `a` forever.
///
/// Invariant with exact responses: `p* ∈ [a, b]`, and `a` never over-produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedIntervalPolicy {
    a: f64,
    b: f64,
    eps: f64,
    cursor: u64,
    phase: Phase,
    horizon: usize,
    shrinks: usize,
    resets: usize,
}

impl FixedIntervalPolicy {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let mut s = Self {
            a: 0.0,
            b: 1.0,
            eps: 0.5,
            cursor: 0,
            phase: Phase::Searching,
            horizon,
            shrinks: 0,
            resets: 0,
        };
        s.maybe_freeze();
        Ok(s)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of interval shrinks so far.
    pub fn shrinks(&self) -> usize {
        self.shrinks
    }

    /// Number of times the cursor ran past `b` without meeting demand, which only
    /// happens when responses are not exact best responses.
    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn next_price(&self) -> f64 {
        match self.phase {
            Phase::Frozen => self.a,
            Phase::Searching => self.offer(self.cursor),
        }
    }

    fn offer(&self, k: u64) -> f64 {
        (self.a + k as f64 * self.eps).min(self.b)
    }

    /// Feeds back the production observed at [`Self::next_price`].
    pub fn observe_production(&mut self, production: f64, demand: f64) {
        if self.phase == Phase::Frozen {
            return;
        }
        let p = self.offer(self.cursor);
        if production < demand {
            if p >= self.b {
                self.cursor = 0;
                self.resets += 1;
            } else {
                self.cursor += 1;
            }
            return;
        }
        let lo = if self.cursor == 0 {
            self.a
        } else {
            self.offer(self.cursor - 1)
        };
        let hi = if self.cursor == 0 {
            (self.a + self.eps).min(self.b)
        } else {
            p
        };
        self.a = lo;
        self.b = hi;
        self.eps *= self.eps;
        self.cursor = 0;
        self.shrinks += 1;
        self.maybe_freeze();
    }

    fn maybe_freeze(&mut self) {
        if self.b - self.a <= 1.0 / self.horizon as f64 {
            self.phase = Phase::Frozen;
        }
    }
}

impl PricingPolicy for FixedIntervalPolicy {
    fn name(&self) -> &'static str {
        "fixed_interval"
    }

    fn propose(&mut self, _round: &Round<'_>, _rng: &mut SimRng) -> Result<Proposal> {
        Ok(Proposal::deterministic(self.next_price()))
    }

    fn observe(&mut self, round: &Round<'_>, _price: f64, production: f64) -> Result<()> {
        self.observe_production(production, round.demand);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{aggregate_production, equilibrium_price, CostSpec};
    use proptest::prelude::*;

    fn drive(policy: &mut FixedIntervalPolicy, supply: impl Fn(f64) -> f64, d: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let p = policy.next_price();
                policy.observe_production(supply(p), d);
                p
            })
            .collect()
    }

    #[test]
    fn first_offers() {
        let mut s = FixedIntervalPolicy::new(1000).unwrap();
        assert_eq!(s.next_price(), 0.0);
        s.observe_production(0.0, 1.0);
        assert_eq!(s.next_price(), 0.5);
    }

    #[test]
    fn hand_trace_single_quadratic() {
        let mut s = FixedIntervalPolicy::new(1 << 30).unwrap();
        let offers = drive(&mut s, |p| p / 0.3, 1.0, 2);
        assert_eq!(offers, vec![0.0, 0.5]);
        assert_eq!(s.interval(), (0.0, 0.5));
        assert_eq!(s.eps(), 0.25);
        let offers = drive(&mut s, |p| p / 0.3, 1.0, 3);
        assert_eq!(offers, vec![0.0, 0.25, 0.5]);
        assert_eq!(s.interval(), (0.25, 0.5));
        assert_eq!(s.eps(), 1.0 / 16.0);
    }

    #[test]
    fn exact_demand_counts_as_enough() {
        let mut s = FixedIntervalPolicy::new(1000).unwrap();
        s.observe_production(0.0, 1.0);
        s.observe_production(1.0, 1.0);
        assert_eq!(s.shrinks(), 1);
        assert_eq!(s.interval(), (0.0, 0.5));
    }

    #[test]
    fn frozen_posts_lower_end() {
        let mut s = FixedIntervalPolicy::new(4).unwrap();
        drive(&mut s, |p| p / 0.3, 1.0, 5);
        assert_eq!(s.phase(), Phase::Frozen);
        let a = s.interval().0;
        assert_eq!(s.next_price(), a);
        s.observe_production(100.0, 1.0);
        assert_eq!(s.next_price(), a);
    }

    #[test]
    fn shrink_count_at_two_to_the_twenty() {
        // Widths after each shrink: 2^-1, 2^-2, 2^-4, 2^-8, 2^-16, 2^-32.
        let t = 1usize << 20;
        let mut s = FixedIntervalPolicy::new(t).unwrap();
        let mut n = 0;
        while s.phase() == Phase::Searching {
            let p = s.next_price();
            s.observe_production(p / 0.3, 1.0);
            n += 1;
        }
        assert_eq!(s.shrinks(), 6);
        assert!(n < t);
    }

    #[test]
    fn runs_past_b_reset() {
        let mut s = FixedIntervalPolicy::new(1000).unwrap();
        drive(&mut s, |_| 0.0, 1.0, 3);
        assert_eq!(s.resets(), 1);
        assert_eq!(s.next_price(), 0.0);
    }

    fn shrink_bound(t: usize) -> usize {
        ((t as f64).log2().log2().ceil().max(0.0)) as usize + 1
    }

    proptest! {
        #[test]
        fn containment_and_counts(
            mus in prop::collection::vec(0.2f64..1.0, 1..4),
            d in 0.05f64..0.6,
            log_t in 2u32..20,
        ) {
            let sup: Vec<_> = mus.iter().map(|&m| CostSpec::quadratic(m, 0.0)).collect();
            let p_star = equilibrium_price(&sup, d, None).unwrap();
            let t = 1usize << log_t;
            let mut s = FixedIntervalPolicy::new(t).unwrap();
            let mut overshoots_this_phase = 0;
            let mut shrinks = 0;
            for _ in 0..t {
                let p = s.next_price();
                let x = aggregate_production(&sup, p, None).unwrap().total;
                if p > p_star {
                    overshoots_this_phase += 1;
                }
                s.observe_production(x, d);
                if s.shrinks() != shrinks {
                    prop_assert!(overshoots_this_phase <= 1);
                    overshoots_this_phase = 0;
                    shrinks = s.shrinks();
                }
                let (a, b) = s.interval();
                prop_assert!(a - 1e-9 <= p_star && p_star <= b + 1e-9);
                prop_assert!(0.0 <= a && a < b && b <= 1.0);
            }
            prop_assert!(s.shrinks() <= shrink_bound(t));
            prop_assert_eq!(s.resets(), 0);
            if log_t >= 9 {
                prop_assert_eq!(s.phase(), Phase::Frozen);
            }
        }
    }
}
