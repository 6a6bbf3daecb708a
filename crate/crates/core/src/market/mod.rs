//! Supplier cost families, best responses, the equilibrium-price oracle and
//! regret accounting.

mod cost;
mod equilibrium;
mod instance;
mod ledger;

pub use cost::{CostSpec, FeatureMap};
pub use equilibrium::{
    aggregate_production, equilibrium_baseline, equilibrium_price, kkt_violation,
    lipschitz_constants, Allocation, Baseline, LipschitzConstants, EQ_MAX_ITER, EQ_TOL,
};
pub use instance::{
    ContextGenerator, ContextSpec, DemandGenerator, DemandSpec, InstanceSpec, MarketInstance,
};
pub use ledger::{step_increment, RegretLedger, StepIncrement};

pub(crate) use cost::check_price;

/// Best response of a single supplier; see [`CostSpec::best_response`].
pub fn best_response(cost: &CostSpec, p: f64, theta: Option<&[f64]>) -> crate::Result<f64> {
    cost.best_response(p, theta)
}
