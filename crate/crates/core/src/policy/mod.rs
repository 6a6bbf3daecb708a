//! Posted-price policies and the interface the harness drives them through.

mod constant;
mod contextual;
mod demand;
mod fixed;

pub use constant::ConstantPrice;
pub use contextual::{
    default_explore, default_grid_size, greedy_index, igw_distribution, ContextualIgw, IgwConfig,
    IgwDistribution, PriceGrid,
};
pub use demand::{CellState, DemandGrid, DemandGridPolicy};
pub use fixed::{FixedIntervalPolicy, Phase};

use crate::error::Result;
use crate::rng::SimRng;

/// What the operator sees at the start of a period.
#[derive(Debug, Clone, Copy)]
pub struct Round<'a> {
    /// Zero-based period index.
    pub t: usize,
    pub demand: f64,
    pub context: Option<&'a [f64]>,
}

/// A posted price, optionally with the distribution it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub price: f64,
    /// `(price, probability)` pairs summing to one, for randomized policies.
    pub lottery: Option<Vec<(f64, f64)>>,
}

impl Proposal {
    pub fn deterministic(price: f64) -> Self {
        Self {
            price,
            lottery: None,
        }
    }
}

/// A pricing policy: posts a price each period and learns from the production it
/// elicits. Suppliers' costs are never revealed to the policy.
pub trait PricingPolicy: Send {
    fn name(&self) -> &'static str;

    fn propose(&mut self, round: &Round<'_>, rng: &mut SimRng) -> Result<Proposal>;

    /// Aggregate production observed at the posted `price`.
    fn observe(&mut self, round: &Round<'_>, price: f64, production: f64) -> Result<()>;
}
