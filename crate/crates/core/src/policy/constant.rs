use super::{PricingPolicy, Proposal, Round};
use crate::error::Result;
use crate::market::check_price;
use crate::rng::SimRng;

/// Posts the same price every period. A reference point, not a learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPrice {
    price: f64,
}

impl ConstantPrice {
    pub fn new(price: f64) -> Result<Self> {
        check_price(price)?;
        Ok(Self { price })
    }

    pub fn price(&self) -> f64 {
        self.price
    }
}

impl PricingPolicy for ConstantPrice {
    fn name(&self) -> &'static str {
        "constant_price"
    }

    fn propose(&mut self, _round: &Round<'_>, _rng: &mut SimRng) -> Result<Proposal> {
        Ok(Proposal::deterministic(self.price))
    }

    fn observe(&mut self, _round: &Round<'_>, _price: f64, _production: f64) -> Result<()> {
        Ok(())
    }
}
