//! Online learning of market equilibrium prices.
//!
//! A market operator posts a price each period, suppliers with private convex
//! costs answer with their profit-maximizing production, and the operator tries
//! to clear demand while keeping unmet demand, excess production cost and excess
//! payment small. This crate provides the market model and its regret metrics,
//! three pricing policies, the online regression oracle used by the contextual
//! policy, executable lower-bound constructions, and an experiment harness.

pub mod error;
pub mod hardness;
pub mod harness;
pub mod market;
pub mod oracle;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};

// The guide's snippets compile and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/market.md")]
    pub struct Market;
    #[doc = include_str!("../../../book/src/policies.md")]
    pub struct Policies;
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub struct Oracle;
    #[doc = include_str!("../../../book/src/contextual.md")]
    pub struct Contextual;
    #[doc = include_str!("../../../book/src/hardness.md")]
    pub struct Hardness;
    #[doc = include_str!("../../../book/src/harness.md")]
    pub struct Harness;
}
