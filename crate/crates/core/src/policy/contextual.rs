use rand::Rng;

use super::{PricingPolicy, Proposal, Round};
use crate::error::{Error, Result};
use crate::oracle::RegressionOracle;
use crate::rng::SimRng;

/// `K` prices `0 = p_1 < … < p_K = 1` with spacing `1/(K − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    prices: Vec<f64>,
}

impl PriceGrid {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("price grid needs K >= 2, got {k}")));
        }
        let step = (k - 1) as f64;
        Ok(Self {
            prices: (0..k).map(|i| i as f64 / step).collect(),
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// `K = ⌈∛(T / ln |F|)⌉`, at least 2.
pub fn default_grid_size(horizon: usize, class_size: usize) -> usize {
    let log_f = (class_size.max(2) as f64).ln();
    ((horizon as f64 / log_f).cbrt().ceil() as usize).max(2)
}

/// `γ = √(K T / (ln |F| + ε² T + ln(1/δ)))` for a class misspecified by at most `ε`.
pub fn default_explore(k: usize, horizon: usize, class_size: usize, misspec: f64, delta: f64) -> f64 {
    let t = horizon as f64;
    let denom = (class_size.max(2) as f64).ln() + misspec * misspec * t + (1.0 / delta).ln();
    (k as f64 * t / denom).sqrt()
}

/// Inverse-gap-weighted sampling distribution over the price grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IgwDistribution {
    pub probs: Vec<f64>,
    pub lambda: f64,
}

impl IgwDistribution {
    /// Inverse-CDF draw: the first index whose cumulative probability exceeds `u`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// `probs_i = 1/(λ + 2γ·gaps_i)` with `λ ∈ (0, K]` chosen so the probabilities sum to one.
///
/// `Σ_i 1/(λ + 2γ gaps_i)` is strictly decreasing in `λ`, unbounded as `λ → 0⁺`
/// (some gap is zero) and at most one at `λ = K`, so bisection finds the root.
pub fn igw_distribution(gaps: &[f64], gamma: f64) -> Result<IgwDistribution> {
    if gaps.is_empty() {
        return Err(Error::InvalidParameter("empty gap vector".into()));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    if gaps.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::InvalidParameter("gaps must be finite and nonnegative".into()));
    }
    if gaps.iter().all(|g| *g > 0.0) {
        return Err(Error::InvalidParameter("the smallest gap must be zero".into()));
    }
    let k = gaps.len() as f64;
    let mass = |lambda: f64| gaps.iter().map(|g| 1.0 / (lambda + 2.0 * gamma * g)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, k);
    // Exact ties at λ = K (all gaps zero) can round just below one.
    let lambda = if mass(k) >= 1.0 - 1e-12 {
        k
    } else {
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut probs: Vec<f64> = gaps.iter().map(|g| 1.0 / (lambda + 2.0 * gamma * g)).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(IgwDistribution { probs, lambda })
}

/// Index minimizing `|estimates_i − d|`, ties to the lower index.
pub fn greedy_index(estimates: &[f64], d: f64) -> usize {
    let mut best = 0;
    for (i, e) in estimates.iter().enumerate() {
        if (e - d).abs() < (estimates[best] - d).abs() {
            best = i;
        }
    }
    best
}

/// Tuning of the contextual policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgwConfig {
    pub grid_size: usize,
    pub explore: f64,
}

impl IgwConfig {
    /// Default `K` and `γ` for a well-specified class of `class_size` members.
    pub fn defaults(horizon: usize, class_size: usize, delta: f64) -> Self {
        let k = default_grid_size(horizon, class_size);
        Self {
            grid_size: k,
            explore: default_explore(k, horizon, class_size, 0.0, delta),
        }
    }
}

/// Inverse gap weighting over a uniform price grid, driven by a regression oracle
/// that predicts production from `(price, context)`.
pub struct ContextualIgw {
    grid: PriceGrid,
    explore: f64,
    oracle: Box<dyn RegressionOracle>,
    last: Option<IgwDistribution>,
}

impl std::fmt::Debug for ContextualIgw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContextualIgw")
            .field("grid_size", &self.grid.len())
            .field("explore", &self.explore)
            .finish_non_exhaustive()
    }
}

impl ContextualIgw {
    pub fn new(oracle: Box<dyn RegressionOracle>, config: IgwConfig) -> Result<Self> {
        if !(config.explore.is_finite() && config.explore > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exploration parameter must be > 0, got {}",
                config.explore
            )));
        }
        Ok(Self {
            grid: PriceGrid::new(config.grid_size)?,
            explore: config.explore,
            oracle,
            last: None,
        })
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn explore(&self) -> f64 {
        self.explore
    }

    pub fn oracle(&self) -> &dyn RegressionOracle {
        self.oracle.as_ref()
    }

    /// Oracle estimates of production at every grid price.
    pub fn estimates(&self, theta: Option<&[f64]>) -> Result<Vec<f64>> {
        self.grid.prices().iter().map(|&p| self.oracle.predict(p, theta)).collect()
    }

    /// The sampling distribution for demand `d` at context `theta`.
    pub fn distribution(&self, d: f64, theta: Option<&[f64]>) -> Result<IgwDistribution> {
        let est = self.estimates(theta)?;
        let g = greedy_index(&est, d);
        let best = (est[g] - d).abs();
        let gaps: Vec<f64> = est.iter().map(|e| ((e - d).abs() - best).max(0.0)).collect();
        igw_distribution(&gaps, self.explore)
    }

    /// The distribution used in the most recent [`PricingPolicy::propose`].
    pub fn last_distribution(&self) -> Option<&IgwDistribution> {
        self.last.as_ref()
    }
}

impl PricingPolicy for ContextualIgw {
    fn name(&self) -> &'static str {
        "contextual_igw"
    }

    fn propose(&mut self, round: &Round<'_>, rng: &mut SimRng) -> Result<Proposal> {
        let dist = self.distribution(round.demand, round.context)?;
        let i = dist.sample_index(rng.gen::<f64>());
        let lottery = self
            .grid
            .prices()
            .iter()
            .copied()
            .zip(dist.probs.iter().copied())
            .collect();
        self.last = Some(dist);
        Ok(Proposal {
            price: self.grid.prices()[i],
            lottery: Some(lottery),
        })
    }

    fn observe(&mut self, round: &Round<'_>, price: f64, production: f64) -> Result<()> {
        self.oracle.update(price, round.context, production)
    }
}
