use super::{PricingPolicy, Proposal, Round};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Partition of the demand range into cells, each with its own price search.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandGrid {
    /// Cells `[d_lo + kγ, d_lo + (k+1)γ)` for `k = 0..K_d`, the last one closed.
    Uniform {
        d_lo: f64,
        d_hi: f64,
        gamma: f64,
        cells: usize,
    },
    /// One cell per distinct demand value, keyed by that value.
    Support { values: Vec<f64> },
}

impl DemandGrid {
    pub fn uniform(d_lo: f64, d_hi: f64, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        if !(d_lo.is_finite() && d_hi.is_finite() && d_lo <= d_hi) {
            return Err(Error::InvalidParameter(format!(
                "demand bounds [{d_lo}, {d_hi}] are not an interval"
            )));
        }
        let ratio = (d_hi - d_lo) / gamma;
        // Absorbs rounding when the range is an exact multiple of gamma.
        let cells = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
        .max(1);
        Ok(DemandGrid::Uniform {
            d_lo,
            d_hi,
            gamma,
            cells,
        })
    }

    /// The small-support variant: one cell per distinct value in `demands`.
    pub fn from_support(demands: &[f64]) -> Result<Self> {
        let mut values: Vec<f64> = demands.to_vec();
        if values.is_empty() || values.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter("demand support must be finite and non-empty".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(DemandGrid::Support { values })
    }

    pub fn len(&self) -> usize {
        match self {
            DemandGrid::Uniform { cells, .. } => *cells,
            DemandGrid::Support { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One-based index `k` of the cell containing `d`.
    pub fn interval_index(&self, d: f64) -> Result<usize> {
        match self {
            DemandGrid::Uniform {
                d_lo,
                d_hi,
                gamma,
                cells,
            } => {
                if !(d >= *d_lo && d <= *d_hi) {
                    return Err(Error::DemandOutOfRange {
                        demand: d,
                        lo: *d_lo,
                        hi: *d_hi,
                    });
                }
                let k = ((d - d_lo) / gamma).floor() as usize + 1;
                Ok(k.min(*cells))
            }
            DemandGrid::Support { values } => values
                .binary_search_by(|v| v.total_cmp(&d))
                .map(|i| i + 1)
                .map_err(|_| Error::DemandOutOfRange {
                    demand: d,
                    lo: values[0],
                    hi: values[values.len() - 1],
                }),
        }
    }

    /// Lower demand bound `a_k` of one-based cell `k`.
    pub fn lower_bound(&self, k: usize) -> f64 {
        match self {
            DemandGrid::Uniform { d_lo, gamma, .. } => d_lo + (k - 1) as f64 * gamma,
            DemandGrid::Support { values } => values[k - 1],
        }
    }
}

/// Search state of one demand cell: feasible set `(lo, hi]`, current price and precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub lo: f64,
    pub hi: f64,
    pub price: f64,
    pub eps: f64,
    pub shrinks: usize,
}

impl CellState {
    fn fresh() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            price: 0.0,
            eps: 0.5,
            shrinks: 0,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-demand-cell price search for time-varying demand and fixed costs.
///
/// Each cell runs a search against its lower demand bound `a_k`: the price
/// climbs by `ε` while production stays below `a_k`; once it reaches `a_k` at
/// price `q`, the feasible set becomes `(q − ε, q]`, the price drops to `q − ε`
/// and `ε ← ε²`. A cell whose set is at most `precision` wide is frozen.
///
/// Invariant with exact responses: `p*(a_k) ∈ (lo_k, hi_k]` and every posted
/// price in cell `k` is at most `p*(a_k) + ε_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGridPolicy {
    grid: DemandGrid,
    cells: Vec<CellState>,
    precision: f64,
}

impl DemandGridPolicy {
    /// The default tuning: `γ = 1/√T` and freezing precision `1/√T`.
    pub fn new(d_lo: f64, d_hi: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let g = 1.0 / (horizon as f64).sqrt();
        Self::with_grid(DemandGrid::uniform(d_lo, d_hi, g)?, g)
    }

    pub fn with_grid(grid: DemandGrid, precision: f64) -> Result<Self> {
        if !(precision.is_finite() && precision > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "precision must be > 0, got {precision}"
            )));
        }
        let cells = vec![CellState::fresh(); grid.len()];
        Ok(Self {
            grid,
            cells,
            precision,
        })
    }

    pub fn grid(&self) -> &DemandGrid {
        &self.grid
    }

    /// State of one-based cell `k`.
    pub fn cell(&self, k: usize) -> &CellState {
        &self.cells[k - 1]
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn total_shrinks(&self) -> usize {
        self.cells.iter().map(|c| c.shrinks).sum()
    }

    pub fn price_for(&self, d: f64) -> Result<f64> {
        Ok(self.cells[self.grid.interval_index(d)? - 1].price)
    }

    /// Updates the cell of `d` after observing `production` at its current price.
    pub fn observe_production(&mut self, d: f64, production: f64) -> Result<()> {
        let k = self.grid.interval_index(d)?;
        let a_k = self.grid.lower_bound(k);
        let cell = &mut self.cells[k - 1];
        if cell.width() <= self.precision {
            return Ok(());
        }
        if production >= a_k {
            let lo = (cell.price - cell.eps).max(0.0);
            cell.hi = cell.price;
            cell.lo = lo;
            cell.price = lo;
            cell.eps *= cell.eps;
            cell.shrinks += 1;
        } else {
            cell.price = (cell.price + cell.eps).min(1.0);
        }
        Ok(())
    }

    /// Offers the current price for `d`, then feeds back the production it elicited.
    pub fn demand_step(&mut self, d: f64, supply: impl FnOnce(f64) -> f64) -> Result<f64> {
        let p = self.price_for(d)?;
        self.observe_production(d, supply(p))?;
        Ok(p)
    }
}

impl PricingPolicy for DemandGridPolicy {
    fn name(&self) -> &'static str {
        "demand_grid"
    }

    fn propose(&mut self, round: &Round<'_>, _rng: &mut SimRng) -> Result<Proposal> {
        Ok(Proposal::deterministic(self.price_for(round.demand)?))
    }

    fn observe(&mut self, round: &Round<'_>, _price: f64, production: f64) -> Result<()> {
        self.observe_production(round.demand, production)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{aggregate_production, equilibrium_baseline, step_increment, CostSpec};
    use crate::rng::{stream_rng, uniform, Stream};
    use proptest::prelude::*;

    #[test]
    fn interval_index_examples() {
        let g = DemandGrid::uniform(0.5, 1.5, 0.25).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.interval_index(0.8).unwrap(), 2);
        assert_eq!(g.interval_index(0.5).unwrap(), 1);
        assert_eq!(g.interval_index(1.5).unwrap(), 4);
        assert!(g.interval_index(1.6).is_err());
        assert_eq!(DemandGrid::uniform(0.7, 0.7, 0.1).unwrap().len(), 1);
        // 1/0.1 is not exactly 10 in binary.
        assert_eq!(DemandGrid::uniform(0.0, 1.0, 0.1).unwrap().len(), 10);
    }

    #[test]
    fn shrink_step() {
        let g = DemandGrid::Support { values: vec![0.9] };
        let mut pol = DemandGridPolicy::with_grid(g, 1e-3).unwrap();
        let p = pol.demand_step(0.9, |p| p / 0.3).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(pol.cell(1).price, 0.5);
        assert_eq!((pol.cell(1).lo, pol.cell(1).hi), (0.0, 1.0));
        let p = pol.demand_step(0.9, |p| p / 0.3).unwrap();
        assert_eq!(p, 0.5);
        let c = pol.cell(1);
        assert_eq!((c.lo, c.hi, c.price, c.eps), (0.0, 0.5, 0.0, 0.25));
    }

    #[test]
    fn frozen_cell_keeps_its_price() {
        let g = DemandGrid::Support { values: vec![0.9] };
        let mut pol = DemandGridPolicy::with_grid(g, 0.3).unwrap();
        // Offers 0, 0.5 | 0, 0.25, 0.5 then S = (0.25, 0.5].
        for _ in 0..5 {
            pol.demand_step(0.9, |p| p / 0.3).unwrap();
        }
        assert_eq!((pol.cell(1).lo, pol.cell(1).hi), (0.25, 0.5));
        let frozen = *pol.cell(1);
        for _ in 0..10 {
            assert_eq!(pol.demand_step(0.9, |_| 100.0).unwrap(), frozen.price);
        }
        assert_eq!(*pol.cell(1), frozen);
    }

    #[test]
    fn support_variant_indexes_exact_values() {
        let g = DemandGrid::from_support(&[0.8, 0.6, 0.8]).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.interval_index(0.8).unwrap(), 2);
        assert!(g.interval_index(0.7).is_err());
    }

    proptest! {
        #[test]
        fn containment_and_under_pricing(
            mus in prop::collection::vec(0.3f64..1.0, 1..4),
            seed in any::<u64>(),
            log_t in 6u32..14,
        ) {
            let sup: Vec<_> = mus.iter().map(|&m| CostSpec::quadratic(m, 0.0)).collect();
            let t = 1usize << log_t;
            let (lo, hi) = (0.3, 1.0);
            let mut pol = DemandGridPolicy::new(lo, hi, t).unwrap();
            let mut rng = stream_rng(seed, Stream::Demand);
            for _ in 0..t {
                let d = lo + (hi - lo) * uniform(&mut rng);
                let k = pol.grid().interval_index(d).unwrap();
                let a_k = pol.grid().lower_bound(k);
                let eps_before = pol.cell(k).eps;
                let shrinks_before = pol.cell(k).shrinks;
                let p = pol.price_for(d).unwrap();
                let x = aggregate_production(&sup, p, None).unwrap().total;
                pol.observe_production(d, x).unwrap();

                let b = equilibrium_baseline(&sup, d, None).unwrap();
                prop_assert!(p <= b.price + eps_before + 1e-9);
                let (inc, _) = step_increment(&sup, d, None, p, &b).unwrap();
                if pol.cell(k).shrinks == shrinks_before {
                    prop_assert!(inc.cost <= 1e-9 && inc.payment <= 1e-9);
                }
                let pa = equilibrium_baseline(&sup, a_k, None).unwrap().price;
                let c = pol.cell(k);
                prop_assert!(c.lo - 1e-9 <= pa && pa <= c.hi + 1e-9);
            }
            let k_d = pol.grid().len();
            let bound = k_d * (((t as f64).sqrt().log2().log2().ceil().max(0.0)) as usize + 2);
            prop_assert!(pol.total_shrinks() <= bound);
        }
    }
}
