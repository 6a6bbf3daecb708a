use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use crate::error::{Error, Result};

/// Production-mismatch tolerance of the equilibrium bisection.
pub const EQ_TOL: f64 = 1e-10;
/// Iteration cap of the equilibrium bisection.
pub const EQ_MAX_ITER: usize = 200;

/// Per-supplier best responses at one posted price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub per_supplier: Vec<f64>,
    pub total: f64,
}

fn tag_supplier(e: Error, i: usize) -> Error {
    match e {
        Error::MissingContext { .. } => Error::MissingContext { supplier: i },
        other => other,
    }
}

/// Best response of every supplier at price `p`, and their sum.
pub fn aggregate_production(
    suppliers: &[CostSpec],
    p: f64,
    theta: Option<&[f64]>,
) -> Result<Allocation> {
    let per_supplier = suppliers
        .iter()
        .enumerate()
        .map(|(i, s)| s.best_response(p, theta).map_err(|e| tag_supplier(e, i)))
        .collect::<Result<Vec<_>>>()?;
    let total = per_supplier.iter().sum();
    Ok(Allocation {
        per_supplier,
        total,
    })
}

fn total_at(suppliers: &[CostSpec], p: f64, theta: Option<&[f64]>) -> Result<f64> {
    let mut total = 0.0;
    for (i, s) in suppliers.iter().enumerate() {
        total += s.best_response(p, theta).map_err(|e| tag_supplier(e, i))?;
    }
    Ok(total)
}

/// Market-clearing price for demand `d`: bisection on the non-decreasing map
/// `p ↦ Σ_i x_i*(p)` until the production mismatch is at most [`EQ_TOL`].
///
/// At the returned price the best-response allocation is the KKT point of
/// `min Σ c_i(x_i) s.t. Σ x_i = d`, so it is also the cheapest allocation
/// and the smallest payment that clears the market.
pub fn equilibrium_price(suppliers: &[CostSpec], d: f64, theta: Option<&[f64]>) -> Result<f64> {
    if suppliers.is_empty() {
        return Err(Error::InvalidInstance("no suppliers".into()));
    }
    if let Some(i) = suppliers.iter().position(|s| !s.is_strongly_convex()) {
        return Err(Error::NotStronglyConvex { supplier: i });
    }
    let top = total_at(suppliers, 1.0, theta)?;
    if top < d - EQ_TOL {
        return Err(Error::Infeasible {
            demand: d,
            max_production: top,
        });
    }
    if (top - d).abs() <= EQ_TOL {
        return Ok(1.0);
    }
    if total_at(suppliers, 0.0, theta)? >= d - EQ_TOL {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..EQ_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let m = total_at(suppliers, mid, theta)?;
        if (m - d).abs() <= EQ_TOL {
            return Ok(mid);
        }
        if m < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: EQ_MAX_ITER,
    })
}

/// The full-information reference a period's regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub price: f64,
    /// `Σ_i c_i(x_i*(p*))`.
    pub cost: f64,
    /// `Σ_i p* x_i*(p*)`.
    pub payment: f64,
}

/// Equilibrium price and the cost/payment of the equilibrium allocation.
///
/// Strongly convex markets go through [`equilibrium_price`]. Markets made only
/// of linear suppliers are cleared analytically in merit order: the equilibrium
/// price is the unit cost of the marginal supplier and exactly `d` is produced.
/// Mixed markets are rejected.
pub fn equilibrium_baseline(
    suppliers: &[CostSpec],
    d: f64,
    theta: Option<&[f64]>,
) -> Result<Baseline> {
    let linear = suppliers
        .iter()
        .filter(|s| matches!(s, CostSpec::Linear { .. }))
        .count();
    if linear > 0 && linear == suppliers.len() {
        return linear_merit_order(suppliers, d);
    }
    let price = equilibrium_price(suppliers, d, theta)?;
    let alloc = aggregate_production(suppliers, price, theta)?;
    let mut cost = 0.0;
    let mut payment = 0.0;
    for (s, &x) in suppliers.iter().zip(&alloc.per_supplier) {
        cost += s.cost(x, theta)?;
        payment += price * x;
    }
    Ok(Baseline {
        price,
        cost,
        payment,
    })
}

fn linear_merit_order(suppliers: &[CostSpec], d: f64) -> Result<Baseline> {
    let mut units: Vec<(f64, f64)> = suppliers
        .iter()
        .map(|s| match s {
            CostSpec::Linear { c, cap } => (*c, *cap),
            _ => unreachable!("caller checked the family"),
        })
        .collect();
    units.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut remaining = d;
    let mut price = 0.0;
    let mut cost = 0.0;
    for (c, cap) in &units {
        if remaining <= 0.0 {
            break;
        }
        let x = remaining.min(*cap);
        cost += c * x;
        price = *c;
        remaining -= x;
    }
    let capacity: f64 = units.iter().map(|u| u.1).sum();
    if remaining > 0.0 || price > 1.0 {
        return Err(Error::Infeasible {
            demand: d,
            max_production: capacity,
        });
    }
    Ok(Baseline {
        price,
        cost,
        payment: price * d,
    })
}

/// Largest violation of the first-order conditions at price `p`: active suppliers
/// must have `c_i'(x_i) = p`, idle ones `c_i'(0) ≥ p`.
pub fn kkt_violation(suppliers: &[CostSpec], p: f64, theta: Option<&[f64]>) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, s) in suppliers.iter().enumerate() {
        let x = s.best_response(p, theta).map_err(|e| tag_supplier(e, i))?;
        let v = if x > 0.0 {
            (s.marginal_cost(x, theta)? - p).abs()
        } else {
            (p - s.marginal_cost(0.0, theta)?).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Sensitivity constants that let the proxy regret dominate the three metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    /// `Σ_i 1/μ_i`, the slope of aggregate production in price.
    pub production_slope: f64,
    /// Price in demand: `|p − p*| ≤ price_in_demand · |x*(p) − d|`.
    pub price_in_demand: f64,
    /// Payment regret in price: `X̄ + Σ_i 1/μ_i` with `X̄` the production at price 1.
    pub payment_in_price: f64,
    /// Cost regret in price: `max_i c_i'(x_i*(1)) · Σ_i 1/μ_i`.
    pub cost_in_price: f64,
}

/// Constants for markets where every supplier is quadratic with zero marginal-cost
/// intercept (plain or contextual). `None` otherwise: with positive intercepts the
/// aggregate supply curve is flat near zero and no finite price-in-demand constant exists.
pub fn lipschitz_constants(
    suppliers: &[CostSpec],
    theta: Option<&[f64]>,
) -> Result<Option<LipschitzConstants>> {
    let mut slope = 0.0;
    let mut top = 0.0;
    let mut marginal_top = 0.0f64;
    for (i, s) in suppliers.iter().enumerate() {
        if s.intercept() != 0.0 || !s.is_strongly_convex() {
            return Ok(None);
        }
        let mu = s
            .modulus(theta)
            .map_err(|e| tag_supplier(e, i))?
            .expect("strongly convex");
        slope += 1.0 / mu;
        let x1 = s.best_response(1.0, theta)?;
        top += x1;
        marginal_top = marginal_top.max(s.marginal_cost(x1, theta)?);
    }
    if suppliers.is_empty() {
        return Ok(None);
    }
    Ok(Some(LipschitzConstants {
        production_slope: slope,
        price_in_demand: 1.0 / slope,
        payment_in_price: top + slope,
        cost_in_price: marginal_top * slope,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(mu: f64, a: f64) -> CostSpec {
        CostSpec::quadratic(mu, a)
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate_production(&[q(1.0, 0.0), q(2.0, 0.0)], 1.0, None).unwrap();
        assert_eq!(a.total, 1.5);
        assert_eq!(a.per_supplier, vec![1.0, 0.5]);

        let a = aggregate_production(&[q(0.3, 0.0), q(1.0, 0.2), q(0.7, 0.0)], 0.0, None).unwrap();
        assert_eq!(a.total, 0.0);

        let a = aggregate_production(&[q(0.25, 0.0)], 0.125, None).unwrap();
        assert_eq!(a.total, 0.5);
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(equilibrium_price(&[q(0.25, 0.0)], 1.0, None).unwrap(), 0.25);
        assert_eq!(equilibrium_price(&[q(0.125, 0.0)], 1.0, None).unwrap(), 0.125);
        let two = [q(1.0, 0.0), q(2.0, 0.0)];
        // Closed form d / Σ 1/μ_i.
        assert_eq!(equilibrium_price(&two, 1.5, None).unwrap(), 1.0);
        let p = equilibrium_price(&two, 0.9, None).unwrap();
        assert!((p - 0.9 / 1.5).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_with_idle_supplier() {
        // Second supplier only starts producing above 0.8.
        let s = [q(1.0, 0.0), q(1.0, 0.8)];
        let p = equilibrium_price(&s, 0.5, None).unwrap();
        assert!((p - 0.5).abs() < 1e-10);
        assert!(kkt_violation(&s, p, None).unwrap() < EQ_TOL);
        let p = equilibrium_price(&s, 1.0, None).unwrap();
        assert!((p - 0.9).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_errors() {
        assert!(matches!(
            equilibrium_price(&[q(1.0, 0.0)], 2.0, None),
            Err(Error::Infeasible { .. })
        ));
        assert_eq!(
            equilibrium_price(&[q(1.0, 0.0), CostSpec::linear(0.5, 1.0)], 0.5, None),
            Err(Error::NotStronglyConvex { supplier: 1 })
        );
    }

    #[test]
    fn linear_baseline_is_merit_order() {
        let b = equilibrium_baseline(&[CostSpec::linear(0.3, 2.0)], 1.0, None).unwrap();
        assert_eq!(b.price, 0.3);
        assert!((b.cost - 0.3).abs() < 1e-15);
        assert!((b.payment - 0.3).abs() < 1e-15);

        let b = equilibrium_baseline(
            &[CostSpec::linear(0.6, 1.0), CostSpec::linear(0.2, 0.5)],
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(b.price, 0.6);
        assert!((b.cost - (0.1 + 0.3)).abs() < 1e-15);
        assert!((b.payment - 0.6).abs() < 1e-15);
        assert!(equilibrium_baseline(&[CostSpec::linear(0.3, 0.5)], 1.0, None).is_err());
    }

    #[test]
    fn missing_context_names_the_supplier() {
        use crate::market::FeatureMap;
        let s = [q(1.0, 0.0), CostSpec::context_quadratic(vec![1.0], FeatureMap::Identity)];
        assert_eq!(
            aggregate_production(&s, 0.5, None),
            Err(Error::MissingContext { supplier: 1 })
        );
    }

    #[test]
    fn lipschitz_constants_zero_intercept() {
        let c = lipschitz_constants(&[q(0.5, 0.0), q(1.0, 0.0)], None)
            .unwrap()
            .unwrap();
        assert_eq!(c.production_slope, 3.0);
        assert!((c.price_in_demand - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.payment_in_price, 6.0);
        assert_eq!(c.cost_in_price, 3.0);
        assert!(lipschitz_constants(&[q(0.5, 0.1)], None).unwrap().is_none());
    }
}
