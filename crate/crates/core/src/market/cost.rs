use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named feature maps applied to a context vector before it meets a
/// [`CostSpec::ContextQuadratic`] parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    /// `σ(θ) = θ`.
    Identity,
    /// Coordinate-wise `σ(θ)_j = ln(1 + e^{θ_j})`, positive for moderate inputs.
    Softplus,
}

impl FeatureMap {
    pub fn id(self) -> &'static str {
        match self {
            FeatureMap::Identity => "identity",
            FeatureMap::Softplus => "softplus",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "identity" => Ok(FeatureMap::Identity),
            "softplus" => Ok(FeatureMap::Softplus),
            other => Err(Error::InvalidCost(format!("unknown feature map `{other}`"))),
        }
    }

    pub fn apply_one(self, v: f64) -> f64 {
        match self {
            FeatureMap::Identity => v,
            // Stable for large |v|.
            FeatureMap::Softplus => v.max(0.0) + (-v.abs()).exp().ln_1p(),
        }
    }

    /// Both registered maps are coordinate-wise non-decreasing.
    pub fn is_monotone(self) -> bool {
        true
    }

    /// `⟨phi, σ(θ)⟩`.
    pub fn inner(self, phi: &[f64], theta: &[f64]) -> Result<f64> {
        if phi.len() != theta.len() {
            return Err(Error::ContextDimension {
                expected: phi.len(),
                got: theta.len(),
            });
        }
        Ok(phi
            .iter()
            .zip(theta)
            .map(|(w, &v)| w * self.apply_one(v))
            .sum())
    }
}

/// A supplier's cost-function family.
///
/// All quantities are in normalized units: prices live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostSpec {
    /// `c(x) = (mu / 2) x² + a x`, strongly convex with modulus `mu`.
    Quadratic { mu: f64, a: f64 },
    /// `c(x) = c x` with production capped at `cap`. Not strongly convex.
    Linear { c: f64, cap: f64 },
    /// `c(x; θ) = x² / (2 ⟨phi, σ(θ)⟩)`.
    ContextQuadratic { phi: Vec<f64>, feature_map: FeatureMap },
}

impl CostSpec {
    pub fn quadratic(mu: f64, a: f64) -> Self {
        CostSpec::Quadratic { mu, a }
    }

    pub fn linear(c: f64, cap: f64) -> Self {
        CostSpec::Linear { c, cap }
    }

    pub fn context_quadratic(phi: Vec<f64>, feature_map: FeatureMap) -> Self {
        CostSpec::ContextQuadratic { phi, feature_map }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Quadratic { mu, a } => {
                if !(mu.is_finite() && *mu > 0.0) {
                    return Err(Error::InvalidCost(format!("quadratic mu must be > 0, got {mu}")));
                }
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::InvalidCost(format!("quadratic a must be >= 0, got {a}")));
                }
            }
            CostSpec::Linear { c, cap } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidCost(format!("linear c must be > 0, got {c}")));
                }
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(Error::InvalidCost(format!("linear cap must be > 0, got {cap}")));
                }
            }
            CostSpec::ContextQuadratic { phi, .. } => {
                if phi.is_empty() || phi.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidCost(
                        "context_quadratic phi must be a non-empty finite vector".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn needs_context(&self) -> bool {
        matches!(self, CostSpec::ContextQuadratic { .. })
    }

    pub fn is_strongly_convex(&self) -> bool {
        !matches!(self, CostSpec::Linear { .. })
    }

    /// Context dimension expected by a contextual family.
    pub fn context_dim(&self) -> Option<usize> {
        match self {
            CostSpec::ContextQuadratic { phi, .. } => Some(phi.len()),
            _ => None,
        }
    }

    /// `⟨phi, σ(θ)⟩` for the contextual family; rejects non-positive values.
    fn context_scale(phi: &[f64], map: FeatureMap, theta: &[f64]) -> Result<f64> {
        let s = map.inner(phi, theta)?;
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidCost(format!(
                "<phi, sigma(theta)> must be positive, got {s}"
            )));
        }
        Ok(s)
    }

    fn theta<'a>(theta: Option<&'a [f64]>, supplier: usize) -> Result<&'a [f64]> {
        theta.ok_or(Error::MissingContext { supplier })
    }

    /// Production cost `c(x)`.
    pub fn cost(&self, x: f64, theta: Option<&[f64]>) -> Result<f64> {
        Ok(match self {
            CostSpec::Quadratic { mu, a } => 0.5 * mu * x * x + a * x,
            CostSpec::Linear { c, .. } => c * x,
            CostSpec::ContextQuadratic { phi, feature_map } => {
                let s = Self::context_scale(phi, *feature_map, Self::theta(theta, 0)?)?;
                x * x / (2.0 * s)
            }
        })
    }

    /// Marginal cost `c'(x)`.
    pub fn marginal_cost(&self, x: f64, theta: Option<&[f64]>) -> Result<f64> {
        Ok(match self {
            CostSpec::Quadratic { mu, a } => mu * x + a,
            CostSpec::Linear { c, .. } => *c,
            CostSpec::ContextQuadratic { phi, feature_map } => {
                x / Self::context_scale(phi, *feature_map, Self::theta(theta, 0)?)?
            }
        })
    }

    /// Strong-convexity modulus at context `theta`; `None` for the linear family.
    pub fn modulus(&self, theta: Option<&[f64]>) -> Result<Option<f64>> {
        Ok(match self {
            CostSpec::Quadratic { mu, .. } => Some(*mu),
            CostSpec::Linear { .. } => None,
            CostSpec::ContextQuadratic { phi, feature_map } => {
                Some(1.0 / Self::context_scale(phi, *feature_map, Self::theta(theta, 0)?)?)
            }
        })
    }

    /// Marginal-cost intercept `c'(0)`.
    pub fn intercept(&self) -> f64 {
        match self {
            CostSpec::Quadratic { a, .. } => *a,
            CostSpec::Linear { c, .. } => *c,
            CostSpec::ContextQuadratic { .. } => 0.0,
        }
    }

    /// Profit-maximizing production `argmax_{x ≥ 0} p x − c(x)` at posted price `p`.
    ///
    /// The linear family produces its cap at `p = c`.
    pub fn best_response(&self, p: f64, theta: Option<&[f64]>) -> Result<f64> {
        check_price(p)?;
        Ok(match self {
            CostSpec::Quadratic { mu, a } => ((p - a) / mu).max(0.0),
            CostSpec::Linear { c, cap } => {
                if p < *c {
                    0.0
                } else {
                    *cap
                }
            }
            CostSpec::ContextQuadratic { phi, feature_map } => {
                p * Self::context_scale(phi, *feature_map, Self::theta(theta, 0)?)?
            }
        })
    }
}

pub(crate) fn check_price(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::PriceOutOfRange(p))
    }
}
