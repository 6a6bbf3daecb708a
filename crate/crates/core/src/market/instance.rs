use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::equilibrium::{aggregate_production, EQ_TOL};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, uniform, Stream};

/// A demand sequence, either listed or generated from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Explicit(Vec<f64>),
    Generated(DemandGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum DemandGenerator {
    /// `d_t = lo + (hi − lo) u_t` with `u_t` from the demand stream.
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

/// A context sequence, either listed or generated from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContextSpec {
    Explicit(Vec<Vec<f64>>),
    Generated(ContextGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ContextGenerator {
    /// Each coordinate `lo + (hi − lo) u` from the context stream, coordinates in order.
    UniformCube { dim: usize, lo: f64, hi: f64 },
}

/// The JSON document describing an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub suppliers: Vec<CostSpec>,
    pub demands: DemandSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contexts: Option<ContextSpec>,
    /// `[d_lo, d_hi]`; derived from the demand spec when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_bounds: Option<[f64; 2]>,
    pub horizon: usize,
}

impl InstanceSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Materializes the instance at `horizon` (default: the spec's own). Listed
    /// sequences are truncated to the horizon; generated ones are drawn from `seed`.
    pub fn build(&self, horizon: Option<usize>, seed: u64) -> Result<MarketInstance> {
        let horizon = horizon.unwrap_or(self.horizon);
        let demands = match &self.demands {
            DemandSpec::Explicit(v) => take(v, horizon, "demands")?,
            DemandSpec::Generated(DemandGenerator::Constant { value }) => vec![*value; horizon],
            DemandSpec::Generated(DemandGenerator::Uniform { lo, hi }) => {
                let mut rng = stream_rng(seed, Stream::Demand);
                (0..horizon).map(|_| lo + (hi - lo) * uniform(&mut rng)).collect()
            }
        };
        let contexts = match &self.contexts {
            None => None,
            Some(ContextSpec::Explicit(v)) => Some(take(v, horizon, "contexts")?),
            Some(ContextSpec::Generated(ContextGenerator::UniformCube { dim, lo, hi })) => {
                let mut rng = stream_rng(seed, Stream::Context);
                Some(
                    (0..horizon)
                        .map(|_| (0..*dim).map(|_| lo + (hi - lo) * uniform(&mut rng)).collect())
                        .collect(),
                )
            }
        };
        let [lo, hi] = match self.demand_bounds {
            Some(b) => b,
            None => match &self.demands {
                DemandSpec::Generated(DemandGenerator::Uniform { lo, hi }) => [*lo, *hi],
                DemandSpec::Generated(DemandGenerator::Constant { value }) => [*value, *value],
                DemandSpec::Explicit(_) => [
                    demands.iter().copied().fold(f64::INFINITY, f64::min),
                    demands.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ],
            },
        };
        MarketInstance::new(self.suppliers.clone(), demands, contexts, (lo, hi))
    }
}

fn take<T: Clone>(v: &[T], horizon: usize, what: &str) -> Result<Vec<T>> {
    if v.len() < horizon {
        return Err(Error::InvalidInstance(format!(
            "{what} has {} entries, horizon is {horizon}",
            v.len()
        )));
    }
    Ok(v[..horizon].to_vec())
}

/// Suppliers, a demand sequence, an optional context sequence and the horizon.
///
/// Construction checks that every period's equilibrium price lies in `[0, 1]`,
/// i.e. that the suppliers can meet `d_t` at price 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    suppliers: Vec<CostSpec>,
    demands: Vec<f64>,
    contexts: Option<Vec<Vec<f64>>>,
    demand_lo: f64,
    demand_hi: f64,
}

impl MarketInstance {
    pub fn new(
        suppliers: Vec<CostSpec>,
        demands: Vec<f64>,
        contexts: Option<Vec<Vec<f64>>>,
        (demand_lo, demand_hi): (f64, f64),
    ) -> Result<Self> {
        if suppliers.is_empty() {
            return Err(Error::InvalidInstance("no suppliers".into()));
        }
        for s in &suppliers {
            s.validate()?;
        }
        if demands.is_empty() {
            return Err(Error::InvalidInstance("horizon must be at least 1".into()));
        }
        if !(demand_lo > 0.0 && demand_lo <= demand_hi && demand_hi.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "demand bounds must satisfy 0 < d_lo <= d_hi, got [{demand_lo}, {demand_hi}]"
            )));
        }
        if let Some(&d) = demands.iter().find(|d| !(**d >= demand_lo && **d <= demand_hi)) {
            return Err(Error::DemandOutOfRange {
                demand: d,
                lo: demand_lo,
                hi: demand_hi,
            });
        }
        let dim = suppliers.iter().find_map(|s| s.context_dim());
        match (&contexts, dim) {
            (Some(c), _) if c.len() != demands.len() => {
                return Err(Error::InvalidInstance(format!(
                    "{} contexts for {} periods",
                    c.len(),
                    demands.len()
                )))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidInstance(
                    "contextual suppliers need a context sequence".into(),
                ))
            }
            _ => {}
        }
        let inst = Self {
            suppliers,
            demands,
            contexts,
            demand_lo,
            demand_hi,
        };
        for t in 0..inst.horizon() {
            let top = aggregate_production(&inst.suppliers, 1.0, inst.context(t))?.total;
            let d = inst.demands[t];
            if top < d - EQ_TOL {
                return Err(Error::Infeasible {
                    demand: d,
                    max_production: top,
                });
            }
        }
        Ok(inst)
    }

    /// Fixed costs and the same demand in every period.
    pub fn fixed(suppliers: Vec<CostSpec>, demand: f64, horizon: usize) -> Result<Self> {
        Self::new(suppliers, vec![demand; horizon], None, (demand, demand))
    }

    pub fn suppliers(&self) -> &[CostSpec] {
        &self.suppliers
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn contexts(&self) -> Option<&[Vec<f64>]> {
        self.contexts.as_deref()
    }

    pub fn context(&self, t: usize) -> Option<&[f64]> {
        self.contexts.as_ref().map(|c| c[t].as_slice())
    }

    pub fn horizon(&self) -> usize {
        self.demands.len()
    }

    pub fn demand_bounds(&self) -> (f64, f64) {
        (self.demand_lo, self.demand_hi)
    }

    pub fn has_contexts(&self) -> bool {
        self.contexts.is_some()
    }

    /// The instance as a fully explicit spec.
    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            suppliers: self.suppliers.clone(),
            demands: DemandSpec::Explicit(self.demands.clone()),
            contexts: self.contexts.clone().map(ContextSpec::Explicit),
            demand_bounds: Some([self.demand_lo, self.demand_hi]),
            horizon: self.horizon(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_spec().to_json()
    }

    /// Parses an instance document; generated sequences are drawn from `seed`.
    pub fn from_json(s: &str, seed: u64) -> Result<Self> {
        InstanceSpec::from_json(s)?.build(None, seed)
    }
}
