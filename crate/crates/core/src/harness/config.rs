use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{simulate, RunRecord, SimOptions};
use crate::error::{Error, Result};
use crate::market::{InstanceSpec, MarketInstance};
use crate::oracle::{Aggregation, AggregatingForecaster, FunctionClass, LinearForecaster};
use crate::policy::{
    default_explore, default_grid_size, ConstantPrice, ContextualIgw, DemandGrid, DemandGridPolicy,
    FixedIntervalPolicy, IgwConfig, PricingPolicy,
};
use crate::rng::replication_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    FixedInterval,
    DemandGrid,
    ContextualIgw,
    ConstantPrice,
}

impl PolicyKind {
    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::FixedInterval => "fixed_interval",
            PolicyKind::DemandGrid => "demand_grid",
            PolicyKind::ContextualIgw => "contextual_igw",
            PolicyKind::ConstantPrice => "constant_price",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "fixed_interval" => Ok(PolicyKind::FixedInterval),
            "demand_grid" => Ok(PolicyKind::DemandGrid),
            "contextual_igw" => Ok(PolicyKind::ContextualIgw),
            "constant_price" => Ok(PolicyKind::ConstantPrice),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    FiniteClass,
    Linear,
}

/// Policy choice plus its overrides. Unset fields take the default tuning for
/// the horizon being run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Posted price of `constant_price`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    /// Demand-cell width of `demand_grid` (default `1/√T`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Freezing width of `demand_grid` cells (default `1/√T`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    /// `demand_grid`: one cell per distinct demand value instead of a uniform grid.
    #[serde(default)]
    pub support: bool,
    /// Price-grid size `K` of `contextual_igw` (default `⌈∛(T / ln |F|)⌉`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    /// Exploration parameter `γ` of `contextual_igw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore: Option<f64>,
    /// Confidence `δ` in the default `γ` (default 0.05).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Misspecification `ε` in the default `γ` (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misspec: Option<f64>,
    #[serde(default)]
    pub oracle: OracleKind,
    /// Function class of the finite-class oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<FunctionClass>,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Learning rate (default `2/B²`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Ridge and output bound of the linear oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            price: None,
            gamma: None,
            precision: None,
            support: false,
            grid_size: None,
            explore: None,
            delta: None,
            misspec: None,
            oracle: OracleKind::FiniteClass,
            class: None,
            aggregation: Aggregation::Aggregating,
            eta: None,
            ridge: None,
            bound: None,
        }
    }

    fn incompatible(&self, reason: impl Into<String>) -> Error {
        Error::Incompatible {
            policy: self.kind.id().into(),
            reason: reason.into(),
        }
    }

    /// Instantiates the policy for `instance`, checking that they fit together.
    pub fn build(&self, instance: &MarketInstance) -> Result<Box<dyn PricingPolicy>> {
        let t = instance.horizon();
        match self.kind {
            PolicyKind::ConstantPrice => {
                let p = self
                    .price
                    .ok_or_else(|| Error::Config("constant_price needs `price`".into()))?;
                Ok(Box::new(ConstantPrice::new(p)?))
            }
            PolicyKind::FixedInterval => {
                if instance.has_contexts() {
                    return Err(self.incompatible("instance has time-varying costs"));
                }
                let d0 = instance.demands()[0];
                if instance.demands().iter().any(|d| *d != d0) {
                    return Err(self.incompatible("instance demand is not fixed"));
                }
                Ok(Box::new(FixedIntervalPolicy::new(t)?))
            }
            PolicyKind::DemandGrid => {
                if instance.has_contexts() {
                    return Err(self.incompatible("instance has time-varying costs"));
                }
                let root_t = 1.0 / (t as f64).sqrt();
                let grid = if self.support {
                    DemandGrid::from_support(instance.demands())?
                } else {
                    let (lo, hi) = instance.demand_bounds();
                    DemandGrid::uniform(lo, hi, self.gamma.unwrap_or(root_t))?
                };
                Ok(Box::new(DemandGridPolicy::with_grid(
                    grid,
                    self.precision.unwrap_or(root_t),
                )?))
            }
            PolicyKind::ContextualIgw => {
                let contexts = instance
                    .contexts()
                    .ok_or_else(|| self.incompatible("instance has no contexts"))?;
                let delta = self.delta.unwrap_or(0.05);
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {delta}")));
                }
                let (oracle, class_size): (Box<dyn crate::oracle::RegressionOracle>, usize) =
                    match self.oracle {
                        OracleKind::FiniteClass => {
                            let class = self.class.clone().ok_or_else(|| {
                                Error::Config("contextual_igw needs a function `class`".into())
                            })?;
                            let n = class.len();
                            let eta = self.eta.unwrap_or(2.0 / (class.bound * class.bound));
                            (
                                Box::new(AggregatingForecaster::with_params(class, self.aggregation, eta)?),
                                n,
                            )
                        }
                        OracleKind::Linear => {
                            let dim = contexts[0].len();
                            let map = instance
                                .suppliers()
                                .iter()
                                .find_map(|s| match s {
                                    crate::market::CostSpec::ContextQuadratic { feature_map, .. } => {
                                        Some(*feature_map)
                                    }
                                    _ => None,
                                })
                                .unwrap_or(crate::market::FeatureMap::Identity);
                            let bound = self
                                .bound
                                .ok_or_else(|| Error::Config("linear oracle needs `bound`".into()))?;
                            (
                                Box::new(LinearForecaster::new(dim, map, self.ridge.unwrap_or(1.0), bound)?),
                                2,
                            )
                        }
                    };
                let k = self.grid_size.unwrap_or_else(|| default_grid_size(t, class_size));
                let explore = self.explore.unwrap_or_else(|| {
                    default_explore(k, t, class_size, self.misspec.unwrap_or(0.0), delta)
                });
                Ok(Box::new(ContextualIgw::new(
                    oracle,
                    IgwConfig {
                        grid_size: k,
                        explore,
                    },
                )?))
            }
        }
    }
}

/// The instance, given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path { path: PathBuf },
    Inline(InstanceSpec),
}

/// One JSON document describing an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policy: PolicyConfig,
    /// Ascending horizons; empty means the instance's own horizon.
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub keep_trajectory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, policy: PolicyConfig) -> Self {
        Self {
            instance: InstanceSource::Inline(instance),
            policy,
            horizons: Vec::new(),
            replications: 1,
            seed: 0,
            noise: 0.0,
            keep_trajectory: false,
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config file; a relative instance path is resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let InstanceSource::Path { path: p } = &mut cfg.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn instance_spec(&self) -> Result<InstanceSpec> {
        match &self.instance {
            InstanceSource::Inline(s) => Ok(s.clone()),
            InstanceSource::Path { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                InstanceSpec::from_json(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.horizons.iter().any(|t| *t == 0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("horizons must be strictly ascending".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("noise must be a nonnegative number".into()));
        }
        Ok(())
    }
}

/// Runs every `(horizon, replication)` pair, in parallel, returning records
/// ordered by horizon then replication. Replication `r` uses seed `seed + r`
/// for both instance generation and the policy's randomness.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let spec = config.instance_spec()?;
    let horizons = if config.horizons.is_empty() {
        vec![spec.horizon]
    } else {
        config.horizons.clone()
    };
    let opts = SimOptions {
        keep_trajectory: config.keep_trajectory,
        noise: config.noise,
    };
    let jobs: Vec<(usize, usize)> = horizons
        .iter()
        .flat_map(|&t| (0..config.replications).map(move |r| (t, r)))
        .collect();
    jobs.par_iter()
        .map(|&(t, r)| {
            let seed = replication_seed(config.seed, r as u64);
            let instance = spec.build(Some(t), seed)?;
            let mut policy = config.policy.build(&instance)?;
            let mut rec = simulate(&instance, policy.as_mut(), seed, &opts)?;
            rec.replication = r;
            Ok(rec)
        })
        .collect()
}
