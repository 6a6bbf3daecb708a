//! Online regression oracles predicting aggregate production from `(price, context)`.
//!
//! The finite-class [`AggregatingForecaster`] guarantees, for every sequence of
//! outcomes in `[0, B]`,
//!
//! ```text
//! Σ_t (x̂_t − x_t)² − min_f Σ_t (f(p_t, θ_t) − x_t)² ≤ (B² / 2) ln |F|
//! ```
//!
//! which is the `Est_sq(T) = O(ln |F|)` guarantee the contextual policy relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CostSpec, FeatureMap};

/// A sequential predictor of production.
pub trait RegressionOracle: Send {
    /// Prediction in `[0, B]` for price `p` at context `theta`.
    fn predict(&self, p: f64, theta: Option<&[f64]>) -> Result<f64>;

    /// Reveals the production observed at `(p, theta)`.
    fn update(&mut self, p: f64, theta: Option<&[f64]>, x: f64) -> Result<()>;

    /// Output bound `B`.
    fn bound(&self) -> f64;
}

/// Finitely many candidate production functions with outputs clamped to `[0, B]`.
///
/// A member is a strongly convex cost family read as the aggregate supply curve
/// it induces: member `f` predicts `clamp(x*_f(p; θ), 0, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub members: Vec<CostSpec>,
    pub bound: f64,
}

impl FunctionClass {
    pub fn new(members: Vec<CostSpec>, bound: f64) -> Result<Self> {
        let class = Self { members, bound };
        class.validate()?;
        Ok(class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidParameter("function class is empty".into()));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "output bound must be > 0, got {}",
                self.bound
            )));
        }
        for m in &self.members {
            m.validate()?;
            if !m.is_strongly_convex() {
                return Err(Error::InvalidParameter(
                    "function class members must be strongly convex families".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn eval(&self, i: usize, p: f64, theta: Option<&[f64]>) -> Result<f64> {
        Ok(self.members[i].best_response(p, theta)?.clamp(0.0, self.bound))
    }

    /// `(B²/2) ln |F|`, the excess-loss bound of the aggregating forecaster.
    pub fn excess_bound(&self) -> f64 {
        0.5 * self.bound * self.bound * (self.len() as f64).ln()
    }
}

/// How member predictions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Vovk's substitution rule for squared loss; excess loss at most `(B²/2) ln |F|`.
    #[default]
    Aggregating,
    /// Weighted mean of member predictions. Weaker: excess grows like `√(T ln |F|)`.
    WeightedMean,
}

/// Exponential weights over a [`FunctionClass`] with learning rate `η` (default `2/B²`).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatingForecaster {
    class: FunctionClass,
    mode: Aggregation,
    eta: f64,
    /// Normalized: `logsumexp(log_weights) = 0`.
    log_weights: Vec<f64>,
    member_loss: Vec<f64>,
    forecast_loss: f64,
    history_len: usize,
    clamped: usize,
}

impl AggregatingForecaster {
    pub fn new(class: FunctionClass) -> Result<Self> {
        let eta = 2.0 / (class.bound * class.bound);
        Self::with_params(class, Aggregation::Aggregating, eta)
    }

    pub fn with_params(class: FunctionClass, mode: Aggregation, eta: f64) -> Result<Self> {
        class.validate()?;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
        }
        let n = class.len();
        Ok(Self {
            log_weights: vec![-(n as f64).ln(); n],
            member_loss: vec![0.0; n],
            class,
            mode,
            eta,
            forecast_loss: 0.0,
            history_len: 0,
            clamped: 0,
        })
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mode(&self) -> Aggregation {
        self.mode
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    /// Number of observations clamped into `[0, B]`.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Cumulative squared loss of each member.
    pub fn member_losses(&self) -> &[f64] {
        &self.member_loss
    }

    /// Cumulative squared loss of the forecaster's own predictions.
    pub fn forecast_loss(&self) -> f64 {
        self.forecast_loss
    }

    /// Forecaster loss minus the best member's loss so far.
    pub fn excess_loss(&self) -> f64 {
        let best = self.member_loss.iter().copied().fold(f64::INFINITY, f64::min);
        self.forecast_loss - best
    }

    fn member_predictions(&self, p: f64, theta: Option<&[f64]>) -> Result<Vec<f64>> {
        (0..self.class.len()).map(|i| self.class.eval(i, p, theta)).collect()
    }

    fn combine(&self, preds: &[f64]) -> f64 {
        let b = self.class.bound;
        let x = match self.mode {
            Aggregation::WeightedMean => preds
                .iter()
                .zip(&self.log_weights)
                .map(|(f, l)| l.exp() * f)
                .sum(),
            Aggregation::Aggregating => {
                // g(y) = −(1/η) ln Σ w_i exp(−η (y − f_i)²)
                let g = |y: f64| {
                    let terms: Vec<f64> = preds
                        .iter()
                        .zip(&self.log_weights)
                        .map(|(f, l)| l - self.eta * (y - f) * (y - f))
                        .collect();
                    -log_sum_exp(&terms) / self.eta
                };
                0.5 * b + (g(0.0) - g(b)) / (2.0 * b)
            }
        };
        x.clamp(0.0, b)
    }
}

impl RegressionOracle for AggregatingForecaster {
    fn predict(&self, p: f64, theta: Option<&[f64]>) -> Result<f64> {
        Ok(self.combine(&self.member_predictions(p, theta)?))
    }

    fn update(&mut self, p: f64, theta: Option<&[f64]>, x: f64) -> Result<()> {
        let b = self.class.bound;
        let y = x.clamp(0.0, b);
        if y != x {
            self.clamped += 1;
        }
        let preds = self.member_predictions(p, theta)?;
        let xhat = self.combine(&preds);
        self.forecast_loss += (xhat - y) * (xhat - y);
        for ((l, f), cum) in self.log_weights.iter_mut().zip(&preds).zip(&mut self.member_loss) {
            let loss = (f - y) * (f - y);
            *l -= self.eta * loss;
            *cum += loss;
        }
        let z = log_sum_exp(&self.log_weights);
        for l in &mut self.log_weights {
            *l -= z;
        }
        self.history_len += 1;
        Ok(())
    }

    fn bound(&self) -> f64 {
        self.class.bound
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Vovk-Azoury-Warmuth forecaster over linear functions `x ≈ ⟨w, p σ(θ)⟩`.
///
/// Keeps `A⁻¹` with `A = λI + Σ z zᵀ` by Sherman-Morrison updates; predicts
/// `⟨A_t⁻¹ b_{t−1}, z_t⟩` where `A_t` already includes the current `z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForecaster {
    feature_map: FeatureMap,
    dim: usize,
    bound: f64,
    a_inv: Vec<f64>,
    b: Vec<f64>,
}

impl LinearForecaster {
    pub fn new(dim: usize, feature_map: FeatureMap, ridge: f64, bound: f64) -> Result<Self> {
        if dim == 0 || !(ridge > 0.0) || !(bound > 0.0) {
            return Err(Error::InvalidParameter(
                "linear forecaster needs dim >= 1, ridge > 0 and bound > 0".into(),
            ));
        }
        let mut a_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            a_inv[i * dim + i] = 1.0 / ridge;
        }
        Ok(Self {
            feature_map,
            dim,
            bound,
            a_inv,
            b: vec![0.0; dim],
        })
    }

    fn features(&self, p: f64, theta: Option<&[f64]>) -> Result<Vec<f64>> {
        let theta = theta.ok_or(Error::MissingContext { supplier: 0 })?;
        if theta.len() != self.dim {
            return Err(Error::ContextDimension {
                expected: self.dim,
                got: theta.len(),
            });
        }
        Ok(theta.iter().map(|&v| p * self.feature_map.apply_one(v)).collect())
    }

    fn mat_vec(&self, m: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| m[i * self.dim + j] * z[j]).sum())
            .collect()
    }

    /// `(A + z zᵀ)⁻¹` from `A⁻¹`.
    fn rank_one(&self, z: &[f64]) -> Vec<f64> {
        let u = self.mat_vec(&self.a_inv, z);
        let denom = 1.0 + z.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        let mut out = self.a_inv.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i * self.dim + j] -= u[i] * u[j] / denom;
            }
        }
        out
    }
}

impl RegressionOracle for LinearForecaster {
    fn predict(&self, p: f64, theta: Option<&[f64]>) -> Result<f64> {
        let z = self.features(p, theta)?;
        let w = self.mat_vec(&self.rank_one(&z), &self.b);
        let x: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        Ok(x.clamp(0.0, self.bound))
    }

    fn update(&mut self, p: f64, theta: Option<&[f64]>, x: f64) -> Result<()> {
        let z = self.features(p, theta)?;
        self.a_inv = self.rank_one(&z);
        for (bi, zi) in self.b.iter_mut().zip(&z) {
            *bi += x * zi;
        }
        Ok(())
    }

    fn bound(&self) -> f64 {
        self.bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, uniform, Stream};

    /// `n` copies of the member predicting `x = p`.
    fn identity_class(n: usize, bound: f64) -> FunctionClass {
        FunctionClass::new(vec![CostSpec::quadratic(1.0, 0.0); n], bound).unwrap()
    }

    fn ctx_class(phis: &[[f64; 2]], bound: f64) -> FunctionClass {
        FunctionClass::new(
            phis.iter()
                .map(|p| CostSpec::context_quadratic(p.to_vec(), FeatureMap::Identity))
                .collect(),
            bound,
        )
        .unwrap()
    }

    #[test]
    fn uniform_mean_of_two_members() {
        // Members predicting 0.2 and 0.6 at p = 0.2: x*(p) = p/mu.
        let class = FunctionClass::new(
            vec![CostSpec::quadratic(1.0, 0.0), CostSpec::quadratic(1.0 / 3.0, 0.0)],
            1.0,
        )
        .unwrap();
        let mean = AggregatingForecaster::with_params(class.clone(), Aggregation::WeightedMean, 2.0).unwrap();
        assert!((mean.predict(0.2, None).unwrap() - 0.4).abs() < 1e-12);

        // Substitution rule: 1/2 + (g(0) − g(1))/2 with g the mixture loss, η = 2.
        let aa = AggregatingForecaster::new(class).unwrap();
        let g = |y: f64| {
            -0.5 * (0.5 * (-2.0 * (y - 0.2f64).powi(2)).exp() + 0.5 * (-2.0 * (y - 0.6f64).powi(2)).exp()).ln()
        };
        let want = 0.5 + (g(0.0) - g(1.0)) / 2.0;
        assert!((aa.predict(0.2, None).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn singleton_class_is_exact() {
        let class = identity_class(1, 2.0);
        let mut o = AggregatingForecaster::new(class).unwrap();
        for (i, p) in [0.1, 0.7, 0.33].iter().enumerate() {
            assert!((o.predict(*p, None).unwrap() - p).abs() < 1e-12);
            o.update(*p, None, i as f64 * 0.1).unwrap();
        }
        assert!(o.excess_loss().abs() < 1e-12);
    }

    #[test]
    fn weight_ratio_after_one_update() {
        let class = FunctionClass::new(
            vec![CostSpec::quadratic(1.0, 0.0), CostSpec::quadratic(0.5, 0.0)],
            3.0,
        )
        .unwrap();
        let mut o = AggregatingForecaster::with_params(class, Aggregation::Aggregating, 1.0).unwrap();
        // At p = 1 the members predict 1 and 2; outcome 1 gives losses (0, 1).
        o.update(1.0, None, 1.0).unwrap();
        let w = o.weights();
        assert!((w[0] / w[1] - 1f64.exp()).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn converges_to_truth_at_a_fixed_point() {
        let class = ctx_class(&[[1.0, 1.0], [0.5, 0.5], [1.5, 1.5]], 4.5);
        let mut o = AggregatingForecaster::new(class.clone()).unwrap();
        let theta = [1.2, 0.7];
        let truth = class.eval(0, 0.4, Some(&theta)).unwrap();
        for _ in 0..1000 {
            o.update(0.4, Some(&theta), truth).unwrap();
        }
        assert!((o.predict(0.4, Some(&theta)).unwrap() - truth).abs() < 1e-3);
    }

    #[test]
    fn excess_loss_bound_on_adversarial_stream() {
        let class = ctx_class(&[[1.0, 1.0], [0.5, 1.5], [1.5, 0.5], [0.2, 0.2]], 4.5);
        let bound = class.excess_bound();
        let mut o = AggregatingForecaster::new(class).unwrap();
        let mut rng = stream_rng(11, Stream::Policy);
        for t in 0..10_000 {
            let p = uniform(&mut rng);
            let theta = [0.5 + uniform(&mut rng), 0.5 + uniform(&mut rng)];
            // Outcomes alternate between extremes in blocks.
            let x = if (t / 37) % 2 == 0 { 4.5 * uniform(&mut rng) } else { 0.0 };
            o.update(p, Some(&theta), x).unwrap();
            assert!(o.excess_loss() <= bound + 1e-9);
            let w: f64 = o.weights().iter().sum();
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn misspecified_class() {
        let eps = 0.05;
        let class = ctx_class(&[[1.0 + eps, 1.0 + eps], [0.5, 0.5], [1.5, 1.5]], 4.5);
        let bound = class.excess_bound();
        let mut o = AggregatingForecaster::new(class).unwrap();
        let mut rng = stream_rng(5, Stream::Context);
        let t_max = 5000;
        for _ in 0..t_max {
            let p = uniform(&mut rng);
            let theta = [0.5 + uniform(&mut rng), 0.5 + uniform(&mut rng)];
            let x = p * (theta[0] + theta[1]);
            o.update(p, Some(&theta), x).unwrap();
            assert!(o.excess_loss() <= bound + 1e-9);
        }
        // |f_best − x| ≤ eps p (θ₁ + θ₂) ≤ 3 eps.
        let best = o.member_losses()[0];
        assert!(best <= (3.0 * eps).powi(2) * t_max as f64);
    }

    #[test]
    fn observations_are_clamped() {
        let mut o = AggregatingForecaster::new(identity_class(2, 1.0)).unwrap();
        o.update(0.5, None, 7.0).unwrap();
        assert_eq!(o.clamped(), 1);
        assert!(o.predict(0.5, None).unwrap() <= 1.0);
    }

    #[test]
    fn linear_forecaster_learns_linear_truth() {
        let mut o = LinearForecaster::new(2, FeatureMap::Identity, 1.0, 10.0).unwrap();
        let mut rng = stream_rng(1, Stream::Context);
        for _ in 0..2000 {
            let p = uniform(&mut rng);
            let theta = [uniform(&mut rng), uniform(&mut rng)];
            o.update(p, Some(&theta), p * (0.7 * theta[0] + 1.3 * theta[1])).unwrap();
        }
        let x = o.predict(0.5, Some(&[0.4, 0.8])).unwrap();
        assert!((x - 0.5 * (0.28 + 1.04)).abs() < 1e-2);
        assert!(o.predict(0.5, None).is_err());
    }
}
