use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates a regret curve is regressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `ln v = intercept + slope · ln T`.
    PowerLaw,
    /// `v = intercept + slope · ln ln T`.
    LogLog,
}

/// Least-squares line in the model's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
}

/// Fits `points = [(T, value)]`; needs at least three horizons.
pub fn fit_scaling(points: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 horizons, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(t, v) in points {
        let (x, y) = match model {
            ScalingModel::PowerLaw => {
                if !(t > 0.0 && v > 0.0) {
                    return Err(Error::DegenerateFit(format!(
                        "power-law fit needs positive horizons and values, got ({t}, {v})"
                    )));
                }
                (t.ln(), v.ln())
            }
            ScalingModel::LogLog => {
                if !(t > 1.0) {
                    return Err(Error::DegenerateFit(format!("log-log fit needs T > 1, got {t}")));
                }
                (t.ln().ln(), v)
            }
        };
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::DegenerateFit(format!("non-finite point ({t}, {v})")));
        }
        xs.push(x);
        ys.push(y);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("horizons have zero variance".into()));
    }
    if syy <= 0.0 {
        return Err(Error::DegenerateFit("values have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(ScalingFit {
        model,
        slope,
        intercept,
        r_squared: (1.0 - sse / syy).clamp(0.0, 1.0),
    })
}
