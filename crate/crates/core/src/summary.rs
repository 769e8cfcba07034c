//! Posterior summaries of draw columns.

use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::model::ModelSpec;

const MAD_SCALE: f64 = 1.4826;

/// Type-7 quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

/// Scaled median absolute deviation, a consistent sd estimate under normality.
pub fn mad_sd(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    MAD_SCALE * median(&dev)
}

/// Median and equal-tailed interval at `level`.
pub fn median_interval(values: &[f64], level: f64) -> (f64, f64, f64) {
    let s = sorted(values);
    let a = 0.5 * (1.0 - level);
    (quantile_sorted(&s, 0.5), quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub median: f64,
    pub mad_sd: f64,
    /// `exp(median)` for hazard ratios and acceleration factors only.
    pub exp_median: Option<f64>,
}

pub fn summarize(spec: &ModelSpec, draws: &PosteriorDraws) -> Vec<ParameterSummary> {
    draws
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = draws.values.iter().map(|r| r[k]).collect();
            let m = median(&col);
            ParameterSummary {
                name: name.clone(),
                median: m,
                mad_sd: mad_sd(&col),
                exp_median: spec.is_exponentiable(name).then(|| m.exp()),
            }
        })
        .collect()
}
