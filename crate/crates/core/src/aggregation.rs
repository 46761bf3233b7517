//! Confidence filtering and IQR-based robust aggregation of instance scales.

use serde::{Deserialize, Serialize};

use crate::detection::OrientedDetection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub conf_threshold: f64,
    pub min_count: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            conf_threshold: 0.5,
            min_count: 5,
        }
    }
}

impl FilterConfig {
    pub fn new(conf_threshold: f64, min_count: usize) -> Result<Self> {
        let c = FilterConfig {
            conf_threshold,
            min_count,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::Config(format!(
                "conf_threshold {} outside [0, 1]",
                self.conf_threshold
            )));
        }
        if self.min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of reliability filtering. Too few anchors is a skip, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Filtered {
    /// Indices (into the input slice) of detections scoring above the threshold.
    Sufficient(Vec<usize>),
    InsufficientAnchors {
        n_valid: usize,
    },
}

pub fn filter_detections(dets: &[OrientedDetection], cfg: &FilterConfig) -> Filtered {
    let kept: Vec<usize> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| d.confidence > cfg.conf_threshold)
        .map(|(i, _)| i)
        .collect();
    if kept.len() < cfg.min_count {
        Filtered::InsufficientAnchors {
            n_valid: kept.len(),
        }
    } else {
        Filtered::Sufficient(kept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub global_scale: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub inlier_low: f64,
    pub inlier_high: f64,
    /// Positions in the aggregated list, ascending.
    pub inlier_indices: Vec<usize>,
    pub n_valid: usize,
    pub n_inliers: usize,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `p * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Keeps the scales inside `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]` (closed) and
/// returns their mean as the global scale.
pub fn iqr_aggregate(scales: &[f64]) -> Result<AggregationResult> {
    if scales.is_empty() {
        return Err(Error::EmptyInput("no scales to aggregate"));
    }
    if scales.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite scale".into()));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let inlier_low = q1 - 1.5 * iqr;
    let inlier_high = q3 + 1.5 * iqr;
    // a few ulps of slack so round-off in near-identical scales is not
    // mistaken for spread; the reported fences stay exact
    let slack = 4.0 * f64::EPSILON * q1.abs().max(q3.abs());

    let inlier_indices: Vec<usize> = scales
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= inlier_low - slack && s <= inlier_high + slack)
        .map(|(i, _)| i)
        .collect();
    // Q1 and Q3 interpolate between data points, so [Q1, Q3] always holds one
    debug_assert!(!inlier_indices.is_empty());
    let n_inliers = inlier_indices.len();
    // shifted mean: exact when every inlier is the same value
    let anchor = scales[inlier_indices[0]];
    let dev: f64 = inlier_indices.iter().map(|&i| scales[i] - anchor).sum();
    Ok(AggregationResult {
        global_scale: anchor + dev / n_inliers as f64,
        q1,
        q3,
        iqr,
        inlier_low,
        inlier_high,
        inlier_indices,
        n_valid: scales.len(),
        n_inliers,
    })
}
