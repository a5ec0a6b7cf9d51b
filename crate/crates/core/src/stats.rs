//! Order statistics shared by the length histogram and the score boxplots.
//!
//! Quantiles interpolate linearly between closest ranks: for sorted data
//! `x[0..n]` and probability `p`, position `h = (n - 1) p` and the value is
//! `x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.

use serde::{Deserialize, Serialize};

/// Tukey fence multiplier.
pub const FENCE_FACTOR: f64 = 1.5;

/// Quantile of already-sorted data. Panics on empty input.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Boxplot statistics of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    /// Points beyond the whiskers, ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// `None` for empty input. NaNs are not expected and sort last.
    pub fn compute(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let q1 = quantile_sorted(&sorted, 0.25);
        let median = quantile_sorted(&sorted, 0.5);
        let q3 = quantile_sorted(&sorted, 0.75);
        let (lo_fence, hi_fence) = tukey_fences(q1, q3);
        let mut inside = sorted
            .iter()
            .copied()
            .filter(|&v| v >= lo_fence && v <= hi_fence);
        // The median is always inside the fences, so the filter is non-empty.
        let whisker_lo = inside.clone().next().unwrap_or(median);
        let whisker_hi = inside.next_back().unwrap_or(median);
        let outliers = sorted
            .iter()
            .copied()
            .filter(|&v| v < lo_fence || v > hi_fence)
            .collect();
        Some(Self {
            n: values.len(),
            mean,
            median,
            q1,
            q3,
            whisker_lo,
            whisker_hi,
            outliers,
        })
    }
}

pub fn tukey_fences(q1: f64, q3: f64) -> (f64, f64) {
    let iqr = q3 - q1;
    (q1 - FENCE_FACTOR * iqr, q3 + FENCE_FACTOR * iqr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_quartiles() {
        let s = BoxStats::compute(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!(s.mean, 2.5);
        assert!(s.outliers.is_empty());
        assert_eq!((s.whisker_lo, s.whisker_hi), (1.0, 4.0));
    }

    #[test]
    fn constant_sample() {
        let s = BoxStats::compute(&[0.42; 7]).unwrap();
        assert_eq!([s.mean, s.median, s.q1, s.q3], [0.42; 4]);
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn outlier_beyond_whisker() {
        // Q1 = Q3 = 5, fences collapse to [5, 5].
        let s = BoxStats::compute(&[5.0, 5.0, 5.0, 5.0, 100.0]).unwrap();
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!(s.whisker_hi, 5.0);
    }

    #[test]
    fn empty_is_none() {
        assert!(BoxStats::compute(&[]).is_none());
    }
}
