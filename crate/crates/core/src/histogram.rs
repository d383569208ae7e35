//! Threshold-aligned histogram of transformed amounts.
//!
//! Edges are integer multiples of the bin width, so z = 0 (the alert
//! threshold) is always a bin boundary and never interior to a bin. Bins are
//! right-closed, `(b_i, b_{i+1}]`, with one exception: the lowest edge is
//! closed so the sample minimum is binned too. Bin indices follow the edge
//! grid and are usually negative on the below-threshold side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Doane's bin-count rule: `1 + log2(n) + log2(1 + |g1|/sigma_g1)`, rounded
/// to the nearest integer (ties away from zero), where `g1` is the population
/// skewness and `sigma_g1.powi(2) = 6(n-2)/((n+1)(n+3))`.
///
/// Skew-aware so the long below-threshold tail of transaction data still gets
/// enough bins. Errors on fewer than 4 observations or zero spread.
pub fn doane_bin_count(values: &[f64]) -> Result<usize> {
    if values.len() < 4 {
        return Err(Error::TooFewObservations {
            stage: "bin-count rule",
            needed: 4,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let g1 = stats::population_skewness(values).ok_or(Error::DegenerateSample {
        context: "bin-count rule is undefined for zero standard deviation",
    })?;
    let sigma_g1 = (6.0 * (n - 2.0) / ((n + 1.0) * (n + 3.0))).sqrt();
    let k = 1.0 + n.log2() + (1.0 + g1.abs() / sigma_g1).log2();
    Ok(k.round() as usize)
}

/// Histogram of a transformed sample on the threshold-aligned edge grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedHistogram {
    /// Bin width `(max − min) / (k − 1)`.
    pub bin_width: f64,
    /// Index of the lowest edge: `floor(min / bin_width)`.
    pub n_min: i64,
    /// Index of the highest edge: `ceil(max / bin_width)`.
    pub n_max: i64,
    /// Edges `b_i = i · bin_width` for `i = n_min ..= n_max`.
    pub edges: Vec<f64>,
    /// Bin midpoints `b_i + bin_width / 2`, one per bin.
    pub midpoints: Vec<f64>,
    /// Observations per bin; sums to `total_n` exactly.
    pub counts: Vec<u64>,
    /// `counts / total_n`; sums to 1 up to float rounding.
    pub fractions: Vec<f64>,
    /// Number of binned observations.
    pub total_n: usize,
}

/// Builds the histogram with the bin count chosen by [`doane_bin_count`].
pub fn build_histogram(values: &[f64]) -> Result<BinnedHistogram> {
    build_histogram_with_bin_count(values, doane_bin_count(values)? as i64)
}

/// Builds the histogram with an explicit bin count `k`.
pub fn build_histogram_with_bin_count(values: &[f64], k: i64) -> Result<BinnedHistogram> {
    if values.is_empty() {
        return Err(Error::TooFewObservations {
            stage: "histogram",
            needed: 1,
            got: 0,
        });
    }
    if k <= 1 {
        return Err(Error::InvalidBinCount { k });
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::InvalidConfig {
            reason: "histogram input must be finite".into(),
        });
    }
    if min == max {
        return Err(Error::DegenerateSample {
            context: "histogram needs max > min",
        });
    }

    let width = (max - min) / (k - 1) as f64;
    let mut n_min = (min / width).floor() as i64;
    let mut n_max = (max / width).ceil() as i64;
    // Guard against the quotient rounding across an integer: the grid must
    // cover [min, max] even when min/width itself is not representable.
    while n_min as f64 * width > min {
        n_min -= 1;
    }
    while (n_max as f64) * width < max {
        n_max += 1;
    }
    if n_min > 0 || n_max < 0 {
        return Err(Error::ThresholdNotSpanned { min, max });
    }

    let geometry = Geometry {
        bin_width: width,
        n_min,
        n_max,
    };
    geometry.bin(values)
}

/// Edge grid shared by a histogram and everything re-binned onto it.
struct Geometry {
    bin_width: f64,
    n_min: i64,
    n_max: i64,
}

impl Geometry {
    fn bin(&self, values: &[f64]) -> Result<BinnedHistogram> {
        let edges: Vec<f64> = (self.n_min..=self.n_max)
            .map(|i| i as f64 * self.bin_width)
            .collect();
        let bins = (self.n_max - self.n_min) as usize;
        let midpoints: Vec<f64> = edges[..bins]
            .iter()
            .map(|b| b + self.bin_width / 2.0)
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let offset = locate_offset(&edges, v)?;
            counts[offset] += 1;
        }
        let total_n = values.len();
        let fractions = counts.iter().map(|c| *c as f64 / total_n as f64).collect();
        Ok(BinnedHistogram {
            bin_width: self.bin_width,
            n_min: self.n_min,
            n_max: self.n_max,
            edges,
            midpoints,
            counts,
            fractions,
            total_n,
        })
    }
}

/// Finds the 0-based bin offset for `v` against explicit edges:
/// `(edges[j], edges[j+1]]`, lowest edge closed.
fn locate_offset(edges: &[f64], v: f64) -> Result<usize> {
    let first = edges[0];
    let last = edges[edges.len() - 1];
    if !(v >= first && v <= last) {
        return Err(Error::ValueOutOfRange {
            value: v,
            low: first,
            high: last,
        });
    }
    if v == first {
        return Ok(0);
    }
    // binary search for edges[lo] < v <= edges[hi] with hi = lo + 1
    let mut lo = 0usize;
    let mut hi = edges.len() - 1;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if v <= edges[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

impl BinnedHistogram {
    /// Builds a histogram directly from a validated edge grid and counts;
    /// `n_max` is implied by `n_min + counts.len()`.
    pub fn from_parts(bin_width: f64, n_min: i64, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("bin width must be positive, got {bin_width}"),
            });
        }
        if counts.is_empty() {
            return Err(Error::InvalidBinCount { k: 1 });
        }
        let n_max = n_min + counts.len() as i64;
        if n_min > 0 || n_max < 0 {
            return Err(Error::ThresholdNotSpanned {
                min: n_min as f64 * bin_width,
                max: n_max as f64 * bin_width,
            });
        }
        let edges: Vec<f64> = (n_min..=n_max).map(|i| i as f64 * bin_width).collect();
        let midpoints = edges[..counts.len()]
            .iter()
            .map(|b| b + bin_width / 2.0)
            .collect();
        let total_n = counts.iter().sum::<u64>() as usize;
        if total_n == 0 {
            return Err(Error::TooFewObservations {
                stage: "histogram",
                needed: 1,
                got: 0,
            });
        }
        let fractions = counts.iter().map(|c| *c as f64 / total_n as f64).collect();
        Ok(Self {
            bin_width,
            n_min,
            n_max,
            edges,
            midpoints,
            counts,
            fractions,
            total_n,
        })
    }

    /// Number of bins (`n_max − n_min`).
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Bin index (edge-grid units, may be negative) containing `z`:
    /// `(b_i, b_{i+1}]`, with the lowest edge closed. Errors outside the grid.
    pub fn locate_bin(&self, z: f64) -> Result<i64> {
        locate_offset(&self.edges, z).map(|o| self.n_min + o as i64)
    }

    /// 0-based vector offset of the edge-grid bin index `i`.
    pub fn offset_of(&self, i: i64) -> usize {
        debug_assert!(i >= self.n_min && i < self.n_max);
        (i - self.n_min) as usize
    }

    /// Re-bins other values onto this histogram's exact edges. Errors if any
    /// value escapes the grid.
    pub fn rebin(&self, values: &[f64]) -> Result<BinnedHistogram> {
        Geometry {
            bin_width: self.bin_width,
            n_min: self.n_min,
            n_max: self.n_max,
        }
        .bin(values)
    }
}
