//! Log transform of transaction amounts around an alert threshold, plus the
//! quantile trim applied before any binning.
//!
//! Working in z = ln(t) − ln(T) puts the threshold at 0 and makes the analysis
//! invariant to currency units: rescaling every amount and the threshold by
//! the same factor leaves z unchanged.

use crate::error::{Error, Result};
use crate::stats;

/// Quantiles outside which observations are discarded before binning.
pub const TRIM_QUANTILES: (f64, f64) = (0.001, 0.999);

/// Minimum observations accepted by [`trim_and_transform`], before and after
/// the trim.
pub const MIN_OBSERVATIONS: usize = 10;

/// Raw transaction amounts together with the alert threshold they are
/// screened against. Construction validates the log-transform domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionSample {
    amounts: Vec<f64>,
    threshold: f64,
}

impl TransactionSample {
    /// Validates that the threshold and every amount are finite and > 1
    /// (z = ln t − ln T needs strictly positive logs on both sides).
    pub fn new(amounts: Vec<f64>, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 1.0) {
            return Err(Error::AmountOutOfDomain {
                what: "threshold",
                value: threshold,
            });
        }
        if amounts.is_empty() {
            return Err(Error::TooFewObservations {
                stage: "transform",
                needed: 1,
                got: 0,
            });
        }
        for &a in &amounts {
            if !(a.is_finite() && a > 1.0) {
                return Err(Error::AmountOutOfDomain {
                    what: "amount",
                    value: a,
                });
            }
        }
        Ok(Self { amounts, threshold })
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }
}

/// A trimmed sample in z-space, ready for binning.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSample {
    /// Retained observations, z = ln(t) − ln(T), in input order.
    pub values: Vec<f64>,
    /// Number of retained observations (always `values.len()`).
    pub n: usize,
    /// The applied quantile cutoffs, in the units of whatever was trimmed:
    /// raw amounts for [`trim_and_transform`], z values for samples trimmed
    /// after transformation (e.g. simulated draws).
    pub trim_bounds: (f64, f64),
}

impl TransformedSample {
    /// Wraps already-transformed values as-is (no trimming); the recorded
    /// bounds are the sample extremes.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewObservations {
                stage: "transform",
                needed: 1,
                got: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig {
                reason: "transformed values must be finite".into(),
            });
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = values.len();
        Ok(Self {
            values,
            n,
            trim_bounds: (lo, hi),
        })
    }
}

/// z = ln(t) − ln(T): log distance of an amount from the alert threshold.
pub fn z_transform(amount: f64, threshold: f64) -> Result<f64> {
    if !(amount.is_finite() && amount > 1.0) {
        return Err(Error::AmountOutOfDomain {
            what: "amount",
            value: amount,
        });
    }
    if !(threshold.is_finite() && threshold > 1.0) {
        return Err(Error::AmountOutOfDomain {
            what: "threshold",
            value: threshold,
        });
    }
    Ok(amount.ln() - threshold.ln())
}

/// Discards observations strictly outside the 0.001/0.999 quantiles of the
/// raw amounts (boundary-equal values are kept), then maps the survivors to
/// z-space. Errors if fewer than [`MIN_OBSERVATIONS`] enter or survive.
pub fn trim_and_transform(sample: &TransactionSample) -> Result<TransformedSample> {
    if sample.len() < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            stage: "trimming",
            needed: MIN_OBSERVATIONS,
            got: sample.len(),
        });
    }
    let (retained, bounds) = trim_values(sample.amounts());
    if retained.len() < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            stage: "trimming",
            needed: MIN_OBSERVATIONS,
            got: retained.len(),
        });
    }
    let ln_t = sample.threshold().ln();
    let values: Vec<f64> = retained.iter().map(|a| a.ln() - ln_t).collect();
    let n = values.len();
    Ok(TransformedSample {
        values,
        n,
        trim_bounds: bounds,
    })
}

/// The shared trim rule: keep everything inside (inclusive) the 0.001/0.999
/// linear-interpolation quantiles. Returns survivors in input order plus the
/// applied cutoffs.
pub(crate) fn trim_values(values: &[f64]) -> (Vec<f64>, (f64, f64)) {
    let sorted = stats::sorted_copy(values);
    let low = stats::percentile_sorted(&sorted, TRIM_QUANTILES.0);
    let high = stats::percentile_sorted(&sorted, TRIM_QUANTILES.1);
    let retained = values
        .iter()
        .copied()
        .filter(|v| *v >= low && *v <= high)
        .collect();
    (retained, (low, high))
}
