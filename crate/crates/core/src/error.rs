//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between raw amounts and a verdict.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An amount or threshold outside the domain of the log transform.
    #[error("{what} must be a finite value greater than 1, got {value}")]
    AmountOutOfDomain { what: &'static str, value: f64 },

    /// Not enough observations to run the requested stage.
    #[error("need at least {needed} observations for {stage}, got {got}")]
    TooFewObservations {
        stage: &'static str,
        needed: usize,
        got: usize,
    },

    /// All observations identical (or otherwise zero spread).
    #[error("sample has zero spread: {context}")]
    DegenerateSample { context: &'static str },

    /// A bin-count rule produced something unusable.
    #[error("bin count {k} cannot form a histogram (need at least 2)")]
    InvalidBinCount { k: i64 },

    /// The alert threshold (z = 0) is not inside the histogram's edge grid.
    #[error("histogram range [{min}, {max}] does not bracket the threshold at 0")]
    ThresholdNotSpanned { min: f64, max: f64 },

    /// A value falls outside the histogram edges.
    #[error("value {value} lies outside the histogram edges [{low}, {high}]")]
    ValueOutOfRange { value: f64, low: f64, high: f64 },

    /// A manipulation window that violates its ordering or histogram bounds.
    #[error("invalid manipulation window: {reason}")]
    InvalidWindow { reason: String },

    /// Configuration or argument outside its documented domain.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// The least-squares system is singular beyond the conditioning mitigations.
    #[error("counterfactual fit is rank-deficient (degree {degree} over {fitted_bins} bins)")]
    RankDeficient { degree: usize, fitted_bins: usize },

    /// More than the tolerated share of bootstrap replicates failed to refit.
    #[error("{failed} of {total} bootstrap replicates failed (tolerance is 1%)")]
    TooManyReplicateFailures { failed: usize, total: usize },

    /// Not enough below-limit transactions to smurf at the requested rate.
    #[error("cannot smurf {requested} transactions: only {available} eligible")]
    InsufficientEligible { requested: usize, available: usize },
}

impl Error {
    /// Coarse classification used by front ends to pick exit codes:
    /// `true` for numerical failures (as opposed to precondition violations).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::TooManyReplicateFailures { .. }
        )
    }
}
