//! End-to-end analysis of one transaction sample, packaged as a
//! serializable report.
//!
//! `analyze` chains trim → bin → fit → bootstrap and records every input a
//! reader needs to reproduce the numbers: geometry, window, degree, basis,
//! seed, and the RNG identifier. Serializing and re-parsing a report loses
//! nothing.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_zeta_with_workers, DEFAULT_REPLICATES, RNG_ID};
use crate::counterfactual::{
    default_degree, fit_counterfactual, zeta, ManipulationWindow, FIT_BASIS,
};
use crate::error::Result;
use crate::histogram::{build_histogram, build_histogram_with_bin_count, BinnedHistogram};
use crate::transform::{trim_and_transform, TransactionSample};

/// Bumped whenever the report layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

pub const VERDICT_FLAGGED: &str = "smurfing indicated";
pub const VERDICT_CLEAN: &str = "no smurfing indicated";

/// Knobs for [`analyze`]; `Default` gives the standard pipeline with the
/// window [−1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub window: ManipulationWindow,
    /// Polynomial degree; `None` = half the bin count (capped).
    pub degree: Option<usize>,
    /// Bin count; `None` = Doane's rule.
    pub bin_count: Option<usize>,
    pub replicate_count: usize,
    pub seed: u64,
    /// Bootstrap worker threads; `None` = current rayon pool. Never affects
    /// the numbers.
    pub workers: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            window: ManipulationWindow { l: -1, u: 2 },
            degree: None,
            bin_count: None,
            replicate_count: DEFAULT_REPLICATES,
            seed: 0,
            workers: None,
        }
    }
}

/// What went in: raw row count and what the trim kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub row_count: usize,
    pub post_trim_n: usize,
    /// (lowest, highest) retained z value.
    pub trim_bounds: (f64, f64),
}

/// The counterfactual in reproducible form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub degree: usize,
    pub basis: String,
    pub coefficients: Vec<f64>,
    pub fitted_fractions: Vec<f64>,
    pub exact_interpolation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicate_count: usize,
    pub seed: u64,
    pub lower_cl: f64,
    pub failed_replicates: usize,
}

/// Complete, self-describing analysis result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub rng: String,
    pub threshold: f64,
    pub input: InputSummary,
    pub histogram: BinnedHistogram,
    pub window: ManipulationWindow,
    pub fit: FitSummary,
    /// Point estimate of the excess mass, as a fraction of the sample.
    pub zeta_hat: f64,
    pub bootstrap: BootstrapSummary,
    pub verdict: String,
}

impl AnalysisReport {
    pub fn is_flagged(&self) -> bool {
        self.bootstrap.lower_cl > 0.0
    }
}

/// Full pipeline: trim and transform the amounts, bin them, fit the
/// counterfactual outside the window, and bootstrap the lower confidence
/// limit of ζ.
pub fn analyze(sample: &TransactionSample, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let transformed = trim_and_transform(sample)?;
    let hist = match options.bin_count {
        Some(k) => build_histogram_with_bin_count(&transformed.values, k as i64)?,
        None => build_histogram(&transformed.values)?,
    };
    options.window.validate_against(&hist)?;
    let degree = options
        .degree
        .unwrap_or_else(|| default_degree(&hist, &options.window));

    let fit = fit_counterfactual(&hist, &options.window, degree)?;
    let est = bootstrap_zeta_with_workers(
        &transformed,
        &hist,
        &options.window,
        degree,
        options.replicate_count,
        options.seed,
        options.workers,
    )?;
    debug_assert_eq!(est.zeta_hat, zeta(&hist, &fit, &options.window));

    let verdict = if est.is_flagged() {
        VERDICT_FLAGGED
    } else {
        VERDICT_CLEAN
    };
    let exact_interpolation = fit.is_exact_interpolation();
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_ID.to_string(),
        threshold: sample.threshold(),
        input: InputSummary {
            row_count: sample.len(),
            post_trim_n: transformed.n,
            trim_bounds: transformed.trim_bounds,
        },
        histogram: hist,
        window: options.window,
        fit: FitSummary {
            degree: fit.degree,
            basis: FIT_BASIS.to_string(),
            coefficients: fit.coefficients,
            fitted_fractions: fit.fitted_fractions,
            exact_interpolation,
        },
        zeta_hat: est.zeta_hat,
        bootstrap: BootstrapSummary {
            replicate_count: est.replicate_count,
            seed: est.seed,
            lower_cl: est.lower_cl,
            failed_replicates: est.failed_replicates,
        },
        verdict: verdict.to_string(),
    })
}
