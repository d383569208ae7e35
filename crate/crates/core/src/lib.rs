//! Detects transaction structuring ("smurfing"): large transactions split
//! into several just below an alert threshold to dodge reporting.
//!
//! The idea: in log space, `z = ln(amount) − ln(threshold)`, an honest
//! population produces a smooth histogram around z = 0. Smurfing moves mass
//! from bins just above 0 into bins just below it. The toolkit bins the
//! sample on a grid that always has an edge exactly at the threshold, fits a
//! polynomial counterfactual to the bins *outside* a suspected manipulation
//! window, and measures the excess mass ζ the window holds relative to that
//! counterfactual. A multinomial bootstrap turns ζ̂ into a one-sided
//! confidence limit: the sample is flagged when even the 5% lower limit
//! stays positive.
//!
//! Everything is deterministic given a seed, including across worker-thread
//! counts.
//!
//! ```
//! use smurfscan::{analyze, AnalyzeOptions, TransactionSample};
//!
//! // ~smooth log-space amounts straddling a 10k reporting threshold
//! let amounts: Vec<f64> = (0..4000)
//!     .map(|i| 10_000.0 * f64::exp(-4.0 + 7.0 * (i as f64 * 0.618).fract()))
//!     .collect();
//! let sample = TransactionSample::new(amounts, 10_000.0).unwrap();
//! let options = AnalyzeOptions { replicate_count: 100, ..Default::default() };
//! let report = analyze(&sample, &options).unwrap();
//! assert_eq!(report.verdict, smurfscan::report::VERDICT_CLEAN);
//! ```

pub mod bootstrap;
pub mod counterfactual;
pub mod error;
pub mod histogram;
pub mod kstest;
pub mod report;
pub mod simulate;
mod stats;
pub mod study;
pub mod transform;

pub use bootstrap::{bootstrap_zeta, bootstrap_zeta_with_workers, percentile, SmurfingEstimate};
pub use counterfactual::{
    default_degree, fit_counterfactual, zeta, CounterfactualFit, ManipulationWindow,
};
pub use error::{Error, Result};
pub use histogram::{
    build_histogram, build_histogram_with_bin_count, doane_bin_count, BinnedHistogram,
};
pub use kstest::{kolmogorov_sf, ks_two_sample, KsResult};
pub use report::{analyze, AnalysisReport, AnalyzeOptions};
pub use simulate::{
    inject_smurfing, simulate_baseline, simulate_draws, SimulationConfig, SmurfInjectionReport,
};
pub use study::{run_study, StudyGrid, StudyPreset, StudyResult};
pub use transform::{trim_and_transform, z_transform, TransactionSample, TransformedSample};
