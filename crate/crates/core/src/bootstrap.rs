//! Nonparametric bootstrap for ζ and its one-sided lower confidence limit.
//!
//! Each replicate redraws the full sample with replacement, re-bins it into
//! the *fixed* original edges, refits the counterfactual, and recomputes ζ.
//! Binning a with-replacement redraw is distribution-identical to drawing
//! the bin-count vector from Multinomial(n, observed counts / n), so the
//! replicate draws that vector directly via a binomial chain — O(bins)
//! instead of O(n) per replicate, with the same law.
//!
//! Determinism: replicate `i` uses its own ChaCha8 stream derived from the
//! master seed and `i`, so results are bit-identical for any worker count.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::counterfactual::{FitPlan, ManipulationWindow};
use crate::error::{Error, Result};
use crate::histogram::BinnedHistogram;
use crate::stats;
use crate::transform::TransformedSample;

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 10_000;

/// Quantile of the replicate distribution reported as the lower limit.
pub const LOWER_CL_QUANTILE: f64 = 0.05;

/// Share of failed replicates tolerated before the bootstrap aborts.
pub const MAX_FAILURE_SHARE: f64 = 0.01;

/// Generator identification recorded in reports.
pub const RNG_ID: &str = "chacha8 (rand_chacha 0.10), one stream per replicate";

/// Point estimate of ζ with its bootstrap distribution and lower
/// confidence limit. Smurfing is indicated when `lower_cl > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmurfingEstimate {
    /// ζ on the observed histogram.
    pub zeta_hat: f64,
    /// ζ of each successful replicate, in replicate order.
    pub replicates: Vec<f64>,
    /// 5th percentile of the replicate distribution.
    pub lower_cl: f64,
    /// Replicates requested.
    pub replicate_count: usize,
    /// Master seed the replicate streams derive from.
    pub seed: u64,
    /// Replicates whose refit failed (tolerated up to 1%).
    pub failed_replicates: usize,
}

impl SmurfingEstimate {
    /// The detection rule: the entire confidence band sits above zero.
    pub fn is_flagged(&self) -> bool {
        self.lower_cl > 0.0
    }
}

/// Linear-interpolation percentile (rank `q · (n−1)` blended between
/// neighboring order statistics) of an unsorted slice.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewObservations {
            stage: "percentile",
            needed: 1,
            got: 0,
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig {
            reason: format!("percentile rank must be in [0, 1], got {q}"),
        });
    }
    Ok(stats::percentile_sorted(&stats::sorted_copy(values), q))
}

/// Bootstraps ζ on the current rayon thread pool.
pub fn bootstrap_zeta(
    sample: &TransformedSample,
    hist: &BinnedHistogram,
    window: &ManipulationWindow,
    degree: usize,
    replicate_count: usize,
    seed: u64,
) -> Result<SmurfingEstimate> {
    bootstrap_zeta_with_workers(sample, hist, window, degree, replicate_count, seed, None)
}

/// Bootstraps ζ on a dedicated pool of `workers` threads (`None` = current
/// pool). The worker count affects scheduling only, never the results.
pub fn bootstrap_zeta_with_workers(
    sample: &TransformedSample,
    hist: &BinnedHistogram,
    window: &ManipulationWindow,
    degree: usize,
    replicate_count: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<SmurfingEstimate> {
    if replicate_count < 100 {
        return Err(Error::InvalidConfig {
            reason: format!("need at least 100 bootstrap replicates, got {replicate_count}"),
        });
    }
    if hist.total_n != sample.n {
        return Err(Error::InvalidConfig {
            reason: format!(
                "histogram holds {} observations but the sample has {}",
                hist.total_n, sample.n
            ),
        });
    }
    let plan = FitPlan::new(hist, window, degree)?;
    let zeta_hat = plan.zeta_for(&hist.fractions)?;

    let run = || -> Vec<std::result::Result<f64, Error>> {
        (0..replicate_count)
            .into_par_iter()
            .map_init(
                || (vec![0u64; hist.bin_count()], vec![0f64; hist.bin_count()]),
                |(counts, fractions), idx| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(idx as u64 + 1);
                    resample_counts(&mut rng, &hist.counts, counts);
                    for (f, c) in fractions.iter_mut().zip(counts.iter()) {
                        *f = *c as f64 / hist.total_n as f64;
                    }
                    plan.zeta_for(fractions)
                },
            )
            .collect()
    };
    let outcomes = match workers {
        None => run(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("cannot build a {w}-thread pool: {e}"),
            })?
            .install(run),
    };

    let mut replicates = Vec::with_capacity(replicate_count);
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(z) => replicates.push(z),
            Err(_) => failed += 1,
        }
    }
    if (failed as f64) > MAX_FAILURE_SHARE * replicate_count as f64 {
        return Err(Error::TooManyReplicateFailures {
            failed,
            total: replicate_count,
        });
    }
    let lower_cl = percentile(&replicates, LOWER_CL_QUANTILE)?;
    Ok(SmurfingEstimate {
        zeta_hat,
        replicates,
        lower_cl,
        replicate_count,
        seed,
        failed_replicates: failed,
    })
}

/// One multinomial draw: redistributes `Σ source` observations over the bins
/// with probabilities `source / Σ source`, via the conditional binomial
/// chain. The output always sums to the input total exactly.
fn resample_counts(rng: &mut impl Rng, source: &[u64], out: &mut [u64]) {
    let mut remaining_mass: u64 = source.iter().sum();
    let mut remaining_draws = remaining_mass;
    for (slot, &mass) in out.iter_mut().zip(source) {
        if remaining_draws == 0 || mass == 0 {
            *slot = 0;
            remaining_mass -= mass;
            continue;
        }
        if mass == remaining_mass {
            *slot = remaining_draws;
            remaining_draws = 0;
            remaining_mass = 0;
            continue;
        }
        let p = mass as f64 / remaining_mass as f64;
        let draw = rand_distr::Binomial::new(remaining_draws, p)
            .expect("p is a valid probability by construction")
            .sample(rng);
        *slot = draw;
        remaining_draws -= draw;
        remaining_mass -= mass;
    }
}
