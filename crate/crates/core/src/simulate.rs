//! Synthetic transaction generator and the smurf-injection transformation
//! used for power studies.
//!
//! Baselines are normal draws directly in z-space (no smurfing). Injection
//! then mimics structuring: a fraction of the transactions sitting at or
//! above the threshold is split into several equal amounts just below it,
//! conserving total value up to the integer number of pieces.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::counterfactual::ManipulationWindow;
use crate::error::{Error, Result};
use crate::histogram::BinnedHistogram;
use crate::transform::{trim_values, TransformedSample, MIN_OBSERVATIONS};

/// Parameters of a baseline draw: `n_draws` from Normal(mean, stddev) in
/// z-space, trimmed by the standard quantile rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_draws: usize,
    pub mean: f64,
    pub stddev: f64,
    pub seed: u64,
}

impl SimulationConfig {
    /// Small-bank preset: 50,000 draws from N(−2.5, 1.8).
    pub fn type_a(seed: u64) -> Self {
        Self {
            n_draws: 50_000,
            mean: -2.5,
            stddev: 1.8,
            seed,
        }
    }

    /// Large-bank preset: 250,000 draws from N(−2.1, 2.1).
    pub fn type_b(seed: u64) -> Self {
        Self {
            n_draws: 250_000,
            mean: -2.1,
            stddev: 2.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws < MIN_OBSERVATIONS {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "need at least {MIN_OBSERVATIONS} draws, got {}",
                    self.n_draws
                ),
            });
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidConfig {
                reason: format!("mean must be finite, got {}", self.mean),
            });
        }
        if !(self.stddev.is_finite() && self.stddev > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("stddev must be positive, got {}", self.stddev),
            });
        }
        Ok(())
    }
}

/// Draws the raw (untrimmed) z values for a config. Exposed so exporters can
/// write pre-trim data; analysis paths want [`simulate_baseline`] instead.
pub fn simulate_draws(config: &SimulationConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(config.mean, config.stddev).map_err(|e| Error::InvalidConfig {
        reason: format!("invalid normal parameters: {e}"),
    })?;
    Ok((0..config.n_draws)
        .map(|_| normal.sample(&mut rng))
        .collect())
}

/// Draws a baseline sample and applies the standard 0.001/0.999 quantile
/// trim (in z units, since the draws are already transformed).
pub fn simulate_baseline(config: &SimulationConfig) -> Result<TransformedSample> {
    let draws = simulate_draws(config)?;
    let (values, bounds) = trim_values(&draws);
    if values.len() < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            stage: "trimming",
            needed: MIN_OBSERVATIONS,
            got: values.len(),
        });
    }
    let n = values.len();
    Ok(TransformedSample {
        values,
        n,
        trim_bounds: bounds,
    })
}

/// Number of just-below-threshold pieces an amount splits into: `⌊e^gap⌋`
/// for `gap = m − s > 0`, i.e. the largest count whose total stays within
/// the original amount in currency space.
pub fn smurf_count(gap: f64) -> u64 {
    gap.exp().floor() as u64
}

/// One split: original value `m`, the pieces' value `s`, and how many.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmurfSplit {
    /// z value of the removed original transaction (`m ≥ 0`).
    pub original: f64,
    /// z value of every injected piece (`b_l < s < 0`).
    pub smurf_size: f64,
    /// How many pieces were injected (`⌊e^(m−s)⌋ ≥ 1`).
    pub copies: u64,
}

/// Bookkeeping of one injection pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmurfInjectionReport {
    /// Originals removed: `⌊r · n⌋`.
    pub removed_count: usize,
    /// Pieces appended (sum of `copies`).
    pub added_count: usize,
    /// Positions of the removed originals in the input sample.
    pub removed_indices: Vec<usize>,
    /// Per-removal records in selection order.
    pub splits: Vec<SmurfSplit>,
}

/// Replaces `⌊r · n⌋` distinct transactions with z ∈ [0, b_u) by equal-sized
/// pieces at z = s ~ Uniform(b_l, 0), open at both ends. The sample is not
/// re-trimmed; the histogram only supplies the window edges `b_l`, `b_u`.
pub fn inject_smurfing(
    sample: &TransformedSample,
    hist: &BinnedHistogram,
    window: &ManipulationWindow,
    r: f64,
    seed: u64,
) -> Result<(TransformedSample, SmurfInjectionReport)> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidConfig {
            reason: format!("smurf fraction must be in [0, 1], got {r}"),
        });
    }
    window.validate_against(hist)?;
    let b_l = hist.edges[hist.offset_of(window.l)];
    let b_u = hist.edges[(window.u - hist.n_min) as usize];

    let target = (r * sample.n as f64).floor() as usize;
    if target == 0 {
        return Ok((
            sample.clone(),
            SmurfInjectionReport {
                removed_count: 0,
                added_count: 0,
                removed_indices: Vec::new(),
                splits: Vec::new(),
            },
        ));
    }

    let eligible: Vec<usize> = sample
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= 0.0 && **v < b_u)
        .map(|(i, _)| i)
        .collect();
    if eligible.len() < target {
        return Err(Error::InsufficientEligible {
            requested: target,
            available: eligible.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, eligible.len(), target);

    let mut removed = vec![false; sample.n];
    let mut removed_indices = Vec::with_capacity(target);
    let mut splits = Vec::with_capacity(target);
    let mut added_count = 0usize;
    for pick in chosen.iter() {
        let idx = eligible[pick];
        let m = sample.values[idx];
        let s = loop {
            let s = rng.random_range(b_l..0.0);
            if s != b_l {
                break s;
            }
        };
        let copies = smurf_count(m - s);
        added_count += copies as usize;
        removed[idx] = true;
        removed_indices.push(idx);
        splits.push(SmurfSplit {
            original: m,
            smurf_size: s,
            copies,
        });
    }

    let mut values = Vec::with_capacity(sample.n - target + added_count);
    values.extend(
        sample
            .values
            .iter()
            .zip(&removed)
            .filter(|(_, gone)| !**gone)
            .map(|(v, _)| *v),
    );
    for split in &splits {
        for _ in 0..split.copies {
            values.push(split.smurf_size);
        }
    }

    let n = values.len();
    let contaminated = TransformedSample {
        values,
        n,
        trim_bounds: sample.trim_bounds,
    };
    let report = SmurfInjectionReport {
        removed_count: target,
        added_count,
        removed_indices,
        splits,
    };
    Ok((contaminated, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::build_histogram;

    #[test]
    fn presets_match_published_values() {
        let a = SimulationConfig::type_a(1);
        assert_eq!((a.n_draws, a.mean, a.stddev), (50_000, -2.5, 1.8));
        let b = SimulationConfig::type_b(1);
        assert_eq!((b.n_draws, b.mean, b.stddev), (250_000, -2.1, 2.1));
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let mut c = SimulationConfig::type_a(1);
        c.stddev = 0.0;
        assert!(c.validate().is_err());
        c.stddev = -1.0;
        assert!(c.validate().is_err());
        let mut c = SimulationConfig::type_a(1);
        c.n_draws = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn baseline_trim_removes_one_tenth_percent_per_tail() {
        // continuous draws are almost surely distinct, so the trim removes
        // exactly ceil(0.001 n) observations from each tail
        for seed in [1u64, 2, 3] {
            let s = simulate_baseline(&SimulationConfig::type_a(seed)).unwrap();
            assert_eq!(s.n, 49_900);
            assert!(s.n >= 49_880 && s.n <= 49_920);
        }
        let s = simulate_baseline(&SimulationConfig::type_b(4)).unwrap();
        assert_eq!(s.n, 249_500);
    }

    #[test]
    fn baseline_mean_is_near_the_configured_mean() {
        for seed in [10u64, 11, 12, 13, 14] {
            let cfg = SimulationConfig::type_a(seed);
            let s = simulate_baseline(&cfg).unwrap();
            let mean = s.values.iter().sum::<f64>() / s.n as f64;
            let se = cfg.stddev / (s.n as f64).sqrt();
            assert!(
                (mean - cfg.mean).abs() < 3.0 * se,
                "seed {seed}: mean {mean} vs {} ± {se}",
                cfg.mean
            );
        }
    }

    #[test]
    fn baseline_is_deterministic_per_seed() {
        let a = simulate_baseline(&SimulationConfig::type_a(42)).unwrap();
        let b = simulate_baseline(&SimulationConfig::type_a(42)).unwrap();
        assert_eq!(a, b);
        let c = simulate_baseline(&SimulationConfig::type_a(43)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn smurf_count_floors_the_currency_ratio() {
        assert_eq!(smurf_count(0.0), 1);
        assert_eq!(smurf_count(3f64.ln()), 3);
        assert_eq!(smurf_count(1.4), 4);
        assert_eq!(smurf_count(0.1), 1);
    }

    fn type_a_with_hist(seed: u64) -> (TransformedSample, BinnedHistogram) {
        let s = simulate_baseline(&SimulationConfig::type_a(seed)).unwrap();
        let h = build_histogram(&s.values).unwrap();
        (s, h)
    }

    #[test]
    fn injection_at_published_rates_hits_exact_counts() {
        let (s, h) = type_a_with_hist(7);
        let w = ManipulationWindow::new(-1, 2).unwrap();
        let (_, rep) = inject_smurfing(&s, &h, &w, 0.001, 70).unwrap();
        assert_eq!(rep.removed_count, 49);
        let (_, rep) = inject_smurfing(&s, &h, &w, 0.005, 70).unwrap();
        assert_eq!(rep.removed_count, 249);
    }

    #[test]
    fn injection_bookkeeping_and_bounds() {
        let (s, h) = type_a_with_hist(8);
        let w = ManipulationWindow::new(-1, 2).unwrap();
        let b_l = h.edges[h.offset_of(w.l)];
        let b_u = h.edges[(w.u - h.n_min) as usize];
        let (contaminated, rep) = inject_smurfing(&s, &h, &w, 0.005, 81).unwrap();
        assert_eq!(rep.splits.len(), rep.removed_count);
        assert_eq!(contaminated.n, s.n - rep.removed_count + rep.added_count);
        assert_eq!(contaminated.trim_bounds, s.trim_bounds);
        let total_copies: u64 = rep.splits.iter().map(|sp| sp.copies).sum();
        assert_eq!(total_copies as usize, rep.added_count);
        for sp in &rep.splits {
            assert!(sp.original >= 0.0 && sp.original < b_u);
            assert!(sp.smurf_size > b_l && sp.smurf_size < 0.0);
            assert!(sp.copies >= 1);
            // value conservation in currency space, up to rounding
            let original = sp.original.exp();
            let piece = sp.smurf_size.exp();
            let d = sp.copies as f64;
            assert!(d * piece <= original * (1.0 + 1e-12));
            assert!(original < (d + 1.0) * piece * (1.0 + 1e-12));
        }
        // removed originals are distinct positions
        let mut idx = rep.removed_indices.clone();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), rep.removed_count);
    }

    #[test]
    fn zero_rate_is_a_no_op() {
        let (s, h) = type_a_with_hist(9);
        let w = ManipulationWindow::new(-1, 2).unwrap();
        let (out, rep) = inject_smurfing(&s, &h, &w, 0.0, 1).unwrap();
        assert_eq!(out, s);
        assert_eq!(rep.removed_count, 0);
        assert_eq!(rep.added_count, 0);
    }

    #[test]
    fn injection_is_deterministic_per_seed() {
        let (s, h) = type_a_with_hist(10);
        let w = ManipulationWindow::new(-1, 2).unwrap();
        let a = inject_smurfing(&s, &h, &w, 0.005, 5).unwrap();
        let b = inject_smurfing(&s, &h, &w, 0.005, 5).unwrap();
        assert_eq!(a, b);
        let c = inject_smurfing(&s, &h, &w, 0.005, 6).unwrap();
        assert_ne!(a.1.splits, c.1.splits);
    }

    #[test]
    fn rate_outside_unit_interval_is_rejected() {
        let (s, h) = type_a_with_hist(11);
        let w = ManipulationWindow::new(-1, 2).unwrap();
        assert!(inject_smurfing(&s, &h, &w, 1.5, 1).is_err());
        assert!(inject_smurfing(&s, &h, &w, -0.1, 1).is_err());
    }

    #[test]
    fn too_few_eligible_transactions_is_an_error() {
        // almost all mass far below threshold: only 2 values in [0, b_u)
        let mut values: Vec<f64> = (0..500).map(|i| -4.0 + i as f64 * 0.002).collect();
        values.push(0.1);
        values.push(0.2);
        values.push(3.0); // keeps the histogram spanning the threshold
        let sample = TransformedSample::from_values(values).unwrap();
        let hist = build_histogram(&sample.values).unwrap();
        let w = ManipulationWindow::new(-1, 1).unwrap();
        let err = inject_smurfing(&sample, &hist, &w, 0.05, 1);
        assert!(matches!(err, Err(Error::InsufficientEligible { .. })));
    }
}
