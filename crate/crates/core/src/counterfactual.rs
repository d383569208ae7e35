//! Polynomial counterfactual for the bin fractions and the excess-mass
//! statistic ζ.
//!
//! The counterfactual is an OLS polynomial in the bin midpoints, fitted only
//! to bins *outside* the suspected manipulation window around the threshold,
//! then evaluated everywhere. ζ adds the observed excess below the threshold
//! to the observed shortfall above it; smurfing shows up as ζ > 0.
//!
//! For conditioning, midpoints are affinely mapped onto [−1, 1] and the
//! polynomial is expressed in the Chebyshev basis, solved by QR. Raw-power
//! fits of the same degree give the same predictions up to rounding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::BinnedHistogram;

/// Identifier of the fitting basis, recorded in reports.
pub const FIT_BASIS: &str = "chebyshev on midpoints mapped to [-1,1]";

/// The bin range `[l, u)` suspected of manipulation: `l < 0 < u`, so it
/// always straddles the threshold. Bins `l ..= u-1` are excluded from the
/// fit; `b_l` and `b_u` bound the z-range smurfers move money across.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulationWindow {
    /// Lowest excluded bin index (negative).
    pub l: i64,
    /// First bin index above the window (positive); bin `u-1` is the highest
    /// excluded bin.
    pub u: i64,
}

impl ManipulationWindow {
    pub fn new(l: i64, u: i64) -> Result<Self> {
        if !(l < 0 && u > 0) {
            return Err(Error::InvalidWindow {
                reason: format!("need l < 0 < u, got l = {l}, u = {u}"),
            });
        }
        Ok(Self { l, u })
    }

    /// Checks the window fits inside a histogram's bin range.
    pub fn validate_against(&self, hist: &BinnedHistogram) -> Result<()> {
        if self.l < hist.n_min || self.u > hist.n_max - 1 {
            return Err(Error::InvalidWindow {
                reason: format!(
                    "window [{}, {}] exceeds bin range [{}, {}]",
                    self.l,
                    self.u,
                    hist.n_min,
                    hist.n_max - 1
                ),
            });
        }
        Ok(())
    }

    /// Number of bins excluded from the fit.
    pub fn excluded_bins(&self) -> usize {
        (self.u - self.l) as usize
    }

    /// Whether bin index `i` lies inside the excluded range.
    pub fn contains_bin(&self, i: i64) -> bool {
        i >= self.l && i < self.u
    }
}

/// Default polynomial degree: half the bin count (rounded half away from
/// zero), capped so at least one residual degree of freedom short of exact
/// interpolation is kept whenever the window leaves too few fitted bins.
pub fn default_degree(hist: &BinnedHistogram, window: &ManipulationWindow) -> usize {
    let p = (hist.bin_count() as f64 / 2.0).round() as usize;
    let fitted = hist.bin_count().saturating_sub(window.excluded_bins());
    p.min(fitted.saturating_sub(1))
}

/// A fitted counterfactual: coefficients in the mapped Chebyshev basis plus
/// the model's predicted fraction for every bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualFit {
    pub degree: usize,
    /// Coefficients in the [`FIT_BASIS`] basis, constant term first.
    pub coefficients: Vec<f64>,
    /// Predicted fraction for every bin of the histogram, window included.
    pub fitted_fractions: Vec<f64>,
    /// Number of bins the model was estimated on.
    pub fitted_bin_count: usize,
}

impl CounterfactualFit {
    /// True when the polynomial has zero residual degrees of freedom.
    pub fn is_exact_interpolation(&self) -> bool {
        self.degree + 1 == self.fitted_bin_count
    }
}

/// Fits the degree-`degree` counterfactual to all bins outside `window`.
pub fn fit_counterfactual(
    hist: &BinnedHistogram,
    window: &ManipulationWindow,
    degree: usize,
) -> Result<CounterfactualFit> {
    let plan = FitPlan::new(hist, window, degree)?;
    let coefficients = plan.solve(&hist.fractions)?;
    let fitted_fractions = plan.predict_all(&coefficients);
    Ok(CounterfactualFit {
        degree,
        coefficients,
        fitted_fractions,
        fitted_bin_count: plan.fitted_offsets.len(),
    })
}

/// Excess mass moved below the threshold plus mass missing above it:
/// `Σ_{i=l}^{-1} (n_i − n̂_i) + Σ_{i=0}^{u-1} (n̂_i − n_i)`, in fractions of
/// the sample.
pub fn zeta(hist: &BinnedHistogram, fit: &CounterfactualFit, window: &ManipulationWindow) -> f64 {
    let mut total = 0.0;
    for i in window.l..0 {
        let o = hist.offset_of(i);
        total += hist.fractions[o] - fit.fitted_fractions[o];
    }
    for i in 0..window.u {
        let o = hist.offset_of(i);
        total += fit.fitted_fractions[o] - hist.fractions[o];
    }
    total
}

/// Precomputed fit machinery for one histogram geometry + window + degree.
///
/// The design matrix depends only on the bin midpoints, so its QR
/// factorization is computed once and reused for every fraction vector —
/// the bootstrap refits thousands of replicates against the same plan.
pub(crate) struct FitPlan {
    /// Offsets (0-based) of the bins entering the fit.
    fitted_offsets: Vec<usize>,
    /// Qᵀ of the thin QR of the design matrix, (degree+1) × fitted bins.
    q_t: DMatrix<f64>,
    /// Upper-triangular R, (degree+1) × (degree+1).
    r: DMatrix<f64>,
    /// Basis rows for every bin (fitted and excluded alike).
    basis_all: DMatrix<f64>,
    /// Window bin offsets, split by side of the threshold.
    below: Vec<usize>,
    above: Vec<usize>,
    degree: usize,
}

impl FitPlan {
    pub(crate) fn new(
        hist: &BinnedHistogram,
        window: &ManipulationWindow,
        degree: usize,
    ) -> Result<Self> {
        window.validate_against(hist)?;
        let bins = hist.bin_count();
        let fitted_offsets: Vec<usize> = (hist.n_min..hist.n_max)
            .filter(|i| !window.contains_bin(*i))
            .map(|i| hist.offset_of(i))
            .collect();
        if fitted_offsets.len() < degree + 1 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "degree {degree} needs at least {} bins outside the window, got {}",
                    degree + 1,
                    fitted_offsets.len()
                ),
            });
        }

        // Affine map of the full midpoint range onto [-1, 1].
        let first = hist.midpoints[0];
        let last = hist.midpoints[bins - 1];
        let scale = 2.0 / (last - first);
        let mapped: Vec<f64> = hist
            .midpoints
            .iter()
            .map(|m| (m - first) * scale - 1.0)
            .collect();

        let basis_all = DMatrix::from_fn(bins, degree + 1, |i, j| chebyshev(j, mapped[i]));
        let design = DMatrix::from_fn(fitted_offsets.len(), degree + 1, |i, j| {
            basis_all[(fitted_offsets[i], j)]
        });
        let qr = design.qr();
        let r = qr.r();
        let q_t = qr.q().transpose();

        let max_diag = (0..=degree).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
        let min_diag = (0..=degree)
            .map(|j| r[(j, j)].abs())
            .fold(f64::INFINITY, f64::min);
        // the first clause also catches a NaN diagonal
        if !(max_diag.is_finite() && max_diag > 0.0) || min_diag < 1e-10 * max_diag {
            return Err(Error::RankDeficient {
                degree,
                fitted_bins: fitted_offsets.len(),
            });
        }

        let below = (window.l..0).map(|i| hist.offset_of(i)).collect();
        let above = (0..window.u).map(|i| hist.offset_of(i)).collect();
        Ok(Self {
            fitted_offsets,
            q_t,
            r,
            basis_all,
            below,
            above,
            degree,
        })
    }

    /// Least-squares coefficients for one fraction vector (full-grid order).
    #[allow(clippy::needless_range_loop)] // indexed form mirrors the math
    pub(crate) fn solve(&self, fractions: &[f64]) -> Result<Vec<f64>> {
        let k = self.degree + 1;
        // qty = Qᵀ y over the fitted bins
        let mut qty = vec![0.0; k];
        for (row, &off) in self.fitted_offsets.iter().enumerate() {
            let y = fractions[off];
            for (item, q) in qty.iter_mut().zip(self.q_t.column(row).iter()) {
                *item += q * y;
            }
        }
        // back-substitute R beta = qty
        let mut beta = qty;
        for j in (0..k).rev() {
            let mut s = beta[j];
            for m in (j + 1)..k {
                s -= self.r[(j, m)] * beta[m];
            }
            beta[j] = s / self.r[(j, j)];
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::RankDeficient {
                degree: self.degree,
                fitted_bins: self.fitted_offsets.len(),
            });
        }
        Ok(beta)
    }

    /// Model prediction for every bin.
    pub(crate) fn predict_all(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.basis_all.nrows())
            .map(|i| self.predict_offset(i, beta))
            .collect()
    }

    fn predict_offset(&self, offset: usize, beta: &[f64]) -> f64 {
        beta.iter()
            .enumerate()
            .map(|(j, b)| b * self.basis_all[(offset, j)])
            .sum()
    }

    /// ζ for an arbitrary fraction vector on this plan's geometry, refitting
    /// the counterfactual on the fly. Only window bins are predicted.
    pub(crate) fn zeta_for(&self, fractions: &[f64]) -> Result<f64> {
        let beta = self.solve(fractions)?;
        let mut total = 0.0;
        for &o in &self.below {
            total += fractions[o] - self.predict_offset(o, &beta);
        }
        for &o in &self.above {
            total += self.predict_offset(o, &beta) - fractions[o];
        }
        Ok(total)
    }
}

/// Chebyshev polynomial of the first kind, `T_j(x)`, via the recurrence.
fn chebyshev(j: usize, x: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 2..=j {
                (prev, cur) = (cur, 2.0 * x * cur - prev);
            }
            cur
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::build_histogram_with_bin_count;
    use proptest::prelude::*;

    /// Geometry-plus-fractions histogram for fit tests (counts unused here).
    fn synthetic_hist(bin_width: f64, n_min: i64, fractions: Vec<f64>) -> BinnedHistogram {
        let n_max = n_min + fractions.len() as i64;
        let edges: Vec<f64> = (n_min..=n_max).map(|i| i as f64 * bin_width).collect();
        let midpoints = edges[..fractions.len()]
            .iter()
            .map(|b| b + bin_width / 2.0)
            .collect();
        BinnedHistogram {
            bin_width,
            n_min,
            n_max,
            edges,
            midpoints,
            counts: vec![0; fractions.len()],
            fractions,
            total_n: 0,
        }
    }

    /// Independent fit oracle: raw-power basis on the unmapped midpoints,
    /// normal equations solved by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn normal_equations_predictions(
        xs: &[f64],
        ys: &[f64],
        degree: usize,
        eval_at: &[f64],
    ) -> Vec<f64> {
        let k = degree + 1;
        let mut ata = vec![vec![0.0f64; k]; k];
        let mut aty = vec![0.0f64; k];
        for (x, y) in xs.iter().zip(ys) {
            let powers: Vec<f64> = (0..k).map(|j| x.powi(j as i32)).collect();
            for a in 0..k {
                for b in 0..k {
                    ata[a][b] += powers[a] * powers[b];
                }
                aty[a] += powers[a] * y;
            }
        }
        // Gaussian elimination with partial pivoting on [AtA | Aty]
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|a, b| ata[*a][col].abs().total_cmp(&ata[*b][col].abs()))
                .unwrap();
            ata.swap(col, pivot);
            aty.swap(col, pivot);
            for row in (col + 1)..k {
                let f = ata[row][col] / ata[col][col];
                for c in col..k {
                    ata[row][c] -= f * ata[col][c];
                }
                aty[row] -= f * aty[col];
            }
        }
        let mut beta = vec![0.0f64; k];
        for row in (0..k).rev() {
            let mut s = aty[row];
            for c in (row + 1)..k {
                s -= ata[row][c] * beta[c];
            }
            beta[row] = s / ata[row][row];
        }
        eval_at
            .iter()
            .map(|x| (0..k).map(|j| beta[j] * x.powi(j as i32)).sum())
            .collect()
    }

    fn window(l: i64, u: i64) -> ManipulationWindow {
        ManipulationWindow::new(l, u).unwrap()
    }

    #[test]
    fn window_must_straddle_threshold() {
        assert!(ManipulationWindow::new(-1, 2).is_ok());
        assert!(ManipulationWindow::new(0, 2).is_err());
        assert!(ManipulationWindow::new(-1, 0).is_err());
        assert!(ManipulationWindow::new(1, 2).is_err());
        let values = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let h = build_histogram_with_bin_count(&values, 5).unwrap();
        assert!(window(-1, 1).validate_against(&h).is_ok());
        assert!(window(-3, 1).validate_against(&h).is_err());
        assert!(window(-1, 2).validate_against(&h).is_err());
    }

    #[test]
    fn default_degree_is_half_the_bins() {
        let h10 = synthetic_hist(1.0, -5, vec![0.1; 10]);
        assert_eq!(default_degree(&h10, &window(-1, 1)), 5);
        let h11 = synthetic_hist(1.0, -5, vec![1.0 / 11.0; 11]);
        assert_eq!(default_degree(&h11, &window(-1, 1)), 6);
        // a 6-bin window over 10 bins leaves 4 fitted bins: cap at 3
        assert_eq!(default_degree(&h10, &window(-3, 3)), 3);
    }

    #[test]
    fn degree_zero_fit_is_the_mean_of_fitted_bins() {
        let fr = vec![0.1, 0.2, 0.3, 0.15, 0.25];
        let h = synthetic_hist(1.0, -2, fr);
        let w = window(-1, 1);
        let fit = fit_counterfactual(&h, &w, 0).unwrap();
        // fitted bins are offsets 0, 3, 4 -> mean of 0.1, 0.15, 0.25
        let mean = (0.1 + 0.15 + 0.25) / 3.0;
        for v in &fit.fitted_fractions {
            assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_fractions_are_recovered_exactly() {
        let bin_width = 0.5;
        let n_min = -4i64;
        let poly = |x: f64| 0.05 + 0.01 * x + 0.004 * x * x;
        let mids: Vec<f64> = (n_min..n_min + 9)
            .map(|i| i as f64 * bin_width + bin_width / 2.0)
            .collect();
        let h = synthetic_hist(bin_width, n_min, mids.iter().map(|m| poly(*m)).collect());
        let w = window(-2, 2);
        let fit = fit_counterfactual(&h, &w, 2).unwrap();
        for (m, v) in mids.iter().zip(&fit.fitted_fractions) {
            assert!((v - poly(*m)).abs() < 1e-10, "at {m}: {v}");
        }
        // residuals vanish, so zeta is zero up to rounding
        assert!(zeta(&h, &fit, &w).abs() < 1e-12);
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        let fr = vec![0.08, 0.1, 0.13, 0.11, 0.09, 0.12, 0.1, 0.08, 0.1, 0.09];
        let h = synthetic_hist(0.3, -5, fr.clone());
        let w = window(-1, 1);
        let fit = fit_counterfactual(&h, &w, 3).unwrap();
        let xs: Vec<f64> = (0..10)
            .filter(|o| !w.contains_bin(o - 5))
            .map(|o| h.midpoints[o as usize])
            .collect();
        let ys: Vec<f64> = (0..10)
            .filter(|o| !w.contains_bin(o - 5))
            .map(|o| fr[o as usize])
            .collect();
        let oracle = normal_equations_predictions(&xs, &ys, 3, &h.midpoints);
        for (a, b) in fit.fitted_fractions.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_the_basis() {
        let fr = vec![0.05, 0.12, 0.2, 0.18, 0.15, 0.1, 0.08, 0.07, 0.05];
        let h = synthetic_hist(1.0, -4, fr.clone());
        let w = window(-1, 2);
        let fit = fit_counterfactual(&h, &w, 3).unwrap();
        let fitted_offsets: Vec<usize> =
            (0..9).filter(|o| !w.contains_bin(*o as i64 - 4)).collect();
        let first = h.midpoints[0];
        let last = h.midpoints[8];
        for j in 0..=3usize {
            let dot: f64 = fitted_offsets
                .iter()
                .map(|&o| {
                    let x = 2.0 * (h.midpoints[o] - first) / (last - first) - 1.0;
                    (fr[o] - fit.fitted_fractions[o]) * chebyshev(j, x)
                })
                .sum();
            assert!(dot.abs() < 1e-8, "basis {j} dot {dot}");
        }
    }

    #[test]
    fn zeta_adds_excess_below_and_deficit_above() {
        let h = synthetic_hist(1.0, -2, vec![0.24, 0.26, 0.23, 0.27]);
        let fit = CounterfactualFit {
            degree: 0,
            coefficients: vec![0.25],
            fitted_fractions: vec![0.24, 0.25, 0.25, 0.27],
            fitted_bin_count: 2,
        };
        // below: 0.26 − 0.25 = +0.010; above: 0.25 − 0.23 = +0.020
        let z = zeta(&h, &fit, &window(-1, 1));
        assert!((z - 0.030).abs() < 1e-15);
    }

    #[test]
    fn uniform_shift_inside_a_balanced_window_cancels() {
        let base = vec![0.1, 0.12, 0.13, 0.12, 0.11, 0.14, 0.13, 0.15];
        let h = synthetic_hist(1.0, -4, base.clone());
        let w = window(-2, 2);
        let fit = fit_counterfactual(&h, &w, 1).unwrap();
        let z0 = zeta(&h, &fit, &w);
        let mut shifted = base;
        for i in w.l..w.u {
            shifted[(i + 4) as usize] += 0.01;
        }
        let h2 = synthetic_hist(1.0, -4, shifted);
        // same fit (window bins don't enter it), shifted observations
        let z1 = zeta(&h2, &fit, &w);
        assert!((z1 - z0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_ignore_window_bins_bit_for_bit() {
        let fr_a = vec![0.1, 0.12, 0.2, 0.18, 0.11, 0.14, 0.15];
        let mut fr_b = fr_a.clone();
        fr_b[3] = 0.02; // offset 3 is bin -1 ∈ [l, u)
        fr_b[4] = 0.33; // offset 4 is bin 0
        let h_a = synthetic_hist(1.0, -4, fr_a);
        let h_b = synthetic_hist(1.0, -4, fr_b);
        let w = window(-1, 1);
        let fit_a = fit_counterfactual(&h_a, &w, 2).unwrap();
        let fit_b = fit_counterfactual(&h_b, &w, 2).unwrap();
        assert_eq!(fit_a.coefficients, fit_b.coefficients);
        assert_eq!(fit_a.fitted_fractions, fit_b.fitted_fractions);
    }

    #[test]
    fn too_high_a_degree_is_rejected() {
        let h = synthetic_hist(1.0, -2, vec![0.25; 4]);
        let w = window(-1, 1);
        assert!(fit_counterfactual(&h, &w, 2).is_err());
        // exact interpolation is permitted but flagged
        let fit = fit_counterfactual(&h, &w, 1).unwrap();
        assert!(fit.is_exact_interpolation());
    }

    proptest! {
        // Direction property: with the fit held fixed, mass added to a
        // below-threshold window bin raises zeta by that amount; mass added
        // to an above-threshold window bin lowers it.
        #[test]
        fn zeta_moves_with_window_mass(
            fr in proptest::collection::vec(0.01f64..1.0, 8),
            delta in 0.001f64..0.5,
            bump_below in proptest::bool::ANY,
        ) {
            let total: f64 = fr.iter().sum();
            let fr: Vec<f64> = fr.iter().map(|v| v / total).collect();
            let h = synthetic_hist(1.0, -4, fr.clone());
            let w = window(-2, 2);
            let fit = fit_counterfactual(&h, &w, 2).unwrap();
            let z0 = zeta(&h, &fit, &w);
            let mut bumped = fr;
            let off = if bump_below { 2 } else { 5 }; // bins -2 and 1
            bumped[off] += delta;
            let h2 = synthetic_hist(1.0, -4, bumped);
            let z1 = zeta(&h2, &fit, &w);
            let expected = if bump_below { z0 + delta } else { z0 - delta };
            prop_assert!((z1 - expected).abs() < 1e-12);
        }

        // Basis equivalence: conditioned fit and raw normal equations give
        // the same predictions for moderate degrees.
        #[test]
        fn conditioned_fit_equals_raw_fit(
            fr in proptest::collection::vec(0.01f64..1.0, 12),
            degree in 0usize..=6,
        ) {
            let total: f64 = fr.iter().sum();
            let fr: Vec<f64> = fr.iter().map(|v| v / total).collect();
            let h = synthetic_hist(0.25, -6, fr.clone());
            let w = window(-2, 2);
            let fit = fit_counterfactual(&h, &w, degree).unwrap();
            let keep: Vec<usize> = (0..12).filter(|o| !w.contains_bin(*o as i64 - 6)).collect();
            let xs: Vec<f64> = keep.iter().map(|&o| h.midpoints[o]).collect();
            let ys: Vec<f64> = keep.iter().map(|&o| fr[o]).collect();
            let oracle = normal_equations_predictions(&xs, &ys, degree, &h.midpoints);
            for (a, b) in fit.fitted_fractions.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }
    }
}
