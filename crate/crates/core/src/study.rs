//! Detection-power study: how often does the bootstrap flag smurfing at a
//! given contamination rate, and how does the answer depend on the assumed
//! manipulation window?
//!
//! One grid cell = (population preset, smurf rate, window upper bound, seed).
//! Per (rate, seed) a baseline is simulated and contaminated once; every
//! window upper bound is then evaluated against that same contaminated
//! sample, so window choices are compared on identical data. Contamination
//! always uses the fixed window [`INJECTION_WINDOW`], independent of the
//! window assumed at detection time — mismatch between the two is part of
//! what the study measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_zeta, DEFAULT_REPLICATES};
use crate::counterfactual::{default_degree, ManipulationWindow};
use crate::error::{Error, Result};
use crate::histogram::build_histogram;
use crate::simulate::{inject_smurfing, simulate_baseline, SimulationConfig};
use crate::stats;

/// Window used when *injecting* smurfing: originals from bins 0 and 1 are
/// split into pieces landing in bin −1.
pub const INJECTION_WINDOW: (i64, i64) = (-1, 2);

/// Which population a study simulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StudyPreset {
    /// 50k-draw population, z ~ N(−2.5, 1.8).
    TypeA,
    /// 250k-draw population, z ~ N(−2.1, 2.1).
    TypeB,
    /// Any other normal population in z-space.
    Custom {
        n_draws: usize,
        mean: f64,
        stddev: f64,
    },
}

impl StudyPreset {
    pub fn config(&self, seed: u64) -> SimulationConfig {
        match *self {
            StudyPreset::TypeA => SimulationConfig::type_a(seed),
            StudyPreset::TypeB => SimulationConfig::type_b(seed),
            StudyPreset::Custom {
                n_draws,
                mean,
                stddev,
            } => SimulationConfig {
                n_draws,
                mean,
                stddev,
                seed,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StudyPreset::TypeA => "type-a",
            StudyPreset::TypeB => "type-b",
            StudyPreset::Custom { .. } => "custom",
        }
    }
}

/// Full factorial grid over smurf rates and window upper bounds, replicated
/// over seeds. The window lower bound stays fixed across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyGrid {
    pub preset: StudyPreset,
    /// Contamination rates r (fractions; 0 = clean baseline).
    pub rates: Vec<f64>,
    /// Window upper bounds u tried at detection time.
    pub window_uppers: Vec<i64>,
    /// Window lower bound l shared by all cells (negative).
    pub window_lower: i64,
    pub seeds: Vec<u64>,
    /// Bootstrap replicates per cell.
    pub replicate_count: usize,
}

impl StudyGrid {
    /// The standard grid on the smaller population: r ∈ {0, 0.1%, 0.5%},
    /// u ∈ {1, 2}, seeds 1–20.
    pub fn type_a() -> Self {
        StudyGrid {
            preset: StudyPreset::TypeA,
            rates: vec![0.0, 0.001, 0.005],
            window_uppers: vec![1, 2],
            window_lower: -1,
            seeds: (1..=20).collect(),
            replicate_count: DEFAULT_REPLICATES,
        }
    }

    /// The standard grid on the larger population: same rates, u ∈ {1, 2, 3}.
    pub fn type_b() -> Self {
        StudyGrid {
            preset: StudyPreset::TypeB,
            window_uppers: vec![1, 2, 3],
            ..StudyGrid::type_a()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.preset.config(0).validate()?;
        if self.rates.is_empty() || self.window_uppers.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "study grid needs at least one rate, window upper bound, and seed".into(),
            });
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidConfig {
                reason: format!("smurf rate must be in [0, 1], got {r}"),
            });
        }
        for &u in &self.window_uppers {
            ManipulationWindow::new(self.window_lower, u)?;
        }
        if self.replicate_count < 100 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "need at least 100 bootstrap replicates per cell, got {}",
                    self.replicate_count
                ),
            });
        }
        Ok(())
    }
}

/// Outcome of a single (rate, u, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rate: f64,
    pub window: ManipulationWindow,
    pub seed: u64,
    pub degree: usize,
    /// Sample size after injection (baseline size at rate 0).
    pub sample_n: usize,
    pub zeta_hat: f64,
    pub lower_cl: f64,
    /// True when the 5% lower confidence limit is positive.
    pub flagged: bool,
}

/// Per-(rate, u) aggregation over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub rate: f64,
    pub window_upper: i64,
    pub seeds: usize,
    pub detected: usize,
    pub mean_zeta_hat: f64,
    pub mean_lower_cl: f64,
}

/// All cells plus the rate × window aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub grid: StudyGrid,
    pub cells: Vec<CellResult>,
    pub rows: Vec<AggregateRow>,
}

impl StudyResult {
    /// Aggregate table as CSV, means in percent of the sample.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "population,rate_pct,window_lower,window_upper,seeds,detected,mean_zeta_pct,mean_lower_cl_pct\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.grid.preset.label(),
                row.rate * 100.0,
                self.grid.window_lower,
                row.window_upper,
                row.seeds,
                row.detected,
                row.mean_zeta_hat * 100.0,
                row.mean_lower_cl * 100.0,
            ));
        }
        out
    }
}

/// Sub-seed for one role within one cell, so no two RNG uses in the study
/// share a stream. Mixing is over the master seed, a role tag, and grid
/// indices; reruns of the same grid are bit-identical.
fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x6a09_e667_f3bc_c908;
    for &p in parts {
        h = stats::splitmix64(h ^ p);
    }
    h
}

const ROLE_INJECT: u64 = 1;
const ROLE_BOOTSTRAP: u64 = 2;

/// Runs every cell of the grid. Cells are independent and run on the rayon
/// pool; results come back in grid order (rate-major, then seed, then u)
/// regardless of scheduling.
pub fn run_study(grid: &StudyGrid) -> Result<StudyResult> {
    grid.validate()?;
    let injection =
        ManipulationWindow::new(INJECTION_WINDOW.0, INJECTION_WINDOW.1).expect("fixed window");

    // One task per (rate, seed): the simulation and injection are shared by
    // all window upper bounds.
    let tasks: Vec<(usize, usize)> = (0..grid.rates.len())
        .flat_map(|ri| (0..grid.seeds.len()).map(move |si| (ri, si)))
        .collect();

    let groups: Vec<Result<Vec<CellResult>>> = tasks
        .par_iter()
        .map(|&(ri, si)| {
            let rate = grid.rates[ri];
            let seed = grid.seeds[si];
            let baseline = simulate_baseline(&grid.preset.config(seed))?;
            let base_hist = build_histogram(&baseline.values)?;
            let (sample, _) = inject_smurfing(
                &baseline,
                &base_hist,
                &injection,
                rate,
                derive_seed(&[seed, ROLE_INJECT, ri as u64]),
            )?;
            let hist = base_hist.rebin(&sample.values)?;

            let mut cells = Vec::with_capacity(grid.window_uppers.len());
            for (ui, &u) in grid.window_uppers.iter().enumerate() {
                let window = ManipulationWindow::new(grid.window_lower, u)?;
                let degree = default_degree(&hist, &window);
                let est = bootstrap_zeta(
                    &sample,
                    &hist,
                    &window,
                    degree,
                    grid.replicate_count,
                    derive_seed(&[seed, ROLE_BOOTSTRAP, ri as u64, ui as u64]),
                )?;
                cells.push(CellResult {
                    rate,
                    window,
                    seed,
                    degree,
                    sample_n: sample.n,
                    zeta_hat: est.zeta_hat,
                    lower_cl: est.lower_cl,
                    flagged: est.is_flagged(),
                });
            }
            Ok(cells)
        })
        .collect();

    let mut cells = Vec::with_capacity(tasks.len() * grid.window_uppers.len());
    for group in groups {
        cells.extend(group?);
    }

    let mut rows = Vec::with_capacity(grid.rates.len() * grid.window_uppers.len());
    for &rate in &grid.rates {
        for &u in &grid.window_uppers {
            let matching: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.rate == rate && c.window.u == u)
                .collect();
            let seeds = matching.len();
            rows.push(AggregateRow {
                rate,
                window_upper: u,
                seeds,
                detected: matching.iter().filter(|c| c.flagged).count(),
                mean_zeta_hat: matching.iter().map(|c| c.zeta_hat).sum::<f64>() / seeds as f64,
                mean_lower_cl: matching.iter().map(|c| c.lower_cl).sum::<f64>() / seeds as f64,
            });
        }
    }

    Ok(StudyResult {
        grid: grid.clone(),
        cells,
        rows,
    })
}
