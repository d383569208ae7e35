//! `smurfscan` — command-line scanner for transaction structuring ("smurfing")
//! just below alert thresholds.
//!
//! Exit codes: 0 ok, 2 bad input file, 3 precondition violated, 4 numerical
//! failure. All randomized commands take `--seed` and are deterministic.

mod input;
mod svg;

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use smurfscan::{
    analyze, bootstrap::DEFAULT_REPLICATES, build_histogram, inject_smurfing, ks_two_sample,
    run_study, simulate_baseline, simulate_draws, study::INJECTION_WINDOW, AnalyzeOptions,
    ManipulationWindow, StudyGrid, StudyPreset, TransactionSample,
};

#[derive(Parser)]
#[command(
    name = "smurfscan",
    version,
    about = "Scans transaction logs for structuring below alert thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV of transaction amounts against an alert threshold
    Analyze(AnalyzeArgs),
    /// Generate a synthetic transaction log, optionally with smurfing injected
    Simulate(SimulateArgs),
    /// Two-sample Kolmogorov-Smirnov test between two transaction logs
    Kstest(KstestArgs),
    /// Detection-power study over a grid of smurf rates and windows
    Study(StudyArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV file of amounts; the first numeric column is used
    input: PathBuf,
    /// Alert threshold in the same currency unit as the amounts (must be > 1)
    #[arg(short, long)]
    threshold: f64,
    /// Lower edge l of the suspected manipulation window [l, u) in z-space
    #[arg(short, long, default_value_t = -1, allow_hyphen_values = true)]
    lower: i64,
    /// Upper edge u of the suspected manipulation window
    #[arg(short, long, default_value_t = 2)]
    upper: i64,
    /// Polynomial degree of the counterfactual (default: half the bin count,
    /// capped at fitted bins - 1)
    #[arg(short, long)]
    degree: Option<usize>,
    /// Override the automatic (Doane) bin count
    #[arg(short, long)]
    bins: Option<usize>,
    /// Bootstrap replicates for the confidence limit
    #[arg(short, long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(short, long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the bootstrap (default: all cores)
    #[arg(short, long)]
    workers: Option<usize>,
    /// Directory for report.json, histogram.svg and excess.svg
    #[arg(short, long, env = "SMURFSCAN_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Population preset: type-a (50k draws) or type-b (250k draws)
    #[arg(short, long)]
    preset: Option<String>,
    /// Custom population: number of z-space draws (with --mean and --stddev)
    #[arg(long, requires_all = ["mean", "stddev"], conflicts_with = "preset")]
    draws: Option<usize>,
    /// Custom population: mean of z
    #[arg(long, allow_hyphen_values = true)]
    mean: Option<f64>,
    /// Custom population: standard deviation of z
    #[arg(long)]
    stddev: Option<f64>,
    /// Fraction of transactions converted into smurfed batches (0 = clean)
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    #[arg(short, long, default_value_t = 1)]
    seed: u64,
    /// Fake alert threshold used to turn z values into currency amounts
    #[arg(short, long, default_value_t = 10_000_000.0)]
    threshold: f64,
    /// Output CSV path
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct KstestArgs {
    /// First CSV of amounts
    a: PathBuf,
    /// Second CSV of amounts
    b: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// Population preset: type-a or type-b (alternatively set in --config)
    #[arg(short, long)]
    preset: Option<String>,
    /// JSON file with any subset of the grid fields; flags take precedence
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Comma-separated contamination rates (fractions)
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Comma-separated window upper bounds u
    #[arg(long, value_delimiter = ',')]
    uppers: Option<Vec<i64>>,
    /// Window lower bound l shared by the whole grid
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<i64>,
    /// Comma-separated seeds (one simulated population per seed)
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Bootstrap replicates per cell
    #[arg(long)]
    replicates: Option<usize>,
    /// Directory for study.json and study.csv
    #[arg(short, long, env = "SMURFSCAN_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

/// Grid fields a study config file may set; everything is optional and
/// command-line flags win over the file.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFileConfig {
    preset: Option<StudyPreset>,
    rates: Option<Vec<f64>>,
    window_uppers: Option<Vec<i64>>,
    window_lower: Option<i64>,
    seeds: Option<Vec<u64>>,
    replicate_count: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Kstest(args) => cmd_kstest(args),
        Command::Study(args) => cmd_study(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 2 for input-file problems, 4 for numerical failures, 3 for everything
/// else (violated preconditions).
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<input::BadInput>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<smurfscan::Error>() {
            return if e.is_numerical() { 4 } else { 3 };
        }
    }
    3
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let amounts = input::read_amounts(&args.input)?;
    let sample = TransactionSample::new(amounts, args.threshold)?;
    let options = AnalyzeOptions {
        window: ManipulationWindow::new(args.lower, args.upper)?,
        degree: args.degree,
        bin_count: args.bins,
        replicate_count: args.replicates,
        seed: args.seed,
        workers: args.workers,
    };
    let report = analyze(&sample, &options)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let report_path = args.out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(&report_path, json)?;
    fs::write(
        args.out_dir.join("histogram.svg"),
        svg::histogram_svg(&report),
    )?;
    fs::write(args.out_dir.join("excess.svg"), svg::excess_svg(&report))?;

    println!(
        "{} (zeta_hat = {:+.4}% of {} transactions, lower 5% CL = {:+.4}%)",
        report.verdict,
        report.zeta_hat * 100.0,
        report.input.post_trim_n,
        report.bootstrap.lower_cl * 100.0,
    );
    println!("report: {}", report_path.display());
    Ok(())
}

fn parse_preset(name: &str) -> Result<StudyPreset> {
    match name.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
        "type-a" | "typea" | "a" => Ok(StudyPreset::TypeA),
        "type-b" | "typeb" | "b" => Ok(StudyPreset::TypeB),
        other => bail!("unknown preset '{other}' (expected type-a or type-b)"),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    preset: String,
    rows: usize,
    threshold: f64,
    rate: f64,
    seed: u64,
    removed: usize,
    added: usize,
    out: PathBuf,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let preset = match (&args.preset, args.draws) {
        (Some(name), None) => parse_preset(name)?,
        (None, Some(n_draws)) => StudyPreset::Custom {
            n_draws,
            mean: args.mean.expect("clap requires_all"),
            stddev: args.stddev.expect("clap requires_all"),
        },
        (None, None) => bail!("either --preset or --draws/--mean/--stddev is required"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let config = preset.config(args.seed);
    if !(args.threshold.is_finite() && args.threshold > 1.0) {
        return Err(smurfscan::Error::InvalidConfig {
            reason: format!(
                "threshold must be a finite number > 1, got {}",
                args.threshold
            ),
        }
        .into());
    }

    // The export is pre-trim: the analyze command re-trims on ingestion.
    let mut z_values = simulate_draws(&config)?;
    let (removed, added) = if args.rate > 0.0 {
        let baseline = simulate_baseline(&config)?;
        let hist = build_histogram(&baseline.values)?;
        let window = ManipulationWindow::new(INJECTION_WINDOW.0, INJECTION_WINDOW.1)?;
        let (_, injection) = inject_smurfing(&baseline, &hist, &window, args.rate, args.seed)?;
        // Map the removals back onto the pre-trim draws (trimming only drops
        // tail values, so every removed z is present verbatim).
        let mut removal: HashMap<u64, usize> = HashMap::new();
        for &idx in &injection.removed_indices {
            *removal.entry(baseline.values[idx].to_bits()).or_insert(0) += 1;
        }
        z_values.retain(|z| match removal.get_mut(&z.to_bits()) {
            Some(count) if *count > 0 => {
                *count -= 1;
                false
            }
            _ => true,
        });
        debug_assert!(removal.values().all(|&c| c == 0));
        for split in &injection.splits {
            for _ in 0..split.copies {
                z_values.push(split.smurf_size);
            }
        }
        (injection.removed_count, injection.added_count)
    } else if !(0.0..=1.0).contains(&args.rate) {
        return Err(smurfscan::Error::InvalidConfig {
            reason: format!("smurf rate must be in [0, 1], got {}", args.rate),
        }
        .into());
    } else {
        (0, 0)
    };

    let ln_t = args.threshold.ln();
    let amounts: Vec<f64> = z_values.iter().map(|z| (z + ln_t).exp()).collect();
    input::write_amounts(&args.out, &amounts)?;

    let summary = SimulateSummary {
        preset: preset.label().to_string(),
        rows: amounts.len(),
        threshold: args.threshold,
        rate: args.rate,
        seed: args.seed,
        removed,
        added,
        out: args.out,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_kstest(args: KstestArgs) -> Result<()> {
    let xa = input::read_amounts(&args.a)?;
    let xb = input::read_amounts(&args.b)?;
    let result = ks_two_sample(&xa, &xb)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<()> {
    let file: StudyFileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                anyhow::Error::new(input::BadInput(
                    anyhow::Error::new(e).context(format!("cannot open {}", path.display())),
                ))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                anyhow::Error::new(input::BadInput(
                    anyhow!(e).context(format!("{} is not a valid study config", path.display())),
                ))
            })?
        }
        None => StudyFileConfig::default(),
    };

    let preset = match (&args.preset, file.preset) {
        (Some(name), _) => parse_preset(name)?,
        (None, Some(preset)) => preset,
        (None, None) => bail!("either --preset or a config file with a preset is required"),
    };
    let base = match preset {
        StudyPreset::TypeB => StudyGrid::type_b(),
        _ => StudyGrid {
            preset,
            ..StudyGrid::type_a()
        },
    };
    // precedence: flags > config file > preset defaults
    let grid = StudyGrid {
        preset,
        rates: args.rates.or(file.rates).unwrap_or(base.rates),
        window_uppers: args
            .uppers
            .or(file.window_uppers)
            .unwrap_or(base.window_uppers),
        window_lower: args
            .lower
            .or(file.window_lower)
            .unwrap_or(base.window_lower),
        seeds: args.seeds.or(file.seeds).unwrap_or(base.seeds),
        replicate_count: args
            .replicates
            .or(file.replicate_count)
            .unwrap_or(base.replicate_count),
    };

    let result = run_study(&grid)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let json_path = args.out_dir.join("study.json");
    let mut json = serde_json::to_string_pretty(&result)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    let csv_path = args.out_dir.join("study.csv");
    fs::write(&csv_path, result.to_csv_string())?;

    println!(
        "{} cells over {} seeds ({} population)",
        result.cells.len(),
        grid.seeds.len(),
        preset.label(),
    );
    for row in &result.rows {
        println!(
            "  r = {:>5.2}%  u = {}: flagged {:>2}/{} seeds, mean zeta_hat {:+.3}%",
            row.rate * 100.0,
            row.window_upper,
            row.detected,
            row.seeds,
            row.mean_zeta_hat * 100.0,
        );
    }
    println!("study: {}", json_path.display());
    println!("table: {}", csv_path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_error_kinds() {
        let bad = anyhow::Error::new(input::BadInput(anyhow!("nope")));
        assert_eq!(exit_code(&bad), 2);
        assert_eq!(exit_code(&bad.context("while reading")), 2);

        let precondition: anyhow::Error = smurfscan::Error::InvalidConfig {
            reason: "r out of range".into(),
        }
        .into();
        assert_eq!(exit_code(&precondition), 3);

        let numerical: anyhow::Error = smurfscan::Error::RankDeficient {
            degree: 9,
            fitted_bins: 14,
        }
        .into();
        assert_eq!(exit_code(&numerical), 4);

        assert_eq!(exit_code(&anyhow!("anything else")), 3);
    }

    #[test]
    fn preset_names_parse_loosely() {
        assert_eq!(parse_preset("type-a").unwrap(), StudyPreset::TypeA);
        assert_eq!(parse_preset("TYPE_B").unwrap(), StudyPreset::TypeB);
        assert_eq!(parse_preset("b").unwrap(), StudyPreset::TypeB);
        assert!(parse_preset("type-c").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
