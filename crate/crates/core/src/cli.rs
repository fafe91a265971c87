//! Command-line pipeline: generate / ingest / audit / homogenize /
//! simulate / fit. Every subcommand is a pure function of its input files
//! and flags — rerunning with the same arguments produces byte-identical
//! output files.
//!
//! Exit codes: 0 success; 1 input or validation failure; 2 the audit
//! found BH-corrected adverse impact (a machine-readable signal for CI
//! pipelines and batch jobs).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::dataset::{self, IdentityKey, SchemaMapping};
use crate::report::{self, HomogenizationReport, PerKGof, SimulationReport};
use crate::stats::fit_exponential;
use crate::{adverse, homog, sim, synth};
use crate::{Error, Result};

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "SCREENAUDIT_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "screenaudit",
    version,
    about = "Audit algorithmic screening data for adverse impact, outcome \
             homogenization, and systemic rejection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a calibrated synthetic corpus from a spec file.
    Generate(GenerateArgs),
    /// Load, validate, and clean a raw applications CSV.
    Ingest(IngestArgs),
    /// Per-position adverse-impact audit with BH correction.
    Audit(AuditArgs),
    /// Observed vs. independence-baseline recommendation counts.
    Homogenize(HomogenizeArgs),
    /// Counterfactual application simulation over a range of k.
    Simulate(SimulateArgs),
    /// Exponential decay fit of two CSV columns.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Synthetic corpus spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory (default: $SCREENAUDIT_OUT, then ".").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw applications CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Cleaned applications CSV (canonical columns).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recommendation threshold on the score.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Significance level for z-tests and the BH correction.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Practical-significance bound on the impact ratio.
    #[arg(long, default_value_t = 0.8)]
    pub four_fifths: f64,
    /// Distinct-applicant floor for an eligible position.
    #[arg(long, default_value_t = 30)]
    pub min_reporting: u64,
    /// Demographic column to audit.
    #[arg(long, default_value = "race")]
    pub group_column: String,
    /// Comma-separated list restricting the reported groups.
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
}

#[derive(Debug, Args)]
pub struct HomogenizeArgs {
    /// Cleaned applications CSV (canonical columns).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Minimum expected count per χ² bin before merging.
    #[arg(long, default_value_t = 5.0)]
    pub min_expected: f64,
    /// Minimum cohort size for a per-k row.
    #[arg(long, default_value_t = 50)]
    pub cohort_floor: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Cleaned applications CSV (defines the application matrix).
    #[arg(long)]
    pub input: PathBuf,
    /// Simulated outcome matrix CSV (applicant_id + one column per model).
    #[arg(long)]
    pub osim: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 25)]
    pub k_max: usize,
    /// Replicates per k.
    #[arg(long, default_value_t = 100)]
    pub replicates: u64,
    /// Master seed; each (k, replicate) derives a child stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Systemic-rejection rate counted as a crossing.
    #[arg(long, default_value_t = 0.001)]
    pub crossing_threshold: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Curve CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "k")]
    pub x_column: String,
    #[arg(long, default_value = "observed")]
    pub y_column: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run a parsed command; the return value is the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Homogenize(args) => cmd_homogenize(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
    }
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(dir)
}

fn load_clean_input(path: &Path, threshold: f64) -> Result<Vec<dataset::ApplicationRecord>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie strictly inside (0, 1), got {threshold}"
        )));
    }
    let mut records = dataset::load_dataset(path, &SchemaMapping::default())?;
    dataset::binarize(&mut records, threshold)?;
    Ok(records)
}

fn cmd_generate(args: GenerateArgs) -> Result<i32> {
    let display = args.spec.display().to_string();
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&display, e))?;
    let mut spec: synth::SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| Error::json(&display, e))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let dir = out_dir(args.out)?;
    let corpus = synth::generate(&spec)?;
    dataset::write_dataset(dir.join("dataset.csv"), &corpus.records)?;
    sim::write_outcome_matrix(dir.join("osim.csv"), &corpus.outcome_matrix)?;
    report::write_json(dir.join("ground_truth.json"), &corpus.truth)?;
    let planted = &corpus.truth.planted;
    println!(
        "generated {} rows: {} applicants x {} models, {} positions",
        corpus.records.len(),
        corpus.outcome_matrix.applicant_ids.len(),
        corpus.outcome_matrix.model_ids.len(),
        corpus.truth.position_models.len(),
    );
    println!(
        "planted anomalies: {} duplicates, {} test rows, {} unscored, {} identity clusters, {} all-reject",
        planted.duplicate_application_ids.len(),
        planted.test_application_ids.len(),
        planted.unscored_application_ids.len(),
        planted.identity_clusters.len(),
        planted.all_reject_applicant_ids.len(),
    );
    Ok(0)
}

#[derive(Debug, serde::Serialize)]
struct IngestReport {
    clean: dataset::CleanReport,
    distinct_applicants_after_grouping: Option<u64>,
}

fn cmd_ingest(args: IngestArgs) -> Result<i32> {
    let config = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    config.validate()?;
    let dir = out_dir(args.out)?;
    let records = dataset::load_dataset(&args.input, &config.schema)?;
    let (mut records, clean_report) = dataset::clean(
        records,
        &config.test_model_ids,
        &config.dedup_key,
        &config.employer_merge_map,
    )?;
    let distinct_after_grouping = if config.identity_key.is_empty() {
        None
    } else {
        let key = IdentityKey {
            key_columns: config.identity_key.clone(),
        };
        Some(dataset::group_identities(&mut records, &key)? as u64)
    };
    dataset::write_dataset(dir.join("cleaned.csv"), &records)?;
    report::write_json(
        dir.join("ingest_report.json"),
        &IngestReport {
            clean: clean_report,
            distinct_applicants_after_grouping: distinct_after_grouping,
        },
    )?;
    println!(
        "cleaned {} rows to {} ({} test-model, {} unscored, {} duplicates removed)",
        clean_report.rows_in,
        clean_report.rows_out,
        clean_report.removed_test_models,
        clean_report.removed_unscored,
        clean_report.deduplicated,
    );
    if let Some(distinct) = distinct_after_grouping {
        println!("identity grouping left {distinct} distinct applicants");
    }
    Ok(0)
}

fn cmd_audit(args: AuditArgs) -> Result<i32> {
    let records = load_clean_input(&args.input, args.threshold)?;
    let params = adverse::AuditParams {
        group_column: args.group_column.clone(),
        groups: if args.groups.is_empty() {
            None
        } else {
            Some(args.groups.iter().cloned().collect::<BTreeSet<String>>())
        },
        alpha: args.alpha,
        four_fifths: args.four_fifths,
        min_reporting: args.min_reporting,
        ..adverse::AuditParams::default()
    };
    let rows = adverse::audit_positions(&records, &params)?;
    let summary = adverse::summarize(&rows, &records, &params)?;
    let dir = out_dir(args.out)?;
    report::write_position_stats_csv(dir.join("position_stats.csv"), &rows)?;
    report::write_soc_rollup_csv(dir.join("soc_rollup.csv"), &summary)?;
    report::write_impact_summary_json(dir.join("impact_summary.json"), &summary)?;

    let positions: BTreeSet<&str> = rows.iter().map(|r| r.position_id.as_str()).collect();
    let flagged_raw = rows.iter().filter(|r| r.flag_adverse_raw).count();
    let flagged_bh: Vec<&adverse::GroupPositionStats> =
        rows.iter().filter(|r| r.flag_adverse_bh).collect();
    println!(
        "audited {} positions ({} stat rows): {} adverse-impact flags raw, {} after BH",
        positions.len(),
        rows.len(),
        flagged_raw,
        flagged_bh.len(),
    );
    for row in &flagged_bh {
        println!(
            "  {} group {}: rate {:.4} vs reference {:.4} (ratio {:.4}, z {:.3})",
            row.position_id, row.group, row.selection_rate, row.reference_rate,
            row.impact_ratio, row.z,
        );
    }
    Ok(if flagged_bh.is_empty() { 0 } else { 2 })
}

fn cmd_homogenize(args: HomogenizeArgs) -> Result<i32> {
    let records = load_clean_input(&args.input, args.threshold)?;
    let rates = homog::position_selection_rates(&records)?;
    let cohorts = dataset::stratify_by_k(&records)?;
    let dir = out_dir(args.out)?;

    let histogram: std::collections::BTreeMap<usize, u64> = cohorts
        .iter()
        .map(|(&k, members)| (k, members.len() as u64))
        .collect();
    report::write_k_distribution_csv(dir.join("k_distribution.csv"), &histogram)?;

    let floor = args.cohort_floor as usize;
    let mut distributions = Vec::new();
    for (&k, members) in &cohorts {
        if k == 0 {
            continue;
        }
        if members.len() < floor {
            eprintln!(
                "warning: k={k} cohort holds {} applicants (< {floor}); row omitted",
                members.len()
            );
            continue;
        }
        distributions.push(homog::distribution_for_cohort(members, k, &rates)?);
    }
    if distributions.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no cohort reaches the {floor}-applicant floor"
        )));
    }
    report::write_distribution_csv(dir.join("distributions.csv"), &distributions)?;

    let per_k = distributions
        .iter()
        .map(|dist| {
            homog::compare(&dist.observed, &dist.baseline, dist.n_applicants, args.min_expected)
                .map(|gof| PerKGof {
                    k: dist.k,
                    n_applicants: dist.n_applicants as u64,
                    observed_p0: dist.observed[0],
                    baseline_p0: dist.baseline[0],
                    gof,
                })
        })
        .collect::<Result<Vec<PerKGof>>>()?;
    let pooled = homog::pooled_compare(&distributions, args.min_expected)?;

    let (curve_gof, observed_fit, baseline_fit) = match homog::rejection_curve(
        &cohorts, &rates, floor,
    ) {
        Ok(curve) => {
            report::write_rejection_curve_csv(dir.join("rejection_curve.csv"), &curve.points)?;
            let gof = match homog::rejection_curve_gof(&curve.points) {
                Ok(gof) => Some(gof),
                Err(e) => {
                    eprintln!("warning: curve GOF skipped: {e}");
                    None
                }
            };
            (gof, Some(curve.observed_fit), Some(curve.baseline_fit))
        }
        Err(e) => {
            eprintln!("warning: rejection curve skipped: {e}");
            (None, None, None)
        }
    };

    let n_applicants: u64 = per_k.iter().map(|row| row.n_applicants).sum();
    let report_body = HomogenizationReport {
        n_applicants,
        per_k,
        pooled,
        curve_gof,
        observed_fit,
        baseline_fit,
    };
    report::write_json(dir.join("homogenization.json"), &report_body)?;
    println!(
        "homogenization over {} applicants in {} cohorts: pooled chi2 {:.4} (dof {}), p {:.4}",
        n_applicants,
        report_body.per_k.len(),
        pooled.statistic,
        pooled.dof,
        pooled.p_value,
    );
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32> {
    if args.k_min == 0 || args.k_min > args.k_max {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k_min <= k_max, got {}..{}",
            args.k_min, args.k_max
        )));
    }
    if args.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    let records = dataset::load_dataset(&args.input, &SchemaMapping::default())?;
    let osim = sim::load_outcome_matrix(&args.osim)?;
    let (a, b) = sim::build_matrices(&records);
    let aprime = sim::connected_expand(&a, &b)?;

    let mut results = Vec::new();
    for k in args.k_min..=args.k_max {
        match sim::sample_and_score(&aprime, &osim, k, args.replicates as usize, args.seed) {
            Ok(result) => results.push(result),
            Err(Error::EmptyInput(_)) => {
                eprintln!("warning: no applicant retains {k} connected models; stopping");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        return Err(Error::EmptyInput(
            "no k in the requested range retained any applicant".into(),
        ));
    }

    let observed_fit = fit_exponential(
        &results
            .iter()
            .map(|r| (r.k as f64, r.systemic_rejection_mean))
            .collect::<Vec<_>>(),
    )
    .ok();
    let baseline_fit = fit_exponential(
        &results
            .iter()
            .map(|r| (r.k as f64, r.baseline_rate))
            .collect::<Vec<_>>(),
    )
    .ok();
    let first_crossing_observed = sim::first_crossing(
        results.iter().map(|r| (r.k, r.systemic_rejection_mean)),
        args.crossing_threshold,
    );
    let first_crossing_baseline = sim::first_crossing(
        results.iter().map(|r| (r.k, r.baseline_rate)),
        args.crossing_threshold,
    );
    let floor = sim::exhaustive_recommendation_floor(&osim);
    let shared_models = sim::shared_models(&records);

    let dir = out_dir(args.out)?;
    report::write_simulation_curve_csv(
        dir.join("simulation_curve.csv"),
        &results,
        observed_fit.as_ref(),
        baseline_fit.as_ref(),
    )?;
    let report_body = SimulationReport {
        seed: args.seed,
        replicates: args.replicates,
        crossing_threshold: args.crossing_threshold,
        first_crossing_observed,
        first_crossing_baseline,
        results,
        observed_fit,
        baseline_fit,
        floor,
        shared_models,
    };
    report::write_json(dir.join("simulation.json"), &report_body)?;
    println!(
        "simulated k={}..{} over {} replicates: rejection {:.4} -> {:.4}, baseline {:.4} -> {:.4}",
        report_body.results.first().unwrap().k,
        report_body.results.last().unwrap().k,
        args.replicates,
        report_body.results.first().unwrap().systemic_rejection_mean,
        report_body.results.last().unwrap().systemic_rejection_mean,
        report_body.results.first().unwrap().baseline_rate,
        report_body.results.last().unwrap().baseline_rate,
    );
    match (first_crossing_observed, first_crossing_baseline) {
        (Some(o), Some(b)) => println!(
            "first crossing below {}: simulated k={o}, baseline k={b}",
            args.crossing_threshold
        ),
        (None, Some(b)) => println!(
            "simulated curve never crosses {} in range; baseline crosses at k={b}",
            args.crossing_threshold
        ),
        _ => println!(
            "neither curve crosses {} in the simulated range",
            args.crossing_threshold
        ),
    }
    Ok(0)
}

fn cmd_fit(args: FitArgs) -> Result<i32> {
    let points = report::read_xy_csv(&args.input, &args.x_column, &args.y_column)?;
    let fit = fit_exponential(&points)?;
    let dir = out_dir(args.out)?;
    report::write_json(dir.join("fit.json"), &fit)?;
    println!(
        "fit y = {:.6e} * exp({:.6} * x) over {} points, r2 {:.6}",
        fit.a, fit.b, fit.n_used, fit.r_squared,
    );
    Ok(0)
}
