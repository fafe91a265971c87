//! Report emission: deterministic CSV and JSON files mirroring the audit
//! tables and figure data.
//!
//! Three precision regimes, chosen so every number survives a round trip:
//! JSON floats carry 17 significant digits (always enough to reproduce the
//! exact f64); machine CSVs use Rust's shortest-round-trip display; human
//! summary CSVs round to 4 decimals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::adverse::{GroupPositionStats, ImpactSummary};
use crate::homog::{CurvePoint, OutcomeDistribution};
use crate::sim::{FloorReport, SimulationResult};
use crate::stats::{Chi2Gof, ExpFit};
use crate::{Error, Result};

/// JSON formatter writing every f64 with 17 significant digits.
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buffer = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut buffer, Sig17Formatter);
    value
        .serialize(&mut serializer)
        .map_err(|e| Error::json("<memory>", e))?;
    buffer.push(b'\n');
    String::from_utf8(buffer).map_err(|e| Error::InvalidArgument(format!("non-UTF8 JSON: {e}")))
}

/// Write a value as JSON with 17-significant-digit floats.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = to_json_string(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(&display, e))
}

fn open_csv(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let display = path.display().to_string();
    csv::Writer::from_path(path).map_err(|e| Error::csv(&display, e))
}

fn finish_csv(mut writer: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Shortest round-trip float cell for machine CSVs.
fn cell(x: f64) -> String {
    format!("{x}")
}

/// 4-decimal float cell for human summary CSVs.
fn cell4(x: f64) -> String {
    format!("{x:.4}")
}

/// Per-position audit rows (machine CSV, full precision).
pub fn write_position_stats_csv(
    path: impl AsRef<Path>,
    rows: &[GroupPositionStats],
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = open_csv(path)?;
    writer
        .write_record([
            "position_id",
            "group",
            "n",
            "selected",
            "selection_rate",
            "reference_group",
            "reference_rate",
            "impact_ratio",
            "z",
            "p_value",
            "degenerate",
            "flag_practical",
            "flag_statistical",
            "flag_statistical_bh",
            "flag_adverse_raw",
            "flag_adverse_bh",
        ])
        .map_err(|e| Error::csv(&display, e))?;
    for row in rows {
        writer
            .write_record([
                row.position_id.as_str(),
                row.group.as_str(),
                &row.n.to_string(),
                &row.selected.to_string(),
                &cell(row.selection_rate),
                row.reference_group.as_str(),
                &cell(row.reference_rate),
                &cell(row.impact_ratio),
                &cell(row.z),
                &cell(row.p_value),
                &row.degenerate.to_string(),
                &row.flag_practical.to_string(),
                &row.flag_statistical.to_string(),
                &row.flag_statistical_bh.to_string(),
                &row.flag_adverse_raw.to_string(),
                &row.flag_adverse_bh.to_string(),
            ])
            .map_err(|e| Error::csv(&display, e))?;
    }
    finish_csv(writer, path)
}

/// SOC-major rollup (human CSV, 4 decimals) in the audit-table layout.
pub fn write_soc_rollup_csv(path: impl AsRef<Path>, summary: &ImpactSummary) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = open_csv(path)?;
    writer
        .write_record([
            "soc_group",
            "group",
            "impact_ratio",
            "positions",
            "n_adverse",
            "pct_adverse",
            "pct_adverse_bh",
        ])
        .map_err(|e| Error::csv(&display, e))?;
    for row in &summary.soc_rollup {
        writer
            .write_record([
                row.soc_group.as_str(),
                row.group.as_str(),
                &cell4(row.impact_ratio),
                &row.positions.to_string(),
                &row.n_adverse.to_string(),
                &cell4(row.pct_adverse),
                &cell4(row.pct_adverse_bh),
            ])
            .map_err(|e| Error::csv(&display, e))?;
    }
    finish_csv(writer, path)
}

/// Panel layout of the aggregate impact summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Panelized<'a> {
    panel_a: Vec<PanelARow<'a>>,
    panel_b: Vec<PanelBRow<'a>>,
    soc_rollup: &'a [crate::adverse::SocRollupRow],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PanelARow<'a> {
    group: &'a str,
    positions: u64,
    aggregate_selection_rate: f64,
    aggregate_impact_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PanelBRow<'a> {
    group: &'a str,
    biased_positions: u64,
    biased_positions_pct: f64,
    applications_to_biased: u64,
    applications_to_biased_pct: f64,
    applicants_to_biased: u64,
    applicants_to_biased_pct: f64,
    shortfall: u64,
    shortfall_pct: f64,
}

/// Impact summary JSON: Panel A (aggregate rates and ratios) and Panel B
/// (exposure to BH-flagged positions), plus the SOC rollup.
pub fn write_impact_summary_json(
    path: impl AsRef<Path>,
    summary: &ImpactSummary,
) -> Result<()> {
    let panel_a = summary
        .rows
        .iter()
        .map(|r| PanelARow {
            group: &r.group,
            positions: r.positions,
            aggregate_selection_rate: r.aggregate_selection_rate,
            aggregate_impact_ratio: r.aggregate_impact_ratio,
        })
        .collect();
    let panel_b = summary
        .rows
        .iter()
        .map(|r| PanelBRow {
            group: &r.group,
            biased_positions: r.biased_positions,
            biased_positions_pct: r.biased_positions_pct,
            applications_to_biased: r.applications_to_biased,
            applications_to_biased_pct: r.applications_to_biased_pct,
            applicants_to_biased: r.applicants_to_biased,
            applicants_to_biased_pct: r.applicants_to_biased_pct,
            shortfall: r.shortfall,
            shortfall_pct: r.shortfall_pct,
        })
        .collect();
    write_json(
        path,
        &Panelized {
            panel_a,
            panel_b,
            soc_rollup: &summary.soc_rollup,
        },
    )
}

/// Applications-per-applicant histogram (human CSV, 4-decimal percents).
pub fn write_k_distribution_csv(
    path: impl AsRef<Path>,
    histogram: &BTreeMap<usize, u64>,
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let total: u64 = histogram.values().sum();
    let mut writer = open_csv(path)?;
    writer
        .write_record(["k", "count", "pct"])
        .map_err(|e| Error::csv(&display, e))?;
    for (&k, &count) in histogram {
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        };
        writer
            .write_record([&k.to_string(), &count.to_string(), &cell4(pct)])
            .map_err(|e| Error::csv(&display, e))?;
    }
    finish_csv(writer, path)
}

/// Per-k observed/baseline recommendation-count distributions in long
/// format (machine CSV).
pub fn write_distribution_csv(
    path: impl AsRef<Path>,
    distributions: &[OutcomeDistribution],
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = open_csv(path)?;
    writer
        .write_record(["k", "t", "observed", "baseline"])
        .map_err(|e| Error::csv(&display, e))?;
    for dist in distributions {
        for t in 0..=dist.k {
            writer
                .write_record([
                    &dist.k.to_string(),
                    &t.to_string(),
                    &cell(dist.observed[t]),
                    &cell(dist.baseline[t]),
                ])
                .map_err(|e| Error::csv(&display, e))?;
        }
    }
    finish_csv(writer, path)
}

/// Rejection curve in the published-table layout: per k, the cohort size
/// and the baseline and observed systemic-rejection percentages.
pub fn write_rejection_curve_csv(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = open_csv(path)?;
    writer
        .write_record(["k", "count", "baseline", "observed"])
        .map_err(|e| Error::csv(&display, e))?;
    for point in points {
        writer
            .write_record([
                &point.k.to_string(),
                &point.n_applicants.to_string(),
                &cell(100.0 * point.baseline_rate),
                &cell(100.0 * point.observed_rate),
            ])
            .map_err(|e| Error::csv(&display, e))?;
    }
    finish_csv(writer, path)
}

/// Read back a rejection-curve CSV written by [`write_rejection_curve_csv`].
pub fn read_rejection_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(&display, e))?;
    let mut points = Vec::new();
    for (line, row) in reader.deserialize().enumerate() {
        let (k, count, baseline, observed): (usize, usize, f64, f64) =
            row.map_err(|e| Error::csv(&display, e))?;
        if !(baseline.is_finite() && observed.is_finite()) {
            return Err(Error::Parse {
                row: (line + 1) as u64,
                column: "baseline/observed".into(),
                value: format!("{baseline}/{observed}"),
                reason: "percentages must be finite".into(),
            });
        }
        points.push(CurvePoint {
            k,
            n_applicants: count,
            baseline_rate: baseline / 100.0,
            observed_rate: observed / 100.0,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!("{display} holds no curve rows")));
    }
    Ok(points)
}

/// Read (x, y) pairs out of two named CSV columns (the `fit` input).
pub fn read_xy_csv(
    path: impl AsRef<Path>,
    x_column: &str,
    y_column: &str,
) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(&display, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(&display, e))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.into(),
                path: display.clone(),
            })
    };
    let x_index = find(x_column)?;
    let y_index = find(y_column)?;
    let mut points = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(&display, e))?;
        let parse = |index: usize, column: &str| -> Result<f64> {
            let raw = row.get(index).unwrap_or("");
            raw.trim().parse().map_err(|_| Error::Parse {
                row: (line + 1) as u64,
                column: column.into(),
                value: raw.into(),
                reason: "expected a number".into(),
            })
        };
        points.push((parse(x_index, x_column)?, parse(y_index, y_column)?));
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!("{display} holds no data rows")));
    }
    Ok(points)
}

/// Simulation plot data (machine CSV): observed rejection with CI,
/// paired baseline, and the two exponential-fit predictions.
pub fn write_simulation_curve_csv(
    path: impl AsRef<Path>,
    results: &[SimulationResult],
    observed_fit: Option<&ExpFit>,
    baseline_fit: Option<&ExpFit>,
) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = open_csv(path)?;
    writer
        .write_record([
            "k",
            "retained",
            "rejection",
            "ci_low",
            "ci_high",
            "baseline",
            "rejection_fit",
            "baseline_fit",
        ])
        .map_err(|e| Error::csv(&display, e))?;
    let predict = |fit: Option<&ExpFit>, k: usize| -> String {
        fit.map(|f| cell(f.a * (f.b * k as f64).exp()))
            .unwrap_or_default()
    };
    for r in results {
        writer
            .write_record([
                &r.k.to_string(),
                &r.n_applicants_retained.to_string(),
                &cell(r.systemic_rejection_mean),
                &cell(r.ci_low),
                &cell(r.ci_high),
                &cell(r.baseline_rate),
                &predict(observed_fit, r.k),
                &predict(baseline_fit, r.k),
            ])
            .map_err(|e| Error::csv(&display, e))?;
    }
    finish_csv(writer, path)
}

/// Homogenization report body (JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogenizationReport {
    pub n_applicants: u64,
    pub per_k: Vec<PerKGof>,
    /// Sum of per-k statistics and degrees of freedom.
    pub pooled: Chi2Gof,
    /// 2-bin (zero vs. nonzero) GOF across the rejection curve.
    pub curve_gof: Option<Chi2Gof>,
    pub observed_fit: Option<ExpFit>,
    pub baseline_fit: Option<ExpFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerKGof {
    pub k: usize,
    pub n_applicants: u64,
    pub observed_p0: f64,
    pub baseline_p0: f64,
    pub gof: Chi2Gof,
}

/// Simulation report body (JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub replicates: u64,
    /// Rate below which an applicant pool is considered safe.
    pub crossing_threshold: f64,
    pub first_crossing_observed: Option<usize>,
    pub first_crossing_baseline: Option<usize>,
    pub results: Vec<SimulationResult>,
    pub observed_fit: Option<ExpFit>,
    pub baseline_fit: Option<ExpFit>,
    pub floor: FloorReport,
    /// Models used by two or more employers (model id, employer count).
    pub shared_models: Vec<(String, u64)>,
}
