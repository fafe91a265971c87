//! Counterfactual application simulation: the application matrix A, the
//! model-model overlap B = AᵀA, the one-hop connected expansion
//! A′ = min(1, A·B), and replicated k-model sampling that traces how fast
//! systemic rejection would decay if applicants applied more broadly.
//!
//! The expansion bounds plausibility: an applicant is only allowed
//! counterfactual applications to models that share at least one applicant
//! with a model they actually used, giving A ≤ A′ ≤ 1 entrywise.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ApplicationRecord;
use crate::seeding;
use crate::stats;
use crate::{Error, Result};

/// Sparse binary applicant×model incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplicationMatrix {
    pub applicant_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// Sorted distinct column indices per applicant row.
    pub rows: Vec<Vec<u32>>,
}

impl ApplicationMatrix {
    pub fn n_applicants(&self) -> usize {
        self.applicant_ids.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }
}

/// Sparse symmetric model×model overlap counts B = AᵀA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    pub model_ids: Vec<String>,
    /// Sorted (column, count) pairs per row; diagonal entry = number of
    /// applicants who used the model.
    pub rows: Vec<Vec<(u32, u32)>>,
}

impl OverlapMatrix {
    /// Overlap count between two models.
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.rows[i]
            .binary_search_by_key(&(j as u32), |&(c, _)| c)
            .map(|pos| self.rows[i][pos].1)
            .unwrap_or(0)
    }
}

/// Build A from distinct (applicant, model) pairs and B = AᵀA.
///
/// Ids index in sorted order, so matrix layout is independent of record
/// order. The sparse product accumulates over row pairs: O(Σᵢ kᵢ²), fine
/// for desk scale (≤ 10⁵ applicants × 10³ models).
pub fn build_matrices(records: &[ApplicationRecord]) -> (ApplicationMatrix, OverlapMatrix) {
    let mut pairs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut models: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        pairs
            .entry(r.applicant_id.as_str())
            .or_default()
            .insert(r.model_id.as_str());
        models.insert(r.model_id.as_str());
    }
    let model_ids: Vec<String> = models.iter().map(|m| m.to_string()).collect();
    let model_index: BTreeMap<&str, u32> = models
        .iter()
        .enumerate()
        .map(|(i, &m)| (m, i as u32))
        .collect();

    let mut applicant_ids = Vec::with_capacity(pairs.len());
    let mut rows = Vec::with_capacity(pairs.len());
    for (applicant, used) in &pairs {
        applicant_ids.push(applicant.to_string());
        rows.push(used.iter().map(|m| model_index[m]).collect::<Vec<u32>>());
    }
    let a = ApplicationMatrix {
        applicant_ids,
        model_ids: model_ids.clone(),
        rows,
    };

    let mut counts: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for row in &a.rows {
        for (idx, &j1) in row.iter().enumerate() {
            for &j2 in &row[idx..] {
                *counts.entry((j1, j2)).or_default() += 1;
            }
        }
    }
    let mut b_rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); model_ids.len()];
    for (&(j1, j2), &c) in &counts {
        b_rows[j1 as usize].push((j2, c));
        if j1 != j2 {
            b_rows[j2 as usize].push((j1, c));
        }
    }
    for row in &mut b_rows {
        row.sort_by_key(|&(c, _)| c);
    }
    let b = OverlapMatrix {
        model_ids,
        rows: b_rows,
    };
    (a, b)
}

/// Models used by at least two distinct employers, with the employer count.
pub fn shared_models(records: &[ApplicationRecord]) -> Vec<(String, u64)> {
    let mut employers: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        employers
            .entry(r.model_id.as_str())
            .or_default()
            .insert(r.employer_id.as_str());
    }
    employers
        .into_iter()
        .filter(|(_, e)| e.len() >= 2)
        .map(|(m, e)| (m.to_string(), e.len() as u64))
        .collect()
}

/// One-hop connected expansion A′ = min(1, A·B): applicant i may reach
/// model j iff some model they actually used shares ≥ 1 applicant with j.
///
/// A and A′ satisfy the sandwich A ≤ A′ ≤ 1 entrywise, and adding
/// applications to A never removes a 1 from A′.
pub fn connected_expand(a: &ApplicationMatrix, b: &OverlapMatrix) -> Result<ApplicationMatrix> {
    if a.model_ids != b.model_ids {
        return Err(Error::InvalidArgument(format!(
            "application matrix columns ({}) do not align with overlap matrix ({})",
            a.n_models(),
            b.model_ids.len()
        )));
    }
    let rows = a
        .rows
        .iter()
        .map(|row| {
            let mut reach: BTreeSet<u32> = BTreeSet::new();
            for &j in row {
                reach.extend(b.rows[j as usize].iter().map(|&(col, _)| col));
            }
            reach.into_iter().collect::<Vec<u32>>()
        })
        .collect();
    Ok(ApplicationMatrix {
        applicant_ids: a.applicant_ids.clone(),
        model_ids: a.model_ids.clone(),
        rows,
    })
}

/// Dense binary outcome matrix for the simulated cohort: what every model
/// would say about every applicant. Incomplete rows (any missing cell) are
/// flagged and excluded from simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcomeMatrix {
    pub applicant_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// `outcomes[i][j]` = recommendation of model j for applicant i.
    pub outcomes: Vec<Vec<bool>>,
    /// Row completeness; false when any cell was missing in the source.
    pub complete: Vec<bool>,
}

/// Load a simulated outcome matrix from CSV: `applicant_id` column plus
/// one 0/1 column per model. Empty cells mark the row incomplete.
pub fn load_outcome_matrix(path: impl AsRef<Path>) -> Result<SimOutcomeMatrix> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(&display, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::csv(&display, e))?
        .clone();
    if headers.get(0) != Some("applicant_id") {
        return Err(Error::MissingColumn {
            column: "applicant_id".into(),
            path: display,
        });
    }
    let model_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if model_ids.is_empty() {
        return Err(Error::EmptyInput(format!("{display} has no model columns")));
    }
    let mut applicant_ids = Vec::new();
    let mut outcomes = Vec::new();
    let mut complete = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(&display, e))?;
        applicant_ids.push(row.get(0).unwrap_or("").to_string());
        let mut cells = Vec::with_capacity(model_ids.len());
        let mut full = true;
        for (j, name) in model_ids.iter().enumerate() {
            match row.get(j + 1).unwrap_or("") {
                "1" => cells.push(true),
                "0" => cells.push(false),
                "" => {
                    cells.push(false);
                    full = false;
                }
                other => {
                    return Err(Error::Parse {
                        row: (line + 1) as u64,
                        column: name.clone(),
                        value: other.to_string(),
                        reason: "expected 0, 1, or empty".into(),
                    })
                }
            }
        }
        outcomes.push(cells);
        complete.push(full);
    }
    if applicant_ids.is_empty() {
        return Err(Error::EmptyInput(format!("{display} holds no data rows")));
    }
    Ok(SimOutcomeMatrix {
        applicant_ids,
        model_ids,
        outcomes,
        complete,
    })
}

/// Write an outcome matrix as CSV (the `load_outcome_matrix` format).
///
/// Incomplete rows emit empty cells: row-level completeness is all the
/// matrix tracks, so cell-level missingness does not round-trip.
pub fn write_outcome_matrix(path: impl AsRef<Path>, osim: &SimOutcomeMatrix) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(&display, e))?;
    let mut header = Vec::with_capacity(osim.model_ids.len() + 1);
    header.push("applicant_id");
    header.extend(osim.model_ids.iter().map(String::as_str));
    writer.write_record(&header).map_err(|e| Error::csv(&display, e))?;
    for ((applicant, row), &complete) in osim
        .applicant_ids
        .iter()
        .zip(&osim.outcomes)
        .zip(&osim.complete)
    {
        let mut record = Vec::with_capacity(row.len() + 1);
        record.push(applicant.as_str());
        for &cell in row {
            record.push(match (complete, cell) {
                (false, _) => "",
                (true, true) => "1",
                (true, false) => "0",
            });
        }
        writer.write_record(&record).map_err(|e| Error::csv(&display, e))?;
    }
    writer.flush().map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Systemic rejection at one breadth k, with replicate uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub k: usize,
    /// Applicants with A′ support ≥ k and a complete outcome row.
    pub n_applicants_retained: usize,
    /// Applicants dropped for missing/incomplete outcome rows.
    pub n_excluded_incomplete: usize,
    pub replicates: usize,
    /// Mean over replicates of the zero-recommendation fraction.
    pub systemic_rejection_mean: f64,
    /// 2.5th percentile over replicates (clamped to include the mean).
    pub ci_low: f64,
    /// 97.5th percentile over replicates (clamped to include the mean).
    pub ci_high: f64,
    /// Paired independence baseline: over the same sampled model sets, the
    /// mean of Π(1−s_j), with s_j the model's recommendation rate over
    /// complete rows.
    pub baseline_rate: f64,
}

/// Sample `k` of each retained applicant's A′ models (uniformly, without
/// replacement) `replicates` times and score systemic rejection against
/// the paired closed-form baseline.
///
/// Applicants whose support is smaller than k are discarded for this k;
/// applicants without a complete outcome row are excluded and counted.
/// Replicate r of breadth k draws from a child seed derived from
/// `(master_seed, k, r)`, so every (k, replicate) stream is independent
/// but bit-reproducible.
pub fn sample_and_score(
    aprime: &ApplicationMatrix,
    osim: &SimOutcomeMatrix,
    k: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<SimulationResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    // Align A′ columns with O_sim columns by model id.
    let osim_col: BTreeMap<&str, usize> = osim
        .model_ids
        .iter()
        .enumerate()
        .map(|(j, m)| (m.as_str(), j))
        .collect();
    let col_map: Vec<usize> = aprime
        .model_ids
        .iter()
        .map(|m| {
            osim_col.get(m.as_str()).copied().ok_or_else(|| Error::MissingValue(format!(
                "outcome matrix lacks model {m:?} required by the application matrix"
            )))
        })
        .collect::<Result<_>>()?;
    let osim_row: BTreeMap<&str, usize> = osim
        .applicant_ids
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();

    // Complete cohort rows, keyed by A′ row index.
    let mut retained: Vec<(usize, usize)> = Vec::new(); // (a' row, osim row)
    let mut n_excluded_incomplete = 0usize;
    for (i, applicant) in aprime.applicant_ids.iter().enumerate() {
        match osim_row.get(applicant.as_str()) {
            Some(&r) if osim.complete[r] => {
                if aprime.rows[i].len() >= k {
                    retained.push((i, r));
                }
            }
            _ => n_excluded_incomplete += 1,
        }
    }
    if retained.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no applicant has a complete outcome row and ≥ {k} connected models"
        )));
    }

    // Per-model recommendation rates over all complete rows in the cohort.
    let mut miss_probability = vec![0.0f64; aprime.n_models()];
    {
        let complete_rows: Vec<usize> = aprime
            .applicant_ids
            .iter()
            .filter_map(|a| osim_row.get(a.as_str()).copied())
            .filter(|&r| osim.complete[r])
            .collect();
        let n = complete_rows.len() as f64;
        for (j, miss) in miss_probability.iter_mut().enumerate() {
            let selected: u32 = complete_rows
                .iter()
                .map(|&r| osim.outcomes[r][col_map[j]] as u32)
                .sum();
            *miss = 1.0 - selected as f64 / n;
        }
    }

    let mut rejection_by_replicate = Vec::with_capacity(replicates);
    let mut baseline_by_replicate = Vec::with_capacity(replicates);
    let mut scratch: Vec<u32> = Vec::new();
    for replicate in 0..replicates {
        let mut rng = ChaCha12Rng::seed_from_u64(seeding::derive_seed(
            master_seed,
            k as u64,
            replicate as u64,
        ));
        let mut rejected = 0usize;
        let mut baseline_sum = 0.0f64;
        for &(row, osim_idx) in &retained {
            scratch.clear();
            scratch.extend_from_slice(&aprime.rows[row]);
            let outcomes = &osim.outcomes[osim_idx];
            let mut any_recommended = false;
            let mut miss_product = 1.0f64;
            // Partial Fisher–Yates: the first k slots become the sample.
            for t in 0..k {
                let pick = t + rng.gen_range(0..scratch.len() - t);
                scratch.swap(t, pick);
                let col = scratch[t] as usize;
                any_recommended |= outcomes[col_map[col]];
                miss_product *= miss_probability[col];
            }
            rejected += !any_recommended as usize;
            baseline_sum += miss_product;
        }
        rejection_by_replicate.push(rejected as f64 / retained.len() as f64);
        baseline_by_replicate.push(baseline_sum / retained.len() as f64);
    }

    let mean = rejection_by_replicate.iter().sum::<f64>() / replicates as f64;
    let baseline_rate = baseline_by_replicate.iter().sum::<f64>() / replicates as f64;
    rejection_by_replicate.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci_low = stats::percentile(&rejection_by_replicate, 0.025).min(mean);
    let ci_high = stats::percentile(&rejection_by_replicate, 0.975).max(mean);
    Ok(SimulationResult {
        k,
        n_applicants_retained: retained.len(),
        n_excluded_incomplete,
        replicates,
        systemic_rejection_mean: mean,
        ci_low,
        ci_high,
        baseline_rate,
    })
}

/// Floor analysis of a complete outcome matrix: the minimum number of
/// models recommending any applicant, and the full distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorReport {
    /// Complete rows analyzed.
    pub n_rows: usize,
    /// Incomplete rows skipped.
    pub n_excluded_incomplete: usize,
    /// Minimum recommendation count over complete rows.
    pub floor: Option<u64>,
    /// True when some applicant is rejected by every model.
    pub zero_floor: bool,
    /// recommendation count → number of applicants.
    pub distribution: BTreeMap<u64, u64>,
}

/// First k (in the given order) whose rate drops strictly below
/// `threshold`; `None` when the curve never crosses.
pub fn first_crossing(points: impl IntoIterator<Item = (usize, f64)>, threshold: f64) -> Option<usize> {
    points
        .into_iter()
        .find(|&(_, rate)| rate < threshold)
        .map(|(k, _)| k)
}

/// Per-applicant minimum recommendation counts over all models.
pub fn exhaustive_recommendation_floor(osim: &SimOutcomeMatrix) -> FloorReport {
    let mut distribution: BTreeMap<u64, u64> = BTreeMap::new();
    let mut n_rows = 0usize;
    let mut n_excluded = 0usize;
    for (row, &complete) in osim.outcomes.iter().zip(&osim.complete) {
        if !complete {
            n_excluded += 1;
            continue;
        }
        n_rows += 1;
        let count = row.iter().filter(|&&o| o).count() as u64;
        *distribution.entry(count).or_default() += 1;
    }
    let floor = distribution.keys().next().copied();
    FloorReport {
        n_rows,
        n_excluded_incomplete: n_excluded,
        floor,
        zero_floor: floor == Some(0),
        distribution,
    }
}
