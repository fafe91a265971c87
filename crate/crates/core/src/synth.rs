//! Calibrated synthetic corpus generator: a logistic latent-factor model
//! with controllable cross-model correlation ρ, per-model target selection
//! rates, demographic structure, and planted anomalies. The generator is
//! the test bed for every analysis module, so it (a) is bit-deterministic
//! given a seed and (b) emits a `GroundTruth` file on a side channel that
//! tests can compare against without peeking through the main data path.
//!
//! Application (i, j) scores `logistic(ρ·a_i + √(1−ρ²)·ε_ij + b_j + δ_gj)`
//! with applicant trait `a_i` and noise `ε_ij` standard normal, `b_j` an
//! intercept calibrated so model j's marginal selection rate hits its
//! target, and `δ_gj` a group-specific latent offset. ρ=0 makes outcomes
//! independent across models; ρ=1 makes every model agree on an applicant.
//! Noise is keyed by (applicant, model), so two positions screened by the
//! same model always agree — the monoculture mechanism is structural, not
//! statistical.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ApplicationRecord, Outcome};
use crate::seeding;
use crate::sim::SimOutcomeMatrix;
use crate::stats;
use crate::{Error, Result};

/// Latent offset used for planted all-reject applicants: logistic(−12)
/// ≈ 6e-6, below any sensible threshold.
const ALL_REJECT_LATENT: f64 = -12.0;

/// SOC major groups cycled across positions.
const SOC_MAJORS: [&str; 12] = [
    "11", "15", "17", "25", "27", "29", "31", "35", "41", "43", "51", "53",
];

// Stream tags keep the per-purpose RNG streams from aliasing.
const TAG_TRAIT: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_ASSIGN: u64 = 3;

/// Anomaly plan: what to plant on top of the clean corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedPlan {
    /// Applications cloned under fresh ids with later timestamps.
    pub duplicates: u64,
    /// Internal test/QA models whose rows should be cleaned away.
    pub test_models: u64,
    /// Rows emitted per test model.
    pub test_model_rows: u64,
    /// Core applications stripped of their score.
    pub unscored: u64,
    /// Sizes of applicant clusters sharing identity-key columns.
    pub identity_groups: Vec<u64>,
    /// Applicants planted to be rejected by every model.
    pub all_reject_applicants: u64,
}

impl Default for PlantedPlan {
    fn default() -> Self {
        PlantedPlan {
            duplicates: 0,
            test_models: 0,
            test_model_rows: 25,
            unscored: 0,
            identity_groups: Vec::new(),
            all_reject_applicants: 0,
        }
    }
}

/// Full description of a synthetic corpus. Serializable, so generation
/// runs are reproducible from a spec file plus nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_applicants: u64,
    pub n_models: u64,
    pub n_positions: u64,
    pub n_employers: u64,
    /// Number of positions each applicant applies to → probability.
    pub k_distribution: BTreeMap<u64, f64>,
    /// Cross-model outcome correlation in [0, 1].
    pub rho: f64,
    /// Per-model target selection rates; a single entry broadcasts.
    pub base_rates: Vec<f64>,
    /// Demographic group → population share.
    pub group_mix: BTreeMap<String, f64>,
    /// Which demographic column carries the group: "race" or "gender".
    pub group_column: String,
    /// group → model id → latent offset added inside the logistic.
    ///
    /// Offsets live on the latent (probit) scale; use
    /// [`plant_adverse_impact`] to derive them from a target rate ratio.
    pub group_effects: BTreeMap<String, BTreeMap<String, f64>>,
    pub planted: PlantedPlan,
    /// Recommendation threshold the corpus is calibrated against.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_applicants: 1000,
            n_models: 10,
            n_positions: 20,
            n_employers: 5,
            k_distribution: (1..=4).map(|k| (k, 0.25)).collect(),
            rho: 0.0,
            base_rates: vec![0.5],
            group_mix: [("group_a", 0.5), ("group_b", 0.5)]
                .into_iter()
                .map(|(g, p)| (g.to_string(), p))
                .collect(),
            group_column: "race".into(),
            group_effects: BTreeMap::new(),
            planted: PlantedPlan::default(),
            threshold: 0.5,
            seed: 0,
        }
    }
}

/// Everything a test needs to verify the corpus without re-deriving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub rho: f64,
    pub threshold: f64,
    pub group_column: String,
    /// applicant id → latent trait a_i.
    pub applicant_traits: BTreeMap<String, f64>,
    /// applicant id → demographic group.
    pub applicant_groups: BTreeMap<String, String>,
    /// model id → calibrated intercept b_j.
    pub model_intercepts: BTreeMap<String, f64>,
    /// model id → analytic marginal selection rate (calibration target).
    pub expected_model_rates: BTreeMap<String, f64>,
    /// model id → group → analytic selection rate.
    pub expected_group_rates: BTreeMap<String, BTreeMap<String, f64>>,
    /// position id → model id.
    pub position_models: BTreeMap<String, String>,
    /// Applications-per-applicant histogram over the core corpus.
    pub realized_k_histogram: BTreeMap<u64, u64>,
    pub planted: PlantedReport,
}

/// Ids of every planted anomaly, for detection tests.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlantedReport {
    pub duplicate_application_ids: Vec<String>,
    pub test_model_ids: Vec<String>,
    pub test_application_ids: Vec<String>,
    pub unscored_application_ids: Vec<String>,
    /// Each inner vector lists the applicant ids of one identity cluster.
    pub identity_clusters: Vec<Vec<String>>,
    pub all_reject_applicant_ids: Vec<String>,
}

/// Output bundle of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub records: Vec<ApplicationRecord>,
    pub truth: GroundTruth,
    /// What every core model would say about every applicant (complete).
    pub outcome_matrix: SimOutcomeMatrix,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn id_width(n: u64, min: usize) -> usize {
    min.max(n.saturating_sub(1).to_string().len())
}

fn make_id(prefix: &str, index: u64, width: usize) -> String {
    format!("{prefix}{index:0width$}")
}

/// Marginal selection rate of a model with intercept `b` under the group
/// mixture (share, latent offset), thresholded at logit `ell`.
fn mixture_rate(mix: &[(f64, f64)], b: f64, ell: f64) -> f64 {
    mix.iter()
        .map(|&(share, delta)| share * stats::normal_cdf(b + delta - ell))
        .sum()
}

/// Solve for the intercept b making the mixture's marginal rate hit
/// `target`. The rate is strictly increasing in b, so bisection is exact
/// to float precision.
fn calibrate_intercept(mix: &[(f64, f64)], target: f64, ell: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-45.0f64, 45.0f64);
    if mixture_rate(mix, lo, ell) > target || mixture_rate(mix, hi, ell) < target {
        return Err(Error::Infeasible(format!(
            "no intercept reaches marginal rate {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_rate(mix, mid, ell) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    let residual = (mixture_rate(mix, b, ell) - target).abs();
    if residual > 1e-9 {
        return Err(Error::Infeasible(format!(
            "intercept calibration stalled at residual {residual:e} for rate {target}"
        )));
    }
    Ok(b)
}

/// Per-model calibration summary: intercept plus analytic rates.
struct ModelCalibration {
    intercepts: Vec<f64>,
    marginal_rates: Vec<f64>,
    /// group (sorted order) → rate, per model.
    group_rates: Vec<BTreeMap<String, f64>>,
}

fn calibrate_models(spec: &SyntheticSpec, model_ids: &[String]) -> Result<ModelCalibration> {
    let ell = logit(spec.threshold);
    let mut intercepts = Vec::with_capacity(model_ids.len());
    let mut marginal_rates = Vec::with_capacity(model_ids.len());
    let mut group_rates = Vec::with_capacity(model_ids.len());
    for (j, model_id) in model_ids.iter().enumerate() {
        let target = base_rate(spec, j);
        let mix: Vec<(f64, f64)> = spec
            .group_mix
            .iter()
            .map(|(g, &share)| (share, group_offset(spec, g, model_id)))
            .collect();
        let b = calibrate_intercept(&mix, target, ell)?;
        intercepts.push(b);
        marginal_rates.push(mixture_rate(&mix, b, ell));
        group_rates.push(
            spec.group_mix
                .keys()
                .map(|g| {
                    let delta = group_offset(spec, g, model_id);
                    (g.clone(), stats::normal_cdf(b + delta - ell))
                })
                .collect(),
        );
    }
    Ok(ModelCalibration {
        intercepts,
        marginal_rates,
        group_rates,
    })
}

fn base_rate(spec: &SyntheticSpec, model_index: usize) -> f64 {
    if spec.base_rates.len() == 1 {
        spec.base_rates[0]
    } else {
        spec.base_rates[model_index]
    }
}

fn group_offset(spec: &SyntheticSpec, group: &str, model_id: &str) -> f64 {
    spec.group_effects
        .get(group)
        .and_then(|per_model| per_model.get(model_id))
        .copied()
        .unwrap_or(0.0)
}

fn validate(spec: &SyntheticSpec) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidConfig(msg));
    if spec.n_applicants == 0
        || spec.n_models == 0
        || spec.n_positions == 0
        || spec.n_employers == 0
    {
        return bad("applicant, model, position, and employer counts must be ≥ 1".into());
    }
    if spec.k_distribution.is_empty() {
        return bad("k_distribution must not be empty".into());
    }
    let total: f64 = spec.k_distribution.values().sum();
    if (total - 1.0).abs() > 1e-9 || spec.k_distribution.values().any(|&p| p < 0.0) {
        return bad(format!(
            "k_distribution must be a probability distribution (sums to {total})"
        ));
    }
    if let Some(&k) = spec.k_distribution.keys().max() {
        if k > spec.n_positions {
            return bad(format!(
                "k_distribution reaches {k} but only {} positions exist",
                spec.n_positions
            ));
        }
    }
    if !(0.0..=1.0).contains(&spec.rho) {
        return bad(format!("rho must lie in [0, 1], got {}", spec.rho));
    }
    if spec.base_rates.len() != 1 && spec.base_rates.len() != spec.n_models as usize {
        return bad(format!(
            "base_rates must hold 1 or {} entries, got {}",
            spec.n_models,
            spec.base_rates.len()
        ));
    }
    if spec.base_rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return bad("base_rates must lie strictly inside (0, 1)".into());
    }
    if spec.group_mix.is_empty() {
        return bad("group_mix must not be empty".into());
    }
    let mix_total: f64 = spec.group_mix.values().sum();
    if (mix_total - 1.0).abs() > 1e-9 || spec.group_mix.values().any(|&p| p < 0.0) {
        return bad(format!(
            "group_mix must be a probability distribution (sums to {mix_total})"
        ));
    }
    if spec.group_column != "race" && spec.group_column != "gender" {
        return bad(format!(
            "group_column must be race or gender, got {:?}",
            spec.group_column
        ));
    }
    if !(spec.threshold > 0.0 && spec.threshold < 1.0) {
        return bad(format!(
            "threshold must lie strictly inside (0, 1), got {}",
            spec.threshold
        ));
    }
    let model_ids: BTreeSet<String> = (0..spec.n_models)
        .map(|j| make_id("m", j, id_width(spec.n_models, 3)))
        .collect();
    for (group, per_model) in &spec.group_effects {
        if !spec.group_mix.contains_key(group) {
            return bad(format!("group_effects references unknown group {group:?}"));
        }
        for model in per_model.keys() {
            if !model_ids.contains(model) {
                return bad(format!("group_effects references unknown model {model:?}"));
            }
        }
    }
    if spec.planted.test_models > 0 && spec.planted.test_model_rows == 0 {
        return bad("test_model_rows must be ≥ 1 when test models are planted".into());
    }
    if spec.planted.identity_groups.iter().any(|&s| s < 2) {
        return bad("identity clusters need at least 2 members".into());
    }
    Ok(())
}

/// Draw from a discrete distribution given as sorted (value, probability)
/// pairs. Residual float mass falls to the last entry.
fn draw_discrete<'a, T>(pairs: impl Iterator<Item = (&'a T, &'a f64)>, u: f64) -> &'a T
where
    T: 'a,
{
    let mut acc = 0.0;
    let mut last = None;
    for (value, &p) in pairs {
        acc += p;
        last = Some(value);
        if u < acc {
            return value;
        }
    }
    last.expect("distribution is non-empty")
}

/// Generate the corpus described by `spec`.
///
/// Deterministic: every random stream is keyed off `(spec.seed, purpose
/// tag, indices)`, so identical specs produce bit-identical output and
/// anomaly planting never shifts the core corpus.
pub fn generate(spec: &SyntheticSpec) -> Result<GeneratedCorpus> {
    validate(spec)?;

    let n = spec.n_applicants;
    let n_extra: u64 = spec.planted.identity_groups.iter().sum();
    let model_width = id_width(spec.n_models, 3);
    let position_width = id_width(spec.n_positions, 4);
    let employer_width = id_width(spec.n_employers, 2);
    let applicant_width = id_width(n + n_extra, 7);
    let model_ids: Vec<String> = (0..spec.n_models)
        .map(|j| make_id("m", j, model_width))
        .collect();
    let position_ids: Vec<String> = (0..spec.n_positions)
        .map(|p| make_id("p", p, position_width))
        .collect();
    let employer_ids: Vec<String> = (0..spec.n_employers)
        .map(|e| make_id("e", e, employer_width))
        .collect();
    let position_model = |p: u64| (p % spec.n_models) as usize;
    let position_employer = |p: u64| (p % spec.n_employers) as usize;
    let position_soc = |p: u64| SOC_MAJORS[(p % SOC_MAJORS.len() as u64) as usize];

    let calibration = calibrate_models(spec, &model_ids)?;
    let rho = spec.rho;
    let noise_scale = (1.0 - rho * rho).sqrt();
    let base_time = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();

    let trait_of = |i: u64| -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seeding::derive_seed3(spec.seed, TAG_TRAIT, i, 0));
        rng.sample(StandardNormal)
    };
    let noise_of = |i: u64, j: u64| -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seeding::derive_seed3(spec.seed, TAG_NOISE, i, j));
        rng.sample(StandardNormal)
    };
    // Latent scores of applicant i against every core model.
    let score_row = |i: u64, a: f64, group: &str| -> Vec<f64> {
        (0..spec.n_models)
            .map(|j| {
                let latent = rho * a
                    + noise_scale * noise_of(i, j)
                    + calibration.intercepts[j as usize]
                    + group_offset(spec, group, &model_ids[j as usize]);
                logistic(latent)
            })
            .collect()
    };

    let mut truth = GroundTruth {
        seed: spec.seed,
        rho,
        threshold: spec.threshold,
        group_column: spec.group_column.clone(),
        applicant_traits: BTreeMap::new(),
        applicant_groups: BTreeMap::new(),
        model_intercepts: model_ids
            .iter()
            .cloned()
            .zip(calibration.intercepts.iter().copied())
            .collect(),
        expected_model_rates: model_ids
            .iter()
            .cloned()
            .zip(calibration.marginal_rates.iter().copied())
            .collect(),
        expected_group_rates: model_ids
            .iter()
            .cloned()
            .zip(calibration.group_rates.iter().cloned())
            .collect(),
        position_models: position_ids
            .iter()
            .enumerate()
            .map(|(p, id)| (id.clone(), model_ids[position_model(p as u64)].clone()))
            .collect(),
        realized_k_histogram: BTreeMap::new(),
        planted: PlantedReport::default(),
    };

    let mut records: Vec<ApplicationRecord> = Vec::new();
    let mut osim_rows: Vec<Vec<bool>> = Vec::new();
    let mut osim_applicants: Vec<String> = Vec::new();
    let mut app_seq: u64 = 0;
    let app_width = 8usize; // sequence ids; width grows only via format!

    // Scratch for undo-style partial Fisher–Yates position sampling.
    let mut scratch: Vec<u64> = (0..spec.n_positions).collect();
    let mut swaps: Vec<(usize, usize)> = Vec::new();

    let emit_applicant = |i: u64,
                              records: &mut Vec<ApplicationRecord>,
                              osim_rows: &mut Vec<Vec<bool>>,
                              osim_applicants: &mut Vec<String>,
                              app_seq: &mut u64,
                              scratch: &mut Vec<u64>,
                              swaps: &mut Vec<(usize, usize)>,
                              truth: &mut GroundTruth,
                              national_id: String,
                              core: bool|
     -> Result<()> {
        let applicant_id = make_id("a", i, applicant_width);
        let mut rng =
            ChaCha12Rng::seed_from_u64(seeding::derive_seed3(spec.seed, TAG_ASSIGN, i, 0));
        let group = (*draw_discrete(spec.group_mix.iter(), rng.gen::<f64>())).clone();
        let k = *draw_discrete(spec.k_distribution.iter(), rng.gen::<f64>());
        let a = trait_of(i);

        swaps.clear();
        for t in 0..k as usize {
            let pick = t + rng.gen_range(0..scratch.len() - t);
            scratch.swap(t, pick);
            swaps.push((t, pick));
        }
        let mut positions: Vec<u64> = scratch[..k as usize].to_vec();
        for &(t, pick) in swaps.iter().rev() {
            scratch.swap(t, pick);
        }
        positions.sort_unstable();

        let scores = score_row(i, a, &group);
        osim_applicants.push(applicant_id.clone());
        osim_rows.push(scores.iter().map(|&s| s > spec.threshold).collect());
        truth.applicant_traits.insert(applicant_id.clone(), a);
        truth
            .applicant_groups
            .insert(applicant_id.clone(), group.clone());
        if core {
            *truth.realized_k_histogram.entry(k).or_default() += 1;
        }

        for p in positions {
            let j = position_model(p);
            let score = scores[j];
            let mut record = ApplicationRecord {
                application_id: make_id("app", *app_seq, app_width),
                applicant_id: applicant_id.clone(),
                position_id: position_ids[p as usize].clone(),
                employer_id: employer_ids[position_employer(p)].clone(),
                model_id: model_ids[j].clone(),
                score: Some(score),
                submitted_at: base_time + chrono::Duration::seconds(*app_seq as i64),
                race: None,
                gender: None,
                soc_major_group: Some(position_soc(p).to_string()),
                extra: BTreeMap::new(),
                outcome: Some(Outcome {
                    recommended: score > spec.threshold,
                }),
            };
            match spec.group_column.as_str() {
                "gender" => record.gender = Some(group.clone()),
                _ => record.race = Some(group.clone()),
            }
            record
                .extra
                .insert("national_id".into(), national_id.clone());
            records.push(record);
            *app_seq += 1;
        }
        Ok(())
    };

    // Core applicants.
    for i in 0..n {
        emit_applicant(
            i,
            &mut records,
            &mut osim_rows,
            &mut osim_applicants,
            &mut app_seq,
            &mut scratch,
            &mut swaps,
            &mut truth,
            format!("nid{i:0applicant_width$}"),
            true,
        )?;
    }

    // Planted all-reject applicants: floor every score and outcome.
    let n_all_reject = spec.planted.all_reject_applicants.min(n);
    if n_all_reject > 0 {
        let floored = logistic(ALL_REJECT_LATENT);
        let reject_ids: BTreeSet<String> = (0..n_all_reject)
            .map(|i| make_id("a", i, applicant_width))
            .collect();
        for record in &mut records {
            if reject_ids.contains(&record.applicant_id) {
                record.score = Some(floored);
                record.outcome = Some(Outcome { recommended: false });
            }
        }
        for (applicant, row) in osim_applicants.iter().zip(&mut osim_rows) {
            if reject_ids.contains(applicant) {
                row.iter_mut().for_each(|cell| *cell = false);
            }
        }
        truth.planted.all_reject_applicant_ids = reject_ids.into_iter().collect();
    }

    // Planted duplicates: clone the first D core applications.
    let n_duplicates = spec.planted.duplicates.min(records.len() as u64);
    for c in 0..n_duplicates {
        let mut clone = records[c as usize].clone();
        clone.application_id = make_id("app", app_seq, app_width);
        clone.submitted_at += chrono::Duration::seconds(3600);
        truth
            .planted
            .duplicate_application_ids
            .push(clone.application_id.clone());
        records.push(clone);
        app_seq += 1;
    }

    // Planted test models: QA traffic that cleaning should remove.
    for t in 0..spec.planted.test_models {
        let test_model_id = make_id("testm", t, 2);
        for r in 0..spec.planted.test_model_rows {
            let i = (t + r * 131) % n; // spread rows across applicants
            let applicant_id = make_id("a", i, applicant_width);
            let p = r % spec.n_positions;
            let group = truth.applicant_groups[&applicant_id].clone();
            let latent = rho * truth.applicant_traits[&applicant_id]
                + noise_scale * noise_of(i, spec.n_models + t);
            let score = logistic(latent);
            let mut record = ApplicationRecord {
                application_id: make_id("app", app_seq, app_width),
                applicant_id,
                position_id: position_ids[p as usize].clone(),
                employer_id: employer_ids[position_employer(p)].clone(),
                model_id: test_model_id.clone(),
                score: Some(score),
                submitted_at: base_time + chrono::Duration::seconds(app_seq as i64),
                race: None,
                gender: None,
                soc_major_group: Some(position_soc(p).to_string()),
                extra: BTreeMap::new(),
                outcome: Some(Outcome {
                    recommended: score > spec.threshold,
                }),
            };
            match spec.group_column.as_str() {
                "gender" => record.gender = Some(group),
                _ => record.race = Some(group),
            }
            record
                .extra
                .insert("national_id".into(), format!("nid{i:0applicant_width$}"));
            truth
                .planted
                .test_application_ids
                .push(record.application_id.clone());
            records.push(record);
            app_seq += 1;
        }
        truth.planted.test_model_ids.push(test_model_id);
    }

    // Planted identity clusters: fresh applicant ids sharing national_id.
    let mut next_applicant = n;
    for (c, &size) in spec.planted.identity_groups.iter().enumerate() {
        let shared_id = format!("cluster{c:03}");
        let mut members = Vec::with_capacity(size as usize);
        for _ in 0..size {
            members.push(make_id("a", next_applicant, applicant_width));
            emit_applicant(
                next_applicant,
                &mut records,
                &mut osim_rows,
                &mut osim_applicants,
                &mut app_seq,
                &mut scratch,
                &mut swaps,
                &mut truth,
                shared_id.clone(),
                false,
            )?;
            next_applicant += 1;
        }
        truth.planted.identity_clusters.push(members);
    }

    // Planted unscored rows: strip scores from the last U core rows.
    let core_len = records
        .iter()
        .position(|r| {
            truth
                .planted
                .duplicate_application_ids
                .first()
                .is_some_and(|d| d == &r.application_id)
        })
        .unwrap_or(records.len());
    let n_unscored = spec.planted.unscored.min(core_len as u64) as usize;
    for record in &mut records[core_len - n_unscored..core_len] {
        record.score = None;
        record.outcome = None;
        truth
            .planted
            .unscored_application_ids
            .push(record.application_id.clone());
    }

    records.sort_by(|x, y| x.application_id.cmp(&y.application_id));
    let outcome_matrix = SimOutcomeMatrix {
        complete: vec![true; osim_applicants.len()],
        applicant_ids: osim_applicants,
        model_ids: model_ids.clone(),
        outcomes: osim_rows,
    };
    Ok(GeneratedCorpus {
        records,
        truth,
        outcome_matrix,
    })
}

/// Adjust `spec` so `group`'s expected impact ratio on the models behind
/// `positions` is `target_ratio`, while leaving every group's expected
/// aggregate impact ratio at 0.8 or above (the masking scenario).
///
/// `target_ratio` = 1.0 is a no-op. The offset solves, per affected
/// model, Φ(b+δ−ℓ) = ratio · Φ(b+δ_ref−ℓ) jointly with the marginal-rate
/// calibration of b, by nested bisection; the reference is the highest-
/// rate other group.
pub fn plant_adverse_impact(
    mut spec: SyntheticSpec,
    group: &str,
    positions: &[String],
    target_ratio: f64,
) -> Result<SyntheticSpec> {
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target_ratio must lie in (0, 1], got {target_ratio}"
        )));
    }
    validate(&spec)?;
    if !spec.group_mix.contains_key(group) {
        return Err(Error::InvalidArgument(format!(
            "unknown group {group:?} in plant request"
        )));
    }
    if spec.group_mix.len() < 2 {
        return Err(Error::InvalidArgument(
            "planting adverse impact needs at least two groups".into(),
        ));
    }
    if (target_ratio - 1.0).abs() == 0.0 {
        return Ok(spec);
    }

    let model_width = id_width(spec.n_models, 3);
    let position_width = id_width(spec.n_positions, 4);
    let known_positions: BTreeMap<String, u64> = (0..spec.n_positions)
        .map(|p| (make_id("p", p, position_width), p))
        .collect();
    let mut models: BTreeSet<u64> = BTreeSet::new();
    for position in positions {
        let index = known_positions.get(position).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown position {position:?} in plant request"))
        })?;
        models.insert(index % spec.n_models);
    }
    if models.is_empty() {
        return Err(Error::InvalidArgument(
            "plant request names no positions".into(),
        ));
    }

    let ell = logit(spec.threshold);
    for &j in &models {
        let model_id = make_id("m", j, model_width);
        let target_rate = base_rate(&spec, j as usize);
        // Offsets of the other groups at this model stay fixed.
        let others: Vec<(String, f64, f64)> = spec
            .group_mix
            .iter()
            .filter(|(g, _)| g.as_str() != group)
            .map(|(g, &share)| (g.clone(), share, group_offset(&spec, g, &model_id)))
            .collect();
        let group_share = spec.group_mix[group];
        // ratio(δ) − target, strictly increasing in δ.
        let ratio_gap = |delta: f64| -> Result<f64> {
            let mut mix: Vec<(f64, f64)> = others
                .iter()
                .map(|&(_, share, offset)| (share, offset))
                .collect();
            mix.push((group_share, delta));
            let b = calibrate_intercept(&mix, target_rate, ell)?;
            let planted_rate = stats::normal_cdf(b + delta - ell);
            let reference_rate = others
                .iter()
                .map(|&(_, _, offset)| stats::normal_cdf(b + offset - ell))
                .fold(f64::MIN, f64::max);
            Ok(planted_rate / reference_rate - target_ratio)
        };
        let (mut lo, mut hi) = (-35.0f64, 35.0f64);
        if ratio_gap(lo)? > 0.0 || ratio_gap(hi)? < 0.0 {
            return Err(Error::Infeasible(format!(
                "no latent offset reaches impact ratio {target_ratio} on model {model_id}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio_gap(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let delta = 0.5 * (lo + hi);
        let residual = ratio_gap(delta)?.abs();
        if residual > 1e-9 {
            return Err(Error::Infeasible(format!(
                "impact-ratio solve stalled at residual {residual:e} on model {model_id}"
            )));
        }
        spec.group_effects
            .entry(group.to_string())
            .or_default()
            .insert(model_id, delta);
    }

    // Masking guarantee: every group's expected aggregate ratio ≥ 0.8.
    let model_ids: Vec<String> = (0..spec.n_models)
        .map(|j| make_id("m", j, model_width))
        .collect();
    let calibration = calibrate_models(&spec, &model_ids)?;
    for group_name in spec.group_mix.keys() {
        let mut group_total = 0.0;
        let mut reference_total = 0.0;
        for p in 0..spec.n_positions {
            let rates = &calibration.group_rates[(p % spec.n_models) as usize];
            group_total += rates[group_name];
            reference_total += rates.values().fold(f64::MIN, |m, &r| m.max(r));
        }
        let aggregate_ratio = group_total / reference_total;
        if aggregate_ratio < 0.8 {
            return Err(Error::Infeasible(format!(
                "planting pushes group {group_name:?} to expected aggregate impact ratio \
                 {aggregate_ratio:.4}, below the 0.8 masking bound"
            )));
        }
    }
    Ok(spec)
}
