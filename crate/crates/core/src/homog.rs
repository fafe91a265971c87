//! Outcome homogenization: per-applicant recommendation-count distributions,
//! the Poisson-binomial baseline of independence, and systemic-rejection
//! curves with exponential fits.
//!
//! The observed distribution histograms how many recommendations each
//! k-application applicant actually received. The baseline replaces each
//! application with an independent Bernoulli draw at that position's
//! selection rate — the exact Poisson-binomial law over the applicant's own
//! positions, averaged over the cohort — so any excess mass at zero
//! ("systemic rejection") signals correlated decisions, not harsher
//! positions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplicationRecord, CohortMember};
use crate::stats::{self, Chi2Gof, ExpFit};
use crate::{Error, Result};

/// Application-level selection tally for one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionRate {
    /// Applications to the position.
    pub n: u64,
    /// Applications recommended.
    pub selected: u64,
    /// selected / n.
    pub rate: f64,
}

/// Selection rate of every position over the **full** record set (all
/// applications, not just one cohort). Requires binarized outcomes.
pub fn position_selection_rates(
    records: &[ApplicationRecord],
) -> Result<BTreeMap<String, PositionRate>> {
    let mut tally: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in records {
        let outcome = r.outcome.ok_or_else(|| {
            Error::MissingValue(format!(
                "application {:?} has no outcome; binarize first",
                r.application_id
            ))
        })?;
        let slot = tally.entry(r.position_id.clone()).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += outcome.recommended as u64;
    }
    Ok(tally
        .into_iter()
        .map(|(position, (n, selected))| {
            (
                position,
                PositionRate {
                    n,
                    selected,
                    rate: selected as f64 / n as f64,
                },
            )
        })
        .collect())
}

/// Observed and baseline distributions of recommendation counts for one
/// k-cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub k: usize,
    pub n_applicants: usize,
    /// `observed[t]` = share of cohort applicants with exactly t
    /// recommendations; length k+1.
    pub observed: Vec<f64>,
    /// Poisson-binomial baseline over each applicant's own positions,
    /// averaged over the cohort; length k+1.
    pub baseline: Vec<f64>,
}

impl OutcomeDistribution {
    /// Share of applicants recommended nowhere.
    pub fn systemic_rejection_observed(&self) -> f64 {
        self.observed[0]
    }

    /// Baseline probability of zero recommendations.
    pub fn systemic_rejection_baseline(&self) -> f64 {
        self.baseline[0]
    }
}

/// Histogram of per-applicant recommendation counts, normalized to sum 1.
///
/// Every cohort member must carry exactly `k` outcomes.
pub fn observed_distribution(cohort: &[CohortMember], k: usize) -> Result<Vec<f64>> {
    if cohort.is_empty() {
        return Err(Error::EmptyInput("observed_distribution of empty cohort".into()));
    }
    let mut hist = vec![0.0; k + 1];
    for member in cohort {
        if member.outcomes.len() != k {
            return Err(Error::InvalidArgument(format!(
                "applicant {:?} has {} outcomes in a k={k} cohort",
                member.applicant_id,
                member.outcomes.len()
            )));
        }
        let t = member.outcomes.iter().filter(|&&o| o).count();
        hist[t] += 1.0;
    }
    let n = cohort.len() as f64;
    for h in &mut hist {
        *h /= n;
    }
    Ok(hist)
}

/// Baseline of independence: each member's exact Poisson-binomial PMF over
/// the selection rates of their own positions, averaged over the cohort.
///
/// Rates must cover every referenced position (they are computed over all
/// applicants to the position, not only cohort members). When every member
/// shares one position set this reduces to the single Poisson-binomial of
/// that set.
pub fn baseline_distribution(
    cohort: &[CohortMember],
    rates: &BTreeMap<String, PositionRate>,
) -> Result<Vec<f64>> {
    if cohort.is_empty() {
        return Err(Error::EmptyInput("baseline_distribution of empty cohort".into()));
    }
    let k = cohort[0].positions.len();
    let mut acc = vec![0.0; k + 1];
    let mut probs = Vec::with_capacity(k);
    for member in cohort {
        if member.positions.len() != k {
            return Err(Error::InvalidArgument(format!(
                "applicant {:?} has {} positions in a k={k} cohort",
                member.applicant_id,
                member.positions.len()
            )));
        }
        probs.clear();
        for position in &member.positions {
            let rate = rates.get(position).ok_or_else(|| {
                Error::MissingValue(format!(
                    "no selection rate for position {position:?} (zero applicants?)"
                ))
            })?;
            probs.push(rate.rate);
        }
        let pmf = stats::poisson_binomial(&probs)?;
        for (a, p) in acc.iter_mut().zip(&pmf) {
            *a += p;
        }
    }
    let n = cohort.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// Build the paired observed/baseline distribution for one cohort.
pub fn distribution_for_cohort(
    cohort: &[CohortMember],
    k: usize,
    rates: &BTreeMap<String, PositionRate>,
) -> Result<OutcomeDistribution> {
    let observed = observed_distribution(cohort, k)?;
    let baseline = baseline_distribution(cohort, rates)?;
    debug_assert!((observed.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    debug_assert!((baseline.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    Ok(OutcomeDistribution {
        k,
        n_applicants: cohort.len(),
        observed,
        baseline,
    })
}

/// Chi-square GOF of observed against baseline for one cohort of `n`
/// applicants: both distributions are scaled to counts and compared via
/// [`stats::chi_square_gof`] with `min_expected` bin merging.
pub fn compare(observed: &[f64], baseline: &[f64], n: usize, min_expected: f64) -> Result<Chi2Gof> {
    if observed.len() != baseline.len() {
        return Err(Error::InvalidArgument(format!(
            "observed (k={}) and baseline (k={}) describe different cohorts",
            observed.len().saturating_sub(1),
            baseline.len().saturating_sub(1)
        )));
    }
    let scale = n as f64;
    let obs_counts: Vec<f64> = observed.iter().map(|p| p * scale).collect();
    let exp_counts: Vec<f64> = baseline.iter().map(|p| p * scale).collect();
    stats::chi_square_gof(&obs_counts, &exp_counts, min_expected)
}

/// Pool per-cohort GOFs across k: statistics and degrees of freedom add
/// (cohorts are disjoint), giving one overall test of independence.
pub fn pooled_compare(distributions: &[OutcomeDistribution], min_expected: f64) -> Result<Chi2Gof> {
    if distributions.is_empty() {
        return Err(Error::EmptyInput("pooled_compare of no distributions".into()));
    }
    let mut statistic = 0.0;
    let mut dof = 0;
    let mut bins = 0;
    for dist in distributions {
        let gof = compare(&dist.observed, &dist.baseline, dist.n_applicants, min_expected)?;
        statistic += gof.statistic;
        dof += gof.dof;
        bins += gof.bins_used;
    }
    Ok(Chi2Gof {
        statistic,
        dof,
        p_value: stats::chi2_sf(statistic, dof),
        bins_used: bins,
        merged: true,
    })
}

/// One point of a systemic-rejection curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub n_applicants: usize,
    pub observed_rate: f64,
    pub baseline_rate: f64,
}

/// Observed vs. baseline systemic rejection by application count, with
/// exponential decay fits of each curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    /// Points sorted by k.
    pub points: Vec<CurvePoint>,
    pub observed_fit: ExpFit,
    pub baseline_fit: ExpFit,
}

/// Trace observed and baseline P(0 recommendations) across cohorts.
///
/// Cohorts smaller than `cohort_floor` applicants are skipped as
/// noise-dominated. Exponential fits drop zero rates; fewer than two
/// usable points is an error.
pub fn rejection_curve(
    cohorts: &BTreeMap<usize, Vec<CohortMember>>,
    rates: &BTreeMap<String, PositionRate>,
    cohort_floor: usize,
) -> Result<RejectionCurve> {
    let mut points = Vec::new();
    for (&k, cohort) in cohorts {
        if k == 0 || cohort.len() < cohort_floor {
            continue;
        }
        let dist = distribution_for_cohort(cohort, k, rates)?;
        points.push(CurvePoint {
            k,
            n_applicants: dist.n_applicants,
            observed_rate: dist.systemic_rejection_observed(),
            baseline_rate: dist.systemic_rejection_baseline(),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no cohort reaches the floor of {cohort_floor} applicants"
        )));
    }
    let observed_pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.k as f64, p.observed_rate))
        .collect();
    let baseline_pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.k as f64, p.baseline_rate))
        .collect();
    Ok(RejectionCurve {
        observed_fit: stats::fit_exponential(&observed_pts)?,
        baseline_fit: stats::fit_exponential(&baseline_pts)?,
        points,
    })
}

/// GOF between a curve's observed and baseline rejection rates, binned per
/// k into (rejected everywhere, recommended somewhere).
///
/// For each point the expected split is n·baseline vs n·(1−baseline) and
/// the observed split is round(n·observed) vs the remainder; per-k
/// contributions add with K−1 degrees of freedom. Rounding the observed
/// count makes published tables (rates quoted to limited digits)
/// reproducible; exact internal rates are unaffected since n·observed is
/// already integral.
pub fn rejection_curve_gof(points: &[CurvePoint]) -> Result<Chi2Gof> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "curve GOF needs at least two points".into(),
        ));
    }
    let mut statistic = 0.0;
    for p in points {
        let n = p.n_applicants as f64;
        let expected0 = n * p.baseline_rate;
        let expected_pos = n - expected0;
        if expected0 <= 0.0 || expected_pos <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "k={}: baseline rate {} leaves an empty expected bin",
                p.k, p.baseline_rate
            )));
        }
        let observed0 = (n * p.observed_rate).round();
        let observed_pos = n - observed0;
        statistic += (observed0 - expected0).powi(2) / expected0
            + (observed_pos - expected_pos).powi(2) / expected_pos;
    }
    let dof = points.len() - 1;
    Ok(Chi2Gof {
        statistic,
        dof,
        p_value: stats::chi2_sf(statistic, dof),
        bins_used: 2 * points.len(),
        merged: false,
    })
}
