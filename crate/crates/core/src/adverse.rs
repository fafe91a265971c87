//! Per-position adverse-impact analysis: group selection rates, impact
//! ratios against the most-selected group, the four-fifths practical gate,
//! z-test significance gating with Benjamini–Hochberg correction across
//! positions, recommendation shortfall, and aggregate/SOC rollups.
//!
//! Positions are audited **separately**: aggregate parity can mask strong
//! per-position disparities in both directions (the classic example being
//! one group favored for some occupations and disfavored for others), and
//! [`summarize`] surfaces exactly that contrast.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::ApplicationRecord;
use crate::stats;
use crate::{Error, Result};

/// Audit knobs. `group_column` may name `race`, `gender`,
/// `soc_major_group`, or any extra column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditParams {
    /// Demographic column defining the groups.
    pub group_column: String,
    /// Restrict reported groups (reference groups are still chosen among
    /// all observed groups). `None` reports every observed group.
    pub groups: Option<BTreeSet<String>>,
    /// FDR level for Benjamini–Hochberg and the two-sided z gate.
    pub alpha: f64,
    /// Practical-significance gate on the impact ratio.
    pub four_fifths: f64,
    /// Minimum demographic-reporting applicants per eligible position.
    pub min_reporting: u64,
    /// Minimum group size within a position for a stats row.
    pub group_min: u64,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            group_column: "race".into(),
            groups: None,
            alpha: 0.05,
            four_fifths: 0.8,
            min_reporting: 30,
            group_min: 1,
        }
    }
}

/// Resolve the audited group value on one record; `None` = not reporting.
fn group_value<'a>(record: &'a ApplicationRecord, column: &str) -> Option<&'a str> {
    match column {
        "race" => record.race.as_deref(),
        "gender" => record.gender.as_deref(),
        "soc_major_group" => record.soc_major_group.as_deref(),
        other => record
            .extra
            .get(other)
            .map(String::as_str)
            .filter(|v| !v.is_empty()),
    }
}

/// Application tally for one group at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupTally {
    /// Applications from the group.
    pub n: u64,
    /// Applications recommended.
    pub selected: u64,
}

impl GroupTally {
    /// Selection rate s_g.
    pub fn rate(self) -> f64 {
        self.selected as f64 / self.n as f64
    }
}

/// Audit result for one (position, group) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPositionStats {
    pub position_id: String,
    pub group: String,
    /// Applications from the group at this position.
    pub n: u64,
    pub selected: u64,
    pub selection_rate: f64,
    /// Most-selected group at this position.
    pub reference_group: String,
    /// Selection rate of the reference group.
    pub reference_rate: f64,
    /// r_g = s_g / s_g′ (≤ 1 by construction; 1 for the reference row and
    /// for all-zero positions).
    pub impact_ratio: f64,
    pub z: f64,
    /// Two-sided p-value of the z-test (1.0 on reference and degenerate
    /// rows). Using the two-sided value keeps the BH pass a strict
    /// refinement of the raw |z| gate at the same alpha.
    pub p_value: f64,
    /// True when the pooled z-test variance was zero.
    pub degenerate: bool,
    /// r_g below the four-fifths gate.
    pub flag_practical: bool,
    /// z at or below the two-sided critical value in the adverse direction.
    pub flag_statistical: bool,
    /// BH-corrected significance within this group's family of positions.
    pub flag_statistical_bh: bool,
    /// flag_practical ∧ flag_statistical.
    pub flag_adverse_raw: bool,
    /// flag_practical ∧ flag_statistical_bh.
    pub flag_adverse_bh: bool,
}

/// Positions with at least `min_reporting` distinct applicants reporting a
/// value in `group_column`. Requires binarized outcomes upstream.
pub fn position_filter(
    records: &[ApplicationRecord],
    group_column: &str,
    min_reporting: u64,
) -> BTreeSet<String> {
    let mut reporting: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        if group_value(r, group_column).is_some() {
            reporting
                .entry(r.position_id.as_str())
                .or_default()
                .insert(r.applicant_id.as_str());
        }
    }
    reporting
        .into_iter()
        .filter(|(_, applicants)| applicants.len() as u64 >= min_reporting)
        .map(|(position, _)| position.to_string())
        .collect()
}

/// The most-selected group: maximal selection rate, ties broken by larger
/// n, then lexicographically smaller group id.
pub fn reference_group(tallies: &BTreeMap<String, GroupTally>) -> Result<&str> {
    tallies
        .iter()
        .max_by(|(name_a, a), (name_b, b)| {
            a.rate()
                .partial_cmp(&b.rate())
                .expect("rates are finite")
                .then(a.n.cmp(&b.n))
                .then(name_b.as_str().cmp(name_a.as_str()))
        })
        .map(|(name, _)| name.as_str())
        .ok_or_else(|| Error::EmptyInput("no group meets the minimum-size rule".into()))
}

/// Audit every (eligible position, group) pair.
///
/// Eligibility is the `min_reporting` distinct-applicant rule; within a
/// position every group with n ≥ `group_min` applications gets a row, the
/// reference group itself included (impact ratio 1, no flags). The z-test
/// compares each group against the reference under the pooled null; the
/// BH family is **all of a group's non-reference rows across positions**.
/// Rows return sorted by (position_id, group).
pub fn audit_positions(
    records: &[ApplicationRecord],
    params: &AuditParams,
) -> Result<Vec<GroupPositionStats>> {
    if !(0.0..=1.0).contains(&params.four_fifths) {
        return Err(Error::InvalidConfig(format!(
            "four-fifths gate must lie in [0, 1], got {}",
            params.four_fifths
        )));
    }
    for r in records {
        if r.outcome.is_none() {
            return Err(Error::MissingValue(format!(
                "application {:?} has no outcome; binarize before auditing",
                r.application_id
            )));
        }
    }
    let z_critical = stats::normal_quantile(params.alpha / 2.0)?;
    let eligible = position_filter(records, &params.group_column, params.min_reporting);

    // Tally applications per (position, group).
    let mut tallies: BTreeMap<&str, BTreeMap<String, GroupTally>> = BTreeMap::new();
    for r in records {
        if !eligible.contains(&r.position_id) {
            continue;
        }
        let Some(group) = group_value(r, &params.group_column) else {
            continue;
        };
        let slot = tallies
            .entry(r.position_id.as_str())
            .or_default()
            .entry(group.to_string())
            .or_insert(GroupTally { n: 0, selected: 0 });
        slot.n += 1;
        slot.selected += r.outcome.unwrap().recommended as u64;
    }

    let mut rows = Vec::new();
    for (position, groups) in &tallies {
        let sized: BTreeMap<String, GroupTally> = groups
            .iter()
            .filter(|(_, t)| t.n >= params.group_min)
            .map(|(g, t)| (g.clone(), *t))
            .collect();
        if sized.is_empty() {
            continue;
        }
        let reference = reference_group(&sized)?.to_string();
        let ref_tally = sized[&reference];
        let ref_rate = ref_tally.rate();

        for (group, tally) in &sized {
            if let Some(filter) = &params.groups {
                if !filter.contains(group) {
                    continue;
                }
            }
            let rate = tally.rate();
            let is_reference = *group == reference;
            let (impact_ratio, z, p_value, degenerate) = if is_reference {
                (1.0, 0.0, 1.0, false)
            } else if ref_rate == 0.0 {
                // All-zero position: every rate ties at 0.
                (1.0, 0.0, 1.0, true)
            } else {
                let test = stats::pooled_z_test(rate, tally.n, ref_rate, ref_tally.n)?;
                // Non-reference rows have s_g ≤ s_g′, so z ≤ 0 and the
                // two-sided p doubles the lower tail.
                let p_two = (2.0 * test.p_value.min(1.0 - test.p_value)).min(1.0);
                (rate / ref_rate, test.z, p_two, test.degenerate)
            };
            let flag_practical = impact_ratio < params.four_fifths;
            let flag_statistical = !is_reference && !degenerate && z <= z_critical;
            rows.push(GroupPositionStats {
                position_id: position.to_string(),
                group: group.clone(),
                n: tally.n,
                selected: tally.selected,
                selection_rate: rate,
                reference_group: reference.clone(),
                reference_rate: ref_rate,
                impact_ratio,
                z,
                p_value,
                degenerate,
                flag_practical,
                flag_statistical,
                flag_statistical_bh: false, // filled below
                flag_adverse_raw: flag_practical && flag_statistical,
                flag_adverse_bh: false, // filled below
            });
        }
    }

    // BH per group over its non-reference rows.
    let mut families: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.group != row.reference_group {
            families.entry(row.group.as_str()).or_default().push(i);
        }
    }
    let families: Vec<Vec<usize>> = families.into_values().collect();
    for indices in families {
        let ps: Vec<f64> = indices.iter().map(|&i| rows[i].p_value).collect();
        let bh = stats::benjamini_hochberg(&ps, params.alpha)?;
        for (&i, &rejected) in indices.iter().zip(&bh.rejected) {
            rows[i].flag_statistical_bh = rejected;
            rows[i].flag_adverse_bh = rows[i].flag_practical && rejected;
        }
    }
    rows.sort_by(|a, b| {
        a.position_id
            .cmp(&b.position_id)
            .then_with(|| a.group.cmp(&b.group))
    });
    Ok(rows)
}

/// Which flag family a tally should follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagKind {
    /// Practical gate + raw z gate.
    Raw,
    /// Practical gate + BH-corrected significance.
    Bh,
}

impl GroupPositionStats {
    /// The adverse flag of the requested kind.
    pub fn adverse(&self, kind: FlagKind) -> bool {
        match kind {
            FlagKind::Raw => self.flag_adverse_raw,
            FlagKind::Bh => self.flag_adverse_bh,
        }
    }
}

/// Recommendation shortfall for `group` over its flagged positions:
/// Σ max(0, round(n_g·s_g′) − selected_g), i.e. how many more of the
/// group's applications the flagged positions would have recommended at
/// the reference rate (round-half-up).
pub fn shortfall(rows: &[GroupPositionStats], group: &str, kind: FlagKind) -> u64 {
    rows.iter()
        .filter(|r| r.group == group && r.adverse(kind))
        .map(|r| {
            let expected = (r.n as f64 * r.reference_rate).round();
            (expected - r.selected as f64).max(0.0) as u64
        })
        .sum()
}

/// Aggregate adverse-impact effects for one group (Panel A/B shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummaryRow {
    pub group: String,
    /// Positions carrying a stats row for this group.
    pub positions: u64,
    /// Micro-averaged selection rate: Σ selected / Σ n over those rows.
    pub aggregate_selection_rate: f64,
    /// Micro-averaged impact ratio: Σ selected / Σ (n · reference rate) —
    /// actual recommendations over recommendations expected at each
    /// position's reference rate.
    pub aggregate_impact_ratio: f64,
    /// BH-flagged positions and share of the group's positions.
    pub biased_positions: u64,
    pub biased_positions_pct: f64,
    /// Applications the group sent to BH-flagged positions; percentage is
    /// of all the group's applications in the cleaned dataset.
    pub applications_to_biased: u64,
    pub applications_to_biased_pct: f64,
    /// Distinct group applicants touching a BH-flagged position;
    /// percentage of all the group's distinct applicants.
    pub applicants_to_biased: u64,
    pub applicants_to_biased_pct: f64,
    /// Shortfall over BH-flagged positions; percentage of all the group's
    /// applications.
    pub shortfall: u64,
    pub shortfall_pct: f64,
}

/// One row of the per-occupation rollup (Table layout: group, impact
/// ratio, positions, #adverse, %adverse, %adverse-BH within one SOC major
/// group; `soc_group` "all" aggregates every audited position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocRollupRow {
    pub soc_group: String,
    pub group: String,
    /// Micro-averaged impact ratio within the rollup.
    pub impact_ratio: f64,
    /// Positions carrying a stats row for this (soc, group).
    pub positions: u64,
    /// Raw-flagged positions.
    pub n_adverse: u64,
    /// 100 · n_adverse / positions.
    pub pct_adverse: f64,
    /// 100 · BH-flagged / positions.
    pub pct_adverse_bh: f64,
}

/// Aggregate summaries: per-group Panel rows and per-SOC rollups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    pub rows: Vec<ImpactSummaryRow>,
    pub soc_rollup: Vec<SocRollupRow>,
}

fn soc_of_positions(records: &[ApplicationRecord]) -> BTreeMap<&str, &str> {
    let mut soc: BTreeMap<&str, &str> = BTreeMap::new();
    for r in records {
        if let Some(value) = r.soc_major_group.as_deref() {
            // First value in canonical record order wins; positions are
            // expected to carry a single SOC code.
            soc.entry(r.position_id.as_str()).or_insert(value);
        }
    }
    soc
}

/// Roll audited positions up into per-group aggregates and per-SOC tables.
///
/// `records` must be the same cleaned records the audit ran on: they
/// provide the denominators (all of a group's applications/applicants, not
/// only eligible positions) and the position→SOC mapping (missing SOC
/// codes roll up under "none").
pub fn summarize(
    rows: &[GroupPositionStats],
    records: &[ApplicationRecord],
    params: &AuditParams,
) -> Result<ImpactSummary> {
    // Denominators over the full cleaned dataset.
    let mut group_applications: BTreeMap<&str, u64> = BTreeMap::new();
    let mut group_applicants: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        if let Some(g) = group_value(r, &params.group_column) {
            *group_applications.entry(g).or_default() += 1;
            group_applicants
                .entry(g)
                .or_default()
                .insert(r.applicant_id.as_str());
        }
    }

    let flagged_positions: BTreeMap<&str, BTreeSet<&str>> = rows
        .iter()
        .filter(|r| r.flag_adverse_bh)
        .fold(BTreeMap::new(), |mut acc, r| {
            acc.entry(r.group.as_str())
                .or_default()
                .insert(r.position_id.as_str());
            acc
        });

    let groups: BTreeSet<&str> = rows.iter().map(|r| r.group.as_str()).collect();
    let mut summary_rows = Vec::new();
    for group in &groups {
        let mine: Vec<&GroupPositionStats> =
            rows.iter().filter(|r| r.group == *group).collect();
        let n_total: u64 = mine.iter().map(|r| r.n).sum();
        let selected_total: u64 = mine.iter().map(|r| r.selected).sum();
        let expected_at_reference: f64 =
            mine.iter().map(|r| r.n as f64 * r.reference_rate).sum();
        let biased: Vec<&&GroupPositionStats> =
            mine.iter().filter(|r| r.flag_adverse_bh).collect();
        let applications_to_biased: u64 = biased.iter().map(|r| r.n).sum();
        let flagged = flagged_positions.get(*group);
        let applicants_to_biased = records
            .iter()
            .filter(|r| {
                group_value(r, &params.group_column) == Some(*group)
                    && flagged.is_some_and(|set| set.contains(r.position_id.as_str()))
            })
            .map(|r| r.applicant_id.as_str())
            .collect::<BTreeSet<_>>()
            .len() as u64;
        let shortfall_count = shortfall(rows, group, FlagKind::Bh);

        let all_applications = group_applications.get(*group).copied().unwrap_or(0);
        let all_applicants = group_applicants
            .get(*group)
            .map(|s| s.len() as u64)
            .unwrap_or(0);
        let pct = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        summary_rows.push(ImpactSummaryRow {
            group: group.to_string(),
            positions: mine.len() as u64,
            aggregate_selection_rate: selected_total as f64 / n_total as f64,
            aggregate_impact_ratio: if expected_at_reference > 0.0 {
                selected_total as f64 / expected_at_reference
            } else {
                1.0
            },
            biased_positions: biased.len() as u64,
            biased_positions_pct: pct(biased.len() as u64, mine.len() as u64),
            applications_to_biased,
            applications_to_biased_pct: pct(applications_to_biased, all_applications),
            applicants_to_biased,
            applicants_to_biased_pct: pct(applicants_to_biased, all_applicants),
            shortfall: shortfall_count,
            shortfall_pct: pct(shortfall_count, all_applications),
        });
    }

    // SOC rollups: "all" block first, then each SOC major group.
    let soc_map = soc_of_positions(records);
    let mut soc_keys: Vec<&str> = vec!["all"];
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for row in rows {
        seen.insert(soc_map.get(row.position_id.as_str()).copied().unwrap_or("none"));
    }
    soc_keys.extend(seen.iter().copied());

    let mut rollup = Vec::new();
    for soc in soc_keys {
        for group in &groups {
            let mine: Vec<&GroupPositionStats> = rows
                .iter()
                .filter(|r| {
                    r.group == *group
                        && (soc == "all"
                            || soc_map.get(r.position_id.as_str()).copied().unwrap_or("none")
                                == soc)
                })
                .collect();
            if mine.is_empty() {
                continue;
            }
            let selected: u64 = mine.iter().map(|r| r.selected).sum();
            let expected: f64 = mine.iter().map(|r| r.n as f64 * r.reference_rate).sum();
            let n_adverse = mine.iter().filter(|r| r.flag_adverse_raw).count() as u64;
            let n_bh = mine.iter().filter(|r| r.flag_adverse_bh).count() as u64;
            let positions = mine.len() as u64;
            rollup.push(SocRollupRow {
                soc_group: soc.to_string(),
                group: group.to_string(),
                impact_ratio: if expected > 0.0 {
                    selected as f64 / expected
                } else {
                    1.0
                },
                positions,
                n_adverse,
                pct_adverse: 100.0 * n_adverse as f64 / positions as f64,
                pct_adverse_bh: 100.0 * n_bh as f64 / positions as f64,
            });
        }
    }
    Ok(ImpactSummary {
        rows: summary_rows,
        soc_rollup: rollup,
    })
}
