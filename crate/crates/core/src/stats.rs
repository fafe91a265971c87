//! Statistical kernel: exact Poisson-binomial PMF, two-sample pooled z-test,
//! Benjamini–Hochberg step-up, chi-square goodness of fit with small-bin
//! merging, and exponential decay fitting.
//!
//! Every routine here is deterministic and pure; all randomness lives in the
//! callers. Normal tails are evaluated through `libm`'s erfc and chi-square
//! tails through `statrs`' regularized upper incomplete gamma.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

/// Standard normal CDF Φ(z) = ½·erfc(−z/√2).
///
/// Backed by `libm`'s erfc (sub-ulp accuracy), keeping tail probabilities
/// within 1e-12 absolute everywhere.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function 1 − Φ(z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Chi-square survival function P(X ≥ stat) for `dof` degrees of freedom,
/// via the regularized upper incomplete gamma Q(dof/2, stat/2).
pub fn chi2_sf(stat: f64, dof: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, stat / 2.0)
}

/// Standard normal quantile Φ⁻¹(p), by bisection on [`normal_cdf`]
/// (deterministic, converges below 1e-13).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Exact Poisson-binomial PMF over `probs.len()` independent Bernoulli
/// trials with heterogeneous success probabilities.
///
/// Returns a vector of length `probs.len() + 1` whose `t`-th entry is
/// P(exactly `t` successes), computed by the O(k²) iterative convolution
/// in linear probability space. An empty input yields the point mass
/// `[1.0]` at zero successes.
pub fn poisson_binomial(probs: &[f64]) -> Result<Vec<f64>> {
    for &p in probs {
        check_probability("success probability", p)?;
    }
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        pmf[i + 1] = pmf[i] * p;
        for t in (1..=i).rev() {
            pmf[t] = pmf[t] * q + pmf[t - 1] * p;
        }
        pmf[0] *= q;
    }
    Ok(pmf)
}

/// Result of a two-sample pooled-proportion z-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    /// Test statistic; negative when the first sample has the lower rate.
    pub z: f64,
    /// One-sided lower-tail p-value Φ(z). The symmetric two-sided gate
    /// |z| ≥ 1.96 corresponds to p ≤ 0.025 in the adverse direction.
    pub p_value: f64,
    /// Pooled proportion p̂ = (r_a·n_a + r_b·n_b)/(n_a + n_b).
    pub pooled_rate: f64,
    /// True when the pooled variance is zero (p̂ of 0 or 1): `z` is
    /// reported as 0 and `p_value` as 0.5, and no gate should fire.
    pub degenerate: bool,
}

/// Two-sample z-test comparing selection rate `rate_a` (on `n_a` trials)
/// against `rate_b` (on `n_b` trials) under the pooled-variance null.
pub fn pooled_z_test(rate_a: f64, n_a: u64, rate_b: f64, n_b: u64) -> Result<ZTest> {
    check_probability("rate_a", rate_a)?;
    check_probability("rate_b", rate_b)?;
    if n_a == 0 || n_b == 0 {
        return Err(Error::InvalidArgument(
            "z-test sample sizes must be positive".into(),
        ));
    }
    let na = n_a as f64;
    let nb = n_b as f64;
    let pooled = (rate_a * na + rate_b * nb) / (na + nb);
    let variance = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb);
    if variance <= 0.0 {
        return Ok(ZTest {
            z: 0.0,
            p_value: 0.5,
            pooled_rate: pooled,
            degenerate: true,
        });
    }
    let z = (rate_a - rate_b) / variance.sqrt();
    Ok(ZTest {
        z,
        p_value: normal_cdf(z),
        pooled_rate: pooled,
        degenerate: false,
    })
}

/// Outcome of a Benjamini–Hochberg step-up pass at level `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct BhResult {
    /// Rejection mask aligned with the input order.
    pub rejected: Vec<bool>,
    /// Number of rejected hypotheses.
    pub n_rejected: usize,
    /// Largest p-value that was rejected, if any.
    pub threshold_p: Option<f64>,
}

/// Benjamini–Hochberg step-up over `p_values` controlling FDR at `alpha`.
///
/// Sorts the p-values, finds the largest rank i with p₍ᵢ₎ ≤ (i/m)·alpha,
/// and rejects every hypothesis at or below that rank. An empty input
/// rejects nothing.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<BhResult> {
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    for &p in p_values {
        check_probability("p-value", p)?;
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        p_values[a]
            .partial_cmp(&p_values[b])
            .expect("p-values validated finite")
            .then(a.cmp(&b))
    });
    let mut last_rejected_rank: Option<usize> = None;
    for (rank0, &i) in order.iter().enumerate() {
        let rank = (rank0 + 1) as f64;
        if p_values[i] <= alpha * rank / m as f64 {
            last_rejected_rank = Some(rank0);
        }
    }
    let mut rejected = vec![false; m];
    let mut threshold_p = None;
    if let Some(r) = last_rejected_rank {
        for &i in &order[..=r] {
            rejected[i] = true;
        }
        threshold_p = Some(p_values[order[r]]);
    }
    let n_rejected = last_rejected_rank.map_or(0, |r| r + 1);
    Ok(BhResult {
        rejected,
        n_rejected,
        threshold_p,
    })
}

/// Chi-square goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Gof {
    /// Pearson statistic Σ (O−E)²/E over the merged bins.
    pub statistic: f64,
    /// Degrees of freedom: merged bin count minus one.
    pub dof: usize,
    /// Upper-tail p-value.
    pub p_value: f64,
    /// Number of bins after merging.
    pub bins_used: usize,
    /// True when any merging took place.
    pub merged: bool,
}

/// Pearson chi-square goodness of fit of `observed` counts against
/// `expected` counts, merging bins whose expected count falls below
/// `min_expected`.
///
/// Merging first folds the right tail leftward and the left tail
/// rightward, then repeatedly folds any remaining small bin into its
/// smaller neighbor, so every surviving bin has expected ≥ `min_expected`
/// (or only two bins remain). Callers are responsible for supplying
/// comparable totals. Fails if fewer than two bins survive.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], min_expected: f64) -> Result<Chi2Gof> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidArgument(format!(
            "observed ({}) and expected ({}) lengths differ",
            observed.len(),
            expected.len()
        )));
    }
    for (&o, &e) in observed.iter().zip(expected) {
        if !o.is_finite() || o < 0.0 || !e.is_finite() || e < 0.0 {
            return Err(Error::InvalidArgument(
                "observed and expected counts must be finite and non-negative".into(),
            ));
        }
    }
    if !min_expected.is_finite() || min_expected < 0.0 {
        return Err(Error::InvalidArgument(
            "min_expected must be finite and non-negative".into(),
        ));
    }
    let mut obs = observed.to_vec();
    let mut exp = expected.to_vec();
    let original_bins = obs.len();

    // Fold the right tail into its left neighbor, then the left tail into
    // its right neighbor.
    while exp.len() > 1 && *exp.last().unwrap() < min_expected {
        let e = exp.pop().unwrap();
        let o = obs.pop().unwrap();
        *exp.last_mut().unwrap() += e;
        *obs.last_mut().unwrap() += o;
    }
    while exp.len() > 1 && exp[0] < min_expected {
        exp[1] += exp[0];
        obs[1] += obs[0];
        exp.remove(0);
        obs.remove(0);
    }
    // Fold any remaining interior shortfall into the smaller neighbor.
    while exp.len() > 2 {
        let Some(i) = exp.iter().position(|&e| e < min_expected) else {
            break;
        };
        let target = if i == 0 {
            1
        } else if i == exp.len() - 1 || exp[i - 1] <= exp[i + 1] {
            i - 1
        } else {
            i + 1
        };
        exp[target] += exp[i];
        obs[target] += obs[i];
        exp.remove(i);
        obs.remove(i);
    }

    if exp.len() < 2 {
        return Err(Error::InvalidArgument(
            "chi-square needs at least two bins after merging".into(),
        ));
    }
    let mut statistic = 0.0;
    for (&o, &e) in obs.iter().zip(&exp) {
        if e == 0.0 {
            if o != 0.0 {
                return Err(Error::InvalidArgument(
                    "zero expected count with nonzero observed count".into(),
                ));
            }
            continue;
        }
        let d = o - e;
        statistic += d * d / e;
    }
    let dof = exp.len() - 1;
    Ok(Chi2Gof {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        bins_used: exp.len(),
        merged: exp.len() != original_bins,
    })
}

/// Least-squares exponential decay fit y ≈ a·e^(b·x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// Multiplier a = e^intercept.
    pub a: f64,
    /// Decay rate per unit x (negative for decay).
    pub b: f64,
    /// Coefficient of determination in log space; 0 when the response is
    /// constant (degenerate).
    pub r_squared: f64,
    /// Points actually used (those with y > 0).
    pub n_used: usize,
    /// True when all usable responses are identical: `b` is 0 and
    /// `r_squared` reported as 0.
    pub degenerate: bool,
}

/// Fit y = a·e^(b·x) by ordinary least squares on (x, ln y).
///
/// Points with y ≤ 0 are dropped (their logarithm is undefined); at least
/// two usable points with distinct x values are required.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ExpFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "exponential fit needs at least two points with positive y, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "exponential fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = usable
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let sst: f64 = usable.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sst == 0.0 {
        return Ok(ExpFit {
            a: mean_y.exp(),
            b: 0.0,
            r_squared: 0.0,
            n_used: usable.len(),
            degenerate: true,
        });
    }
    let b = sxy / sxx;
    let intercept = mean_y - b * mean_x;
    let ssr: f64 = usable
        .iter()
        .map(|p| (p.1 - (intercept + b * p.0)).powi(2))
        .sum();
    Ok(ExpFit {
        a: intercept.exp(),
        b,
        r_squared: 1.0 - ssr / sst,
        n_used: usable.len(),
        degenerate: false,
    })
}

/// Linear-interpolation percentile of an ascending-sorted slice
/// (quantile type 7): q in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile must lie in [0, 1]");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force Poisson-binomial PMF by enumerating all 2^k outcomes.
    fn enumerate_pmf(probs: &[f64]) -> Vec<f64> {
        let k = probs.len();
        let mut pmf = vec![0.0; k + 1];
        for mask in 0u32..(1u32 << k) {
            let mut pr = 1.0;
            let mut t = 0usize;
            for (j, &p) in probs.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    pr *= p;
                    t += 1;
                } else {
                    pr *= 1.0 - p;
                }
            }
            pmf[t] += pr;
        }
        pmf
    }

    #[test]
    fn poisson_binomial_point_cases() {
        assert_eq!(poisson_binomial(&[]).unwrap(), vec![1.0]);
        assert_eq!(poisson_binomial(&[0.5]).unwrap(), vec![0.5, 0.5]);
        let single = poisson_binomial(&[0.24]).unwrap();
        assert!((single[0] - 0.76).abs() < 1e-15);
        assert!((single[1] - 0.24).abs() < 1e-15);
    }

    #[test]
    fn poisson_binomial_three_trials() {
        let pmf = poisson_binomial(&[0.2, 0.5, 0.7]).unwrap();
        let want = [0.12, 0.43, 0.38, 0.07];
        for (got, want) in pmf.iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn poisson_binomial_rejects_bad_probability() {
        assert!(poisson_binomial(&[0.5, 1.2]).is_err());
        assert!(poisson_binomial(&[-0.1]).is_err());
        assert!(poisson_binomial(&[f64::NAN]).is_err());
    }

    #[test]
    fn z_test_pinned_fixture() {
        // 0.42 on 100 vs 0.60 on 100: the pooled rate is exactly 0.51 in
        // IEEE-754 arithmetic and the statistic clears the 1.96 gate.
        let t = pooled_z_test(0.42, 100, 0.60, 100).unwrap();
        assert_eq!(t.pooled_rate, 0.51);
        assert!((t.z - -2.546_093_681_940_02).abs() < 1e-12, "z = {}", t.z);
        assert!(
            (t.p_value - 0.005446797440518485).abs() < 1e-14,
            "p = {}",
            t.p_value
        );
        assert!(!t.degenerate);
    }

    #[test]
    fn z_test_equal_rates_is_zero() {
        let t = pooled_z_test(0.3, 50, 0.3, 70).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 0.5);
        assert!(!t.degenerate);
    }

    #[test]
    fn z_test_degenerate_pooled_variance() {
        let t = pooled_z_test(0.0, 10, 0.0, 10).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 0.5);
        let t = pooled_z_test(1.0, 10, 1.0, 10).unwrap();
        assert!(t.degenerate);
    }

    #[test]
    fn z_test_rejects_empty_samples() {
        assert!(pooled_z_test(0.5, 0, 0.5, 10).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(-1.96) - 0.024997895148220435).abs() < 1e-15);
        assert!((normal_cdf(-2.546) - 0.005448259417532144).abs() < 1e-15);
        assert!((normal_sf(1.96) - 0.024997895148220435).abs() < 1e-15);
        // erfc backing accuracy at reference abscissas.
        assert!((libm::erfc(1.0) - 0.15729920705028513).abs() < 1e-16);
        assert!((libm::erfc(2.0) - 0.004677734981047266).abs() < 1e-16);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        assert!((normal_quantile(0.025).unwrap() - -1.959963984540054).abs() < 1e-10);
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-12);
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-10);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn chi2_sf_reference_values() {
        assert!((chi2_sf(4.0, 1) - 0.045_500_263_896_358_53).abs() < 1e-14);
        assert!((chi2_sf(20.053440452541302, 24) - 0.6937330600293923).abs() < 1e-12);
        assert_eq!(chi2_sf(0.0, 5), 1.0);
    }

    #[test]
    fn chi_square_uniform_and_split() {
        let even = chi_square_gof(&[50.0, 50.0], &[50.0, 50.0], 0.0).unwrap();
        assert_eq!(even.statistic, 0.0);
        assert_eq!(even.p_value, 1.0);

        let skew = chi_square_gof(&[60.0, 40.0], &[50.0, 50.0], 0.0).unwrap();
        assert_eq!(skew.statistic, 4.0);
        assert_eq!(skew.dof, 1);
        assert!((skew.p_value - 0.045_500_263_896_358_53).abs() < 1e-14);
        assert!(!skew.merged);
    }

    #[test]
    fn chi_square_merges_small_tail_bins() {
        let got = chi_square_gof(&[9.0, 11.0, 2.0, 1.0], &[10.0, 10.0, 1.0, 1.0], 5.0).unwrap();
        // Tail bins fold leftward: [10, 10, 1, 1] -> [10, 12].
        assert_eq!(got.bins_used, 2);
        assert_eq!(got.dof, 1);
        assert!(got.merged);
        let want = (9.0f64 - 10.0).powi(2) / 10.0 + (14.0f64 - 12.0).powi(2) / 12.0;
        assert!((got.statistic - want).abs() < 1e-15);
    }

    #[test]
    fn chi_square_needs_two_bins() {
        assert!(chi_square_gof(&[5.0], &[5.0], 0.0).is_err());
        // Everything merges into one bin.
        assert!(chi_square_gof(&[1.0, 1.0], &[1.0, 1.0], 5.0).is_err());
    }

    #[test]
    fn bh_step_up_fixtures() {
        // Every rank clears its threshold at alpha = 0.05.
        let all = benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04, 0.05], 0.05).unwrap();
        assert_eq!(all.n_rejected, 5);
        assert_eq!(all.threshold_p, Some(0.05));

        // Only the smallest survives: 0.04 > 2/3 * 0.05.
        let one = benjamini_hochberg(&[0.2, 0.01, 0.04], 0.05).unwrap();
        assert_eq!(one.n_rejected, 1);
        assert_eq!(one.rejected, vec![false, true, false]);

        let none = benjamini_hochberg(&[0.9, 0.8], 0.05).unwrap();
        assert_eq!(none.n_rejected, 0);
        assert_eq!(none.threshold_p, None);

        let empty = benjamini_hochberg(&[], 0.05).unwrap();
        assert_eq!(empty.n_rejected, 0);
    }

    #[test]
    fn bh_rejects_bad_alpha() {
        assert!(benjamini_hochberg(&[0.5], 0.0).is_err());
        assert!(benjamini_hochberg(&[0.5], 1.0).is_err());
    }

    #[test]
    fn exponential_fit_recovers_exact_decay() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 2.0 * (-0.5 * k as f64).exp())).collect();
        let fit = fit_exponential(&pts).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-12);
        assert!((fit.b - -0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn exponential_fit_halving_rate() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let fit = fit_exponential(&pts).unwrap();
        assert!((fit.b - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exponential_fit_constant_is_degenerate() {
        let fit = fit_exponential(&[(1.0, 0.3), (2.0, 0.3), (3.0, 0.3)]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.b, 0.0);
        assert_eq!(fit.r_squared, 0.0);
        assert!((fit.a - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exponential_fit_drops_zero_rates() {
        let fit = fit_exponential(&[(1.0, 0.5), (2.0, 0.25), (3.0, 0.0)]).unwrap();
        assert_eq!(fit.n_used, 2);
        assert!(fit_exponential(&[(1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(fit_exponential(&[(1.0, 0.5), (1.0, 0.25)]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&xs, 1.0), 4.0);
        assert_eq!(percentile(&xs, 0.5), 2.5);
        assert!((percentile(&xs, 0.025) - 1.075).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn poisson_binomial_matches_enumeration(
            probs in proptest::collection::vec(0.0f64..=1.0, 0..=12)
        ) {
            let fast = poisson_binomial(&probs).unwrap();
            let slow = enumerate_pmf(&probs);
            for (f, s) in fast.iter().zip(&slow) {
                prop_assert!((f - s).abs() < 1e-12, "{f} vs {s}");
            }
        }

        #[test]
        fn poisson_binomial_is_a_distribution(
            probs in proptest::collection::vec(0.0f64..=1.0, 0..=40)
        ) {
            let pmf = poisson_binomial(&probs).unwrap();
            let total: f64 = pmf.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(pmf.iter().all(|&p| (-1e-15..=1.0 + 1e-12).contains(&p)));
            let mean: f64 = pmf.iter().enumerate().map(|(t, &p)| t as f64 * p).sum();
            let want: f64 = probs.iter().sum();
            prop_assert!((mean - want).abs() < 1e-10, "mean {mean} vs {want}");
        }

        #[test]
        fn poisson_binomial_reduces_to_binomial(
            p in 0.0f64..=1.0,
            k in 1usize..=25
        ) {
            let pmf = poisson_binomial(&vec![p; k]).unwrap();
            // Binomial PMF via the multiplicative binomial coefficient.
            let mut coeff = 1.0f64;
            for (t, &got) in pmf.iter().enumerate() {
                if t > 0 {
                    coeff = coeff * (k - t + 1) as f64 / t as f64;
                }
                let want = coeff * p.powi(t as i32) * (1.0 - p).powi((k - t) as i32);
                prop_assert!((got - want).abs() < 1e-10, "t={t}: {got} vs {want}");
            }
        }

        #[test]
        fn poisson_binomial_permutation_invariant(
            probs in proptest::collection::vec(0.0f64..=1.0, 2..=10),
            seed in 0u64..1000
        ) {
            let mut shuffled = probs.clone();
            // Cheap deterministic shuffle driven by the seed.
            let n = shuffled.len();
            let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let a = poisson_binomial(&probs).unwrap();
            let b = poisson_binomial(&shuffled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn z_test_antisymmetric(
            ra in 0.01f64..=0.99,
            rb in 0.01f64..=0.99,
            na in 1u64..5000,
            nb in 1u64..5000
        ) {
            let fwd = pooled_z_test(ra, na, rb, nb).unwrap();
            let rev = pooled_z_test(rb, nb, ra, na).unwrap();
            prop_assert!((fwd.z + rev.z).abs() < 1e-10);
            prop_assert_eq!(fwd.pooled_rate, rev.pooled_rate);
        }

        #[test]
        fn bh_never_rejects_above_alpha_and_is_monotone(
            ps in proptest::collection::vec(0.0f64..=1.0, 1..=50),
            alpha_lo in 0.01f64..=0.5
        ) {
            let alpha_hi = (alpha_lo * 1.5).min(0.9);
            let lo = benjamini_hochberg(&ps, alpha_lo).unwrap();
            let hi = benjamini_hochberg(&ps, alpha_hi).unwrap();
            for (i, &r) in lo.rejected.iter().enumerate() {
                prop_assert!(!r || ps[i] <= alpha_lo, "rejected p={} above alpha", ps[i]);
                // Raising alpha can only grow the rejection set.
                prop_assert!(!r || hi.rejected[i]);
            }
            prop_assert!(lo.n_rejected <= hi.n_rejected);
        }

        #[test]
        fn chi_square_zero_iff_equal(
            exp in proptest::collection::vec(1.0f64..=100.0, 2..=15)
        ) {
            let same = chi_square_gof(&exp, &exp, 0.0).unwrap();
            prop_assert_eq!(same.statistic, 0.0);
            prop_assert_eq!(same.p_value, 1.0);
        }

        #[test]
        fn exponential_fit_exact_on_noiseless_data(
            a in 0.01f64..=10.0,
            b in -2.0f64..=1.0
        ) {
            let pts: Vec<(f64, f64)> = (0..8)
                .map(|k| (k as f64, a * (b * k as f64).exp()))
                .collect();
            let fit = fit_exponential(&pts).unwrap();
            prop_assert!((fit.a - a).abs() < 1e-6 * a.max(1.0), "a {} vs {a}", fit.a);
            prop_assert!((fit.b - b).abs() < 1e-8, "b {} vs {b}", fit.b);
        }
    }
}
