use crate::{MetricsError, Result};

/// Paired Wilcoxon signed-rank test result.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences (`W+`), with average ranks for
    /// tied absolute differences.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Number of non-zero differences actually tested.
    pub n_effective: usize,
    /// True when the p-value came from exact enumeration (n ≤ 12) rather
    /// than the normal approximation with continuity correction.
    pub exact: bool,
}

/// Two-sided paired Wilcoxon signed-rank test on `a[i] - b[i]`.
///
/// Zero differences are dropped; at least 5 non-zero differences are
/// required. For n ≤ 12 the p-value enumerates all 2ⁿ sign assignments of
/// the observed ranks; beyond that a normal approximation with tie and
/// continuity corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(MetricsError::AllZeroDifferences);
    }
    let n = diffs.len();
    if n < 5 {
        return Err(MetricsError::TooFewDifferences { n });
    }

    let ranks = average_ranks(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let (p_value, exact) = if n <= 12 {
        (exact_two_sided_p(&ranks, w_plus), true)
    } else {
        (normal_two_sided_p(&diffs, w_plus), false)
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value,
        n_effective: n,
        exact,
    })
}

/// Bonferroni correction: the p-value scaled by the family size, capped at 1.
pub fn bonferroni(p: f64, family_size: usize) -> f64 {
    (p * family_size.max(1) as f64).min(1.0)
}

/// Ranks of |d| in ascending order with average ranks for ties.
fn average_ranks(diffs: &[f64]) -> Vec<f64> {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).expect("finite"));
    let mut ranks = vec![0.0f64; n];
    let mut pos = 0usize;
    while pos < n {
        let mut end = pos + 1;
        while end < n && diffs[order[end]].abs() == diffs[order[pos]].abs() {
            end += 1;
        }
        // 1-based ranks pos+1 ..= end, averaged over the tie group
        let avg = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = avg;
        }
        pos = end;
    }
    ranks
}

/// Enumerates all 2ⁿ sign assignments of the observed ranks and returns the
/// two-sided tail probability `min(1, 2·min(P(W ≤ w), P(W ≥ w)))`.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let total = 1u64 << n;
    let mut le = 0u64;
    let mut ge = 0u64;
    let tol = 1e-9;
    for bits in 0..total {
        let mut w = 0.0f64;
        for (i, r) in ranks.iter().enumerate() {
            if (bits >> i) & 1 == 1 {
                w += r;
            }
        }
        if w <= w_plus + tol {
            le += 1;
        }
        if w >= w_plus - tol {
            ge += 1;
        }
    }
    let p = 2.0 * (le.min(ge) as f64) / total as f64;
    p.min(1.0)
}

/// Normal approximation with tie correction and ±0.5 continuity correction.
fn normal_two_sided_p(diffs: &[f64], w_plus: f64) -> f64 {
    let n = diffs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // tie correction: sum of (t^3 - t) over tie groups of |d|
    let mut sorted: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_sum = 0.0f64;
    let mut pos = 0usize;
    while pos < sorted.len() {
        let mut end = pos + 1;
        while end < sorted.len() && sorted[end] == sorted[pos] {
            end += 1;
        }
        let t = (end - pos) as f64;
        tie_sum += t * t * t - t;
        pos = end;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_sum / 48.0;
    let centered = w_plus - mean;
    let correction = 0.5 * centered.signum();
    let z = (centered - correction) / var.sqrt();
    let p = 2.0 * (1.0 - std_normal_cdf(z.abs()));
    p.clamp(0.0, 1.0)
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 erf polynomial
/// (absolute error below 1.5e-7, ample for reported p-values).
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = sign * (1.0 - poly * (-x * x).exp());
    0.5 * (1.0 + erf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_positive_differences_exact_p() {
        // all differences positive, no ties: W+ = 15, two-sided exact
        // p = 2/32 = 0.0625
        let a = [2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.5, 2.0, 2.5, 3.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 15.0);
        assert!(r.exact);
        assert!((r.p_value - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn all_zero_differences_error() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &a),
            Err(MetricsError::AllZeroDifferences)
        ));
    }

    #[test]
    fn single_nonzero_difference_errors() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut b = a;
        b[2] = 2.5;
        assert!(matches!(
            wilcoxon_signed_rank(&a, &b),
            Err(MetricsError::TooFewDifferences { n: 1 })
        ));
    }

    #[test]
    fn normal_approximation_tracks_exact_at_boundary() {
        // n = 12: compare the exact path with a forced normal path on the
        // same data; they should agree within a loose 0.01
        let a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.9).cos() * 0.8).collect();
        let exact = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(exact.exact);
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let ranks = average_ranks(&diffs);
        let w: f64 = diffs
            .iter()
            .zip(&ranks)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| *r)
            .sum();
        let approx = normal_two_sided_p(&diffs, w);
        assert!(
            (approx - exact.p_value).abs() < 0.01,
            "approx {approx} vs exact {}",
            exact.p_value
        );
    }

    #[test]
    fn monotone_transform_of_differences_preserves_p() {
        // scaling both lists' differences by a positive factor preserves the
        // sign/rank structure, hence the p-value
        let a = [5.0, 1.0, 4.0, 9.0, 2.0, 7.0, 3.0];
        let b = [4.5, 1.8, 3.0, 7.0, 2.5, 6.0, 3.4];
        let r1 = wilcoxon_signed_rank(&a, &b).unwrap();
        let a2: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y + (x - y) * 3.0).collect();
        let r2 = wilcoxon_signed_rank(&a2, &b).unwrap();
        assert_eq!(r1.statistic, r2.statistic);
        assert_eq!(r1.p_value, r2.p_value);
    }

    #[test]
    fn bonferroni_caps_at_one() {
        assert_eq!(bonferroni(0.03, 4), 0.12);
        assert_eq!(bonferroni(0.6, 4), 1.0);
        assert_eq!(bonferroni(0.2, 0), 0.2);
    }

    #[test]
    fn ties_get_average_ranks() {
        let diffs = [1.0, -1.0, 2.0, 3.0, 3.0];
        let ranks = average_ranks(&diffs);
        assert_eq!(ranks[0], 1.5);
        assert_eq!(ranks[1], 1.5);
        assert_eq!(ranks[2], 3.0);
        assert_eq!(ranks[3], 4.5);
        assert_eq!(ranks[4], 4.5);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((std_normal_cdf(1.959963985) - 0.975).abs() < 1e-6);
        assert!((std_normal_cdf(-1.0) - 0.158655254).abs() < 1e-6);
    }
}
