use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::math::special::normal_cdf;

/// Largest sample for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRankTest {
    /// Sum of the ranks of positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    /// Two-sided p-value for a median of zero.
    pub p_value: f64,
    pub exact: bool,
}

/// Relative distance below which two magnitudes count as tied, so that
/// rounding in computed log-ratios does not invent a rank order.
const TIE_TOLERANCE: f64 = 1e-9;

/// Ranks of `|d|` with ties sharing their mean rank.
fn abs_ranks(d: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = alloc::vec![0.0; d.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len()
            && d[order[j + 1]].abs() - d[order[i]].abs() <= TIE_TOLERANCE * d[order[i]].abs()
        {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// One-sample Wilcoxon signed-rank test. Zero differences are dropped. Up
/// to [`EXACT_LIMIT`] observations the p-value comes from the exact null
/// distribution given the tie pattern; above it from the normal
/// approximation with tie and continuity corrections.
pub fn signed_rank_test(d: &[f64]) -> SignedRankTest {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return SignedRankTest {
            w_plus: 0.0,
            n,
            p_value: 1.0,
            exact: true,
        };
    }
    let ranks = abs_ranks(&d);
    let w_plus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    if n <= EXACT_LIMIT {
        // doubled mid-ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut dist = alloc::vec![0.0f64; total + 1];
        dist[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                let q = dist[s] * 0.5;
                dist[s] = q;
                dist[s + r] += q;
            }
            reach += r;
        }
        let w = (2.0 * w_plus).round() as usize;
        let lower: f64 = dist[..=w].iter().sum();
        let upper: f64 = dist[w..].iter().sum();
        return SignedRankTest {
            w_plus,
            n,
            p_value: (2.0 * lower.min(upper)).min(1.0),
            exact: true,
        };
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        ties += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let dev = (w_plus - mean).abs() - 0.5;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        (2.0 * normal_cdf(-dev.max(0.0) / var.sqrt())).min(1.0)
    };
    SignedRankTest {
        w_plus,
        n,
        p_value,
        exact: false,
    }
}
