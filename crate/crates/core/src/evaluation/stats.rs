//! Vargha-Delaney effect size and the Mann-Whitney U test.
//!
//! Both use mid-ranks over the pooled sample, so ties count one half.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

/// Largest pooled size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 20;

/// Mid-ranks (1-based) of `values`, in input order.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
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

fn check(x: &[f64], y: &[f64]) -> Result<(), EvalError> {
    if x.is_empty() || y.is_empty() {
        Err(EvalError::EmptySample)
    } else {
        Ok(())
    }
}

/// Rank sum of `x` within the pooled sample.
fn rank_sum_x(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    mid_ranks(&pooled)[..x.len()].iter().sum()
}

/// Probability that a value drawn from `x` exceeds one drawn from `y`, ties
/// counting one half: `((R1 / m) - (m + 1) / 2) / n`.
pub fn a12(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check(x, y)?;
    let (m, n) = (x.len() as f64, y.len() as f64);
    Ok((rank_sum_x(x, y) / m - (m + 1.0) / 2.0) / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `R1 - m(m+1)/2`: the number of (x, y) pairs with x > y, ties one half.
    pub u: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Two-sided Mann-Whitney U test of `x` against `y`.
///
/// Exact null distribution when `m + n <= 20` and there are no ties;
/// otherwise the normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney, EvalError> {
    check(x, y)?;
    let (m, n) = (x.len(), y.len());
    let u = rank_sum_x(x, y) - (m * (m + 1)) as f64 / 2.0;

    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let has_ties = pooled.windows(2).any(|w| w[0] == w[1]);

    if m + n <= EXACT_LIMIT && !has_ties {
        return Ok(MannWhitney {
            u,
            p_value: exact_p_value(m, n, u.round() as usize),
            method: PValueMethod::Exact,
        });
    }

    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1] == pooled[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let sigma = (mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)))).sqrt();
    let diff = u - mf * nf / 2.0;
    let p_value = if sigma == 0.0 || diff == 0.0 {
        1.0
    } else {
        let z = (diff - 0.5 * diff.signum()) / sigma;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(-z.abs())).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_value,
        method: PValueMethod::Normal,
    })
}

/// Number of arrangements giving each U value, for sample sizes `m` and `n`.
pub fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![0.0; max_u + 1]).collect();
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = (0..=n).map(|_| vec![0.0; max_u + 1]).collect();
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=i * j {
                // largest pooled value belongs to x (beats all j of y) or to y
                let from_x = if u >= j { prev[j][u - j] } else { 0.0 };
                let from_y = cur[j - 1][u];
                cur[j][u] = from_x + from_y;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn exact_p_value(m: usize, n: usize, u: usize) -> f64 {
    let dist = u_distribution(m, n);
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=u.min(dist.len() - 1)].iter().sum::<f64>() / total;
    let upper: f64 = dist[u.min(dist.len() - 1)..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}
