//! Functional-dependence ranking of metrics against the Bitcoin price.
//!
//! The rank coefficient here is Chatterjee's ξ_n with the general tie
//! correction. Ties in `x` are broken by original position rather than at
//! random, so repeated runs give identical tables.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::MetricCode;
use crate::series::{align, MetricSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceResult {
    pub code: MetricCode,
    /// ξ_n(metric, price): price is the response.
    pub xi: f64,
    /// `None` when either aligned series is constant.
    pub pearson: Option<f64>,
    pub n: usize,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "sequences differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Order of the pairs after sorting by `x`, ties kept in input order.
fn order_by_x(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    order
}

/// For each `i`: r_i = #{j : y_j <= y_i} and l_i = #{j : y_j >= y_i}.
fn rank_counts(y: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let n = y.len();
    let mut sorted: Vec<f64> = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut r = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for &v in y {
        let le = sorted.partition_point(|s| s.total_cmp(&v).is_le());
        let lt = sorted.partition_point(|s| s.total_cmp(&v).is_lt());
        r.push(le as u64);
        l.push((n - lt) as u64);
    }
    (r, l)
}

fn ratio(numerator: i128, denominator: i128) -> f64 {
    numerator as f64 / denominator as f64
}

/// ξ_n(X, Y) with the tie-aware denominator.
///
/// Evaluated as one rational `(2B - nA) / 2B`, where `A = Σ|r_{i+1} - r_i|`
/// and `B = Σ l_i (n - l_i)`, so exact cases come out exact.
pub fn chatterjee_xi(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let order = order_by_x(x);
    let y_sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let (r, l) = rank_counts(&y_sorted);

    let a: i128 = r.windows(2).map(|w| (w[1] as i128 - w[0] as i128).abs()).sum();
    let b: i128 = l.iter().map(|&li| li as i128 * (n as i128 - li as i128)).sum();
    if b == 0 {
        return Err(Error::Undefined("all y values are equal".into()));
    }
    Ok(ratio(2 * b - n as i128 * a, 2 * b))
}

/// The tie-free form `1 - 3 Σ|r_{i+1} - r_i| / (n² - 1)`.
///
/// Only valid when `y` has no repeated values; kept as an independent route
/// for cross-checking [`chatterjee_xi`].
pub fn chatterjee_xi_no_ties(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as i128;
    let order = order_by_x(x);
    let y_sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let (r, _) = rank_counts(&y_sorted);
    let a: i128 = r.windows(2).map(|w| (w[1] as i128 - w[0] as i128).abs()).sum();
    let denom = n * n - 1;
    Ok(ratio(denom - 3 * a, denom))
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("constant input has no correlation".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Scores one metric against the price on their common dates.
pub fn score(metric: &MetricSeries, price: &MetricSeries) -> Result<DependenceResult> {
    let (m, p) = align(metric, price)?;
    let xi = chatterjee_xi(m.values(), p.values())?;
    Ok(DependenceResult {
        code: metric.code(),
        xi,
        pearson: pearson(m.values(), p.values()).ok(),
        n: m.len(),
    })
}

/// Ranks every metric except the price itself by ξ(metric → price),
/// highest first.
pub fn rank_by_xi(metrics: &[MetricSeries], price: &MetricSeries) -> Result<Vec<DependenceResult>> {
    let mut results = metrics
        .par_iter()
        .filter(|m| m.code() != MetricCode::PRICE)
        .map(|m| score(m, price))
        .collect::<Result<Vec<_>>>()?;
    sort_by_xi(&mut results);
    Ok(results)
}

/// Highest ξ first, ties broken by metric code.
pub fn sort_by_xi(results: &mut [DependenceResult]) {
    results.sort_by(|a, b| b.xi.total_cmp(&a.xi).then(a.code.cmp(&b.code)));
}
