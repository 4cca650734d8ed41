//! Rank-based comparison of several algorithms over several streams.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest sample evaluated with the exact signed-rank distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const WILCOXON_MIN_N: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Rows are streams, columns algorithms; rank 1 is best.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub ranks: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn streams(&self) -> usize {
        self.ranks.len()
    }

    pub fn algorithms(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        let n = self.streams() as f64;
        (0..self.algorithms())
            .map(|j| self.ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

/// Fractional ranks (1-based) with ties sharing the mean of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1..=j share their mean
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn average_ranks(scores: &[Vec<f64>], lower_is_better: bool) -> Result<RankTable> {
    let k = scores.first().map_or(0, Vec::len);
    if scores.is_empty() || k == 0 {
        return Err(Error::DegenerateDimensions("empty score matrix".into()));
    }
    let mut ranks = Vec::with_capacity(scores.len());
    for (i, row) in scores.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DegenerateDimensions(format!(
                "row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateDimensions(format!("row {i} has a missing entry")));
        }
        let oriented: Vec<f64> = if lower_is_better {
            row.clone()
        } else {
            row.iter().map(|v| -v).collect()
        };
        ranks.push(fractional_ranks(&oriented));
    }
    Ok(RankTable { ranks })
}

pub fn friedman_test(table: &RankTable) -> Result<TestResult> {
    let n = table.streams();
    let k = table.algorithms();
    if n < 2 || k < 2 {
        return Err(Error::DegenerateDimensions(format!(
            "Friedman test needs at least 2 streams and 2 algorithms, got {n}x{k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = table.average_ranks().iter().map(|r| r * r).sum();
    let stat = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: stat,
        p_value: chi.sf(stat).clamp(0.0, 1.0),
    })
}

/// Two-sided signed-rank test on paired samples. The statistic is the rank
/// sum of the positive differences `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < WILCOXON_MIN_N {
        return Err(Error::TooFewDifferences(n));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = fractional_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let p = if n <= WILCOXON_EXACT_MAX {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&ranks, w_plus)
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: p,
    })
}

/// Exact null distribution by dynamic programming over doubled (integer)
/// mid-ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut dist = vec![0.0f64; max + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let c = dist[s];
            if c != 0.0 {
                dist[s + r] += c;
            }
        }
        reach += r;
    }
    let total = 2f64.powi(ranks.len() as i32);
    let s = (2.0 * w_plus).round() as usize;
    let lower: f64 = dist[..=s].iter().sum::<f64>() / total;
    let upper: f64 = dist[s..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolmResult {
    /// Adjusted p-values in the input order.
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

/// Holm step-down adjustment; rejection compares adjusted values with `alpha`.
pub fn holm_correction(p_values: &[f64], alpha: f64) -> Result<HolmResult> {
    if p_values.is_empty() {
        return Err(Error::DegenerateDimensions("no p-values to adjust".into()));
    }
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidProbability(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &idx) in order.iter().enumerate() {
        let scaled = ((m - j) as f64 * p_values[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    let reject = adjusted.iter().map(|p| *p <= alpha).collect();
    Ok(HolmResult { adjusted, reject })
}
