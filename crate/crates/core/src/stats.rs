//! Nonparametric tests and descriptive statistics for comparing length,
//! angle and similarity distributions.
//!
//! Wilcoxon signed-rank uses the exact null distribution of W for up to 25
//! nonzero differences and the tie-corrected normal approximation beyond.
//! Friedman uses the exact within-block permutation distribution while the
//! design is small enough to enumerate, and the χ²(k−1) tail otherwise.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest nonzero-difference count for which Wilcoxon p is exact by default.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Friedman p is exact when `(k!)^n` does not exceed this.
pub const FRIEDMAN_EXACT_MAX_ARRANGEMENTS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// The location of the differences is greater than zero.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    One,
    Two,
}

impl Alternative {
    pub fn sidedness(self) -> Sidedness {
        match self {
            Alternative::TwoSided => Sidedness::Two,
            _ => Sidedness::One,
        }
    }
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(Error::invalid(format!("unknown alternative {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    FriedmanExact,
    FriedmanChisq,
    WilcoxonExact,
    WilcoxonNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// Sample count used (nonzero differences for Wilcoxon, subjects for
    /// Friedman).
    pub n: usize,
    pub sidedness: Sidedness,
    /// Zero differences dropped before ranking (Wilcoxon only).
    pub dropped_zeros: usize,
    /// Standard score under the normal approximation.
    pub z: Option<f64>,
    pub df: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Auto,
    Exact,
    Normal,
}

/// Average (mid-)ranks, 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on paired differences.
pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<TestResult> {
    wilcoxon_signed_rank_with(diffs, alternative, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    diffs: &[f64],
    alternative: Alternative,
    method: WilcoxonMethod,
) -> Result<TestResult> {
    if let Some(x) = diffs.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("difference {x}")));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let dropped = diffs.len() - nonzero.len();
    if nonzero.is_empty() {
        return Err(Error::Empty("all differences are zero"));
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w: f64 = ranks.iter().zip(&nonzero).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();

    let exact = match method {
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX_N,
    };
    let (p_value, z, method) = if exact {
        (wilcoxon_exact_p(&ranks, w, alternative), None, TestMethod::WilcoxonExact)
    } else {
        let (p, z) = wilcoxon_normal_p(&abs, &ranks, w, alternative);
        (p, Some(z), TestMethod::WilcoxonNormal)
    };
    Ok(TestResult {
        statistic: w,
        p_value,
        method,
        n,
        sidedness: alternative.sidedness(),
        dropped_zeros: dropped,
        z,
        df: None,
    })
}

/// Null distribution of W (sum of positive ranks) over all 2^n sign
/// assignments, indexed by doubled W. Average ranks are multiples of 1/2,
/// so doubling keeps the support integral.
pub fn wilcoxon_null_distribution(ranks: &[f64]) -> Vec<f64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut dist = vec![0.0; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let p = dist[s];
            if p != 0.0 {
                dist[s] = 0.5 * p;
                dist[s + r] += 0.5 * p;
            }
        }
        reach += r;
    }
    dist
}

fn wilcoxon_exact_p(ranks: &[f64], w: f64, alternative: Alternative) -> f64 {
    let dist = wilcoxon_null_distribution(ranks);
    let w2 = (2.0 * w).round() as usize;
    let upper: f64 = dist[w2..].iter().sum();
    let lower: f64 = dist[..=w2].iter().sum();
    let p = match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => 2.0 * upper.min(lower),
    };
    p.min(1.0)
}

fn wilcoxon_normal_p(abs: &[f64], ranks: &[f64], w: f64, alternative: Alternative) -> (f64, f64) {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for t in tie_sizes(abs) {
        var -= (t * t * t - t) / 48.0;
    }
    let z = if var > 0.0 { (w - mean) / var.sqrt() } else { 0.0 };
    let std = Normal::standard();
    let p = match alternative {
        Alternative::Greater => std.sf(z),
        Alternative::Less => std.cdf(z),
        Alternative::TwoSided => (2.0 * std.sf(z.abs())).min(1.0),
    };
    (p, z)
}

fn tie_sizes(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        if j > i {
            out.push((j - i + 1) as f64);
        }
        i = j + 1;
    }
    out
}

/// Friedman test on `groups[j][i]` = value of subject `i` under condition
/// `j` (a complete block design).
pub fn friedman(groups: &[Vec<f64>]) -> Result<TestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::invalid("friedman needs at least two groups"));
    }
    let n = groups[0].len();
    if n == 0 {
        return Err(Error::Empty("friedman subjects"));
    }
    if groups.iter().any(|g| g.len() != n) {
        return Err(Error::invalid("ragged groups: every group needs one value per subject"));
    }
    if let Some(x) = groups.iter().flatten().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("value {x}")));
    }
    // doubled within-subject ranks keep ties integral
    let block_ranks: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = groups.iter().map(|g| g[i]).collect();
            average_ranks(&row).iter().map(|r| (2.0 * r).round() as i64).collect()
        })
        .collect();
    let mut sums = vec![0i64; k];
    for row in &block_ranks {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    let stat = friedman_statistic(&sums, n, k);
    let df = (k - 1) as f64;

    let arrangements = (1..=k).map(|x| x as f64).product::<f64>().powi(n as i32);
    let (p_value, method) = if arrangements <= FRIEDMAN_EXACT_MAX_ARRANGEMENTS {
        (friedman_exact_p(&block_ranks, sum_sq(&sums)), TestMethod::FriedmanExact)
    } else {
        let chi = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;
        (chi.sf(stat.max(0.0)), TestMethod::FriedmanChisq)
    };
    Ok(TestResult {
        statistic: stat,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        n,
        sidedness: Sidedness::One,
        dropped_zeros: 0,
        z: None,
        df: Some(df),
    })
}

fn sum_sq(sums: &[i64]) -> i64 {
    sums.iter().map(|s| s * s).sum()
}

/// 12/(n·k·(k+1)) · Σ R_j² − 3n(k+1), from doubled rank sums.
fn friedman_statistic(doubled_sums: &[i64], n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    let ss = sum_sq(doubled_sums) as f64 / 4.0;
    12.0 / (n * k * (k + 1.0)) * ss - 3.0 * n * (k + 1.0)
}

/// P(Σ R_j² ≥ observed) when each subject's ranks are permuted uniformly and
/// independently. Dynamic programme over the vector of rank sums.
fn friedman_exact_p(block_ranks: &[Vec<i64>], observed_ss: i64) -> f64 {
    let k = block_ranks[0].len();
    let mut states: HashMap<Vec<i64>, f64> = HashMap::new();
    states.insert(vec![0; k], 1.0);
    for row in block_ranks {
        let perms = distinct_permutations(row);
        let w = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(states.len() * perms.len());
        for (state, p) in &states {
            for perm in &perms {
                let key: Vec<i64> = state.iter().zip(perm).map(|(a, b)| a + b).collect();
                *next.entry(key).or_insert(0.0) += p * w;
            }
        }
        states = next;
    }
    states
        .iter()
        .filter(|(s, _)| sum_sq(s) >= observed_ss)
        .map(|(_, p)| p)
        .sum()
}

fn distinct_permutations(values: &[i64]) -> Vec<Vec<i64>> {
    let mut v = values.to_vec();
    v.sort_unstable();
    let mut out = vec![v.clone()];
    // lexicographic next-permutation enumerates each distinct arrangement once
    while let Some(i) = (0..v.len().saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1]) {
        let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
        v.swap(i, j);
        v[i + 1..].reverse();
        out.push(v.clone());
    }
    out
}

/// `min(1, p·m)` for each p.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < p_values.len() || m == 0 {
        return Err(Error::invalid(format!(
            "comparison count {m} smaller than {} p-values",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

/// Median with the average-of-middle-two convention.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of no values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        let median = median(values)?;
        let (mean, sd) = mean_sd(values);
        Ok(Self {
            n: values.len(),
            median,
            mean,
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Mean and sample standard deviation, accumulated in input order.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianDelta {
    pub first: usize,
    pub second: usize,
    /// `median[second] − median[first]`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianReport {
    pub medians: Vec<f64>,
    pub deltas: Vec<MedianDelta>,
}

pub fn medians_and_deltas(groups: &[Vec<f64>]) -> Result<MedianReport> {
    let medians = groups.iter().map(|g| median(g)).collect::<Result<Vec<_>>>()?;
    let mut deltas = Vec::new();
    for i in 0..medians.len() {
        for j in i + 1..medians.len() {
            deltas.push(MedianDelta {
                first: i,
                second: j,
                delta: medians[j] - medians[i],
            });
        }
    }
    Ok(MedianReport { medians, deltas })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub first: usize,
    pub second: usize,
    pub result: TestResult,
    pub adjusted_p: f64,
}

/// Wilcoxon signed-rank on `groups[i] − groups[j]` for every i < j, with
/// Bonferroni adjustment over all comparisons.
pub fn pairwise_wilcoxon(groups: &[Vec<f64>], alternative: Alternative) -> Result<Vec<PairwiseTest>> {
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            if groups[i].len() != groups[j].len() {
                return Err(Error::invalid("pairwise tests need matched samples"));
            }
            let diffs: Vec<f64> = groups[i].iter().zip(&groups[j]).map(|(a, b)| a - b).collect();
            out.push((i, j, wilcoxon_signed_rank(&diffs, alternative)?));
        }
    }
    let adjusted = bonferroni(&out.iter().map(|(_, _, r)| r.p_value).collect::<Vec<_>>(), out.len().max(1))?;
    Ok(out
        .into_iter()
        .zip(adjusted)
        .map(|((first, second, result), adjusted_p)| PairwiseTest {
            first,
            second,
            result,
            adjusted_p,
        })
        .collect())
}
