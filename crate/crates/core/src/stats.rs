//! Covariance, Pearson/Spearman/Kendall correlation with two-sided p-values,
//! significance at a level α, and per-country studies summarised by median.
//!
//! Conventions match the usual scientific routines: Spearman uses fractional
//! ranks for ties, Kendall is tau-b. Pearson and Spearman p-values come from the
//! Student-t transform with n − 2 degrees of freedom. Kendall's p-value uses the
//! exact null distribution for tie-free samples of up to 33 points and the
//! tie-corrected normal approximation otherwise.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("x has {x} values but y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least {needed} observations, got {n}")]
    InsufficientSample { n: usize, needed: usize },
    #[error("a variable has zero variance")]
    ZeroVariance,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("no country produced a valid sample")]
    EmptyStudy,
}

/// Independent variable `x` paired element-wise with dependent variable `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, StatsError> {
        if x.len() != y.len() {
            return Err(StatsError::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The same pairs with the roles of x and y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    fn require(&self, needed: usize) -> Result<(), StatsError> {
        if self.len() < needed {
            Err(StatsError::InsufficientSample {
                n: self.len(),
                needed,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pearson,
    Spearman,
    Kendall,
}

/// Outcome of comparing a p-value with α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Significant,
    NotSignificant,
    /// No p-value could be computed (fewer than three observations).
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: Method,
    pub coefficient: f64,
    pub p_value: Option<f64>,
    pub n: usize,
    pub alpha: f64,
    pub verdict: Verdict,
}

impl CorrelationResult {
    fn new(method: Method, coefficient: f64, p_value: Option<f64>, n: usize) -> Self {
        let mut r = Self {
            method,
            coefficient,
            p_value,
            n,
            alpha: crate::DEFAULT_ALPHA,
            verdict: Verdict::Indeterminate,
        };
        r.verdict = verdict_for(r.p_value, r.alpha);
        r
    }

    /// Re-evaluates the verdict at another significance level.
    pub fn at_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.verdict = verdict_for(self.p_value, alpha);
        self
    }

    pub fn is_significant(&self) -> bool {
        self.verdict == Verdict::Significant
    }
}

fn verdict_for(p: Option<f64>, alpha: f64) -> Verdict {
    match p {
        None => Verdict::Indeterminate,
        Some(p) if p <= alpha => Verdict::Significant,
        Some(_) => Verdict::NotSignificant,
    }
}

/// `p ≤ α` is significant. Fails only for α outside (0, 1).
pub fn significance_verdict(result: &CorrelationResult, alpha: f64) -> Result<Verdict, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    Ok(verdict_for(result.p_value, alpha))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample covariance with the n − 1 denominator.
pub fn covariance(s: &PairedSample) -> Result<f64, StatsError> {
    s.require(2)?;
    let (mx, my) = (mean(&s.x), mean(&s.y));
    let sum: f64 = s
        .x
        .iter()
        .zip(&s.y)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    Ok(sum / (s.len() - 1) as f64)
}

fn pearson_coefficient(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a correlation coefficient via t = r·√((n−2)/(1−r²)).
fn t_test_p(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Some((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

pub fn pearson(s: &PairedSample) -> Result<CorrelationResult, StatsError> {
    s.require(2)?;
    let r = pearson_coefficient(&s.x, &s.y)?;
    Ok(CorrelationResult::new(Method::Pearson, r, t_test_p(r, s.len()), s.len()))
}

/// Fractional 1-based ranks; tied values share the mean of the ranks they span.
pub fn rank(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(v: &[f64]) -> bool {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

pub fn spearman(s: &PairedSample) -> Result<CorrelationResult, StatsError> {
    s.require(2)?;
    let (rx, ry) = (rank(&s.x), rank(&s.y));
    let rho = if has_ties(&s.x) || has_ties(&s.y) {
        pearson_coefficient(&rx, &ry)?
    } else {
        let n = s.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    };
    Ok(CorrelationResult::new(
        Method::Spearman,
        rho,
        t_test_p(rho, s.len()),
        s.len(),
    ))
}

/// Pair counts behind Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct KendallCounts {
    n: u64,
    /// Pairs tied in x.
    x_ties: u64,
    /// Pairs tied in y.
    y_ties: u64,
    /// Pairs tied in both.
    joint_ties: u64,
    /// Pairs ordered oppositely in x and y.
    discordant: u64,
}

impl KendallCounts {
    fn total(&self) -> u64 {
        self.n * (self.n - 1) / 2
    }

    /// Concordant minus discordant.
    fn score(&self) -> i64 {
        self.total() as i64 - self.x_ties as i64 - self.y_ties as i64 + self.joint_ties as i64
            - 2 * self.discordant as i64
    }
}

fn tied_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `idx` by `key` (stable merge sort) and returns the number of inversions removed.
fn merge_count(idx: &mut [usize], key: &[f64], buf: &mut [usize]) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut idx[..mid], key, &mut buf[..mid])
        + merge_count(&mut idx[mid..], key, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if key[idx[j]] < key[idx[i]] {
            buf[k] = idx[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = idx[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&idx[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&idx[j..n]);
    idx.copy_from_slice(&buf[..n]);
    swaps
}

/// Knight's O(n log n) pair counting.
fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let x_ties = tied_pairs(idx.iter().map(|&i| x[i]));
    let mut joint_ties = 0;
    let mut run = 0u64;
    for w in idx.windows(2) {
        if x[w[0]] == x[w[1]] && y[w[0]] == y[w[1]] {
            run += 1;
        } else {
            joint_ties += run * (run + 1) / 2;
            run = 0;
        }
    }
    joint_ties += run * (run + 1) / 2;

    let mut buf = vec![0; n];
    let discordant = merge_count(&mut idx, y, &mut buf);
    let y_ties = tied_pairs(idx.iter().map(|&i| y[i]));

    KendallCounts {
        n: n as u64,
        x_ties,
        y_ties,
        joint_ties,
        discordant,
    }
}

/// P(D ≤ c) for the number of inversions D of a uniformly random permutation of n items.
fn inversion_cdf(n: usize, c: u64) -> f64 {
    let max = n * (n - 1) / 2;
    let mut dist = vec![0.0; max + 1];
    dist[0] = 1.0;
    for m in 2..=n {
        let top = m * (m - 1) / 2;
        let mut next = vec![0.0; max + 1];
        // new element contributes 0..m-1 inversions, uniformly
        let mut window = 0.0;
        for k in 0..=top {
            window += dist[k];
            if k >= m {
                window -= dist[k - m];
            }
            next[k] = window / m as f64;
        }
        dist = next;
    }
    dist.iter().take(c as usize + 1).sum::<f64>().min(1.0)
}

fn kendall_p(c: &KendallCounts, x: &[f64], y: &[f64]) -> Option<f64> {
    let n = c.n as usize;
    if n < 3 {
        return None;
    }
    let tie_free = c.x_ties == 0 && c.y_ties == 0;
    if tie_free && n <= 33 {
        let d = c.discordant.min(c.total() - c.discordant);
        return Some((2.0 * inversion_cdf(n, d)).min(1.0));
    }
    let groups = |v: &[f64]| -> (f64, f64) {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mut v0, mut v1) = (0.0, 0.0);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            v0 += t * (t - 1.0) * (t - 2.0);
            v1 += t * (t - 1.0) * (2.0 * t + 5.0);
            i = j + 1;
        }
        (v0, v1)
    };
    let (x0, x1) = groups(x);
    let (y0, y1) = groups(y);
    let nf = n as f64;
    let m = nf * (nf - 1.0);
    let var = (m * (2.0 * nf + 5.0) - x1 - y1) / 18.0
        + 2.0 * c.x_ties as f64 * c.y_ties as f64 / m
        + x0 * y0 / (9.0 * m * (nf - 2.0));
    if var <= 0.0 {
        return None;
    }
    let z = c.score() as f64 / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Some((2.0 * normal.sf(z.abs())).clamp(0.0, 1.0))
}

/// Kendall's tau-b.
pub fn kendall(s: &PairedSample) -> Result<CorrelationResult, StatsError> {
    s.require(2)?;
    let c = kendall_counts(&s.x, &s.y);
    let total = c.total();
    if c.x_ties == total || c.y_ties == total {
        return Err(StatsError::ZeroVariance);
    }
    let denom = ((total - c.x_ties) as f64 * (total - c.y_ties) as f64).sqrt();
    let tau = (c.score() as f64 / denom).clamp(-1.0, 1.0);
    Ok(CorrelationResult::new(
        Method::Kendall,
        tau,
        kendall_p(&c, &s.x, &s.y),
        s.len(),
    ))
}

/// Median; the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerMethod<T> {
    pub pearson: T,
    pub spearman: T,
    pub kendall: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryCorrelation {
    pub country_code: String,
    pub pearson: CorrelationResult,
    pub spearman: CorrelationResult,
    pub kendall: CorrelationResult,
}

impl CountryCorrelation {
    /// Table verdict: keyed on Pearson's p-value.
    pub fn verdict_label(&self) -> &'static str {
        match self.pearson.verdict {
            Verdict::Significant => "correlated",
            Verdict::NotSignificant => "not_correlated",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCountry {
    pub country_code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub pair: String,
    pub alpha: f64,
    pub per_country: Vec<CountryCorrelation>,
    pub medians: PerMethod<f64>,
    pub ranges: PerMethod<(f64, f64)>,
    pub skipped: Vec<SkippedCountry>,
}

fn correlate_all(s: &PairedSample, alpha: f64) -> Result<[CorrelationResult; 3], StatsError> {
    Ok([
        pearson(s)?.at_alpha(alpha),
        spearman(s)?.at_alpha(alpha),
        kendall(s)?.at_alpha(alpha),
    ])
}

/// Runs all three correlations per country and summarises each method by median and range.
pub fn run_study(
    pair: &str,
    samples: &BTreeMap<String, PairedSample>,
    alpha: f64,
) -> Result<StudySummary, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    let mut per_country = Vec::new();
    let mut skipped = Vec::new();
    for (country, sample) in samples {
        match correlate_all(sample, alpha) {
            Ok([p, s, k]) => per_country.push(CountryCorrelation {
                country_code: country.clone(),
                pearson: p,
                spearman: s,
                kendall: k,
            }),
            Err(e) => skipped.push(SkippedCountry {
                country_code: country.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if per_country.is_empty() {
        return Err(StatsError::EmptyStudy);
    }
    let column = |f: fn(&CountryCorrelation) -> f64| -> Vec<f64> { per_country.iter().map(f).collect() };
    let summarize = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (median(&v).expect("non-empty"), (lo, hi))
    };
    let (mp, rp) = summarize(column(|c| c.pearson.coefficient));
    let (ms, rs) = summarize(column(|c| c.spearman.coefficient));
    let (mk, rk) = summarize(column(|c| c.kendall.coefficient));
    Ok(StudySummary {
        pair: pair.to_string(),
        alpha,
        per_country,
        medians: PerMethod {
            pearson: mp,
            spearman: ms,
            kendall: mk,
        },
        ranges: PerMethod {
            pearson: rp,
            spearman: rs,
            kendall: rk,
        },
        skipped,
    })
}

pub const STUDY_CSV_HEADER: &str = "country,pearson,p_pearson,spearman,p_spearman,kendall,p_kendall,verdict";

/// Writes one row per country in the study table layout. Absent p-values are empty cells.
pub fn write_study_csv<W: Write>(summary: &StudySummary, mut out: W) -> std::io::Result<()> {
    let cell = |p: Option<f64>| p.map(|v| v.to_string()).unwrap_or_default();
    writeln!(out, "{STUDY_CSV_HEADER}")?;
    for c in &summary.per_country {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.country_code,
            c.pearson.coefficient,
            cell(c.pearson.p_value),
            c.spearman.coefficient,
            cell(c.spearman.p_value),
            c.kendall.coefficient,
            cell(c.kendall.p_value),
            c.verdict_label()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(x: &[f64], y: &[f64]) -> PairedSample {
        PairedSample::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn covariance_cases() {
        assert_eq!(covariance(&ps(&[2.0, 2.0, 2.0], &[1.0, 5.0, 3.0])).unwrap(), 0.0);
        assert_eq!(covariance(&ps(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(covariance(&ps(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap(), -1.0);
        assert_eq!(
            covariance(&ps(&[1.0], &[1.0])),
            Err(StatsError::InsufficientSample { n: 1, needed: 2 })
        );
    }

    #[test]
    fn pearson_extremes_and_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pearson(&ps(&x, &x)).unwrap().coefficient, 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&ps(&x, &neg)).unwrap().coefficient, -1.0);
        assert_eq!(pearson(&ps(&x, &[1.0; 4])), Err(StatsError::ZeroVariance));
        let two = pearson(&ps(&[1.0, 2.0], &[3.0, 1.0])).unwrap();
        assert_eq!(two.coefficient, -1.0);
        assert_eq!(two.p_value, None);
        assert_eq!(two.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn pearson_matches_reference_p_value() {
        // reference: scipy.stats.pearsonr([1,2,3,4,5],[2,1,4,3,6])
        let r = pearson(&ps(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 6.0])).unwrap();
        assert!((r.coefficient - 0.8219949365267865).abs() < 1e-12);
        assert!((r.p_value.unwrap() - 0.08770664700806553).abs() < 1e-10);
    }

    #[test]
    fn ranks() {
        assert_eq!(rank(&[3.0, 7.0, 9.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank(&[4.0, 4.0, 4.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(rank(&[30.0, 10.0, 20.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert_eq!(spearman(&ps(&x, &y)).unwrap().coefficient, 1.0);
        let r = spearman(&ps(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])).unwrap();
        assert!((r.coefficient - 0.5).abs() < 1e-15);
        let tied = ps(&[1.0, 2.0, 2.0, 3.0, 5.0], &[2.0, 2.0, 1.0, 4.0, 4.0]);
        let direct = pearson(&ps(&rank(tied.x()), &rank(tied.y()))).unwrap();
        assert!((spearman(&tied).unwrap().coefficient - direct.coefficient).abs() < 1e-12);
    }

    #[test]
    fn kendall_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall(&ps(&x, &x)).unwrap().coefficient, 1.0);
        let r = kendall(&ps(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(r.coefficient, 1.0 / 3.0);
        assert_eq!(kendall(&ps(&x, &[2.0; 4])), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn kendall_tau_b_with_ties_matches_reference() {
        // reference: scipy.stats.kendalltau([1,2,2,3,4],[1,3,2,2,5])
        let r = kendall(&ps(&[1.0, 2.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 2.0, 5.0])).unwrap();
        assert!((r.coefficient - 0.6666666666666666).abs() < 1e-12);
        assert!((r.p_value.unwrap() - 0.1184329289166719).abs() < 1e-9);
    }

    #[test]
    fn kendall_exact_p_matches_reference() {
        // reference: scipy.stats.kendalltau(range(6), [1,0,2,4,3,5]) -> exact method
        let r = kendall(&ps(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            &[1.0, 0.0, 2.0, 4.0, 3.0, 5.0],
        ))
        .unwrap();
        assert!((r.coefficient - 0.7333333333333333).abs() < 1e-12);
        assert!((r.p_value.unwrap() - 0.05555555555555555).abs() < 1e-12);
    }

    #[test]
    fn inversion_distribution_is_normalised() {
        assert!((inversion_cdf(7, 21) - 1.0).abs() < 1e-12);
        // 3 items: inversions 0..=3 with counts 1,2,2,1
        assert!((inversion_cdf(3, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn verdicts() {
        let mut r = pearson(&ps(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])).unwrap();
        r.p_value = Some(0.05);
        assert_eq!(significance_verdict(&r, 0.05).unwrap(), Verdict::Significant);
        r.p_value = Some(0.51);
        assert_eq!(significance_verdict(&r, 0.05).unwrap(), Verdict::NotSignificant);
        r.p_value = None;
        assert_eq!(significance_verdict(&r, 0.05).unwrap(), Verdict::Indeterminate);
        assert!(significance_verdict(&r, 1.5).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[0.3]), Some(0.3));
        assert_eq!(median(&[0.7, -0.2, 0.1]), Some(0.1));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn study_summarises_and_skips() {
        let mut samples = BTreeMap::new();
        samples.insert("AA".to_string(), ps(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]));
        samples.insert("BB".to_string(), ps(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 1.0, 2.0]));
        samples.insert("CC".to_string(), ps(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]));
        let s = run_study("t", &samples, 0.05).unwrap();
        assert_eq!(s.per_country.len(), 2);
        assert_eq!(s.skipped.len(), 1);
        assert_eq!(s.skipped[0].country_code, "CC");
        let (lo, hi) = s.ranges.pearson;
        assert!(lo <= s.medians.pearson && s.medians.pearson <= hi);
        assert_eq!(s.medians.pearson, (lo + hi) / 2.0);

        let mut only_bad = BTreeMap::new();
        only_bad.insert("CC".to_string(), ps(&[1.0, 2.0], &[5.0, 5.0]));
        assert_eq!(run_study("t", &only_bad, 0.05), Err(StatsError::EmptyStudy));
    }

    #[test]
    fn study_csv_layout() {
        let mut samples = BTreeMap::new();
        samples.insert("AA".to_string(), ps(&[1.0, 2.0], &[1.0, 2.0]));
        let s = run_study("t", &samples, 0.05).unwrap();
        let mut buf = Vec::new();
        write_study_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            format!("{STUDY_CSV_HEADER}\nAA,1,,1,,1,,indeterminate\n")
        );
    }
}
