//! Result statistics: median error, median absolute deviation, success
//! rate, and pairwise Wilcoxon rank-sum tests between methods.
//!
//! ```
//! use gblgp::analysis::{descriptive_stats, wilcoxon_rank_sum, Alternative};
//!
//! let d = descriptive_stats(&[1.0, 2.0, 4.0], 1e-5).unwrap();
//! assert_eq!((d.median, d.mad), (2.0, 1.0));
//! let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Alternative::TwoSided).unwrap();
//! assert!((t.p_value - 0.1).abs() < 1e-12);
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::evolution::{Algorithm, RunRecord};

/// Combined sample sizes up to this use the exact null distribution.
pub const EXACT_LIMIT: usize = 20;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty sample")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("records mix benchmarks `{0}` and `{1}`")]
    MixedBenchmarks(String, String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Median; even lengths average the two central values.
pub fn median(values: &[f64]) -> Result<f64, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(AnalysisError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// `median(|v - median(v)|)`.
pub fn median_absolute_deviation(values: &[f64]) -> Result<f64, AnalysisError> {
    let m = median(values)?;
    median(&values.iter().map(|v| (v - m).abs()).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub median: f64,
    pub mad: f64,
    pub success_rate: f64,
    pub runs: usize,
}

/// Median, MAD, and the fraction of values strictly below `threshold`.
pub fn descriptive_stats(values: &[f64], threshold: f64) -> Result<Descriptive, AnalysisError> {
    let median = median(values)?;
    let mad = median_absolute_deviation(values)?;
    let successes = values.iter().filter(|&&v| v < threshold).count();
    Ok(Descriptive { median, mad, success_rate: successes as f64 / values.len() as f64, runs: values.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// The first sample tends to be smaller.
    Less,
    /// The first sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample, midranks for ties.
    pub statistic: f64,
    pub p_value: f64,
    /// Standardised statistic, when the normal approximation was used.
    pub z: Option<f64>,
    pub exact: bool,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        sizes.push(j);
        i += j;
    }
    sizes
}

/// Wilcoxon rank-sum (Mann-Whitney) test of `a` against `b`.
///
/// For a combined size of at most [`EXACT_LIMIT`] the p-value comes from the
/// exact permutation distribution of the midrank sum. Larger samples use the
/// normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alternative: Alternative) -> Result<RankSumTest, AnalysisError> {
    wilcoxon_rank_sum_with(a, b, alternative, Method::Auto)
}

/// How the rank-sum p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact up to [`EXACT_LIMIT`], normal approximation beyond.
    Auto,
    Exact,
    Approximate,
}

pub fn wilcoxon_rank_sum_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: Method,
) -> Result<RankSumTest, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&combined);
    let statistic: f64 = ranks[..a.len()].iter().sum();
    let exact = match method {
        Method::Auto => combined.len() <= EXACT_LIMIT,
        Method::Exact => true,
        Method::Approximate => false,
    };
    if exact {
        Ok(RankSumTest { statistic, p_value: exact_p(&ranks, a.len(), alternative), z: None, exact: true })
    } else {
        let (z, p_value) = approximate_p(&combined, a.len(), statistic, alternative);
        Ok(RankSumTest { statistic, p_value, z, exact: false })
    }
}

/// Enumerates subset sums of the doubled (hence integral) midranks.
fn exact_p(ranks: &[f64], n1: usize, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = counts[k - 1][s - r];
                if add != 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    let observed: usize = doubled[..n1].iter().sum();
    let n = ranks.len();
    // Doubled null mean n1 * (n + 1).
    let mean = (n1 * (n + 1)) as i64;
    let total: f64 = counts[n1].iter().sum();
    let tail: f64 = counts[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| match alternative {
            Alternative::TwoSided => (s as i64 - mean).abs() >= (observed as i64 - mean).abs(),
            Alternative::Less => s <= observed,
            Alternative::Greater => s >= observed,
        })
        .map(|(_, c)| c)
        .sum();
    (tail / total).clamp(0.0, 1.0)
}

fn approximate_p(combined: &[f64], n1: usize, statistic: f64, alternative: Alternative) -> (Option<f64>, f64) {
    let n = combined.len() as f64;
    let (n1f, n2f) = (n1 as f64, n - n1 as f64);
    let ties: f64 = tie_sizes(combined).iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let variance = n1f * n2f / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if variance <= 0.0 {
        return (None, 1.0);
    }
    let sd = variance.sqrt();
    let deviation = statistic - n1f * (n + 1.0) / 2.0;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (z, p) = match alternative {
        Alternative::TwoSided => {
            let z = (deviation.abs() - 0.5).max(0.0) / sd;
            (z * deviation.signum(), 2.0 * normal.sf(z))
        }
        Alternative::Less => {
            let z = (deviation + 0.5) / sd;
            (z, normal.cdf(z))
        }
        Alternative::Greater => {
            let z = (deviation - 0.5) / sd;
            (z, normal.sf(z))
        }
    };
    (Some(z), p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub benchmark: String,
    pub method: String,
    pub runs: usize,
    pub mmae: f64,
    pub mad: f64,
    pub success_rate: f64,
    pub mean_effective_size: f64,
    pub mean_total_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTestResult {
    pub benchmark: String,
    pub method_a: String,
    pub method_b: String,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub benchmark: String,
    pub summaries: Vec<MethodSummary>,
    pub pairwise: Vec<PairwiseTestResult>,
}

/// Groups records by algorithm, summarises each group and tests every pair
/// of groups on the error that decides success (test MAE by default).
pub fn aggregate(records: &[RunRecord]) -> Result<Aggregate, AnalysisError> {
    let first = records.first().ok_or(AnalysisError::Empty)?;
    if let Some(other) = records.iter().find(|r| r.benchmark != first.benchmark) {
        return Err(AnalysisError::MixedBenchmarks(first.benchmark.clone(), other.benchmark.clone()));
    }
    let mut groups: BTreeMap<Algorithm, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.config.algorithm).or_default().push(r);
    }

    let mut summaries = Vec::new();
    let mut errors = Vec::new();
    for (algorithm, group) in &groups {
        let maes: Vec<f64> = group.iter().map(|r| r.success_mae()).collect();
        let runs = group.len() as f64;
        summaries.push(MethodSummary {
            benchmark: first.benchmark.clone(),
            method: algorithm.name().to_string(),
            runs: group.len(),
            mmae: median(&maes)?,
            mad: median_absolute_deviation(&maes)?,
            success_rate: group.iter().filter(|r| r.success).count() as f64 / runs,
            mean_effective_size: group.iter().map(|r| r.effective_size as f64).sum::<f64>() / runs,
            mean_total_size: group.iter().map(|r| r.total_size as f64).sum::<f64>() / runs,
        });
        errors.push((algorithm.name(), maes));
    }

    let mut pairwise = Vec::new();
    for i in 0..errors.len() {
        for j in i + 1..errors.len() {
            let test = wilcoxon_rank_sum(&errors[i].1, &errors[j].1, Alternative::TwoSided)?;
            pairwise.push(PairwiseTestResult {
                benchmark: first.benchmark.clone(),
                method_a: errors[i].0.to_string(),
                method_b: errors[j].0.to_string(),
                statistic: test.statistic,
                p_value: test.p_value,
                significant: test.p_value < SIGNIFICANCE,
            });
        }
    }
    Ok(Aggregate { benchmark: first.benchmark.clone(), summaries, pairwise })
}

/// Records split by benchmark, each aggregated separately.
pub fn aggregate_by_benchmark(records: &[RunRecord]) -> Result<Vec<Aggregate>, AnalysisError> {
    let mut groups: BTreeMap<&str, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.benchmark.as_str()).or_default().push(r.clone());
    }
    groups.values().map(|g| aggregate(g)).collect()
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>, AnalysisError> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(AnalysisError::from)).collect()
}

pub fn write_summary_csv<W: Write>(summaries: &[MethodSummary], writer: W) -> Result<(), AnalysisError> {
    write_rows(summaries, writer)
}

pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<MethodSummary>, AnalysisError> {
    read_rows(reader)
}

pub fn write_pairwise_csv<W: Write>(tests: &[PairwiseTestResult], writer: W) -> Result<(), AnalysisError> {
    write_rows(tests, writer)
}

pub fn read_pairwise_csv<R: Read>(reader: R) -> Result<Vec<PairwiseTestResult>, AnalysisError> {
    read_rows(reader)
}

/// Plain-text tables: one row per method, then the p-value matrix.
pub fn render_text(aggregate: &Aggregate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "benchmark: {}", aggregate.benchmark);
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>12} {:>12} {:>8} {:>16}",
        "method", "runs", "MMAE", "MAD", "success", "eff/total size"
    );
    for s in &aggregate.summaries {
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>12.4e} {:>12.4e} {:>8.2} {:>16}",
            s.method,
            s.runs,
            s.mmae,
            s.mad,
            s.success_rate,
            format!("{:.1}/{:.1}", s.mean_effective_size, s.mean_total_size)
        );
    }
    if aggregate.pairwise.is_empty() {
        return out;
    }
    let methods: Vec<&str> = aggregate.summaries.iter().map(|s| s.method.as_str()).collect();
    let _ = writeln!(out, "\nrank-sum p-values (* significant at {SIGNIFICANCE})");
    let _ = write!(out, "{:<10}", "");
    for m in &methods[..methods.len() - 1] {
        let _ = write!(out, " {m:>11}");
    }
    out.push('\n');
    for (i, row) in methods.iter().enumerate().skip(1) {
        let _ = write!(out, "{row:<10}");
        for col in &methods[..i] {
            let cell = aggregate
                .pairwise
                .iter()
                .find(|t| (t.method_a == *col && t.method_b == *row) || (t.method_a == *row && t.method_b == *col))
                .map(|t| format!("{:.2e}{}", t.p_value, if t.significant { "*" } else { " " }))
                .unwrap_or_default();
            let _ = write!(out, " {cell:>11}");
        }
        out.push('\n');
    }
    out
}

/// Mean over runs of the per-generation mean effective-code percentage.
pub fn effective_code_curve(records: &[&RunRecord]) -> Vec<f64> {
    let generations = records.iter().map(|r| r.telemetry.len()).min().unwrap_or(0);
    (0..generations)
        .map(|g| records.iter().map(|r| r.telemetry[g].mean_effective_percentage).sum::<f64>() / records.len() as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCodeRow {
    pub benchmark: String,
    pub method: String,
    pub generation: usize,
    pub mean_effective_percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub benchmark: String,
    pub method: String,
    pub generation: usize,
    pub rule: String,
    pub production: usize,
    pub probability: f64,
}

/// Effective-code curves for every method in `records`.
pub fn effective_code_rows(records: &[RunRecord]) -> Vec<EffectiveCodeRow> {
    let mut groups: BTreeMap<(&str, Algorithm), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.benchmark.as_str(), r.config.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .flat_map(|((benchmark, algorithm), group)| {
            effective_code_curve(&group).into_iter().enumerate().map(move |(generation, value)| EffectiveCodeRow {
                benchmark: benchmark.to_string(),
                method: algorithm.name().to_string(),
                generation,
                mean_effective_percentage: value,
            })
        })
        .collect()
}

/// Per-generation production probabilities averaged over runs, for every
/// grammar-based method in `records`.
pub fn probability_rows(records: &[RunRecord]) -> Vec<ProbabilityRow> {
    let mut groups: BTreeMap<(&str, Algorithm), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.config.algorithm.uses_grammar()) {
        groups.entry((r.benchmark.as_str(), r.config.algorithm)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((benchmark, algorithm), group) in groups {
        let generations = group.iter().map(|r| r.telemetry.len()).min().unwrap_or(0);
        let names = &group[0].rule_names;
        for g in 0..generations {
            let snapshots: Vec<&Vec<Vec<f64>>> =
                group.iter().filter_map(|r| r.telemetry[g].probabilities.as_ref()).collect();
            let Some(shape) = snapshots.first() else { continue };
            for (i, rule) in shape.iter().enumerate() {
                for j in 0..rule.len() {
                    let mean = snapshots.iter().map(|s| s[i][j]).sum::<f64>() / snapshots.len() as f64;
                    rows.push(ProbabilityRow {
                        benchmark: benchmark.to_string(),
                        method: algorithm.name().to_string(),
                        generation: g,
                        rule: names.get(i).cloned().unwrap_or_else(|| i.to_string()),
                        production: j,
                        probability: mean,
                    });
                }
            }
        }
    }
    rows
}

pub fn write_effective_code_csv<W: Write>(rows: &[EffectiveCodeRow], writer: W) -> Result<(), AnalysisError> {
    write_rows(rows, writer)
}

pub fn read_effective_code_csv<R: Read>(reader: R) -> Result<Vec<EffectiveCodeRow>, AnalysisError> {
    read_rows(reader)
}

pub fn write_probability_csv<W: Write>(rows: &[ProbabilityRow], writer: W) -> Result<(), AnalysisError> {
    write_rows(rows, writer)
}

pub fn read_probability_csv<R: Read>(reader: R) -> Result<Vec<ProbabilityRow>, AnalysisError> {
    read_rows(reader)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(matches!(median(&[]), Err(AnalysisError::Empty)));
        assert!(matches!(median(&[f64::NAN]), Err(AnalysisError::NonFinite)));
    }

    #[test]
    fn descriptive() {
        let c = descriptive_stats(&[1.0, 1.0, 1.0], 1e-5).unwrap();
        assert_eq!((c.median, c.mad), (1.0, 0.0));
        let d = descriptive_stats(&[1.0, 2.0, 4.0], 1e-5).unwrap();
        assert_eq!((d.median, d.mad), (2.0, 1.0));
        let s = descriptive_stats(&[1e-6, 0.3, 0.5], 1e-5).unwrap();
        assert!((s.success_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!(descriptive_stats(&[], 1e-5).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(tie_sizes(&[1.0, 1.0, 2.0, 3.0, 3.0, 3.0]), vec![2, 1, 3]);
    }

    #[test]
    fn exact_small_samples() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Alternative::TwoSided).unwrap();
        assert!(t.exact);
        assert_eq!(t.statistic, 6.0);
        assert!((t.p_value - 0.1).abs() < 1e-12);
        let less = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Alternative::Less).unwrap();
        assert!((less.p_value - 0.05).abs() < 1e-12);
        let greater = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Alternative::Greater).unwrap();
        assert!((greater.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_samples() {
        let same = [2.0; 5];
        assert_eq!(wilcoxon_rank_sum(&same, &same, Alternative::TwoSided).unwrap().p_value, 1.0);
        let big = [2.0; 15];
        assert_eq!(wilcoxon_rank_sum(&big, &big, Alternative::TwoSided).unwrap().p_value, 1.0);
        assert!(wilcoxon_rank_sum(&[], &[1.0], Alternative::TwoSided).is_err());
        assert!(wilcoxon_rank_sum(&[f64::INFINITY], &[1.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn approximation_is_symmetric() {
        let a: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.7).collect();
        let b: Vec<f64> = (0..25).map(|i| f64::from(i) * 0.9 + 3.0).collect();
        let ab = wilcoxon_rank_sum(&a, &b, Alternative::TwoSided).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a, Alternative::TwoSided).unwrap();
        assert!(!ab.exact);
        assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    }

    #[test]
    fn text_layout() {
        let summary = |m: &str| MethodSummary {
            benchmark: "nguyen1".into(),
            method: m.into(),
            runs: 3,
            mmae: 0.1,
            mad: 0.01,
            success_rate: 0.5,
            mean_effective_size: 5.0,
            mean_total_size: 10.0,
        };
        let agg = Aggregate {
            benchmark: "nguyen1".into(),
            summaries: vec![summary("effmut"), summary("gblgp")],
            pairwise: vec![PairwiseTestResult {
                benchmark: "nguyen1".into(),
                method_a: "effmut".into(),
                method_b: "gblgp".into(),
                statistic: 6.0,
                p_value: 0.01,
                significant: true,
            }],
        };
        let text = render_text(&agg);
        assert!(text.contains("gblgp"));
        assert!(text.contains("1.00e-2*"), "{text}");
        let mut buf = Vec::new();
        write_summary_csv(&agg.summaries, &mut buf).unwrap();
        assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), agg.summaries);
        let mut buf = Vec::new();
        write_pairwise_csv(&agg.pairwise, &mut buf).unwrap();
        assert_eq!(read_pairwise_csv(buf.as_slice()).unwrap(), agg.pairwise);
    }
}
