//! Evaluation statistics over per-run and per-frame records.
//!
//! Covers the analysis side of the pipeline: scaling-stability summaries,
//! coverage-error correlations, novelty quantile bins, and paired Wilcoxon
//! comparisons. Everything here is a pure function over immutable records;
//! callers group and parallelize as they please.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// One (method, budget, scene) evaluation outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub budget: usize,
    pub scene_id: String,
    /// Scalar error metric for the run (lower is better).
    pub metric_value: f64,
    pub coverage_fraction: f64,
    /// Per-frame novelty distances, when the run logged them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub novelty_values: Option<Vec<f64>>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.metric_value.is_finite() {
            return Err(Error::param("metric_value", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.coverage_fraction) {
            return Err(Error::param("coverage_fraction", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// One frame of a run: novelty distance paired with the frame's error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub method: String,
    pub budget: usize,
    pub scene_id: String,
    pub novelty: f64,
    pub metric_value: f64,
}

/// Mean, worst (maximum), and range of an error metric over qualifying
/// budgets. Invariants: worst >= mean >= worst - range; range = worst - best.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub mean: f64,
    pub worst: f64,
    pub range: f64,
}

/// Summary of per-budget values restricted to budgets at or above `floor`.
pub fn stability_summary(
    values: &BTreeMap<usize, f64>,
    floor: usize,
) -> Result<StabilitySummary> {
    let window: Vec<f64> = values
        .iter()
        .filter(|(&n, _)| n >= floor)
        .map(|(_, &v)| v)
        .collect();
    if window.is_empty() {
        return Err(Error::param(
            "values",
            format!("no budgets at or above the floor ({floor})"),
        ));
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let worst = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best = window.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(StabilitySummary {
        mean,
        worst,
        range: worst - best,
    })
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(xs.len(), 1, ys.len(), 1));
    }
    if xs.len() < 2 {
        return Err(Error::param("xs", "need at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::param("xs", "values must be finite"));
    }
    Ok(())
}

/// Product-moment correlation. Zero variance in either input is degenerate.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance makes the correlation undefined".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// 1-based ranks with ties sharing the average rank of their run.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j+1 share the run; lo + hi is twice the average.
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: product-moment correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Equal-mass quantile bins, 1-based, bin 1 = least novel. A value's bin is
/// the slot its first sorted position falls into when n indices split into k
/// equal spans: floor(rank * k / n) + 1 with rank = count of strictly
/// smaller values. Tied values therefore share the lower bin, every
/// assignment depends only on ranks, and any strictly increasing transform
/// of the inputs leaves the output unchanged.
pub fn novelty_bins(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::param("values", "need at least one value"));
    }
    if k == 0 {
        return Err(Error::param("k", "need at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("values", "values must be finite"));
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut bins = vec![0usize; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let bin = i * k / n + 1;
        for &idx in &order[i..=j] {
            bins[idx] = bin;
        }
        i = j + 1;
    }
    Ok(bins)
}

/// Paired signed-rank comparison of per-scene deltas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Median over all deltas, zeros included.
    pub median_delta: f64,
    pub mean_delta: f64,
    /// Two-sided p: probability mass of sums at least as far from the center
    /// as observed, under random sign flips of the nonzero deltas.
    pub p_value: f64,
    /// Sum of ranks of positive deltas.
    pub w_statistic: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub n_nonzero: usize,
    /// Exact sign-flip distribution (small n) vs normal approximation.
    pub exact: bool,
    /// All deltas were zero; p is reported as 1 and carries no information.
    pub degenerate: bool,
}

const WILCOXON_EXACT_MAX: usize = 25;

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Doubled average ranks of |deltas|; doubling keeps tied ranks integral
/// (a run over positions lo..=hi has doubled rank lo + hi).
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap());
    let mut doubled = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let d = (i + 1 + j + 1) as u64;
        for &idx in &order[i..=j] {
            doubled[idx] = d;
        }
        i = j + 1;
    }
    doubled
}

/// Exact two-sided p by counting sign assignments whose rank sum is at least
/// as extreme as observed. Subset-sum counts run over doubled ranks so every
/// achievable sum is an integer index.
fn exact_two_sided_p(doubled: &[u64], w2: u64) -> f64 {
    let n = doubled.len();
    let s2: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; s2 as usize + 1];
    counts[0] = 1;
    for &d in doubled {
        for s in (d as usize..=s2 as usize).rev() {
            counts[s] += counts[s - d as usize];
        }
    }
    let w2lo = w2.min(s2 - w2);
    let lower: u64 = counts[..=w2lo as usize].iter().sum();
    let upper: u64 = counts[(s2 - w2lo) as usize..].iter().sum();
    let total = (1u64 << n) as f64;
    ((lower + upper) as f64 / total).min(1.0)
}

/// Two-sided signed-rank test. Zero deltas are dropped from the statistic
/// per the usual convention but still count as ties; an all-zero input is
/// flagged degenerate with p = 1. Exact for up to 25 nonzero deltas, normal
/// approximation with continuity and tie corrections above.
pub fn paired_wilcoxon(deltas: &[f64]) -> Result<WilcoxonResult> {
    if deltas.is_empty() {
        return Err(Error::param("deltas", "need at least one delta"));
    }
    if deltas.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("deltas", "deltas must be finite"));
    }
    let wins = deltas.iter().filter(|&&d| d > 0.0).count();
    let losses = deltas.iter().filter(|&&d| d < 0.0).count();
    let ties = deltas.len() - wins - losses;
    let median_delta = median(deltas);
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(WilcoxonResult {
            median_delta,
            mean_delta,
            p_value: 1.0,
            w_statistic: 0.0,
            wins,
            losses,
            ties,
            n_nonzero: 0,
            exact: true,
            degenerate: true,
        });
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let doubled = doubled_ranks(&abs);
    let w2: u64 = nonzero
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let w_statistic = w2 as f64 / 2.0;
    let p_value = if n <= WILCOXON_EXACT_MAX {
        exact_two_sided_p(&doubled, w2)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        // Tie correction: subtract (t^3 - t) / 48 per tie group of size t.
        let mut sorted = abs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        let z = ((w_statistic - mu).abs() - 0.5) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
    };
    Ok(WilcoxonResult {
        median_delta,
        mean_delta,
        p_value,
        w_statistic,
        wins,
        losses,
        ties,
        n_nonzero: n,
        exact: n <= WILCOXON_EXACT_MAX,
        degenerate: false,
    })
}

/// Brute-force two-sided p over all 2^n sign assignments. Reference oracle
/// for the subset-sum implementation; only feasible for small n.
pub fn wilcoxon_enumeration_p(deltas: &[f64]) -> Result<f64> {
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(1.0);
    }
    if n > 20 {
        return Err(Error::param("deltas", "enumeration oracle capped at n=20"));
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let doubled = doubled_ranks(&abs);
    let s2: u64 = doubled.iter().sum();
    let w2: u64 = nonzero
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let w2lo = w2.min(s2 - w2);
    let mut extreme = 0u64;
    for mask in 0u64..(1u64 << n) {
        let sum: u64 = doubled
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &d)| d)
            .sum();
        if sum <= w2lo || sum >= s2 - w2lo {
            extreme += 1;
        }
    }
    Ok((extreme as f64 / (1u64 << n) as f64).min(1.0))
}

/// Report assembly parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    /// Budgets below this are excluded from stability summaries.
    pub stability_floor: usize,
    /// Quantile bin count for the novelty tail table.
    pub novelty_bin_count: usize,
    /// Method the paired tests defend; None skips the paired table.
    pub target_method: Option<String>,
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            stability_floor: 200,
            novelty_bin_count: 5,
            target_method: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub method: String,
    pub budget: usize,
    pub mean_metric: f64,
    pub mean_coverage: f64,
    pub n_scenes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub method: String,
    pub mean: f64,
    pub worst: f64,
    pub range: f64,
    pub n_budgets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub method: String,
    /// None when the correlation is undefined (fewer than two records or
    /// zero variance).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub method: String,
    pub bin: usize,
    pub mean_metric: f64,
    pub n_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub target: String,
    /// Named method, or `best_other`: the per-scene minimum across every
    /// non-target method (value-level minimum, so ties need no rule).
    pub baseline: String,
    pub budget: usize,
    pub n_scenes: usize,
    pub test: WilcoxonResult,
}

/// Long-format row for the error-vs-novelty-bin figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoveltyBinFrame {
    pub method: String,
    pub scene_id: String,
    pub bin: usize,
    pub novelty: f64,
    pub metric_value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scaling: Vec<ScalingRow>,
    pub stability: Vec<StabilityRow>,
    pub correlation: Vec<CorrelationRow>,
    pub tail: Vec<TailRow>,
    pub paired: Vec<PairedRow>,
    pub binned_frames: Vec<NoveltyBinFrame>,
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-scene metric means for one method at one budget.
fn scene_means(records: &[&RunRecord]) -> BTreeMap<String, f64> {
    let mut by_scene: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_scene
            .entry(r.scene_id.clone())
            .or_default()
            .push(r.metric_value);
    }
    by_scene
        .into_iter()
        .map(|(scene, vs)| (scene, mean_of(&vs)))
        .collect()
}

/// Builds every report table from run records and optional frame records.
///
/// Grouping is deterministic: methods and budgets in sorted order, paired
/// baselines alphabetical with `best_other` last. Methods with no budget at
/// or above the stability floor simply have no stability row.
pub fn assemble_report(
    records: &[RunRecord],
    frames: &[FrameRecord],
    params: &ReportParams,
) -> Result<Report> {
    for r in records {
        r.validate()?;
    }
    if records.is_empty() {
        return Err(Error::param("records", "need at least one run record"));
    }
    let mut by_method_budget: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_method_budget
            .entry((r.method.clone(), r.budget))
            .or_default()
            .push(r);
    }

    let scaling: Vec<ScalingRow> = by_method_budget
        .iter()
        .map(|((method, budget), rs)| {
            let scenes = scene_means(rs);
            let metrics: Vec<f64> = scenes.values().copied().collect();
            let coverage: Vec<f64> = rs.iter().map(|r| r.coverage_fraction).collect();
            ScalingRow {
                method: method.clone(),
                budget: *budget,
                mean_metric: mean_of(&metrics),
                mean_coverage: mean_of(&coverage),
                n_scenes: scenes.len(),
            }
        })
        .collect();

    let methods: BTreeSet<String> = records.iter().map(|r| r.method.clone()).collect();
    let mut stability = Vec::new();
    for method in &methods {
        let per_budget: BTreeMap<usize, f64> = scaling
            .iter()
            .filter(|row| &row.method == method)
            .map(|row| (row.budget, row.mean_metric))
            .collect();
        let qualifying = per_budget
            .keys()
            .filter(|&&n| n >= params.stability_floor)
            .count();
        if qualifying == 0 {
            continue;
        }
        let s = stability_summary(&per_budget, params.stability_floor)?;
        stability.push(StabilityRow {
            method: method.clone(),
            mean: s.mean,
            worst: s.worst,
            range: s.range,
            n_budgets: qualifying,
        });
    }

    let correlation: Vec<CorrelationRow> = methods
        .iter()
        .map(|method| {
            let rs: Vec<&RunRecord> =
                records.iter().filter(|r| &r.method == method).collect();
            let xs: Vec<f64> = rs.iter().map(|r| r.coverage_fraction).collect();
            let ys: Vec<f64> = rs.iter().map(|r| r.metric_value).collect();
            CorrelationRow {
                method: method.clone(),
                pearson: pearson(&xs, &ys).ok(),
                spearman: spearman(&xs, &ys).ok(),
                n: rs.len(),
            }
        })
        .collect();

    // Tail table: bins are per sequence (scene), then pooled per method so
    // every scene contributes equal-mass bins regardless of its novelty scale.
    let mut binned_frames = Vec::new();
    let mut tail_acc: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    let mut frames_by_group: BTreeMap<(String, String), Vec<&FrameRecord>> = BTreeMap::new();
    for f in frames {
        frames_by_group
            .entry((f.method.clone(), f.scene_id.clone()))
            .or_default()
            .push(f);
    }
    for ((method, scene_id), fs) in &frames_by_group {
        let novelty: Vec<f64> = fs.iter().map(|f| f.novelty).collect();
        let bins = novelty_bins(&novelty, params.novelty_bin_count)?;
        for (f, &bin) in fs.iter().zip(&bins) {
            let acc = tail_acc.entry((method.clone(), bin)).or_insert((0.0, 0));
            acc.0 += f.metric_value;
            acc.1 += 1;
            binned_frames.push(NoveltyBinFrame {
                method: method.clone(),
                scene_id: scene_id.clone(),
                bin,
                novelty: f.novelty,
                metric_value: f.metric_value,
            });
        }
    }
    let tail: Vec<TailRow> = tail_acc
        .into_iter()
        .map(|((method, bin), (sum, n))| TailRow {
            method,
            bin,
            mean_metric: sum / n as f64,
            n_frames: n,
        })
        .collect();

    let mut paired = Vec::new();
    if let Some(target) = &params.target_method {
        if !methods.contains(target) {
            return Err(Error::param("target_method", "not present in records"));
        }
        // metric per (method, budget, scene), averaging duplicate records.
        let mut per_key: BTreeMap<(String, usize), BTreeMap<String, f64>> = BTreeMap::new();
        for ((method, budget), rs) in &by_method_budget {
            per_key.insert((method.clone(), *budget), scene_means(rs));
        }
        let budgets_of = |m: &str| -> BTreeSet<usize> {
            per_key
                .keys()
                .filter(|(method, _)| method == m)
                .map(|(_, b)| *b)
                .collect()
        };
        let target_budgets = budgets_of(target);
        let others: Vec<&String> = methods.iter().filter(|m| *m != target).collect();
        for other in &others {
            let common: BTreeSet<usize> = target_budgets
                .intersection(&budgets_of(other))
                .copied()
                .collect();
            let Some(&budget) = common.iter().max() else {
                continue;
            };
            let t_scenes = &per_key[&(target.clone(), budget)];
            let o_scenes = &per_key[&((*other).clone(), budget)];
            let deltas: Vec<f64> = t_scenes
                .iter()
                .filter_map(|(scene, &tv)| o_scenes.get(scene).map(|&ov| ov - tv))
                .collect();
            if deltas.is_empty() {
                continue;
            }
            paired.push(PairedRow {
                target: target.clone(),
                baseline: (*other).to_string(),
                budget,
                n_scenes: deltas.len(),
                test: paired_wilcoxon(&deltas)?,
            });
        }
        // best_other: per-scene minimum across all other methods, at the
        // largest budget shared by the target and every other method.
        let common_all: Option<usize> = others
            .iter()
            .fold(Some(target_budgets.clone()), |acc, m| {
                acc.map(|s| s.intersection(&budgets_of(m)).copied().collect())
            })
            .and_then(|s: BTreeSet<usize>| s.iter().max().copied());
        if let (Some(budget), false) = (common_all, others.is_empty()) {
            let t_scenes = &per_key[&(target.clone(), budget)];
            let mut deltas = Vec::new();
            for (scene, &tv) in t_scenes {
                let best = others
                    .iter()
                    .filter_map(|m| per_key[&((*m).clone(), budget)].get(scene))
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() {
                    deltas.push(best - tv);
                }
            }
            if !deltas.is_empty() {
                paired.push(PairedRow {
                    target: target.clone(),
                    baseline: "best_other".to_string(),
                    budget,
                    n_scenes: deltas.len(),
                    test: paired_wilcoxon(&deltas)?,
                });
            }
        }
    }

    Ok(Report {
        scaling,
        stability,
        correlation,
        tail,
        paired,
        binned_frames,
    })
}

/// JSON for a report, stable field order, trailing newline.
pub fn report_to_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}
