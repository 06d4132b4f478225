//! Validation of response-level metrics against human labels: PR curves,
//! threshold classification, rank correlations, bootstrap system-level
//! evaluation over simulated systems, DNLI accuracy, and dataset probes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::error::{Q2Error, Result};
use crate::pipeline::{EvalConfig, EvalMode};
use crate::scoring::{dnli_decide, score_dataset, score_system};
use crate::types::{Dataset, GoldLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// None marks an empty denominator, which is reported as undefined
    /// rather than 0.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub consistent: ClassMetrics,
    pub inconsistent: ClassMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub consistent: ClassMetrics,
    pub inconsistent: ClassMetrics,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

fn f1_of(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    }
}

fn confusion(scores: &[f64], labels: &[GoldLabel], threshold: f64) -> (usize, usize, usize, usize) {
    // (tp, fp, fn, tn) with "consistent" as the positive class
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted_consistent = s > threshold;
        match (predicted_consistent, l) {
            (true, GoldLabel::Consistent) => tp += 1,
            (true, GoldLabel::Inconsistent) => fp += 1,
            (false, GoldLabel::Consistent) => fn_ += 1,
            (false, GoldLabel::Inconsistent) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

fn check_lengths(scores: &[f64], labels: &[GoldLabel]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Q2Error::Precondition(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Classification at one threshold: a response is predicted consistent iff
/// its score is strictly above the threshold.
pub fn classify_at_threshold(
    scores: &[f64],
    labels: &[GoldLabel],
    threshold: f64,
) -> Result<ClassificationReport> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Q2Error::Precondition("no scores to classify".into()));
    }
    let (tp, fp, fn_, tn) = confusion(scores, labels, threshold);
    let cons_p = ratio(tp, tp + fp);
    let cons_r = ratio(tp, tp + fn_);
    let inc_p = ratio(tn, tn + fn_);
    let inc_r = ratio(tn, tn + fp);
    Ok(ClassificationReport {
        threshold,
        consistent: ClassMetrics {
            precision: cons_p,
            recall: cons_r,
            f1: f1_of(cons_p, cons_r),
        },
        inconsistent: ClassMetrics {
            precision: inc_p,
            recall: inc_r,
            f1: f1_of(inc_p, inc_r),
        },
        accuracy: (tp + tn) as f64 / scores.len() as f64,
    })
}

pub fn pr_curve(scores: &[f64], labels: &[GoldLabel], thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    check_lengths(scores, labels)?;
    thresholds
        .iter()
        .map(|&t| {
            let report = classify_at_threshold(scores, labels, t)?;
            Ok(PrPoint {
                threshold: t,
                consistent: report.consistent,
                inconsistent: report.inconsistent,
            })
        })
        .collect()
}

/// Average ranks with ties averaged (fractional ranking).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged over the tie group
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Product-moment correlation; None when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Q2Error::Precondition(format!(
            "pearson needs equal lengths >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x).powi(2);
        var_y += (y - mean_y).powi(2);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (var_x * var_y).sqrt()))
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Q2Error::Precondition(format!(
            "spearman needs equal lengths >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub c_values: Vec<f64>,
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            c_values: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            sample_size: 350,
            repeats: 1000,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_values.len() < 2 {
            return Err(Q2Error::Precondition(
                "bootstrap needs at least 2 c values".into(),
            ));
        }
        if self.c_values.iter().any(|&c| c <= 0.0 || c >= 1.0) {
            return Err(Q2Error::Precondition(
                "every c must lie in (0, 1)".into(),
            ));
        }
        if self.sample_size == 0 {
            return Err(Q2Error::Precondition("sample_size must be > 0".into()));
        }
        if self.repeats == 0 {
            return Err(Q2Error::Precondition("repeats must be > 0".into()));
        }
        Ok(())
    }
}

/// One metric's response-level scores for contexts that have both a
/// consistent and an inconsistent response.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapMetric {
    pub name: String,
    /// (consistent-response score, inconsistent-response score) per context.
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBootstrap {
    pub metric: String,
    pub avg_correlation: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Repeats whose correlation was undefined (constant inputs); excluded
    /// from the average.
    pub undefined_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub per_metric: Vec<MetricBootstrap>,
    pub repeats: usize,
}

/// Derives the RNG seed for one repeat so repeats are independent and the
/// parallel result equals the serial one.
pub fn per_repeat_seed(seed: u64, repeat: usize) -> u64 {
    // splitmix64 step over seed + repeat index
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(repeat as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Number of inconsistent slots for proportion `c`, rounded half-up.
pub fn inconsistent_quota(c: f64, sample_size: usize) -> usize {
    (c * sample_size as f64 + 0.5).floor() as usize
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Simulates systems with inconsistent proportions `c` by bootstrap sampling
/// contexts with replacement, scores each metric per simulated system, and
/// correlates those system scores against the human reference 1 - c.
pub fn bootstrap_system_eval(
    metrics: &[BootstrapMetric],
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    config.validate()?;
    if metrics.is_empty() {
        return Err(Q2Error::Precondition("no metrics given".into()));
    }
    let n_contexts = metrics[0].pairs.len();
    if n_contexts == 0 {
        return Err(Q2Error::Precondition("no paired contexts given".into()));
    }
    if metrics.iter().any(|m| m.pairs.len() != n_contexts) {
        return Err(Q2Error::Precondition(
            "metrics disagree on the number of contexts".into(),
        ));
    }
    let human: Vec<f64> = config.c_values.iter().map(|c| 1.0 - c).collect();

    let mut per_metric_corrs: Vec<Vec<f64>> = vec![Vec::new(); metrics.len()];
    let mut per_metric_undefined = vec![0usize; metrics.len()];

    for repeat in 0..config.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(per_repeat_seed(config.seed, repeat));
        // system scores: metric x c
        let mut system_scores = vec![Vec::with_capacity(config.c_values.len()); metrics.len()];
        for &c in &config.c_values {
            let quota = inconsistent_quota(c, config.sample_size);
            let mut sums = vec![0.0; metrics.len()];
            for slot in 0..config.sample_size {
                let ctx = rng.gen_range(0..n_contexts);
                let take_inconsistent = slot < quota;
                for (mi, metric) in metrics.iter().enumerate() {
                    let (cons, inc) = metric.pairs[ctx];
                    sums[mi] += if take_inconsistent { inc } else { cons };
                }
            }
            for (mi, sum) in sums.iter().enumerate() {
                system_scores[mi].push(sum / config.sample_size as f64);
            }
        }
        for (mi, scores) in system_scores.iter().enumerate() {
            match spearman(scores, &human)? {
                Some(corr) => per_metric_corrs[mi].push(corr),
                None => per_metric_undefined[mi] += 1,
            }
        }
    }

    let per_metric = metrics
        .iter()
        .enumerate()
        .map(|(mi, metric)| {
            let corrs = &mut per_metric_corrs[mi];
            if corrs.is_empty() {
                MetricBootstrap {
                    metric: metric.name.clone(),
                    avg_correlation: None,
                    ci_lower: None,
                    ci_upper: None,
                    undefined_repeats: per_metric_undefined[mi],
                }
            } else {
                let avg = corrs.iter().sum::<f64>() / corrs.len() as f64;
                corrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                MetricBootstrap {
                    metric: metric.name.clone(),
                    avg_correlation: Some(avg),
                    ci_lower: Some(percentile(corrs, 2.5)),
                    ci_upper: Some(percentile(corrs, 97.5)),
                    undefined_repeats: per_metric_undefined[mi],
                }
            }
        })
        .collect();

    Ok(BootstrapResult {
        per_metric,
        repeats: config.repeats,
    })
}

/// Zero-shot DNLI accuracy: score each premise/hypothesis pair, threshold
/// the score, and compare against the mapped gold labels.
pub fn dnli_evaluate(dataset: &Dataset, config: &EvalConfig, backends: &Backends) -> Result<f64> {
    if config.mode != EvalMode::Dnli {
        return Err(Q2Error::Precondition(
            "dnli_evaluate requires a config in dnli mode".into(),
        ));
    }
    if dataset.is_empty() {
        return Err(Q2Error::Precondition("empty dataset".into()));
    }
    let scores = score_dataset(&dataset.examples, config, backends, 1)?;
    let mut correct = 0usize;
    for (example, score) in dataset.examples.iter().zip(&scores) {
        let gold = example.gold_label.ok_or_else(|| {
            Q2Error::Validation(format!("example `{}` has no gold label", example.id))
        })?;
        if dnli_decide(score.value, config.dnli_threshold) == gold {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    SameDialogue,
    CrossDialogue,
}

impl std::str::FromStr for ProbeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "same" | "same_dialogue" | "same-dialogue" => Ok(ProbeMode::SameDialogue),
            "cross" | "cross_dialogue" | "cross-dialogue" => Ok(ProbeMode::CrossDialogue),
            other => Err(format!("unknown probe mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub q2: f64,
    pub no_answer_rate: f64,
}

fn permutation_for(dataset: &Dataset, mode: ProbeMode, seed: u64) -> Result<Vec<usize>> {
    let n = dataset.len();
    if n < 2 {
        return Err(Q2Error::Precondition(
            "probe needs at least 2 examples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    match mode {
        ProbeMode::CrossDialogue => {
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
        }
        ProbeMode::SameDialogue => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, ex) in dataset.examples.iter().enumerate() {
                let id = ex.dialogue_id.as_deref().ok_or_else(|| {
                    Q2Error::Precondition(format!(
                        "example `{}` has no dialogue_id; same-dialogue probe needs grouping",
                        ex.id
                    ))
                })?;
                groups.entry(id).or_default().push(i);
            }
            for (gid, members) in &groups {
                if members.len() < 2 {
                    return Err(Q2Error::Precondition(format!(
                        "dialogue `{gid}` has fewer than 2 examples"
                    )));
                }
            }
            use rand::seq::SliceRandom;
            for members in groups.values() {
                let mut shuffled = members.clone();
                shuffled.shuffle(&mut rng);
                for (slot, &src) in members.iter().zip(&shuffled) {
                    perm[*slot] = src;
                }
            }
        }
    }
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return Err(Q2Error::Validation(
            "probe permutation is the identity; it must actually permute".into(),
        ));
    }
    Ok(perm)
}

/// Replaces every example's knowledge with another example's knowledge
/// (seeded permutation, within or across dialogues) and rescores.
pub fn random_knowledge_probe(
    dataset: &Dataset,
    mode: ProbeMode,
    seed: u64,
    config: &EvalConfig,
    backends: &Backends,
) -> Result<ProbeResult> {
    let perm = permutation_for(dataset, mode, seed)?;
    let permuted: Vec<_> = dataset
        .examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut ex = ex.clone();
            ex.knowledge = dataset.examples[perm[i]].knowledge.clone();
            ex
        })
        .collect();
    let scores = score_dataset(&permuted, config, backends, 1)?;
    let system = score_system(&scores)?;
    Ok(ProbeResult {
        q2: system.value,
        no_answer_rate: system.no_answer_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub avg_characters: f64,
    pub avg_tokens: f64,
}

/// Average response length (characters and whitespace tokens) per gold label.
pub fn length_stats(dataset: &Dataset) -> Result<BTreeMap<String, LengthStats>> {
    let mut sums: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for ex in &dataset.examples {
        let label = ex.gold_label.ok_or_else(|| {
            Q2Error::Precondition(format!("example `{}` has no gold label", ex.id))
        })?;
        let key = match label {
            GoldLabel::Consistent => "consistent",
            GoldLabel::Inconsistent => "inconsistent",
        };
        let entry = sums.entry(key.to_string()).or_insert((0, 0, 0));
        entry.0 += 1;
        entry.1 += ex.response.chars().count();
        entry.2 += ex.response.split_whitespace().count();
    }
    Ok(sums
        .into_iter()
        .map(|(k, (n, chars, tokens))| {
            (
                k,
                LengthStats {
                    count: n,
                    avg_characters: chars as f64 / n as f64,
                    avg_tokens: tokens as f64 / n as f64,
                },
            )
        })
        .collect())
}

/// Histogram of response scores over [0, 1], as (bin_left, bin_right, count).
pub fn histogram(scores: &[f64], bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if bins == 0 {
        return Err(Q2Error::Precondition("bins must be > 0".into()));
    }
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in scores {
        let idx = ((s / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

pub fn write_pr_csv(points: &[PrPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file =
        std::fs::File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    writeln!(file, "threshold,class,precision,recall")
        .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    for p in points {
        for (class, m) in [("consistent", p.consistent), ("inconsistent", p.inconsistent)] {
            writeln!(
                file,
                "{},{},{},{}",
                p.threshold,
                class,
                fmt_opt(m.precision),
                fmt_opt(m.recall)
            )
            .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

pub fn write_bootstrap_csv(result: &BootstrapResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file =
        std::fs::File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    writeln!(file, "metric,avg,ci_lower,ci_upper,undefined_repeats")
        .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    for m in &result.per_metric {
        writeln!(
            file,
            "{},{},{},{},{}",
            m.metric,
            fmt_opt(m.avg_correlation),
            fmt_opt(m.ci_lower),
            fmt_opt(m.ci_upper),
            m.undefined_repeats
        )
        .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn write_histogram_csv(bins: &[(f64, f64, usize)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file =
        std::fs::File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    writeln!(file, "bin_left,bin_right,count")
        .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    for (left, right, count) in bins {
        writeln!(file, "{left},{right},{count}")
            .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
