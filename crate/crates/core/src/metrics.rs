//! Multi-label ranking metrics.
//!
//! Ranks count ties against the label: `rank(j) = |{k : s_k >= s_j}|`.
//! Ranking loss counts tied (relevant, irrelevant) pairs as violations.
//! Instances on which a metric is undefined are skipped and counted.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores and ground truth for `N` instances over `K` classes.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    scores: ArrayView2<'a, f64>,
    labels: ArrayView2<'a, u8>,
}

impl<'a> EvalInput<'a> {
    pub fn new(scores: ArrayView2<'a, f64>, labels: ArrayView2<'a, u8>) -> Result<Self> {
        if scores.dim() != labels.dim() {
            return Err(Error::Shape {
                what: "score matrix",
                expected: labels.len(),
                found: scores.len(),
            });
        }
        if let Some(((row, column), v)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation {
                row: row + 1,
                column: column + 1,
                message: format!("score {v} is not finite"),
            });
        }
        Ok(Self { scores, labels })
    }

    pub fn n_instances(&self) -> usize {
        self.scores.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkippedCounts {
    pub average_precision: usize,
    pub coverage_error: usize,
    pub ranking_loss: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub average_precision: f64,
    pub coverage_error: f64,
    pub ranking_loss: f64,
    pub skipped: SkippedCounts,
}

/// `|{k : scores[k] >= scores[j]}|` for a zero-based class `j`.
pub fn rank_of(scores: &[f64], j: usize) -> Result<usize> {
    let s = *scores.get(j).ok_or(Error::IndexOutOfRange {
        index: j,
        len: scores.len(),
    })?;
    Ok(scores.iter().filter(|&&v| v >= s).count())
}

/// Scores sorted in descending order; `rank` of a score is then the length
/// of the prefix that is `>=` it.
struct Ranker {
    descending: Vec<f64>,
}

impl Ranker {
    fn new(scores: &[f64]) -> Self {
        let mut descending = scores.to_vec();
        descending.sort_unstable_by(|a, b| b.total_cmp(a));
        Self { descending }
    }

    fn rank(&self, s: f64) -> usize {
        self.descending.partition_point(|&v| v >= s)
    }
}

struct Accumulator {
    sum: f64,
    evaluated: usize,
    skipped: usize,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            sum: 0.0,
            evaluated: 0,
            skipped: 0,
        }
    }

    fn push(&mut self, v: Option<f64>) {
        match v {
            Some(v) => {
                self.sum += v;
                self.evaluated += 1;
            }
            None => self.skipped += 1,
        }
    }

    fn finish(self, metric: &'static str) -> Result<(f64, usize)> {
        if self.evaluated == 0 {
            return Err(Error::UndefinedMetric { metric });
        }
        Ok((self.sum / self.evaluated as f64, self.skipped))
    }
}

fn instance_average_precision(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let ranker = Ranker::new(scores);
    let relevant_ranks: Vec<usize> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| ranker.rank(s))
        .collect();
    if relevant_ranks.is_empty() {
        return None;
    }
    let mut sorted = relevant_ranks.clone();
    sorted.sort_unstable();
    let mut acc = 0.0;
    for &r in &relevant_ranks {
        let hits = sorted.partition_point(|&o| o <= r);
        acc += hits as f64 / r as f64;
    }
    Some(acc / relevant_ranks.len() as f64)
}

fn instance_coverage(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let ranker = Ranker::new(scores);
    scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| ranker.rank(s))
        .max()
        .map(|r| r as f64)
}

fn instance_ranking_loss(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut negatives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y != 1)
        .map(|(&s, _)| s)
        .collect();
    let n_pos = scores.len() - negatives.len();
    if n_pos == 0 || negatives.is_empty() {
        return None;
    }
    negatives.sort_unstable_by(f64::total_cmp);
    let mut violations = 0usize;
    for (&s, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 1) {
        violations += negatives.len() - negatives.partition_point(|&b| b < s);
    }
    Some(violations as f64 / (n_pos * negatives.len()) as f64)
}

fn per_instance(
    inp: &EvalInput<'_>,
    metric: &'static str,
    f: fn(&[f64], &[u8]) -> Option<f64>,
) -> Result<(f64, usize)> {
    let mut acc = Accumulator::new();
    let mut s_buf = Vec::with_capacity(inp.scores.ncols());
    let mut y_buf = Vec::with_capacity(inp.labels.ncols());
    for (s, y) in inp.scores.rows().into_iter().zip(inp.labels.rows()) {
        s_buf.clear();
        s_buf.extend(s.iter().copied());
        y_buf.clear();
        y_buf.extend(y.iter().copied());
        acc.push(f(&s_buf, &y_buf));
    }
    acc.finish(metric)
}

/// Mean over instances of the precision at each relevant label's rank.
pub fn average_precision(inp: &EvalInput<'_>) -> Result<f64> {
    per_instance(inp, "average precision", instance_average_precision).map(|(v, _)| v)
}

/// Mean over instances of the deepest rank among relevant labels.
pub fn coverage_error(inp: &EvalInput<'_>) -> Result<f64> {
    per_instance(inp, "coverage error", instance_coverage).map(|(v, _)| v)
}

/// Mean fraction of mis-ordered (relevant, irrelevant) pairs.
pub fn ranking_loss(inp: &EvalInput<'_>) -> Result<f64> {
    per_instance(inp, "ranking loss", instance_ranking_loss).map(|(v, _)| v)
}

/// All three metrics with their skip counts.
pub fn evaluate(inp: &EvalInput<'_>) -> Result<MetricValues> {
    let (average_precision, ap_skip) =
        per_instance(inp, "average precision", instance_average_precision)?;
    let (coverage_error, cov_skip) = per_instance(inp, "coverage error", instance_coverage)?;
    let (ranking_loss, rl_skip) = per_instance(inp, "ranking loss", instance_ranking_loss)?;
    Ok(MetricValues {
        average_precision,
        coverage_error,
        ranking_loss,
        skipped: SkippedCounts {
            average_precision: ap_skip,
            coverage_error: cov_skip,
            ranking_loss: rl_skip,
        },
    })
}
