//! Per-class conformal thresholds and label-wise filtering.
//!
//! For every class the scores of calibration instances where the class is
//! present are collected. The threshold is their `k`-th smallest value with
//! `k = ceil((1 - alpha) * (n + 1))` clamped to `[1, n]`. At test time a
//! label is kept only when its score is strictly above the threshold.
//!
//! Nothing here looks inside a model: calibration consumes score matrices,
//! and [`Scorer`] is the only bridge to a model.

use std::fmt::Write as _;

use log::warn;
use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Anything that maps a batch of feature rows to per-class scores in [0, 1].
pub trait Scorer {
    fn n_classes(&self) -> usize;

    fn score_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

/// Calibrated threshold for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Value(f64),
    /// The class had no calibration positives; it never rejects.
    AcceptAll,
}

impl Threshold {
    pub fn accepts(&self, score: f64) -> bool {
        match *self {
            Threshold::Value(q) => score > q,
            Threshold::AcceptAll => true,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Threshold::Value(q) => Some(q),
            Threshold::AcceptAll => None,
        }
    }
}

const ACCEPT_ALL: &str = "ACCEPT_ALL";

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threshold::Value(q) => write!(f, "{q}"),
            Threshold::AcceptAll => f.write_str(ACCEPT_ALL),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Threshold::Value(q) => s.serialize_f64(q),
            Threshold::AcceptAll => s.serialize_str(ACCEPT_ALL),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Value(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(q) => Ok(Threshold::Value(q)),
            Raw::Tag(t) if t == ACCEPT_ALL => Ok(Threshold::AcceptAll),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown threshold `{t}`"))),
        }
    }
}

/// Per-class positive scores from a calibration split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSets {
    /// `sets[i]` holds the (possibly subsampled) scores of class `i`.
    pub sets: Vec<Vec<f64>>,
    /// Positives available for each class before any cap was applied.
    pub available: Vec<usize>,
}

impl ScoreSets {
    pub fn counts(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_matrix_shapes(scores: &ArrayView2<'_, f64>, labels: &ArrayView2<'_, u8>) -> Result<()> {
    if scores.dim() != labels.dim() {
        return Err(Error::Shape {
            what: "score matrix",
            expected: labels.len(),
            found: scores.len(),
        });
    }
    Ok(())
}

/// Collects `S_i = { scores[j][i] : labels[j][i] = 1 }`, optionally capped
/// to a seeded uniform sample of at most `per_label_cap` scores per class.
/// Each class samples from its own stream, so caps on one class do not
/// disturb another.
pub fn collect_scores(
    scores: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, u8>,
    per_label_cap: Option<usize>,
    seed: u64,
) -> Result<ScoreSets> {
    check_matrix_shapes(&scores, &labels)?;
    let k = labels.ncols();
    let mut sets = Vec::with_capacity(k);
    let mut available = Vec::with_capacity(k);
    for (class, (s_col, y_col)) in scores.columns().into_iter().zip(labels.columns()).enumerate() {
        let all: Vec<f64> = s_col
            .iter()
            .zip(y_col.iter())
            .filter(|(_, &y)| y == 1)
            .map(|(&s, _)| s)
            .collect();
        available.push(all.len());
        let set = match per_label_cap {
            Some(cap) if cap < all.len() => {
                let mut rng = seed::rng(seed::derive(seed, class as u64));
                let mut picked = index::sample(&mut rng, all.len(), cap).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|j| all[j]).collect()
            }
            _ => all,
        };
        sets.push(set);
    }
    Ok(ScoreSets { sets, available })
}

/// Scores a calibration split with `model` and collects per-class sets.
pub fn collect_model_scores(
    model: &impl Scorer,
    cal: &MultiLabelDataset,
    per_label_cap: Option<usize>,
    seed: u64,
) -> Result<ScoreSets> {
    let scores = model.score_batch(cal.features())?;
    collect_scores(scores.view(), cal.labels(), per_label_cap, seed)
}

/// Order statistic index `k = ceil((1 - alpha)(n + 1))` clamped to `[1, n]`,
/// or `None` when `n = 0`.
pub fn quantile_order(n: usize, alpha: f64) -> Result<Option<usize>> {
    check_alpha(alpha)?;
    if n == 0 {
        return Ok(None);
    }
    let k = ((1.0 - alpha) * (n as f64 + 1.0)).ceil() as usize;
    Ok(Some(k.clamp(1, n)))
}

/// The `k`-th smallest element of `scores` (ties kept), or
/// [`Threshold::AcceptAll`] for an empty set.
pub fn quantile_threshold(scores: &[f64], alpha: f64) -> Result<Threshold> {
    let Some(k) = quantile_order(scores.len(), alpha)? else {
        return Ok(Threshold::AcceptAll);
    };
    let mut sorted = scores.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(Threshold::Value(*kth))
}

/// Calibrated thresholds for all classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub thresholds: Vec<Threshold>,
    pub alpha: f64,
    /// Calibration scores used per class.
    pub per_class_n: Vec<usize>,
    /// Order statistic used per class; 0 for classes without scores.
    pub per_class_k: Vec<usize>,
}

/// One line of the threshold report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub label: String,
    pub n_cal: usize,
    pub k: usize,
    pub q: Threshold,
}

impl ThresholdVector {
    pub fn from_score_sets(sets: &ScoreSets, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut thresholds = Vec::with_capacity(sets.sets.len());
        let mut per_class_k = Vec::with_capacity(sets.sets.len());
        for (class, s) in sets.sets.iter().enumerate() {
            let q = quantile_threshold(s, alpha)?;
            if q == Threshold::AcceptAll {
                warn!("class {} has no calibration positives; accepting all its predictions", class + 1);
            }
            thresholds.push(q);
            per_class_k.push(quantile_order(s.len(), alpha)?.unwrap_or(0));
        }
        Ok(Self {
            thresholds,
            alpha,
            per_class_n: sets.counts(),
            per_class_k,
        })
    }

    /// Thresholds that never reject; filtering becomes the identity.
    pub fn accept_all(n_classes: usize, alpha: f64) -> Self {
        Self {
            thresholds: vec![Threshold::AcceptAll; n_classes],
            alpha,
            per_class_n: vec![0; n_classes],
            per_class_k: vec![0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.thresholds.len()
    }

    pub fn filter(&self, scores: &[f64]) -> Result<FilteredPrediction> {
        if scores.len() != self.n_classes() {
            return Err(Error::Shape {
                what: "scores",
                expected: self.n_classes(),
                found: scores.len(),
            });
        }
        let accepted = self
            .thresholds
            .iter()
            .zip(scores)
            .map(|(q, &s)| q.accepts(s))
            .collect();
        Ok(FilteredPrediction {
            scores: scores.to_vec(),
            accepted,
        })
    }

    /// Filters every row and returns the zero-masked score matrix.
    pub fn mask_matrix(&self, scores: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.rescore_matrix(scores, RejectionScoring::Zero)
    }

    /// Filters every row and rewrites rejected entries according to `mode`.
    pub fn rescore_matrix(
        &self,
        scores: ArrayView2<'_, f64>,
        mode: RejectionScoring,
    ) -> Result<Array2<f64>> {
        if scores.ncols() != self.n_classes() {
            return Err(Error::Shape {
                what: "score columns",
                expected: self.n_classes(),
                found: scores.ncols(),
            });
        }
        let mut out = scores.to_owned();
        for mut row in out.rows_mut() {
            for (v, q) in row.iter_mut().zip(&self.thresholds) {
                if !q.accepts(*v) {
                    *v = mode.rejected(*v);
                }
            }
        }
        Ok(out)
    }

    pub fn records(&self, label_names: Option<&[String]>) -> Vec<ThresholdRecord> {
        (0..self.n_classes())
            .map(|i| ThresholdRecord {
                label: label_names
                    .and_then(|names| names.get(i).cloned())
                    .unwrap_or_else(|| format!("label_{}", i + 1)),
                n_cal: self.per_class_n[i],
                k: self.per_class_k[i],
                q: self.thresholds[i],
            })
            .collect()
    }

    /// Tab-separated report, one class per line: label, n_cal, k, q.
    pub fn to_text(&self, label_names: Option<&[String]>) -> String {
        let mut out = format!("# alpha={}\nlabel\tn_cal\tk\tq\n", self.alpha);
        for r in self.records(label_names) {
            writeln!(out, "{}\t{}\t{}\t{}", r.label, r.n_cal, r.k, r.q).unwrap();
        }
        out
    }
}

/// Collects scores from `scores`/`labels` and computes thresholds.
pub fn calibrate_scores(
    scores: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, u8>,
    alpha: f64,
    per_label_cap: Option<usize>,
    seed: u64,
) -> Result<ThresholdVector> {
    check_alpha(alpha)?;
    let sets = collect_scores(scores, labels, per_label_cap, seed)?;
    ThresholdVector::from_score_sets(&sets, alpha)
}

/// Calibrates `model` on a fully labelled held-out split.
pub fn calibrate(
    model: &impl Scorer,
    cal: &MultiLabelDataset,
    alpha: f64,
    per_label_cap: Option<usize>,
    seed: u64,
) -> Result<ThresholdVector> {
    check_alpha(alpha)?;
    let sets = collect_model_scores(model, cal, per_label_cap, seed)?;
    ThresholdVector::from_score_sets(&sets, alpha)
}

/// How rejected labels are scored when a full score vector is needed, as
/// for the ranking metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectionScoring {
    /// Rejected labels keep their relative order but are moved below every
    /// accepted label (`score - 2`, so they land in `[-2, -1]`).
    #[default]
    Demote,
    /// Rejected labels score 0 and tie with each other.
    Zero,
}

impl std::str::FromStr for RejectionScoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "demote" => Ok(RejectionScoring::Demote),
            "zero" => Ok(RejectionScoring::Zero),
            other => Err(Error::Config(format!(
                "rejection scoring must be `demote` or `zero`, got `{other}`"
            ))),
        }
    }
}

impl RejectionScoring {
    fn rejected(self, score: f64) -> f64 {
        match self {
            RejectionScoring::Demote => score - 2.0,
            RejectionScoring::Zero => 0.0,
        }
    }
}

/// Model scores together with the per-class acceptance decision.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPrediction {
    pub scores: Vec<f64>,
    pub accepted: Vec<bool>,
}

impl FilteredPrediction {
    /// Scores with rejected labels set to 0.
    pub fn masked_scores(&self) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.accepted)
            .map(|(&s, &a)| if a { s } else { 0.0 })
            .collect()
    }

    /// Scores with rejected labels moved below every accepted label.
    pub fn demoted_scores(&self) -> Vec<f64> {
        self.rescored(RejectionScoring::Demote)
    }

    pub fn rescored(&self, mode: RejectionScoring) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.accepted)
            .map(|(&s, &a)| if a { s } else { mode.rejected(s) })
            .collect()
    }

    /// Zero-based indices of accepted labels.
    pub fn accepted_labels(&self) -> Vec<usize> {
        self.accepted
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn sort_oracle(s: &[f64], alpha: f64) -> Option<f64> {
        if s.is_empty() {
            return None;
        }
        let mut v = s.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        let mut k = 1;
        while (k as f64) < (1.0 - alpha) * (n + 1) as f64 {
            k += 1;
        }
        Some(v[k.min(n) - 1])
    }

    struct Constant(Vec<f64>);

    impl Scorer for Constant {
        fn n_classes(&self) -> usize {
            self.0.len()
        }

        fn score_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((x.nrows(), self.0.len()), |(_, i)| self.0[i]))
        }
    }

    #[test]
    fn worked_order_statistic() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(quantile_order(10, 0.5).unwrap(), Some(6));
        assert_eq!(quantile_threshold(&s, 0.5).unwrap(), Threshold::Value(0.6));
        let mut shuffled = s.clone();
        shuffled.reverse();
        assert_eq!(quantile_threshold(&shuffled, 0.5).unwrap(), Threshold::Value(0.6));
    }

    #[test]
    fn singleton_and_empty_sets() {
        for alpha in [0.01, 0.5, 0.99] {
            assert_eq!(quantile_threshold(&[0.7], alpha).unwrap(), Threshold::Value(0.7));
            assert_eq!(quantile_threshold(&[], alpha).unwrap(), Threshold::AcceptAll);
        }
    }

    #[test]
    fn alpha_is_validated() {
        for alpha in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(quantile_threshold(&[0.5], alpha), Err(Error::Config(_))));
        }
    }

    #[test]
    fn high_alpha_clamps_to_minimum() {
        let s = [0.9, 0.3, 0.5, 0.8, 0.2, 0.6, 0.1, 0.7, 0.4, 0.35];
        assert_eq!(quantile_order(10, 0.95).unwrap(), Some(1));
        assert_eq!(quantile_threshold(&s, 0.95).unwrap(), Threshold::Value(0.1));
        // ceil(0.99 * 11) = 11 > n clamps down to the maximum
        assert_eq!(quantile_threshold(&s, 0.01).unwrap(), Threshold::Value(0.9));
    }

    #[test]
    fn ties_are_kept_as_duplicates() {
        let s = [0.2, 0.5, 0.5, 0.5, 0.9];
        // k = ceil(0.5 * 6) = 3
        assert_eq!(quantile_threshold(&s, 0.5).unwrap(), Threshold::Value(0.5));
    }

    #[test]
    fn collects_positive_scores_per_class() {
        let scores = array![[0.1, 0.9, 0.3], [0.4, 0.8, 0.2], [0.7, 0.6, 0.5], [0.2, 0.1, 0.0]];
        let labels = array![[0, 1, 0], [1, 1, 0], [0, 1, 0], [1, 0, 0]];
        let sets = collect_scores(scores.view(), labels.view(), None, 0).unwrap();
        assert_eq!(sets.sets[1], vec![0.9, 0.8, 0.6]);
        assert_eq!(sets.sets[0], vec![0.4, 0.2]);
        assert!(sets.sets[2].is_empty());
        assert_eq!(sets.counts(), vec![2, 3, 0]);
    }

    #[test]
    fn cap_subsamples_deterministically() {
        let n = 25;
        let scores = Array2::from_shape_fn((n, 2), |(j, i)| (j * 2 + i) as f64 / 100.0);
        let labels = Array2::from_shape_fn((n, 2), |(j, i)| u8::from(i == 0 || j % 5 == 0));
        let a = collect_scores(scores.view(), labels.view(), Some(10), 42).unwrap();
        let b = collect_scores(scores.view(), labels.view(), Some(10), 42).unwrap();
        let c = collect_scores(scores.view(), labels.view(), Some(10), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sets[0], c.sets[0]);
        assert_eq!(a.counts(), vec![10, 5]);
        assert_eq!(a.available, vec![25, 5]);
        let col: Vec<f64> = scores.column(0).to_vec();
        assert!(a.sets[0].iter().all(|s| col.contains(s)));
    }

    #[test]
    fn constant_model_thresholds() {
        let ds = MultiLabelDataset::new(
            Array2::zeros((4, 2)),
            array![[1, 0, 0], [1, 1, 0], [0, 1, 0], [1, 0, 0]],
        )
        .unwrap();
        let tv = calibrate(&Constant(vec![0.5; 3]), &ds, 0.5, None, 0).unwrap();
        assert_eq!(tv.thresholds[..2], [Threshold::Value(0.5); 2]);
        assert_eq!(tv.thresholds[2], Threshold::AcceptAll);
        assert_eq!(tv.per_class_n, vec![3, 2, 0]);
        assert_eq!(tv.per_class_k, vec![2, 2, 0]);
    }

    #[test]
    fn filter_uses_strict_inequality() {
        let tv = ThresholdVector {
            thresholds: vec![Threshold::Value(0.6), Threshold::Value(0.2)],
            alpha: 0.5,
            per_class_n: vec![10, 10],
            per_class_k: vec![6, 6],
        };
        assert_eq!(tv.filter(&[0.7, 0.1]).unwrap().accepted, vec![true, false]);
        assert_eq!(tv.filter(&[0.6, 0.2]).unwrap().accepted, vec![false, false]);
        assert!(matches!(tv.filter(&[0.1]), Err(Error::Shape { .. })));
        let fp = tv.filter(&[0.7, 0.4]).unwrap();
        assert_eq!(fp.masked_scores(), vec![0.7, 0.4]);
        assert_eq!(fp.accepted_labels(), vec![0, 1]);
    }

    #[test]
    fn accept_all_is_identity() {
        let tv = ThresholdVector::accept_all(3, 0.5);
        let fp = tv.filter(&[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(fp.accepted, vec![true; 3]);
        assert_eq!(fp.masked_scores(), vec![0.0, 0.3, 1.0]);
    }

    #[test]
    fn masked_scores_cases() {
        let all_rejected = FilteredPrediction {
            scores: vec![0.3, 0.9],
            accepted: vec![false, false],
        };
        assert_eq!(all_rejected.masked_scores(), vec![0.0, 0.0]);
        let mixed = FilteredPrediction {
            scores: vec![0.7, 0.4],
            accepted: vec![true, false],
        };
        assert_eq!(mixed.masked_scores(), vec![0.7, 0.0]);
    }

    #[test]
    fn demotion_keeps_order_below_accepted() {
        let fp = FilteredPrediction {
            scores: vec![0.9, 0.2, 0.95, 0.1],
            accepted: vec![false, true, false, false],
        };
        let d = fp.demoted_scores();
        assert_eq!(d[1], 0.2);
        assert!(d[0] < d[1] && d[2] < d[1] && d[3] < d[1]);
        assert!(d[3] < d[0] && d[0] < d[2]);
        assert_eq!(fp.rescored(RejectionScoring::Zero), fp.masked_scores());
        let all = FilteredPrediction {
            scores: vec![0.3, 0.0],
            accepted: vec![true, true],
        };
        assert_eq!(all.demoted_scores(), all.scores);
    }

    #[test]
    fn mask_matrix_matches_row_filter() {
        let tv = ThresholdVector {
            thresholds: vec![Threshold::Value(0.5), Threshold::AcceptAll],
            alpha: 0.5,
            per_class_n: vec![3, 0],
            per_class_k: vec![2, 0],
        };
        let scores = array![[0.4, 0.1], [0.6, 0.0], [0.5, 0.9]];
        let masked = tv.mask_matrix(scores.view()).unwrap();
        let demoted = tv.rescore_matrix(scores.view(), RejectionScoring::Demote).unwrap();
        for ((row, out), dem) in scores.rows().into_iter().zip(masked.rows()).zip(demoted.rows()) {
            let fp = tv.filter(row.as_slice().unwrap()).unwrap();
            assert_eq!(fp.masked_scores(), out.to_vec());
            assert_eq!(fp.demoted_scores(), dem.to_vec());
        }
    }

    #[test]
    fn text_report_and_json() {
        let tv = ThresholdVector {
            thresholds: vec![Threshold::Value(0.25), Threshold::AcceptAll],
            alpha: 0.5,
            per_class_n: vec![3, 0],
            per_class_k: vec![2, 0],
        };
        let names = vec!["tree".to_string(), "rock".to_string()];
        let text = tv.to_text(Some(&names));
        assert!(text.contains("tree\t3\t2\t0.25\n"));
        assert!(text.contains("rock\t0\t0\tACCEPT_ALL\n"));
        let json = serde_json::to_string(&tv).unwrap();
        let back: ThresholdVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tv);
    }

    #[test]
    fn exchangeable_exceedance_rate() {
        let mut rng = seed::rng(17);
        let trials = 20_000;
        let mut exceed = 0;
        let mut cal = [0.0; 10];
        for _ in 0..trials {
            cal.iter_mut().for_each(|v| *v = rng.random());
            let q = quantile_threshold(&cal, 0.5).unwrap();
            if q.accepts(rng.random()) {
                exceed += 1;
            }
        }
        let rate = exceed as f64 / trials as f64;
        assert!((rate - 5.0 / 11.0).abs() < 0.02, "{rate}");
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(
            s in prop::collection::vec(0.0f64..=1.0, 0..40),
            alpha in 0.001f64..0.999,
        ) {
            let got = quantile_threshold(&s, alpha).unwrap().value();
            prop_assert_eq!(got, sort_oracle(&s, alpha));
        }

        #[test]
        fn threshold_nonincreasing_in_alpha(
            s in prop::collection::vec(0.0f64..=1.0, 1..30),
            a in 0.001f64..0.999,
            b in 0.001f64..0.999,
        ) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let q_lo = quantile_threshold(&s, lo).unwrap().value().unwrap();
            let q_hi = quantile_threshold(&s, hi).unwrap().value().unwrap();
            prop_assert!(q_hi <= q_lo);
        }

        #[test]
        fn filter_idempotent_on_masked(
            scores in prop::collection::vec(0.0f64..=1.0, 3),
            qs in prop::collection::vec(0.0f64..=1.0, 3),
        ) {
            let tv = ThresholdVector {
                thresholds: qs.iter().map(|&q| Threshold::Value(q)).collect(),
                alpha: 0.5,
                per_class_n: vec![1; 3],
                per_class_k: vec![1; 3],
            };
            let first = tv.filter(&scores).unwrap();
            let second = tv.filter(&first.masked_scores()).unwrap();
            prop_assert_eq!(first.accepted, second.accepted);
        }

        #[test]
        fn adding_low_score_matches_oracle(
            s in prop::collection::vec(0.01f64..=1.0, 1..30),
            alpha in 0.01f64..0.99,
        ) {
            let mut grown = s.clone();
            grown.push(0.0);
            prop_assert_eq!(quantile_threshold(&grown, alpha).unwrap().value(), sort_oracle(&grown, alpha));
            prop_assert_eq!(quantile_threshold(&s, alpha).unwrap().value(), sort_oracle(&s, alpha));
        }
    }
}
