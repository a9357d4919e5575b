//! Multi-label datasets, splits and single-positive training views.
//!
//! The on-disk format is a dense CSV whose first line is `#labels=K`. Every
//! following line holds `d` feature values and then `K` label bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const HEADER_PREFIX: &str = "#labels=";

/// Dense features plus a fully observed binary label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    features: Array2<f64>,
    labels: Array2<u8>,
    feature_names: Option<Vec<String>>,
    label_names: Option<Vec<String>>,
}

impl MultiLabelDataset {
    /// Validates and wraps an `N×d` feature matrix and an `N×K` label matrix.
    pub fn new(features: Array2<f64>, labels: Array2<u8>) -> Result<Self> {
        let (n, d) = features.dim();
        let (n_labels_rows, k) = labels.dim();
        if n_labels_rows != n {
            return Err(Error::Shape {
                what: "label rows",
                expected: n,
                found: n_labels_rows,
            });
        }
        if n == 0 {
            return Err(Error::Config("dataset has no instances".into()));
        }
        if d == 0 {
            return Err(Error::Config("dataset has no feature columns".into()));
        }
        if k < 2 {
            return Err(Error::Config(format!(
                "at least 2 label columns are required, found {k}"
            )));
        }
        for ((row, column), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Validation {
                    row: row + 1,
                    column: column + 1,
                    message: format!("feature value {v} is not finite"),
                });
            }
        }
        for ((row, column), &v) in labels.indexed_iter() {
            if v > 1 {
                return Err(Error::Validation {
                    row: row + 1,
                    column: d + column + 1,
                    message: format!("label value {v} is not 0 or 1"),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names: None,
            label_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Shape {
                what: "feature names",
                expected: self.n_features(),
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_labels() {
            return Err(Error::Shape {
                what: "label names",
                expected: self.n_labels(),
                found: names.len(),
            });
        }
        self.label_names = Some(names);
        Ok(self)
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, u8> {
        self.labels.view()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn label_row(&self, n: usize) -> ArrayView1<'_, u8> {
        self.labels.row(n)
    }

    /// Mean number of positive labels per instance.
    pub fn cardinality(&self) -> f64 {
        let total: usize = self.labels.iter().map(|&v| v as usize).sum();
        total as f64 / self.n_instances() as f64
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Self::new(
            self.features.select(Axis(0), rows),
            self.labels.select(Axis(0), rows),
        )?;
        out.feature_names = self.feature_names.clone();
        out.label_names = self.label_names.clone();
        Ok(out)
    }
}

/// Reads a dense CSV dataset.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

/// Parses the dense CSV format from memory.
pub fn parse_dataset(text: &str) -> Result<MultiLabelDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty file, expected `#labels=K` header".into(),
    })?;
    let k: usize = header
        .trim()
        .strip_prefix(HEADER_PREFIX)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("expected `#labels=K` header, found `{header}`"),
        })?;
    if k < 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("at least 2 labels are required, header declares {k}"),
        });
    }

    let mut width = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {w} fields, found {}", fields.len()),
            });
        }
        if w <= k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("{w} fields leave no feature columns for {k} labels"),
            });
        }
        let d = w - k;
        n += 1;
        for (col, field) in fields[..d].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("column {}: `{field}` is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Validation {
                    row: n,
                    column: col + 1,
                    message: format!("feature value `{field}` is not finite"),
                });
            }
            features.push(v);
        }
        for (col, field) in fields[d..].iter().enumerate() {
            let bit = match *field {
                "0" => 0,
                "1" => 1,
                other => {
                    if other.parse::<f64>().is_err() {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("column {}: `{other}` is not a number", d + col + 1),
                        });
                    }
                    return Err(Error::Validation {
                        row: n,
                        column: d + col + 1,
                        message: format!("label value `{other}` is not 0 or 1"),
                    });
                }
            };
            labels.push(bit);
        }
    }
    let Some(w) = width else {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    };
    let d = w - k;
    let features = Array2::from_shape_vec((n, d), features).expect("row widths checked");
    let labels = Array2::from_shape_vec((n, k), labels).expect("row widths checked");
    MultiLabelDataset::new(features, labels)
}

/// Renders the dense CSV format. Feature values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_dataset(ds: &MultiLabelDataset) -> String {
    let mut out = format!("{HEADER_PREFIX}{}\n", ds.n_labels());
    for (x, y) in ds.features.rows().into_iter().zip(ds.labels.rows()) {
        let mut first = true;
        for v in x.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        for v in y.iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &MultiLabelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_dataset(ds)).map_err(|e| Error::io(path, e))
}

/// Fractions for a train/calibration/validation/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub cal_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, cal: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_frac: train,
            cal_frac: cal,
            val_frac: val,
            test_frac: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 70/10/10/10 train/calibration/validation/test.
    pub fn with_calibration(seed: u64) -> Self {
        Self {
            train_frac: 0.7,
            cal_frac: 0.1,
            val_frac: 0.1,
            test_frac: 0.1,
            seed,
        }
    }

    /// 80/10/10 train/validation/test with no calibration split.
    pub fn without_calibration(seed: u64) -> Self {
        Self {
            train_frac: 0.8,
            cal_frac: 0.0,
            val_frac: 0.1,
            test_frac: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.cal_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be finite and nonnegative, got {fracs:?}"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Row indices of each part of a partition, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// The four parts of a split. Parts with a zero fraction are `None`.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: MultiLabelDataset,
    pub cal: Option<MultiLabelDataset>,
    pub val: Option<MultiLabelDataset>,
    pub test: Option<MultiLabelDataset>,
}

/// Seeded partition of `n` rows. Each non-train part receives
/// `floor(frac * n)` rows and train takes the remainder.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let count = |frac: f64, name: &str| -> Result<usize> {
        // Guards against products like 0.29 * 100 = 28.999999999999996.
        let c = (frac * n as f64 + 1e-9).floor() as usize;
        if frac > 0.0 && c == 0 {
            return Err(Error::Config(format!(
                "{name} fraction {frac} yields no rows out of {n}"
            )));
        }
        Ok(c)
    };
    let n_cal = count(spec.cal_frac, "calibration")?;
    let n_val = count(spec.val_frac, "validation")?;
    let n_test = count(spec.test_frac, "test")?;
    let n_train = n
        .checked_sub(n_cal + n_val + n_test)
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("no rows left for training out of {n}")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(spec.seed));
    let mut rest = order.into_iter();
    let mut take = |c: usize| rest.by_ref().take(c).collect::<Vec<_>>();
    let cal = take(n_cal);
    let val = take(n_val);
    let test = take(n_test);
    let train = take(n_train);
    Ok(SplitIndices {
        train,
        cal,
        val,
        test,
    })
}

pub fn split(ds: &MultiLabelDataset, spec: &SplitSpec) -> Result<Splits> {
    let idx = split_indices(ds.n_instances(), spec)?;
    let part = |rows: &[usize]| -> Result<Option<MultiLabelDataset>> {
        if rows.is_empty() {
            Ok(None)
        } else {
            ds.select(rows).map(Some)
        }
    };
    Ok(Splits {
        train: ds.select(&idx.train)?,
        cal: part(&idx.cal)?,
        val: part(&idx.val)?,
        test: part(&idx.test)?,
    })
}

/// Training view exposing exactly one observed positive per instance.
#[derive(Debug, Clone)]
pub struct SinglePositiveView<'a> {
    base: &'a MultiLabelDataset,
    rows: Vec<usize>,
    positive_index: Vec<usize>,
    dropped: usize,
}

impl<'a> SinglePositiveView<'a> {
    pub fn base(&self) -> &'a MultiLabelDataset {
        self.base
    }

    /// Rows of `base` kept in the view.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Zero-based observed positive for each kept row.
    pub fn positive_index(&self) -> &[usize] {
        &self.positive_index
    }

    /// Instances dropped because they had no positive label.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.base.n_labels()
    }

    /// Features of the kept rows.
    pub fn features(&self) -> Array2<f64> {
        self.base.features.select(Axis(0), &self.rows)
    }
}

/// Keeps one uniformly chosen true positive per instance.
pub fn project_single_positive(ds: &MultiLabelDataset, seed: u64) -> Result<SinglePositiveView<'_>> {
    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(ds.n_instances());
    let mut positive_index = Vec::with_capacity(ds.n_instances());
    let mut positives = Vec::with_capacity(ds.n_labels());
    for (n, y) in ds.labels.rows().into_iter().enumerate() {
        positives.clear();
        positives.extend(y.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i));
        if positives.is_empty() {
            continue;
        }
        rows.push(n);
        positive_index.push(positives[rng.random_range(0..positives.len())]);
    }
    let dropped = ds.n_instances() - rows.len();
    if rows.is_empty() {
        return Err(Error::EmptyView { dropped });
    }
    if dropped > 0 {
        info!("single-positive projection dropped {dropped} instances without positives");
    }
    Ok(SinglePositiveView {
        base: ds,
        rows,
        positive_index,
        dropped,
    })
}

/// Parameters of the synthetic multi-label generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub cardinality: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config("synthetic n and d must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Config("synthetic k must be at least 2".into()));
        }
        if !(self.cardinality >= 1.0 && self.cardinality <= self.k as f64) {
            return Err(Error::Config(format!(
                "cardinality {} must lie in [1, {}]",
                self.cardinality, self.k
            )));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} must lie in [0, 1)", self.noise)));
        }
        Ok(())
    }
}

/// Gaussian prototype mixture with multi-label structure.
///
/// Every class owns a prototype with standard normal coordinates. An
/// instance draws one label uniformly and adds each other label with
/// probability `(cardinality - 1) / (k - 1)`, so the expected cardinality is
/// exact. Its features are the sum of its labels' prototypes plus unit
/// Gaussian noise. With probability `noise` the features are replaced by a
/// draw around the prototype of a class outside the label set.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiLabelDataset> {
    spec.validate()?;
    let SyntheticSpec { n, d, k, .. } = *spec;
    let mut rng = seed::rng(spec.seed);
    let prototypes: Array2<f64> =
        Array2::from_shape_simple_fn((k, d), || StandardNormal.sample(&mut rng));
    let extra = (spec.cardinality - 1.0) / (k - 1) as f64;

    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Array2::<u8>::zeros((n, k));
    let mut outside = Vec::with_capacity(k);
    for (mut x, mut y) in features.rows_mut().into_iter().zip(labels.rows_mut()) {
        let primary = rng.random_range(0..k);
        for (i, bit) in y.iter_mut().enumerate() {
            if i == primary || rng.random_bool(extra) {
                *bit = 1;
            }
        }
        let corrupt = spec.noise > 0.0 && rng.random_bool(spec.noise);
        outside.clear();
        outside.extend((0..k).filter(|&i| y[i] == 0));
        if corrupt {
            let pool = if outside.is_empty() { (0..k).collect() } else { outside.clone() };
            let other = pool[rng.random_range(0..pool.len())];
            x.assign(&prototypes.row(other));
        } else {
            for (i, _) in y.iter().enumerate().filter(|(_, &b)| b == 1) {
                x += &prototypes.row(i);
            }
        }
        for v in x.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += e;
        }
    }
    MultiLabelDataset::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn tiny() -> MultiLabelDataset {
        MultiLabelDataset::new(
            array![[0.5, -1.0], [2.0, 3.25], [0.0, 1e-3]],
            array![[1, 0], [0, 1], [1, 1]],
        )
        .unwrap()
    }

    #[test]
    fn parses_small_file() {
        let ds = parse_dataset("#labels=2\n0.5,-1,1,0\n2,3.25,0,1\n0,0.001,1,1\n").unwrap();
        assert_eq!(ds, tiny());
        assert_eq!((ds.n_instances(), ds.n_features(), ds.n_labels()), (3, 2, 2));
    }

    #[test]
    fn label_out_of_range_names_row_and_column() {
        let err = parse_dataset("#labels=2\n0.5,1,1,0\n1,2,2,0\n").unwrap_err();
        match err {
            Error::Validation { row, column, .. } => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(parse_dataset(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_dataset("#labels=2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_rows() {
        let err = parse_dataset("#labels=2\n1,2,1,0\n1,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_dataset("#labels=2\n1,x,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("#labels=2\nNaN,1,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Validation { row: 1, column: 1, .. }), "{err}");
        assert!(parse_dataset("labels=2\n1,1,0\n").is_err());
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(MultiLabelDataset::new(array![[1.0]], array![[1, 0, 2]]).is_err());
        assert!(MultiLabelDataset::new(array![[f64::INFINITY]], array![[1, 0]]).is_err());
        assert!(MultiLabelDataset::new(array![[1.0]], array![[1]]).is_err());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let idx = split_indices(10, &SplitSpec::with_calibration(0)).unwrap();
        let sizes = (idx.train.len(), idx.cal.len(), idx.val.len(), idx.test.len());
        assert_eq!(sizes, (7, 1, 1, 1));
        let idx = split_indices(17, &SplitSpec::with_calibration(0)).unwrap();
        assert_eq!((idx.train.len(), idx.cal.len()), (14, 1));
        let idx = split_indices(10, &SplitSpec::without_calibration(0)).unwrap();
        assert!(idx.cal.is_empty());
        assert_eq!(idx.train.len(), 8);
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let spec = SplitSpec::with_calibration(0);
        assert_eq!(split_indices(10, &spec).unwrap(), split_indices(10, &spec).unwrap());
        let a = split_indices(100, &SplitSpec::with_calibration(1)).unwrap();
        let b = split_indices(100, &SplitSpec::with_calibration(2)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.test.len(), b.test.len());
    }

    #[test]
    fn split_rejects_empty_parts() {
        assert!(matches!(
            split_indices(5, &SplitSpec::with_calibration(0)),
            Err(Error::Config(_))
        ));
        assert!(SplitSpec::new(0.5, 0.5, 0.5, 0.0, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.2, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn split_materialises_rows() {
        let ds = generate_synthetic(&SyntheticSpec {
            n: 40,
            d: 3,
            k: 4,
            cardinality: 2.0,
            noise: 0.0,
            seed: 3,
        })
        .unwrap();
        let s = split(&ds, &SplitSpec::without_calibration(5)).unwrap();
        assert!(s.cal.is_none());
        assert_eq!(s.train.n_instances(), 32);
        let idx = split_indices(40, &SplitSpec::without_calibration(5)).unwrap();
        assert_eq!(s.train.features().row(0), ds.features().row(idx.train[0]));
    }

    #[test]
    fn single_positive_choices() {
        let ds = MultiLabelDataset::new(
            array![[0.0], [1.0], [2.0]],
            array![[1, 0, 0], [0, 0, 0], [0, 1, 1]],
        )
        .unwrap();
        let view = project_single_positive(&ds, 9).unwrap();
        assert_eq!(view.rows(), &[0, 2]);
        assert_eq!(view.positive_index()[0], 0);
        assert!(view.positive_index()[1] == 1 || view.positive_index()[1] == 2);
        assert_eq!(view.dropped(), 1);
        assert_eq!(view.features().column(0).to_vec(), vec![0.0, 2.0]);
    }

    #[test]
    fn all_negative_view_is_error() {
        let ds = MultiLabelDataset::new(array![[0.0], [1.0]], array![[0, 0], [0, 0]]).unwrap();
        assert!(matches!(
            project_single_positive(&ds, 0),
            Err(Error::EmptyView { dropped: 2 })
        ));
    }

    #[test]
    fn single_positive_is_uniform_across_seeds() {
        let ds = MultiLabelDataset::new(array![[0.0]], array![[1, 1, 0]]).unwrap();
        let draws = 10_000u64;
        let first = (0..draws)
            .filter(|&s| project_single_positive(&ds, s).unwrap().positive_index()[0] == 0)
            .count();
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.05, "frequency {freq}");
    }

    #[test]
    fn synthetic_cardinality_and_determinism() {
        let spec = SyntheticSpec {
            n: 1000,
            d: 8,
            k: 5,
            cardinality: 2.0,
            noise: 0.0,
            seed: 11,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let card = ds.cardinality();
        assert!((1.8..=2.2).contains(&card), "cardinality {card}");
        let again = generate_synthetic(&spec).unwrap();
        let bits = |d: &MultiLabelDataset| d.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ds), bits(&again));
        assert_eq!(ds.labels(), again.labels());
    }

    #[test]
    fn synthetic_rejects_bad_cardinality() {
        let spec = SyntheticSpec {
            n: 10,
            d: 2,
            k: 3,
            cardinality: 4.0,
            noise: 0.0,
            seed: 0,
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 4usize..400, seed in any::<u64>()) {
            let spec = SplitSpec::new(0.55, 0.15, 0.15, 0.15, seed).unwrap();
            if let Ok(idx) = split_indices(n, &spec) {
                let mut all: Vec<usize> = idx.train.iter()
                    .chain(&idx.cal).chain(&idx.val).chain(&idx.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn projection_picks_true_positives(seed in any::<u64>(), data_seed in 0u64..50) {
            let ds = generate_synthetic(&SyntheticSpec {
                n: 60, d: 2, k: 6, cardinality: 2.5, noise: 0.2, seed: data_seed,
            }).unwrap();
            let view = project_single_positive(&ds, seed).unwrap();
            for (&row, &p) in view.rows().iter().zip(view.positive_index()) {
                prop_assert_eq!(ds.labels()[[row, p]], 1);
            }
        }

        #[test]
        fn csv_round_trip(
            rows in 1usize..12,
            d in 1usize..5,
            k in 2usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = seed::rng(seed);
            let features = Array2::from_shape_simple_fn((rows, d), || {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * 10f64.powi(rng.random_range(-8..8))
            });
            let labels = Array2::from_shape_simple_fn((rows, k), || rng.random_range(0..2u8));
            let ds = MultiLabelDataset::new(features, labels).unwrap();
            let back = parse_dataset(&format_dataset(&ds)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
