//! Experiment harness: seeded multi-run training with learning-rate
//! selection, calibration, evaluation of unfiltered and LAMC-filtered
//! predictions, calibration-size sweeps and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::calibrate::{self, RejectionScoring, Scorer, ThresholdRecord, ThresholdVector};
use crate::data::{self, MultiLabelDataset, SplitSpec, SyntheticSpec};
use crate::error::{Error, Result, Stage};
use crate::metrics::{self, EvalInput, MetricValues};
use crate::nn::{self, Activation, AdamState, LossKind, Mlp, TrainConfig};
use crate::seed;

const STREAM_PROJECT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_CALIBRATE: u64 = 4;

/// Per-label cap on calibration positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CalCap {
    Limit(usize),
    All,
}

impl CalCap {
    pub fn limit(self) -> Option<usize> {
        match self {
            CalCap::Limit(n) => Some(n),
            CalCap::All => None,
        }
    }
}

impl std::fmt::Display for CalCap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalCap::Limit(n) => write!(f, "{n}"),
            CalCap::All => f.write_str("all"),
        }
    }
}

impl FromStr for CalCap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(CalCap::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(CalCap::Limit(n)),
            _ => Err(Error::Config(format!(
                "calibration cap must be a positive integer or `all`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for CalCap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            CalCap::Limit(n) => s.serialize_u64(n as u64),
            CalCap::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for CalCap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(n) => CalCap::from_str(&n.to_string()),
            Raw::Text(t) => CalCap::from_str(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Synthetic data shape written as `n,d,k,cardinality,noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticShape {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub cardinality: f64,
    pub noise: f64,
}

impl SyntheticShape {
    pub fn with_seed(self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n: self.n,
            d: self.d,
            k: self.k,
            cardinality: self.cardinality,
            noise: self.noise,
            seed,
        }
    }
}

impl std::fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{},{}", self.n, self.d, self.k, self.cardinality, self.noise)
    }
}

impl FromStr for SyntheticShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("synthetic spec must be `n,d,k,cardinality,noise`, got `{s}`"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [n, d, k, card, noise] = parts[..] else {
            return Err(bad());
        };
        Ok(Self {
            n: n.parse().map_err(|_| bad())?,
            d: d.parse().map_err(|_| bad())?,
            k: k.parse().map_err(|_| bad())?,
            cardinality: card.parse().map_err(|_| bad())?,
            noise: noise.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for SyntheticShape {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SyntheticShape {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossChoice {
    An,
    #[default]
    Wan,
    Bce,
}

/// How the unfiltered baselines are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Baselines and LAMC share the train/cal/val/test split and model.
    #[default]
    SameSplit,
    /// Baselines are retrained on a train/val/test split without a
    /// calibration part (the calibration share goes to train).
    Retrain,
}

/// Flat experiment configuration; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<SyntheticShape>,
    /// Seed of the synthetic generator; the base seed when unset.
    pub data_seed: Option<u64>,
    pub train_frac: f64,
    pub cal_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub loss: LossChoice,
    /// WAN negative weight; `1 / (K - 1)` when unset.
    pub gamma: Option<f64>,
    /// Also train and report an AN baseline.
    pub compare_an: bool,
    pub protocol: Protocol,
    pub lr_grid: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub alpha: f64,
    pub cal_per_label: CalCap,
    /// How rejected labels enter the ranking metrics.
    pub rejection: RejectionScoring,
    pub runs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synthetic: None,
            data_seed: None,
            train_frac: 0.7,
            cal_frac: 0.1,
            val_frac: 0.1,
            test_frac: 0.1,
            loss: LossChoice::Wan,
            gamma: None,
            compare_an: false,
            protocol: Protocol::SameSplit,
            lr_grid: vec![1e-4, 1e-3, 1e-2],
            epochs: 25,
            batch_size: 16,
            hidden_dim: nn::DEFAULT_HIDDEN,
            activation: Activation::Relu,
            alpha: 0.5,
            cal_per_label: CalCap::Limit(10),
            rejection: RejectionScoring::Demote,
            runs: 5,
            seed: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn split_spec(&self, seed: u64) -> Result<SplitSpec> {
        SplitSpec::new(self.train_frac, self.cal_frac, self.val_frac, self.test_frac, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_some() == self.synthetic.is_some() {
            return Err(Error::Config(
                "exactly one of `dataset` or `synthetic` must be set".into(),
            ));
        }
        if self.lr_grid.is_empty() {
            return Err(Error::Config("lr_grid must not be empty".into()));
        }
        if let Some(lr) = self.lr_grid.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return Err(Error::Config(format!("learning rate {lr} must be positive")));
        }
        if self.runs == 0 || self.epochs == 0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(
                "runs, epochs, batch_size and hidden_dim must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.cal_frac <= 0.0 || self.val_frac <= 0.0 || self.test_frac <= 0.0 {
            return Err(Error::Config(
                "calibration, validation and test fractions must be positive".into(),
            ));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        self.split_spec(self.seed)?;
        Ok(())
    }

    fn loss_kind(&self, choice: LossChoice, n_classes: usize) -> LossKind {
        match choice {
            LossChoice::An => LossKind::An,
            LossChoice::Bce => LossKind::Bce,
            LossChoice::Wan => match self.gamma {
                Some(gamma) => LossKind::Wan { gamma },
                None => LossKind::wan(n_classes),
            },
        }
    }

    /// Loads the configured dataset or generates the synthetic one.
    pub fn load_data(&self) -> Result<MultiLabelDataset> {
        match (&self.dataset, &self.synthetic) {
            (Some(path), None) => data::load_dataset(path),
            (None, Some(shape)) => {
                data::generate_synthetic(&shape.with_seed(self.data_seed.unwrap_or(self.seed)))
            }
            _ => Err(Error::Config(
                "exactly one of `dataset` or `synthetic` must be set".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over the runs.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub average_precision: MeanStd,
    pub coverage_error: MeanStd,
    pub ranking_loss: MeanStd,
}

impl MethodSummary {
    fn aggregate(method: &str, values: &[MetricValues]) -> Self {
        let pick = |f: fn(&MetricValues) -> f64| MeanStd::of(&values.iter().map(f).collect::<Vec<_>>());
        Self {
            method: method.to_string(),
            average_precision: pick(|m| m.average_precision),
            coverage_error: pick(|m| m.coverage_error),
            ranking_loss: pick(|m| m.ranking_loss),
        }
    }
}

/// Validation outcome of one learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTrial {
    pub lr: f64,
    pub validation_ap: Option<f64>,
    pub final_train_loss: Option<f64>,
    /// Diagnostic when training aborted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: String,
    pub chosen_lr: f64,
    pub trials: Vec<LrTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub metrics: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub split_seed: u64,
    pub dropped_training_instances: usize,
    pub selections: Vec<Selection>,
    pub methods: Vec<MethodMetrics>,
    pub thresholds: Vec<ThresholdRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub features: usize,
    pub labels: usize,
    pub cardinality: f64,
}

/// One row per calibration cap of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub cap: CalCap,
    pub summary: MethodSummary,
    /// Class-runs where the cap exceeded the available positives, so all
    /// of them were used.
    pub saturated_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
}

/// Self-describing result of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<MethodSummary>,
    pub warnings: Vec<String>,
    pub sweep: Option<SweepTable>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|m| m.method == name)
    }
}

/// Unfiltered and filtered test metrics for one scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub unfiltered: MetricValues,
    pub filtered: MetricValues,
    pub thresholds: ThresholdVector,
}

/// Metrics of `scores` on `labels` after filtering with `thresholds`.
pub fn evaluate_filtered(
    scores: &Array2<f64>,
    labels: &MultiLabelDataset,
    thresholds: &ThresholdVector,
    rejection: RejectionScoring,
) -> Result<MetricValues> {
    let masked = thresholds.rescore_matrix(scores.view(), rejection)?;
    metrics::evaluate(&EvalInput::new(masked.view(), labels.labels())?)
}

/// Post-training stage: calibrate any scorer and evaluate it raw and
/// filtered. Only scores and labels are consulted.
pub fn compare_scorer(
    scorer: &impl Scorer,
    cal: &MultiLabelDataset,
    test: &MultiLabelDataset,
    alpha: f64,
    cap: CalCap,
    rejection: RejectionScoring,
    seed: u64,
) -> Result<Comparison> {
    let thresholds = calibrate::calibrate(scorer, cal, alpha, cap.limit(), seed)?;
    let scores = scorer.score_batch(test.features())?;
    Ok(Comparison {
        unfiltered: metrics::evaluate(&EvalInput::new(scores.view(), test.labels())?)?,
        filtered: evaluate_filtered(&scores, test, &thresholds, rejection)?,
        thresholds,
    })
}

/// Model and held-out data of one run, kept for post-hoc re-calibration.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub run: usize,
    pub split_seed: u64,
    pub model: Mlp,
    pub cal: MultiLabelDataset,
    pub test: MultiLabelDataset,
    pub test_scores: Array2<f64>,
    pub dropped_training_instances: usize,
    pub selections: Vec<Selection>,
    /// Unfiltered baselines trained separately from the LAMC model
    /// (AN, or retrained baselines), evaluated on their own test split.
    pub extra_baselines: Vec<MethodMetrics>,
}

impl TrainedRun {
    pub fn calibration_seed(&self) -> u64 {
        seed::derive(self.split_seed, STREAM_CALIBRATE)
    }

    pub fn unfiltered(&self) -> Result<MetricValues> {
        metrics::evaluate(&EvalInput::new(self.test_scores.view(), self.test.labels())?)
    }

    pub fn calibrate(&self, alpha: f64, cap: CalCap) -> Result<ThresholdVector> {
        calibrate::calibrate(&self.model, &self.cal, alpha, cap.limit(), self.calibration_seed())
    }

    pub fn filtered(&self, thresholds: &ThresholdVector, rejection: RejectionScoring) -> Result<MetricValues> {
        evaluate_filtered(&self.test_scores, &self.test, thresholds, rejection)
    }
}

struct Fitted {
    model: Mlp,
    selection: Selection,
}

/// Trains one model per learning rate and keeps the one with the highest
/// validation average precision (first wins on ties).
fn fit_and_select(
    cfg: &ExperimentConfig,
    loss: LossKind,
    train: &MultiLabelDataset,
    val: &MultiLabelDataset,
    split_seed: u64,
    run: usize,
) -> Result<(Fitted, usize)> {
    let view = data::project_single_positive(train, seed::derive(split_seed, STREAM_PROJECT))
        .map_err(|e| e.in_run(run, Stage::Project))?;
    let init = Mlp::glorot(
        train.n_features(),
        cfg.hidden_dim,
        train.n_labels(),
        seed::derive(split_seed, STREAM_INIT),
    )
    .with_activation(cfg.activation);
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: seed::derive(split_seed, STREAM_SHUFFLE),
    };

    let outcomes: Vec<(LrTrial, Option<Mlp>)> = cfg
        .lr_grid
        .par_iter()
        .map(|&lr| {
            let mut model = init.clone();
            let mut adam = AdamState::new(&model, lr);
            let trained = nn::train(&mut model, &view, loss, &mut adam, &train_cfg).and_then(|trace| {
                let scores = model.forward_batch(val.features())?;
                let ap = metrics::average_precision(&EvalInput::new(scores.view(), val.labels())?)?;
                Ok((trace, ap))
            });
            match trained {
                Ok((trace, ap)) => (
                    LrTrial {
                        lr,
                        validation_ap: Some(ap),
                        final_train_loss: trace.last().copied(),
                        error: None,
                    },
                    Some(model),
                ),
                Err(e) => {
                    warn!("run {run}, {} lr {lr}: {e}", loss.name());
                    (
                        LrTrial {
                            lr,
                            validation_ap: None,
                            final_train_loss: None,
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for (i, (trial, _)) in outcomes.iter().enumerate() {
        if let Some(ap) = trial.validation_ap {
            if best.is_none_or(|(b, _)| ap > b) {
                best = Some((ap, i));
            }
        }
    }
    let Some((_, best_idx)) = best else {
        let reasons: Vec<String> = outcomes
            .iter()
            .map(|(t, _)| format!("lr {}: {}", t.lr, t.error.as_deref().unwrap_or("unknown")))
            .collect();
        return Err(Error::Config(format!(
            "every learning rate failed for {} ({})",
            loss.name(),
            reasons.join("; ")
        ))
        .in_run(run, Stage::Train));
    };
    let chosen_lr = outcomes[best_idx].0.lr;
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut model = None;
    for (i, (trial, m)) in outcomes.into_iter().enumerate() {
        if i == best_idx {
            model = m;
        }
        trials.push(trial);
    }
    Ok((
        Fitted {
            model: model.expect("selected trial has a model"),
            selection: Selection {
                model: loss.name().to_string(),
                chosen_lr,
                trials,
            },
        },
        view.dropped(),
    ))
}

fn required<'a>(part: &'a Option<MultiLabelDataset>, name: &str, run: usize) -> Result<&'a MultiLabelDataset> {
    part.as_ref()
        .ok_or_else(|| Error::Config(format!("{name} split is empty")).in_run(run, Stage::Split))
}

fn train_one_run(cfg: &ExperimentConfig, ds: &MultiLabelDataset, run: usize) -> Result<TrainedRun> {
    let split_seed = cfg.seed.wrapping_add(run as u64);
    let spec = cfg.split_spec(split_seed).map_err(|e| e.in_run(run, Stage::Split))?;
    let splits = data::split(ds, &spec).map_err(|e| e.in_run(run, Stage::Split))?;
    let cal = required(&splits.cal, "calibration", run)?;
    let val = required(&splits.val, "validation", run)?;
    let test = required(&splits.test, "test", run)?;
    let k = ds.n_labels();

    let primary = cfg.loss_kind(cfg.loss, k);
    let (fitted, dropped) = fit_and_select(cfg, primary, &splits.train, val, split_seed, run)?;
    let mut selections = vec![fitted.selection];
    let test_scores = fitted
        .model
        .forward_batch(test.features())
        .map_err(|e| e.in_run(run, Stage::Evaluate))?;

    let mut extra_baselines = Vec::new();
    let mut baseline_losses = Vec::new();
    if cfg.protocol == Protocol::Retrain {
        baseline_losses.push(primary);
    }
    if cfg.compare_an && primary != LossKind::An {
        baseline_losses.push(LossKind::An);
    }
    if !baseline_losses.is_empty() {
        let (b_train, b_val, b_test) = match cfg.protocol {
            Protocol::SameSplit => (splits.train.clone(), val.clone(), test.clone()),
            Protocol::Retrain => {
                let spec = SplitSpec::new(
                    cfg.train_frac + cfg.cal_frac,
                    0.0,
                    cfg.val_frac,
                    cfg.test_frac,
                    split_seed,
                )
                .map_err(|e| e.in_run(run, Stage::Split))?;
                let s = data::split(ds, &spec).map_err(|e| e.in_run(run, Stage::Split))?;
                let v = required(&s.val, "validation", run)?.clone();
                let t = required(&s.test, "test", run)?.clone();
                (s.train, v, t)
            }
        };
        for loss in baseline_losses {
            let (fitted, _) = fit_and_select(cfg, loss, &b_train, &b_val, split_seed, run)?;
            let metrics = fitted
                .model
                .forward_batch(b_test.features())
                .and_then(|s| metrics::evaluate(&EvalInput::new(s.view(), b_test.labels())?))
                .map_err(|e| e.in_run(run, Stage::Evaluate))?;
            let suffix = if cfg.protocol == Protocol::Retrain { " (80/10/10)" } else { "" };
            extra_baselines.push(MethodMetrics {
                method: format!("{}{suffix}", loss.name()),
                metrics,
            });
            let mut sel = fitted.selection;
            sel.model.push_str(suffix);
            selections.push(sel);
        }
    }

    info!("run {run}: trained, lr {}", selections[0].chosen_lr);
    Ok(TrainedRun {
        run,
        split_seed,
        model: fitted.model,
        cal: cal.clone(),
        test: test.clone(),
        test_scores,
        dropped_training_instances: dropped,
        selections,
        extra_baselines,
    })
}

/// Trains every run of the configuration. Runs are independent and may be
/// trained in parallel; results come back in run order.
pub fn train_runs(cfg: &ExperimentConfig, ds: &MultiLabelDataset) -> Result<Vec<TrainedRun>> {
    cfg.validate()?;
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| train_one_run(cfg, ds, run))
        .collect()
}

fn method_names(cfg: &ExperimentConfig, n_classes: usize) -> (String, String) {
    let name = cfg.loss_kind(cfg.loss, n_classes).name();
    (name.to_string(), format!("{name}+LAMC"))
}

fn dataset_summary(ds: &MultiLabelDataset) -> DatasetSummary {
    DatasetSummary {
        instances: ds.n_instances(),
        features: ds.n_features(),
        labels: ds.n_labels(),
        cardinality: ds.cardinality(),
    }
}

/// Builds the report from already trained runs at the configured cap.
pub fn report_from_runs(
    cfg: &ExperimentConfig,
    ds: &MultiLabelDataset,
    trained: &[TrainedRun],
) -> Result<EvalReport> {
    let (raw_name, lamc_name) = method_names(cfg, ds.n_labels());
    let mut runs = Vec::with_capacity(trained.len());
    let mut warnings = Vec::new();
    for t in trained {
        let thresholds = t
            .calibrate(cfg.alpha, cfg.cal_per_label)
            .map_err(|e| e.in_run(t.run, Stage::Calibrate))?;
        let empty = thresholds.per_class_n.iter().filter(|&&n| n == 0).count();
        if empty > 0 {
            warnings.push(format!(
                "run {}: {empty} classes had no calibration positives and accept everything",
                t.run
            ));
        }
        for sel in &t.selections {
            for trial in sel.trials.iter().filter(|tr| tr.error.is_some()) {
                warnings.push(format!(
                    "run {}: {} training at lr {} aborted: {}",
                    t.run,
                    sel.model,
                    trial.lr,
                    trial.error.as_deref().unwrap_or_default()
                ));
            }
        }
        let unfiltered = t.unfiltered().map_err(|e| e.in_run(t.run, Stage::Evaluate))?;
        let filtered = t.filtered(&thresholds, cfg.rejection).map_err(|e| e.in_run(t.run, Stage::Evaluate))?;
        let mut methods = vec![
            MethodMetrics {
                method: raw_name.clone(),
                metrics: unfiltered,
            },
            MethodMetrics {
                method: lamc_name.clone(),
                metrics: filtered,
            },
        ];
        if cfg.protocol == Protocol::Retrain {
            // The shared-split unfiltered column is replaced by the retrained one.
            methods[0].method = format!("{raw_name} (same split)");
        }
        methods.extend(t.extra_baselines.iter().cloned());
        runs.push(RunRecord {
            run: t.run,
            split_seed: t.split_seed,
            dropped_training_instances: t.dropped_training_instances,
            selections: t.selections.clone(),
            methods,
            thresholds: thresholds.records(ds.label_names()),
        });
    }
    let summary = summarize(&runs);
    Ok(EvalReport {
        config: cfg.clone(),
        dataset: dataset_summary(ds),
        runs,
        summary,
        warnings,
        sweep: None,
    })
}

fn summarize(runs: &[RunRecord]) -> Vec<MethodSummary> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .methods
        .iter()
        .map(|m| {
            let values: Vec<MetricValues> = runs
                .iter()
                .filter_map(|r| r.methods.iter().find(|x| x.method == m.method))
                .map(|x| x.metrics)
                .collect();
            MethodSummary::aggregate(&m.method, &values)
        })
        .collect()
}

/// Full experiment: train, select, calibrate, evaluate, aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let ds = cfg.load_data().map_err(|e| e.in_run(0, Stage::Load))?;
    let trained = train_runs(cfg, &ds)?;
    report_from_runs(cfg, &ds, &trained)
}

/// Re-calibrates the trained runs at every cap and aggregates LAMC metrics.
pub fn sweep_trained(cfg: &ExperimentConfig, trained: &[TrainedRun], caps: &[CalCap]) -> Result<SweepTable> {
    if caps.is_empty() {
        return Err(Error::Config("sweep needs at least one cap".into()));
    }
    let lamc_name = format!("{}+LAMC", cfg.loss_kind(cfg.loss, trained.first().map_or(2, |t| t.model.n_classes())).name());
    let mut cells = Vec::with_capacity(caps.len());
    for &cap in caps {
        let mut values = Vec::with_capacity(trained.len());
        let mut saturated = 0;
        for t in trained {
            let thresholds = t
                .calibrate(cfg.alpha, cap)
                .map_err(|e| e.in_run(t.run, Stage::Calibrate))?;
            if let CalCap::Limit(n) = cap {
                let sets = calibrate::collect_model_scores(&t.model, &t.cal, None, 0)
                    .map_err(|e| e.in_run(t.run, Stage::Calibrate))?;
                saturated += sets.available.iter().filter(|&&a| a < n).count();
            }
            values.push(t.filtered(&thresholds, cfg.rejection).map_err(|e| e.in_run(t.run, Stage::Evaluate))?);
        }
        cells.push(SweepCell {
            cap,
            summary: MethodSummary::aggregate(&lamc_name, &values),
            saturated_classes: saturated,
        });
    }
    Ok(SweepTable { cells })
}

/// Calibration-size sweep reusing one trained model per run.
pub fn sweep_calibration_size(cfg: &ExperimentConfig, caps: &[CalCap]) -> Result<SweepTable> {
    run_with_sweep(cfg, caps).map(|r| r.sweep.expect("sweep requested"))
}

/// Experiment report with a calibration-size sweep attached.
pub fn run_with_sweep(cfg: &ExperimentConfig, caps: &[CalCap]) -> Result<EvalReport> {
    cfg.validate()?;
    let ds = cfg.load_data().map_err(|e| e.in_run(0, Stage::Load))?;
    let trained = train_runs(cfg, &ds)?;
    let mut report = report_from_runs(cfg, &ds, &trained)?;
    report.sweep = Some(sweep_trained(cfg, &trained, caps)?);
    Ok(report)
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const SWEEP_DATA: &str = "sweep.tsv";

/// Mean ± std table, one method per row.
pub fn format_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let d = &report.dataset;
    writeln!(
        out,
        "dataset: {} instances, {} features, {} labels, cardinality {:.3}",
        d.instances, d.features, d.labels, d.cardinality
    )
    .unwrap();
    writeln!(
        out,
        "runs: {}, alpha: {}, calibration per label: {}, rejected labels: {}\n",
        report.config.runs,
        report.config.alpha,
        report.config.cal_per_label,
        match report.config.rejection {
            RejectionScoring::Demote => "demoted",
            RejectionScoring::Zero => "zeroed",
        }
    )
    .unwrap();
    let width = report.summary.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
    writeln!(
        out,
        "{:<width$}  {:<17}  {:<17}  {:<17}",
        "method", "average precision", "coverage error", "ranking loss"
    )
    .unwrap();
    for m in &report.summary {
        writeln!(
            out,
            "{:<width$}  {:<17}  {:<17}  {:<17}",
            m.method,
            m.average_precision.to_string(),
            m.coverage_error.to_string(),
            m.ranking_loss.to_string()
        )
        .unwrap();
    }
    if let Some(sweep) = &report.sweep {
        writeln!(out, "\ncalibration-size sweep").unwrap();
        writeln!(
            out,
            "{:<6}  {:<17}  {:<17}  {:<17}  saturated",
            "cap", "average precision", "coverage error", "ranking loss"
        )
        .unwrap();
        for c in &sweep.cells {
            writeln!(
                out,
                "{:<6}  {:<17}  {:<17}  {:<17}  {}",
                c.cap.to_string(),
                c.summary.average_precision.to_string(),
                c.summary.coverage_error.to_string(),
                c.summary.ranking_loss.to_string(),
                c.saturated_classes
            )
            .unwrap();
        }
    }
    if !report.warnings.is_empty() {
        writeln!(out, "\nwarnings:").unwrap();
        for w in &report.warnings {
            writeln!(out, "  {w}").unwrap();
        }
    }
    out
}

/// Plot data: `cap\tmetric\tmean\tstd`, one row per (cap, metric).
pub fn format_sweep(sweep: &SweepTable) -> String {
    let mut out = String::from("cap\tmetric\tmean\tstd\n");
    for c in &sweep.cells {
        for (name, v) in [
            ("average_precision", c.summary.average_precision),
            ("coverage_error", c.summary.coverage_error),
            ("ranking_loss", c.summary.ranking_loss),
        ] {
            writeln!(out, "{}\t{name}\t{}\t{}", c.cap, v.mean, v.std).unwrap();
        }
    }
    out
}

pub fn report_json(report: &EvalReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Serialization(e.to_string()))
}

/// Writes the JSON report, the text table and, for sweeps, the plot data.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        (dir.join(REPORT_JSON), report_json(report)?),
        (dir.join(REPORT_TEXT), format_table(report)),
    ];
    if let Some(sweep) = &report.sweep {
        files.push((dir.join(SWEEP_DATA), format_sweep(sweep)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, text) in files {
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}
