//! Least-ambiguous multi-label classification (LAMC).
//!
//! Train a multi-label scorer from single-positive supervision, calibrate
//! one confidence threshold per class on a fully labelled held-out split,
//! and reject individual label predictions that fall at or below their
//! class threshold.
//!
//! The crate is organised as a pipeline:
//!
//! - [`data`]: dense CSV ingestion, seeded splitting, single-positive
//!   projection and a synthetic generator.
//! - [`nn`]: a two-layer perceptron with sigmoid heads, Adam, and the
//!   BCE / assume-negative / weak-assume-negative losses.
//! - [`calibrate`]: per-class order-statistic thresholds and label-wise
//!   filtering. Consumes scores only, so any [`calibrate::Scorer`] works.
//! - [`metrics`]: average precision, coverage error and ranking loss.
//! - [`harness`]: multi-run experiments, calibration-size sweeps and
//!   report emission.

pub mod calibrate;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
mod seed;

pub use calibrate::{FilteredPrediction, RejectionScoring, Scorer, Threshold, ThresholdVector};
pub use data::{MultiLabelDataset, SinglePositiveView, SplitSpec, Splits, SyntheticSpec};
pub use error::{Error, Result};
pub use harness::{EvalReport, ExperimentConfig};
pub use metrics::{EvalInput, MetricValues};
pub use nn::{AdamState, LossKind, Mlp};
