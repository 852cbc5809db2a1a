//! Zero-shot relation extraction by embedding alignment.
//!
//! A sentence head maps a sentence and its two entity spans to a vector `â`;
//! training pulls `â` toward the fixed attribute vector of the sentence's
//! relation (hinge ranking against in-batch negatives) while also classifying
//! the seen relations. Relations never seen in training are predicted by
//! nearest-neighbour search over their attribute vectors.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix it to `f64`, which the gradient checks assume.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod ddouble;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod head;
pub mod inference;
pub mod loss;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use dataset::{Instance, RelationMeta, RelationTable, Span, SplitSpec, SyntheticConfig};
pub use encoding::{DescriptionEncoder, DescriptionMode, HiddenStates, TokenEmbeddings, Vocab};
pub use error::{Error, Result};
pub use evaluation::{ExperimentReport, Metrics, Protocol, SweepAxis};
pub use inference::{DistKind, Prediction, RelationIndex};
pub use model::{ModelConfig, Resources};
pub use optim::{GradCheckConfig, Preset, TrainConfig, TrainHistory};
pub use scalar::Scalar;

pub type Matrix = tensor::Matrix<f64>;
pub type Model = model::Model<f64>;
pub type HeadParams = head::HeadParams<f64>;
pub type EncoderParams = encoding::EncoderParams<f64>;
pub type EncodedSentence = encoding::EncodedSentence<f64>;
pub type ForwardTrace = head::ForwardTrace<f64>;
pub type Batch = loss::Batch<f64>;
pub type LossReport = loss::LossReport<f64>;
pub type AdamState = optim::AdamState<f64>;
pub type Index = inference::RelationIndex<f64>;

pub type Model32 = model::Model<f32>;
