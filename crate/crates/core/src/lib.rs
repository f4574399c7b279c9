//! Binary machine-vision representation of time series.
//!
//! - [`codec`]: the one-hot vision space and the value ↔ bin mapping
//! - [`metric`]: per-column 1-D earth mover's distance, as metric and loss
//! - [`sme`]: the quantization error bound, its optimal scale, and Monte-Carlo checks
//! - [`pipeline`]: CSV ingestion, splits and in-window normalized sliding windows
//! - [`forecaster`]: predictors, training, forecasting and evaluation

pub mod codec;
pub mod error;
pub mod forecaster;
pub mod metric;
pub mod numeric;
pub mod pipeline;
pub mod sme;
pub mod synthetic;

pub use codec::{BinaryVisionTensor, CodecParams, NumericSeries, SoftVisionTensor};
pub use error::{Error, Result};
pub use forecaster::{DecodeMode, Forecast, Persistence, Predictor, ReferenceNet, ReferenceNetConfig};
pub use pipeline::{Dataset, Split, SplitRatios, WindowPair, WindowSpec};
