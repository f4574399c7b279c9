//! Forecasting in the binary vision space.
//!
//! Inputs are normalized with their own statistics, encoded, passed through a
//! [`Predictor`] that emits one distribution per output column, hardened,
//! decoded and mapped back to dataset units.

mod checkpoint;
mod eval;
mod reference;

pub use checkpoint::{Checkpoint, MVCK_MAGIC, MVCK_VERSION};
pub use eval::{
    evaluate_predictor, evaluate_series, evaluate_vision, quantization_floor, reconstruction_mae, sweep, sweep_csv,
    EvalReport, HorizonMetrics, Space, SweepMode, SweepRow,
};
pub use reference::{train, NetShape, ReferenceNet, ReferenceNetConfig, TrainOutcome, TrainingSample};

use crate::codec::{self, BinaryVisionTensor, CodecParams, NumericSeries, SoftVisionTensor};
use crate::error::{Error, Result};
use crate::pipeline::{denormalize, normalize_pair, ChannelNorm};

/// A model mapping an encoded input window (`c × h × lookback`) to one
/// distribution per output column (`c × h × horizon`).
pub trait Predictor {
    fn horizon(&self) -> usize;

    fn forward(&self, vx: &BinaryVisionTensor) -> Result<SoftVisionTensor>;

    /// Flat trainable parameters; empty for fixed predictors.
    fn parameters(&self) -> &[f64] {
        &[]
    }
}

/// Repeats the last observed column over the whole horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Persistence {
    horizon: usize,
}

impl Persistence {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParams("horizon must be >= 1".into()));
        }
        Ok(Persistence { horizon })
    }
}

impl Predictor for Persistence {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn forward(&self, vx: &BinaryVisionTensor) -> Result<SoftVisionTensor> {
        let (c, h, t) = vx.shape();
        if t == 0 {
            return Err(Error::InvalidParams("persistence needs at least one input step".into()));
        }
        let hot = (0..c)
            .flat_map(|i| std::iter::repeat_n(vx.hot_bin(i, t - 1), self.horizon))
            .collect();
        let hard = BinaryVisionTensor::from_hot_bins(c, h, self.horizon, hot)?;
        Ok(SoftVisionTensor::from(&hard))
    }
}

/// How soft output columns become values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Argmax column, then bin midpoint.
    #[default]
    Argmax,
    /// Expected bin midpoint under the column distribution. Experimental.
    Expectation,
}

/// A forecast for one input window.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Forecast in dataset units.
    pub values: NumericSeries,
    /// Forecast in the input window's normalized units.
    pub normalized: NumericSeries,
    /// Hardened predictor output.
    pub hard: BinaryVisionTensor,
    pub norm: Vec<ChannelNorm>,
}

/// Runs the full chain on a raw input window of `lookback` steps.
pub fn predict<P: Predictor + ?Sized>(
    predictor: &P,
    window: &NumericSeries,
    lookback: usize,
    params: &CodecParams,
    mode: DecodeMode,
) -> Result<Forecast> {
    if window.steps() != lookback {
        return Err(Error::shape(
            format!("input window of {lookback} steps"),
            format!("{} steps", window.steps()),
        ));
    }
    let (x, _, norm) = normalize_pair(window, None)?;
    forecast_normalized(predictor, &x, norm, params, mode)
}

/// Like [`predict`] for an input that is already normalized with `norm`.
pub fn forecast_normalized<P: Predictor + ?Sized>(
    predictor: &P,
    x: &NumericSeries,
    norm: Vec<ChannelNorm>,
    params: &CodecParams,
    mode: DecodeMode,
) -> Result<Forecast> {
    let vx = codec::encode(x, params);
    let soft = predictor.forward(&vx)?;
    let hard = codec::harden(&soft);
    let normalized = match mode {
        DecodeMode::Argmax => codec::decode(&hard, params)?,
        DecodeMode::Expectation => codec::decode_expected(&soft, params)?,
    };
    let values = denormalize(&normalized, &norm)?;
    Ok(Forecast {
        values,
        normalized,
        hard,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_repeats_last_column() {
        let vx = BinaryVisionTensor::from_hot_bins(1, 8, 3, vec![1, 2, 5]).unwrap();
        let out = Persistence::new(4).unwrap().forward(&vx).unwrap();
        assert_eq!(out.shape(), (1, 8, 4));
        let hard = codec::harden(&out);
        assert!((0..4).all(|k| hard.hot_bin(0, k) == 5));
        assert_eq!(out, SoftVisionTensor::from(&hard));
    }

    #[test]
    fn persistence_rejects_degenerate() {
        assert!(Persistence::new(0).is_err());
        let empty = BinaryVisionTensor::from_hot_bins(1, 8, 0, vec![]).unwrap();
        assert!(Persistence::new(2).unwrap().forward(&empty).is_err());
    }

    #[test]
    fn persistence_constant_window_has_zero_loss() {
        let params = CodecParams::new(16, 2.5).unwrap();
        let x = NumericSeries::new(1, 6, vec![0.3; 6]).unwrap();
        let vx = codec::encode(&x, &params);
        let vy = codec::encode(&NumericSeries::new(1, 3, vec![0.3; 3]).unwrap(), &params);
        let out = Persistence::new(3).unwrap().forward(&vx).unwrap();
        assert_eq!(crate::metric::emd_loss_and_grad(&out, &vy).unwrap().loss, 0.0);
    }

    #[test]
    fn predict_constant_window() {
        let params = CodecParams::new(20, 2.0).unwrap();
        let window = NumericSeries::new(1, 5, vec![4.2; 5]).unwrap();
        let f = predict(&Persistence::new(3).unwrap(), &window, 5, &params, DecodeMode::Argmax).unwrap();
        // the normalized window is all zeros; bin midpoint error is at most ms/h in normalized units
        let tol = params.ms() / params.h() as f64 * f.norm[0].std;
        for v in f.values.values() {
            assert!((v - 4.2).abs() <= tol + 1e-12);
        }
    }

    #[test]
    fn predict_rejects_wrong_length() {
        let params = CodecParams::new(20, 2.0).unwrap();
        let window = NumericSeries::new(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(predict(&Persistence::new(3).unwrap(), &window, 5, &params, DecodeMode::Argmax).is_err());
    }

    #[test]
    fn reencoded_forecast_matches_hardened_output() {
        let params = CodecParams::new(12, 2.0).unwrap();
        let window = NumericSeries::new(2, 5, vec![1.0, 3.0, 2.0, 5.0, 4.0, -1.0, -2.0, 0.5, 0.1, 0.0]).unwrap();
        let f = predict(&Persistence::new(2).unwrap(), &window, 5, &params, DecodeMode::Argmax).unwrap();
        // normalize with the input window's statistics, not the forecast's own
        let values = (0..2)
            .flat_map(|i| f.values.channel(i).iter().map(move |&v| (v, i)))
            .map(|(v, i)| f.norm[i].apply(v))
            .collect();
        let back = NumericSeries::new(2, 2, values).unwrap();
        assert_eq!(codec::encode(&back, &params), f.hard);
    }
}
