use std::fmt::Write as _;

use super::{forecast_normalized, train, DecodeMode, Predictor, Persistence, ReferenceNetConfig};
use crate::codec::{self, roundtrip_value, CodecParams, NumericSeries};
use crate::error::{Error, Result};
use crate::metric::{column_distances, VisionColumns};
use crate::numeric::pairwise_sum;
use crate::pipeline::{denormalize, WindowPair};

/// Where errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Numeric series: squared and absolute differences of values.
    S,
    /// Vision tensors: per-column EMD in bin units (its square for `mse`).
    V,
}

impl Space {
    fn tag(self) -> &'static str {
        match self {
            Space::S => "S",
            Space::V => "V",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonMetrics {
    /// 1-based forecast step.
    pub step: usize,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub space: Space,
    pub mse: f64,
    pub mae: f64,
    pub per_horizon: Vec<HorizonMetrics>,
    pub windows: usize,
}

impl EvalReport {
    /// `space,horizon,mse,mae,windows`, aggregate first, then one row per step.
    pub fn to_csv(&self) -> String {
        let tag = self.space.tag();
        let mut out = String::from("space,horizon,mse,mae,windows\n");
        writeln!(out, "{tag},all,{:.6},{:.6},{}", self.mse, self.mae, self.windows).unwrap();
        for m in &self.per_horizon {
            writeln!(out, "{tag},{},{:.6},{:.6},{}", m.step, m.mse, m.mae, self.windows).unwrap();
        }
        out
    }

    fn from_step_errors(space: Space, windows: usize, steps: usize, abs_by_step: Vec<Vec<f64>>) -> Self {
        let mut per_horizon = Vec::with_capacity(steps);
        let (mut abs_total, mut sq_total, mut count) = (0.0, 0.0, 0usize);
        for (k, errs) in abs_by_step.iter().enumerate() {
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            let (a, s) = (pairwise_sum(errs), pairwise_sum(&sq));
            let n = errs.len() as f64;
            per_horizon.push(HorizonMetrics {
                step: k + 1,
                mse: s / n,
                mae: a / n,
            });
            abs_total += a;
            sq_total += s;
            count += errs.len();
        }
        EvalReport {
            space,
            mse: sq_total / count as f64,
            mae: abs_total / count as f64,
            per_horizon,
            windows,
        }
    }
}

fn check_counts(predictions: usize, targets: usize) -> Result<()> {
    if predictions != targets {
        return Err(Error::shape(format!("{targets} predictions"), predictions));
    }
    if targets == 0 {
        return Err(Error::InvalidParams("nothing to evaluate".into()));
    }
    Ok(())
}

/// MSE and MAE over every channel, step and window.
pub fn evaluate_series(predictions: &[NumericSeries], targets: &[NumericSeries]) -> Result<EvalReport> {
    check_counts(predictions.len(), targets.len())?;
    let steps = targets[0].steps();
    let mut by_step = vec![Vec::new(); steps];
    for (p, t) in predictions.iter().zip(targets) {
        if (p.channels(), p.steps()) != (t.channels(), t.steps()) || t.steps() != steps {
            return Err(Error::shape(
                format!("{}x{steps}", t.channels()),
                format!("{}x{}", p.channels(), p.steps()),
            ));
        }
        for i in 0..t.channels() {
            for (k, (a, b)) in p.channel(i).iter().zip(t.channel(i)).enumerate() {
                by_step[k].push((a - b).abs());
            }
        }
    }
    Ok(EvalReport::from_step_errors(Space::S, targets.len(), steps, by_step))
}

/// Per-column EMD (bin units) between predicted and target tensors.
pub fn evaluate_vision<A, B>(predictions: &[A], targets: &[B]) -> Result<EvalReport>
where
    A: VisionColumns,
    B: VisionColumns,
{
    check_counts(predictions.len(), targets.len())?;
    let (_, _, steps) = targets[0].dims();
    let mut by_step = vec![Vec::new(); steps];
    for (p, t) in predictions.iter().zip(targets) {
        if t.dims().2 != steps {
            return Err(Error::shape(format!("{steps} steps"), t.dims().2));
        }
        let d = column_distances(p, t)?;
        for (n, dist) in d.into_iter().enumerate() {
            by_step[n % steps].push(dist);
        }
    }
    Ok(EvalReport::from_step_errors(Space::V, targets.len(), steps, by_step))
}

/// Forecasts every pair and scores it against the pair's target in dataset units.
pub fn evaluate_predictor<P: Predictor + ?Sized>(
    predictor: &P,
    pairs: &[WindowPair],
    params: &CodecParams,
    mode: DecodeMode,
) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for pair in pairs {
        predictions.push(forecast_normalized(predictor, &pair.x, pair.norm.clone(), params, mode)?.values);
        targets.push(pair.raw_target());
    }
    evaluate_series(&predictions, &targets)
}

/// Error of the codec alone: each target replaced by `decode(encode(target))`.
/// No predictor using this codec can beat it on average per window.
pub fn quantization_floor(pairs: &[WindowPair], params: &CodecParams) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let rec = codec::decode(&codec::encode(&pair.y, params), params)?;
        predictions.push(denormalize(&rec, &pair.norm)?);
        targets.push(pair.raw_target());
    }
    evaluate_series(&predictions, &targets)
}

/// Mean `|decode(encode(v)) − v|` over `values`.
pub fn reconstruction_mae(values: &[f64], params: &CodecParams) -> f64 {
    let errs: Vec<f64> = values.iter().map(|&v| (roundtrip_value(v, params) - v).abs()).collect();
    pairwise_sum(&errs) / values.len() as f64
}

/// What a sweep evaluates at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepMode {
    /// Reconstruction error of the normalized test inputs; no forecasting.
    CodecOnly,
    Persistence,
    /// A reference network trained afresh at each grid point.
    Reference(ReferenceNetConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub ms: f64,
    pub h: usize,
    pub mae: f64,
}

/// One MAE per codec setting in `grid`.
///
/// Forecasting modes score in dataset units; `CodecOnly` scores the
/// normalized input windows, which is the space the SME bound describes.
pub fn sweep(
    train_pairs: &[WindowPair],
    test_pairs: &[WindowPair],
    grid: &[CodecParams],
    mode: &SweepMode,
    decode: DecodeMode,
) -> Result<Vec<SweepRow>> {
    if test_pairs.is_empty() {
        return Err(Error::InvalidParams("no test windows".into()));
    }
    grid.iter()
        .map(|params| {
            let mae = match mode {
                SweepMode::CodecOnly => {
                    let values: Vec<f64> = test_pairs.iter().flat_map(|p| p.x.values().iter().copied()).collect();
                    reconstruction_mae(&values, params)
                }
                SweepMode::Persistence => {
                    let horizon = test_pairs[0].y.steps();
                    evaluate_predictor(&Persistence::new(horizon)?, test_pairs, params, decode)?.mae
                }
                SweepMode::Reference(cfg) => {
                    let trained = train(train_pairs, cfg, params)?;
                    evaluate_predictor(&trained.net, test_pairs, params, decode)?.mae
                }
            };
            Ok(SweepRow {
                ms: params.ms(),
                h: params.h(),
                mae,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("ms,h,mae\n");
    for r in rows {
        writeln!(out, "{:.6},{},{:.6}", r.ms, r.h, r.mae).unwrap();
    }
    out
}
