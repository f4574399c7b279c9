//! Reference predictor: a two-layer network applied to each channel.
//!
//! Per channel, the `h × lookback` one-hot grid is flattened, passed through
//! an affine layer of width `hidden`, a rectifier, a second affine layer of
//! width `h × horizon`, and a softmax over each output column.
//!
//! Parameter layout (flat, in this order):
//! - `w1`: `h·lookback × hidden`, input-major (row `input` holds the weights
//!   from that input to every hidden unit)
//! - `b1`: `hidden`
//! - `w2`: `h·horizon × hidden`, output-major
//! - `b2`: `h·horizon`

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Predictor;
use crate::codec::{self, BinaryVisionTensor, CodecParams, SoftVisionTensor};
use crate::error::{Error, Result};
use crate::metric::emd_loss_and_grad;
use crate::numeric::pairwise_sum;
use crate::pipeline::WindowPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub height: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: usize,
}

impl NetShape {
    fn inputs(&self) -> usize {
        self.height * self.lookback
    }

    fn outputs(&self) -> usize {
        self.height * self.horizon
    }

    pub fn parameter_count(&self) -> usize {
        self.inputs() * self.hidden + self.hidden + self.outputs() * self.hidden + self.outputs()
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.inputs() * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs() * self.hidden;
        [w1, b1, w2, b2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceNetConfig {
    pub hidden: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplier on the `1/√fan_in` initialization half-width.
    pub init_scale: f64,
}

impl ReferenceNetConfig {
    pub fn new(horizon: usize) -> Self {
        ReferenceNetConfig {
            hidden: 128,
            horizon,
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            init_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.horizon == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams(
                "hidden, horizon, epochs and batch size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "init scale must be finite and >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceNet {
    shape: NetShape,
    theta: Vec<f64>,
}

/// Activations of one channel, kept for the backward pass.
struct ChannelPass {
    active: Vec<usize>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl ReferenceNet {
    pub fn from_parameters(shape: NetShape, theta: Vec<f64>) -> Result<Self> {
        if shape.height == 0 || shape.lookback == 0 || shape.horizon == 0 || shape.hidden == 0 {
            return Err(Error::InvalidParams(format!("degenerate network shape {shape:?}")));
        }
        if theta.len() != shape.parameter_count() {
            return Err(Error::shape(
                format!("{} parameters", shape.parameter_count()),
                theta.len(),
            ));
        }
        Ok(ReferenceNet { shape, theta })
    }

    pub fn zeros(shape: NetShape) -> Result<Self> {
        Self::from_parameters(shape, vec![0.0; shape.parameter_count()])
    }

    /// Weights uniform in `±scale/√fan_in`, biases zero.
    pub fn initialize(shape: NetShape, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let [w1, b1, w2, b2] = shape.offsets();
        let s1 = scale / (shape.inputs() as f64).sqrt();
        let s2 = scale / (shape.hidden as f64).sqrt();
        for w in &mut net.theta[w1..b1] {
            *w = rng.random_range(-1.0..=1.0) * s1;
        }
        for w in &mut net.theta[w2..b2] {
            *w = rng.random_range(-1.0..=1.0) * s2;
        }
        Ok(net)
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn check_input(&self, vx: &BinaryVisionTensor) -> Result<()> {
        let (_, h, t) = vx.shape();
        if h != self.shape.height || t != self.shape.lookback {
            return Err(Error::shape(
                format!("input of height {} and {} steps", self.shape.height, self.shape.lookback),
                format!("height {h}, {t} steps"),
            ));
        }
        Ok(())
    }

    fn channel_forward(&self, vx: &BinaryVisionTensor, i: usize) -> ChannelPass {
        let NetShape {
            height: h,
            lookback,
            horizon,
            hidden: width,
        } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        let active: Vec<usize> = (0..lookback).map(|k| k * h + vx.hot_bin(i, k) - 1).collect();

        let mut pre = self.theta[b1..b1 + width].to_vec();
        for &input in &active {
            let row = &self.theta[w1 + input * width..w1 + (input + 1) * width];
            for (z, w) in pre.iter_mut().zip(row) {
                *z += w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();

        let mut probs = vec![0.0; h * horizon];
        for (o, logit) in probs.iter_mut().enumerate() {
            let row = &self.theta[w2 + o * width..w2 + (o + 1) * width];
            *logit = self.theta[b2 + o] + row.iter().zip(&hidden).map(|(w, r)| w * r).sum::<f64>();
        }
        for col in probs.chunks_exact_mut(h) {
            softmax_in_place(col);
        }
        ChannelPass {
            active,
            pre,
            hidden,
            probs,
        }
    }

    fn forward_cached(&self, vx: &BinaryVisionTensor) -> Result<(SoftVisionTensor, Vec<ChannelPass>)> {
        self.check_input(vx)?;
        let passes: Vec<ChannelPass> = (0..vx.channels()).map(|i| self.channel_forward(vx, i)).collect();
        let probs = passes.iter().flat_map(|p| p.probs.iter().copied()).collect();
        let soft = SoftVisionTensor::from_columns(vx.channels(), self.shape.height, self.shape.horizon, probs)?;
        Ok((soft, passes))
    }

    /// Mean EMD loss of one sample and its gradient, accumulated into `grad`.
    fn accumulate(&self, sample: &TrainingSample, weight: f64, grad: &mut [f64]) -> Result<f64> {
        let (soft, passes) = self.forward_cached(&sample.vx)?;
        let report = emd_loss_and_grad(&soft, &sample.vy)?;
        let NetShape {
            height: h,
            hidden: width,
            ..
        } = self.shape;
        let [w1, b1, w2, b2] = self.shape.offsets();
        let per_channel = self.shape.outputs();
        let mut d_logits = vec![0.0; per_channel];
        let mut d_hidden = vec![0.0; width];

        for (i, pass) in passes.iter().enumerate() {
            let g = &report.gradient[i * per_channel..(i + 1) * per_channel];
            for ((dz, p), g) in d_logits
                .chunks_exact_mut(h)
                .zip(pass.probs.chunks_exact(h))
                .zip(g.chunks_exact(h))
            {
                let dot: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
                for j in 0..h {
                    dz[j] = weight * p[j] * (g[j] - dot);
                }
            }

            d_hidden.fill(0.0);
            for (o, &dz) in d_logits.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                grad[b2 + o] += dz;
                let base = w2 + o * width;
                for a in 0..width {
                    grad[base + a] += dz * pass.hidden[a];
                    d_hidden[a] += dz * self.theta[base + a];
                }
            }
            for (a, dr) in d_hidden.iter_mut().enumerate() {
                if pass.pre[a] <= 0.0 {
                    *dr = 0.0;
                }
            }
            for (gb, dr) in grad[b1..b1 + width].iter_mut().zip(&d_hidden) {
                *gb += dr;
            }
            for &input in &pass.active {
                let row = &mut grad[w1 + input * width..w1 + (input + 1) * width];
                for (gw, dr) in row.iter_mut().zip(&d_hidden) {
                    *gw += dr;
                }
            }
        }
        Ok(report.loss)
    }

    /// Mean loss over `samples` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, samples: &[TrainingSample]) -> Result<(f64, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::InvalidParams("no samples".into()));
        }
        let weight = 1.0 / samples.len() as f64;
        let mut grad = vec![0.0; self.theta.len()];
        let mut losses = Vec::with_capacity(samples.len());
        for s in samples {
            losses.push(self.accumulate(s, weight, &mut grad)?);
        }
        Ok((pairwise_sum(&losses) * weight, grad))
    }

    /// Mean loss over `samples`.
    pub fn loss(&self, samples: &[TrainingSample]) -> Result<f64> {
        let losses = samples
            .iter()
            .map(|s| Ok(emd_loss_and_grad(&self.forward(&s.vx)?, &s.vy)?.loss))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&losses) / samples.len() as f64)
    }
}

fn softmax_in_place(col: &mut [f64]) {
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in col.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in col.iter_mut() {
        *v /= total;
    }
}

impl Predictor for ReferenceNet {
    fn horizon(&self) -> usize {
        self.shape.horizon
    }

    fn forward(&self, vx: &BinaryVisionTensor) -> Result<SoftVisionTensor> {
        self.forward_cached(vx).map(|(soft, _)| soft)
    }

    fn parameters(&self) -> &[f64] {
        &self.theta
    }
}

/// An encoded (input, target) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub vx: BinaryVisionTensor,
    pub vy: BinaryVisionTensor,
}

impl TrainingSample {
    pub fn encode(pair: &WindowPair, params: &CodecParams) -> Self {
        TrainingSample {
            vx: codec::encode(&pair.x, params),
            vy: codec::encode(&pair.y, params),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ReferenceNet,
    /// Mean training loss of each epoch, measured on the minibatches as they were visited.
    pub loss_curve: Vec<f64>,
}

/// Trains a fresh reference network by minibatch gradient descent on the EMD loss.
pub fn train<I>(pairs: I, cfg: &ReferenceNetConfig, params: &CodecParams) -> Result<TrainOutcome>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<WindowPair>,
{
    use std::borrow::Borrow;

    cfg.validate()?;
    let samples: Vec<TrainingSample> = pairs
        .into_iter()
        .map(|p| TrainingSample::encode(p.borrow(), params))
        .collect();
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidParams("empty training stream".into()))?;
    if first.vy.steps() != cfg.horizon {
        return Err(Error::shape(
            format!("targets of {} steps", cfg.horizon),
            format!("{} steps", first.vy.steps()),
        ));
    }
    let shape = NetShape {
        height: params.h(),
        lookback: first.vx.steps(),
        horizon: cfg.horizon,
        hidden: cfg.hidden,
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut net = ReferenceNet::initialize(shape, cfg.init_scale, &mut init_rng)?;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = vec![0.0; samples.len()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; net.theta.len()];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            let weight = 1.0 / batch.len() as f64;
            for &n in batch {
                losses[n] = net
                    .accumulate(&samples[n], weight, &mut grad)
                    .map_err(|e| match e {
                        // non-finite logits surface as invalid softmax columns
                        Error::NotADistribution { .. } => Error::Divergence { epoch, loss: f64::NAN },
                        other => other,
                    })?;
            }
            if cfg.learning_rate != 0.0 {
                for (t, g) in net.theta.iter_mut().zip(&grad) {
                    *t -= cfg.learning_rate * g;
                }
                if net.theta.iter().any(|t| !t.is_finite()) {
                    let loss = batch.iter().map(|&n| losses[n]).sum::<f64>() * weight;
                    return Err(Error::Divergence { epoch, loss });
                }
            }
        }
        let mean = pairwise_sum(&losses) / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok(TrainOutcome { net, loss_curve: curve })
}
