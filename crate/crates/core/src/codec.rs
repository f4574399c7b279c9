//! The binary vision space and the mapping between numeric series and it.
//!
//! A numeric series of `c` channels and `t` steps is quantized onto `h`
//! vertical bins spanning `[-ms, ms]`. Every `(channel, step)` column of the
//! resulting tensor holds exactly one set bit. Values at or beyond `±ms`
//! saturate into the outer bins.
//!
//! Bin indices in this module are 1-based (`1..=h`), bin `h` being the
//! highest value range. Column slices (`SoftVisionTensor::column`) are plain
//! 0-based arrays, so bin `j` lives at slice index `j - 1`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Resolution and range of the codec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    h: usize,
    ms: f64,
}

impl CodecParams {
    pub fn new(h: usize, ms: f64) -> Result<Self> {
        if h < 2 {
            return Err(Error::InvalidParams(format!("h must be >= 2, got {h}")));
        }
        if !(ms.is_finite() && ms > 0.0) {
            return Err(Error::InvalidParams(format!(
                "maximum scale must be finite and > 0, got {ms}"
            )));
        }
        Ok(CodecParams { h, ms })
    }

    /// Number of vertical bins.
    pub fn h(&self) -> usize {
        self.h
    }

    /// Maximum scale; the representable range is `[-ms, ms]`.
    pub fn ms(&self) -> f64 {
        self.ms
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.ms / self.h as f64
    }

    /// Midpoint of bin `j` (1-based), i.e. `(j - 0.5) * 2ms/h - ms`.
    ///
    /// Evaluated from the nearer edge of the range so that `midpoint(1)` is
    /// exactly `-midpoint(h)` and the outer bins decode to `±(ms - ms/h)`.
    pub fn midpoint(&self, j: usize) -> f64 {
        debug_assert!((1..=self.h).contains(&j));
        let h = self.h as f64;
        if 2 * j > self.h {
            let odd = (2 * (self.h - j) + 1) as f64;
            self.ms - odd * self.ms / h
        } else {
            let odd = (2 * j - 1) as f64;
            odd * self.ms / h - self.ms
        }
    }
}

/// Bin (1-based) that value `s` maps to.
///
/// Values on an interior bin edge go to the upper bin.
pub fn bin_index(s: f64, params: &CodecParams) -> usize {
    let (h, ms) = (params.h, params.ms);
    if s >= ms {
        return h;
    }
    if s <= -ms {
        return 1;
    }
    let raw = (h as f64 * (s + ms) / (2.0 * ms)).floor();
    // NaN and negative floats saturate to 0 in the cast
    (raw as usize + 1).clamp(1, h)
}

/// `decode(encode(s))` for a single value.
pub fn roundtrip_value(s: f64, params: &CodecParams) -> f64 {
    params.midpoint(bin_index(s, params))
}

/// A `c × t` grid of finite reals, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSeries {
    channels: usize,
    steps: usize,
    values: Vec<f64>,
    names: Option<Vec<String>>,
}

impl NumericSeries {
    /// `values` is channel-major: `values[i * steps + k]` is channel `i` at step `k`.
    pub fn new(channels: usize, steps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * steps {
            return Err(Error::shape(
                format!("{channels}x{steps} = {} values", channels * steps),
                format!("{} values", values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: pos / steps.max(1),
                step: pos % steps.max(1),
            });
        }
        Ok(NumericSeries {
            channels,
            steps,
            values,
            names: None,
        })
    }

    pub fn from_channels(channels: Vec<Vec<f64>>) -> Result<Self> {
        let c = channels.len();
        let t = channels.first().map_or(0, Vec::len);
        if let Some(bad) = channels.iter().find(|ch| ch.len() != t) {
            return Err(Error::shape(
                format!("{t} steps per channel"),
                format!("{} steps", bad.len()),
            ));
        }
        Self::new(c, t, channels.concat())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels {
            return Err(Error::shape(
                format!("{} channel names", self.channels),
                format!("{} names", names.len()),
            ));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.values[i * self.steps..(i + 1) * self.steps]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.steps + k]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A `c × h × t` binary tensor with exactly one set bit per `(channel, step)` column.
///
/// Stored as the hot bin of each column, so the one-hot law holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVisionTensor {
    channels: usize,
    height: usize,
    steps: usize,
    hot: Vec<u32>,
}

impl BinaryVisionTensor {
    /// `hot[i * steps + k]` is the 1-based hot bin of column `(i, k)`.
    pub fn from_hot_bins(channels: usize, height: usize, steps: usize, hot: Vec<usize>) -> Result<Self> {
        if hot.len() != channels * steps {
            return Err(Error::shape(
                format!("{} columns", channels * steps),
                format!("{} columns", hot.len()),
            ));
        }
        let mut packed = Vec::with_capacity(hot.len());
        for (pos, &j) in hot.iter().enumerate() {
            if !(1..=height).contains(&j) {
                return Err(Error::OneHotViolation {
                    channel: pos / steps,
                    step: pos % steps,
                });
            }
            packed.push(j as u32);
        }
        Ok(BinaryVisionTensor {
            channels,
            height,
            steps,
            hot: packed,
        })
    }

    /// Builds a tensor from `c·h·t` bits ordered channel, then bin, then step.
    pub fn from_bits(channels: usize, height: usize, steps: usize, bits: &[u8]) -> Result<Self> {
        if bits.len() != channels * height * steps {
            return Err(Error::shape(
                format!("{} bits", channels * height * steps),
                format!("{} bits", bits.len()),
            ));
        }
        let mut hot = vec![0u32; channels * steps];
        for i in 0..channels {
            for k in 0..steps {
                let mut found = None;
                for j in 0..height {
                    match bits[(i * height + j) * steps + k] {
                        0 => {}
                        1 if found.is_none() => found = Some(j),
                        _ => return Err(Error::OneHotViolation { channel: i, step: k }),
                    }
                }
                let j = found.ok_or(Error::OneHotViolation { channel: i, step: k })?;
                hot[i * steps + k] = (j + 1) as u32;
            }
        }
        Ok(BinaryVisionTensor {
            channels,
            height,
            steps,
            hot,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.steps)
    }

    /// Hot bin (1-based) of column `(i, k)`.
    pub fn hot_bin(&self, i: usize, k: usize) -> usize {
        self.hot[i * self.steps + k] as usize
    }

    /// Entry `v[i, j, k]` with `j` 1-based.
    pub fn bit(&self, i: usize, j: usize, k: usize) -> u8 {
        u8::from(self.hot_bin(i, k) == j)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        let mut bits = vec![0u8; self.channels * self.height * self.steps];
        for i in 0..self.channels {
            for k in 0..self.steps {
                let j = self.hot_bin(i, k) - 1;
                bits[(i * self.height + j) * self.steps + k] = 1;
            }
        }
        bits
    }

    /// Columns `[from, to)` of every channel.
    pub fn slice_steps(&self, from: usize, to: usize) -> BinaryVisionTensor {
        assert!(from <= to && to <= self.steps);
        let t = to - from;
        let mut hot = Vec::with_capacity(self.channels * t);
        for i in 0..self.channels {
            hot.extend_from_slice(&self.hot[i * self.steps + from..i * self.steps + to]);
        }
        BinaryVisionTensor {
            channels: self.channels,
            height: self.height,
            steps: t,
            hot,
        }
    }

    /// Single-channel view of channel `i`.
    pub fn select_channel(&self, i: usize) -> BinaryVisionTensor {
        BinaryVisionTensor {
            channels: 1,
            height: self.height,
            steps: self.steps,
            hot: self.hot[i * self.steps..(i + 1) * self.steps].to_vec(),
        }
    }
}

/// Tolerance on column sums of soft tensors.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

/// A `c × h × t` tensor of probabilities; each `(channel, step)` column is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftVisionTensor {
    channels: usize,
    height: usize,
    steps: usize,
    // column-contiguous: [(i * steps + k) * height + (j - 1)]
    probs: Vec<f64>,
}

impl SoftVisionTensor {
    /// `probs` is column-contiguous: the `h` entries of column `(i, k)` start at
    /// `(i * steps + k) * h`.
    pub fn from_columns(channels: usize, height: usize, steps: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != channels * height * steps {
            return Err(Error::shape(
                format!("{} probabilities", channels * height * steps),
                format!("{}", probs.len()),
            ));
        }
        let t = Self {
            channels,
            height,
            steps,
            probs,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.channels {
            for k in 0..self.steps {
                let col = self.column(i, k);
                let ok = col.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
                    && (col.iter().sum::<f64>() - 1.0).abs() <= COLUMN_SUM_TOLERANCE;
                if !ok {
                    return Err(Error::NotADistribution { channel: i, step: k });
                }
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.steps)
    }

    pub fn column(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.steps + k) * self.height;
        &self.probs[start..start + self.height]
    }

    /// Entry `p[i, j, k]` with `j` 1-based.
    pub fn prob(&self, i: usize, j: usize, k: usize) -> f64 {
        self.column(i, k)[j - 1]
    }

    /// Raw column-contiguous storage.
    pub fn as_columns(&self) -> &[f64] {
        &self.probs
    }
}

impl From<&BinaryVisionTensor> for SoftVisionTensor {
    fn from(hard: &BinaryVisionTensor) -> Self {
        let h = hard.height;
        let mut probs = vec![0.0; hard.channels * h * hard.steps];
        for (col, &j) in hard.hot.iter().enumerate() {
            probs[col * h + j as usize - 1] = 1.0;
        }
        SoftVisionTensor {
            channels: hard.channels,
            height: h,
            steps: hard.steps,
            probs,
        }
    }
}

/// Maps every value of `series` to its one-hot column.
pub fn encode(series: &NumericSeries, params: &CodecParams) -> BinaryVisionTensor {
    let hot = series.values.iter().map(|&s| bin_index(s, params) as u32).collect();
    BinaryVisionTensor {
        channels: series.channels,
        height: params.h,
        steps: series.steps,
        hot,
    }
}

/// Replaces each column by the midpoint of its hot bin.
pub fn decode(tensor: &BinaryVisionTensor, params: &CodecParams) -> Result<NumericSeries> {
    if tensor.height != params.h {
        return Err(Error::shape(
            format!("tensor height h = {}", params.h),
            format!("h = {}", tensor.height),
        ));
    }
    let values = tensor.hot.iter().map(|&j| params.midpoint(j as usize)).collect();
    NumericSeries::new(tensor.channels, tensor.steps, values)
}

/// Argmax of every column; ties go to the lowest bin.
pub fn harden(soft: &SoftVisionTensor) -> BinaryVisionTensor {
    let hot = soft
        .probs
        .chunks_exact(soft.height.max(1))
        .map(|col| {
            let mut best = 0;
            for (j, &p) in col.iter().enumerate() {
                if p > col[best] {
                    best = j;
                }
            }
            (best + 1) as u32
        })
        .collect();
    BinaryVisionTensor {
        channels: soft.channels,
        height: soft.height,
        steps: soft.steps,
        hot,
    }
}

/// Expected bin midpoint under each soft column, an alternative to `decode(harden(..))`.
pub fn decode_expected(soft: &SoftVisionTensor, params: &CodecParams) -> Result<NumericSeries> {
    if soft.height != params.h {
        return Err(Error::shape(
            format!("tensor height h = {}", params.h),
            format!("h = {}", soft.height),
        ));
    }
    let values = soft
        .probs
        .chunks_exact(soft.height)
        .map(|col| {
            col.iter()
                .enumerate()
                .map(|(j, p)| p * params.midpoint(j + 1))
                .sum()
        })
        .collect();
    NumericSeries::new(soft.channels, soft.steps, values)
}

pub const MVTS_MAGIC: [u8; 4] = *b"MVTS";
pub const MVTS_VERSION: u16 = 1;
/// Size of the MVTS header in bytes.
pub const MVTS_HEADER_LEN: usize = 20;

/// Writes the MVTS file image of `tensor`: a little-endian header followed by
/// one byte per entry, ordered channel, then bin, then step.
pub fn serialize(tensor: &BinaryVisionTensor) -> Vec<u8> {
    let bits = tensor.to_bits();
    let mut out = Vec::with_capacity(MVTS_HEADER_LEN + bits.len());
    out.extend_from_slice(&MVTS_MAGIC);
    out.extend_from_slice(&MVTS_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for dim in [tensor.channels, tensor.height, tensor.steps] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&bits);
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<BinaryVisionTensor> {
    if bytes.len() < MVTS_HEADER_LEN {
        return Err(Error::format("MVTS", format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[..4] != MVTS_MAGIC {
        return Err(Error::format("MVTS", "bad magic"));
    }
    let u16_at = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let version = u16_at(4);
    if version != MVTS_VERSION {
        return Err(Error::format("MVTS", format!("unsupported version {version}")));
    }
    let flags = u16_at(6);
    if flags != 0 {
        return Err(Error::format("MVTS", format!("unknown flags {flags:#06x}")));
    }
    let (c, h, t) = (u32_at(8), u32_at(12), u32_at(16));
    let expected = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(t))
        .ok_or_else(|| Error::format("MVTS", "dimensions overflow"))?;
    let payload = &bytes[MVTS_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(
            "MVTS",
            format!("payload is {} bytes, header declares {expected}", payload.len()),
        ));
    }
    BinaryVisionTensor::from_bits(c, h, t, payload)
}

/// Renders one channel as a plain (P1) portable bitmap, `t` wide and `h` tall,
/// with bin `h` on the top row.
pub fn render_bitmap(tensor: &BinaryVisionTensor, channel: usize) -> Result<String> {
    if channel >= tensor.channels {
        return Err(Error::InvalidParams(format!(
            "channel {channel} out of range (tensor has {})",
            tensor.channels
        )));
    }
    if tensor.steps == 0 {
        return Err(Error::InvalidParams("cannot render a tensor with zero steps".into()));
    }
    let mut out = String::with_capacity(16 + tensor.height * tensor.steps * 2);
    writeln!(out, "P1\n{} {}", tensor.steps, tensor.height).unwrap();
    for j in (1..=tensor.height).rev() {
        for k in 0..tensor.steps {
            if k > 0 {
                out.push(' ');
            }
            out.push(if tensor.hot_bin(channel, k) == j { '1' } else { '0' });
        }
        out.push('\n');
    }
    Ok(out)
}
