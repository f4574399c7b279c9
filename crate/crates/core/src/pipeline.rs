//! Dataset ingestion, chronological splits and sliding windows.
//!
//! Windows are z-scored per channel with the statistics of their own input
//! segment; the target segment reuses those statistics so a forecast can be
//! mapped back with [`denormalize`].

use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::codec::NumericSeries;
use crate::error::{Error, Result};
use crate::numeric::mean_std;

/// Floor on the in-window standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

const TIMESTAMP_HEADERS: [&str; 4] = ["date", "time", "timestamp", "datetime"];

/// A loaded multivariate series plus its per-channel statistics.
#[derive(Debug, Clone)]
pub struct Dataset {
    series: NumericSeries,
    mean: Vec<f64>,
    std: Vec<f64>,
    source: Option<PathBuf>,
}

impl Dataset {
    pub fn from_series(series: NumericSeries, source: Option<PathBuf>) -> Self {
        let (mean, std) = (0..series.channels())
            .map(|i| mean_std(series.channel(i)))
            .unzip();
        Dataset {
            series,
            mean,
            std,
            source,
        }
    }

    pub fn series(&self) -> &NumericSeries {
        &self.series
    }

    pub fn channels(&self) -> usize {
        self.series.channels()
    }

    pub fn steps(&self) -> usize {
        self.series.steps()
    }

    /// Per-channel mean over the whole series.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Per-channel population standard deviation over the whole series.
    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Channels whose standard deviation is zero.
    pub fn constant_channels(&self) -> Vec<usize> {
        (0..self.channels()).filter(|&i| self.std[i] == 0.0).collect()
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Z-scores every channel with the mean/std measured on rows `fit`.
    /// Constant channels are only centred.
    pub fn standardized(&self, fit: Range<usize>) -> Result<Dataset> {
        if fit.is_empty() || fit.end > self.steps() {
            return Err(Error::Window(format!(
                "cannot fit statistics on rows {fit:?} of a {}-row dataset",
                self.steps()
            )));
        }
        let t = self.steps();
        let mut values = Vec::with_capacity(self.series.values().len());
        for i in 0..self.channels() {
            let ch = self.series.channel(i);
            let (m, s) = mean_std(&ch[fit.clone()]);
            let s = if s > 0.0 { s } else { 1.0 };
            values.extend(ch.iter().map(|v| (v - m) / s));
        }
        let mut series = NumericSeries::new(self.channels(), t, values)?;
        if let Some(names) = self.series.names() {
            series = series.with_names(names.to_vec())?;
        }
        Ok(Dataset::from_series(series, self.source.clone()))
    }
}

/// Which columns of a CSV file hold values.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// `None` auto-detects a leading timestamp column; `Some(false)` treats
    /// every column as a value; `Some(true)` always skips the first column.
    pub timestamp: Option<bool>,
    /// Value columns by header name; `None` takes every non-timestamp column.
    pub value_columns: Option<Vec<String>>,
}

/// Reads a headed CSV into a dataset with one channel per value column.
///
/// The first column is taken as a timestamp when its header is a common
/// time name (`date`, `time`, ...) or its first cell is not a number.
/// Lines starting with `#` are skipped.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let csv_err = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => csv_err(format!("{other:?}")),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() {
        return Err(csv_err("missing header row".into()));
    }

    let records = reader
        .records()
        .enumerate()
        .map(|(n, r)| r.map_err(|e| csv_err(format!("row {}: {e}", n + 1))))
        .collect::<Result<Vec<_>>>()?;

    let skip_first = schema.timestamp.unwrap_or_else(|| {
        let named = TIMESTAMP_HEADERS.contains(&headers[0].to_ascii_lowercase().as_str());
        let textual = records
            .first()
            .and_then(|r| r.get(0))
            .is_some_and(|cell| cell.parse::<f64>().is_err());
        named || textual
    });
    let first_value = usize::from(skip_first);

    let columns: Vec<usize> = match &schema.value_columns {
        Some(names) => names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| csv_err(format!("no column named {name:?}")))
            })
            .collect::<Result<_>>()?,
        None => (first_value..headers.len()).collect(),
    };
    if columns.is_empty() {
        return Err(csv_err("no value columns".into()));
    }

    let t = records.len();
    let mut channels = vec![Vec::with_capacity(t); columns.len()];
    for (n, record) in records.iter().enumerate() {
        let row = n + 1;
        if record.len() != headers.len() {
            return Err(csv_err(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (ch, &col) in channels.iter_mut().zip(&columns) {
            let cell = &record[col];
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    path: path.to_path_buf(),
                    row,
                    column: headers[col].clone(),
                    cell: cell.to_owned(),
                })?;
            ch.push(value);
        }
    }
    let names = columns.iter().map(|&c| headers[c].clone()).collect();
    let series = NumericSeries::from_channels(channels)?.with_names(names)?;
    Ok(Dataset::from_series(series, Some(path.to_path_buf())))
}

/// Lookback, horizon and stride of the sliding window, in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    lookback: usize,
    horizon: usize,
    stride: usize,
}

impl WindowSpec {
    pub fn new(lookback: usize, horizon: usize, stride: usize) -> Result<Self> {
        if lookback == 0 || horizon == 0 || stride == 0 {
            return Err(Error::InvalidParams(format!(
                "lookback, horizon and stride must be >= 1 (got {lookback}, {horizon}, {stride})"
            )));
        }
        Ok(WindowSpec {
            lookback,
            horizon,
            stride,
        })
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn span(&self) -> usize {
        self.lookback + self.horizon
    }

    /// Number of window positions that fit in `len` rows.
    pub fn count_in(&self, len: usize) -> usize {
        if len < self.span() {
            0
        } else {
            (len - self.span()) / self.stride + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

/// Chronological, contiguous, non-overlapping row ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn get(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

/// Splits `steps` rows chronologically. Every split must fit one window of `spec`.
///
/// When the ratios sum to one the test split takes whatever rounding left over.
pub fn split_dataset(steps: usize, ratios: SplitRatios, spec: &WindowSpec) -> Result<SplitRanges> {
    let SplitRatios { train, val, test } = ratios;
    let all = [train, val, test];
    if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidParams(format!("split ratios must be positive, got {all:?}")));
    }
    let total = train + val + test;
    if total > 1.0 + 1e-9 {
        return Err(Error::InvalidParams(format!("split ratios sum to {total} > 1")));
    }
    let rows = |r: f64| (r * steps as f64).round() as usize;
    let n_train = rows(train).min(steps);
    let n_val = rows(val).min(steps - n_train);
    let n_test = if (total - 1.0).abs() <= 1e-9 {
        steps - n_train - n_val
    } else {
        rows(test).min(steps - n_train - n_val)
    };
    let ranges = SplitRanges {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_train + n_val + n_test,
    };
    for (name, r) in [("train", &ranges.train), ("val", &ranges.val), ("test", &ranges.test)] {
        if r.len() < spec.span() {
            return Err(Error::Window(format!(
                "{name} split has {} rows, a window needs {}",
                r.len(),
                spec.span()
            )));
        }
    }
    Ok(ranges)
}

/// In-window normalization statistics of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelNorm {
    pub mean: f64,
    /// Standard deviation actually divided by (after the floor).
    pub std: f64,
    /// Set when the input segment's spread was below [`STD_FLOOR`].
    pub floored: bool,
}

impl ChannelNorm {
    /// Statistics of an input segment.
    pub fn fit(x: &[f64]) -> Self {
        let (mean, std) = mean_std(x);
        if std < STD_FLOOR {
            ChannelNorm {
                mean,
                std: STD_FLOOR,
                floored: true,
            }
        } else {
            ChannelNorm {
                mean,
                std,
                floored: false,
            }
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// One (input, target) pair, normalized with the input's statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    /// First row of the input segment in the dataset.
    pub position: usize,
    /// Source channel for channel-independent pairs.
    pub channel: Option<usize>,
    /// Normalized input, `c × lookback`.
    pub x: NumericSeries,
    /// Target normalized with `x`'s statistics, `c × horizon`.
    pub y: NumericSeries,
    pub norm: Vec<ChannelNorm>,
}

impl WindowPair {
    pub fn floored(&self) -> bool {
        self.norm.iter().any(|n| n.floored)
    }

    /// Target in dataset units.
    pub fn raw_target(&self) -> NumericSeries {
        denormalize(&self.y, &self.norm).expect("pair norms match its channels")
    }

    pub fn raw_input(&self) -> NumericSeries {
        denormalize(&self.x, &self.norm).expect("pair norms match its channels")
    }
}

/// Normalizes raw input/target segments per channel with the input's statistics.
pub fn normalize_pair(x: &NumericSeries, y: Option<&NumericSeries>) -> Result<(NumericSeries, Option<NumericSeries>, Vec<ChannelNorm>)> {
    if let Some(y) = y {
        if y.channels() != x.channels() {
            return Err(Error::shape(
                format!("{} target channels", x.channels()),
                y.channels(),
            ));
        }
    }
    let norm: Vec<ChannelNorm> = (0..x.channels()).map(|i| ChannelNorm::fit(x.channel(i))).collect();
    let nx = map_channels(x, &norm, ChannelNorm::apply)?;
    let ny = y.map(|y| map_channels(y, &norm, ChannelNorm::apply)).transpose()?;
    Ok((nx, ny, norm))
}

fn map_channels(s: &NumericSeries, norm: &[ChannelNorm], f: fn(&ChannelNorm, f64) -> f64) -> Result<NumericSeries> {
    let values = (0..s.channels())
        .flat_map(|i| s.channel(i).iter().map(move |&v| f(&norm[i], v)))
        .collect();
    NumericSeries::new(s.channels(), s.steps(), values)
}

/// Maps normalized values back to dataset units: `v · std + mean` per channel.
pub fn denormalize(values: &NumericSeries, norm: &[ChannelNorm]) -> Result<NumericSeries> {
    if norm.len() != values.channels() {
        return Err(Error::shape(
            format!("{} channel statistics", values.channels()),
            norm.len(),
        ));
    }
    map_channels(values, norm, ChannelNorm::invert)
}

/// Lazily yields the window pairs of one row range.
#[derive(Debug, Clone)]
pub struct Windows<'a> {
    data: &'a Dataset,
    spec: WindowSpec,
    range: Range<usize>,
    channel_independent: bool,
    next_start: usize,
    next_channel: usize,
}

/// Sliding windows over `range` of `data`.
///
/// With `channel_independent`, every window position yields one
/// single-channel pair per channel, in channel order.
pub fn make_windows<'a>(
    data: &'a Dataset,
    spec: &WindowSpec,
    range: Range<usize>,
    channel_independent: bool,
) -> Result<Windows<'a>> {
    if range.is_empty() || data.channels() == 0 {
        return Err(Error::Window("empty split".into()));
    }
    if range.end > data.steps() {
        return Err(Error::Window(format!(
            "range {range:?} exceeds the {} rows of the dataset",
            data.steps()
        )));
    }
    if range.len() < spec.span() {
        return Err(Error::Window(format!(
            "split of {} rows is shorter than lookback + horizon = {}",
            range.len(),
            spec.span()
        )));
    }
    Ok(Windows {
        data,
        spec: *spec,
        next_start: range.start,
        range,
        channel_independent,
        next_channel: 0,
    })
}

impl Windows<'_> {
    fn positions_left(&self) -> usize {
        if self.next_start + self.spec.span() > self.range.end {
            0
        } else {
            (self.range.end - self.next_start - self.spec.span()) / self.spec.stride + 1
        }
    }

    fn segment(&self, channels: Range<usize>, from: usize, len: usize) -> NumericSeries {
        let series = self.data.series();
        let values = channels
            .clone()
            .flat_map(|i| series.channel(i)[from..from + len].iter().copied())
            .collect();
        NumericSeries::new(channels.len(), len, values).expect("dataset values are finite")
    }
}

impl Iterator for Windows<'_> {
    type Item = WindowPair;

    fn next(&mut self) -> Option<WindowPair> {
        if self.positions_left() == 0 {
            return None;
        }
        let start = self.next_start;
        let (channels, channel) = if self.channel_independent {
            let i = self.next_channel;
            (i..i + 1, Some(i))
        } else {
            (0..self.data.channels(), None)
        };
        let x = self.segment(channels.clone(), start, self.spec.lookback);
        let y = self.segment(channels, start + self.spec.lookback, self.spec.horizon);
        let (x, y, norm) = normalize_pair(&x, Some(&y)).expect("segments share channels");

        if self.channel_independent && self.next_channel + 1 < self.data.channels() {
            self.next_channel += 1;
        } else {
            self.next_channel = 0;
            self.next_start += self.spec.stride;
        }
        Some(WindowPair {
            position: start,
            channel,
            x,
            y: y.expect("target requested"),
            norm,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let per_position = if self.channel_independent {
            self.data.channels()
        } else {
            1
        };
        let n = (self.positions_left() * per_position).saturating_sub(self.next_channel);
        (n, Some(n))
    }
}

impl ExactSizeIterator for Windows<'_> {}

/// Debug export: one row per value, `window_id,channel,role,step,value`.
pub fn windows_csv<'a>(pairs: impl IntoIterator<Item = &'a WindowPair>) -> String {
    let mut out = String::from("window_id,channel,role,step,value\n");
    for (id, pair) in pairs.into_iter().enumerate() {
        for (role, s) in [("x", &pair.x), ("y", &pair.y)] {
            for i in 0..s.channels() {
                let channel = pair.channel.unwrap_or(i);
                for (k, v) in s.channel(i).iter().enumerate() {
                    writeln!(out, "{id},{channel},{role},{k},{v:.6}").unwrap();
                }
            }
        }
    }
    out
}
