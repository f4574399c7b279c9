//! Earth mover's distance between vision tensors.
//!
//! Each `(channel, step)` column is a distribution over bins; two columns are
//! compared by the 1-Wasserstein distance with ground cost `|j1 - j2|` on bin
//! indices, which in one dimension is the L1 distance between the two CDFs.
//! Tensor distances sum that over every column.

use crate::codec::{BinaryVisionTensor, CodecParams, SoftVisionTensor, COLUMN_SUM_TOLERANCE};
use crate::error::{Error, Result};

/// Anything that can be read column by column as a `c × h × t` grid of distributions.
pub trait VisionColumns {
    fn dims(&self) -> (usize, usize, usize);

    /// Writes column `(i, k)` into `out` (length `h`).
    fn fill_column(&self, i: usize, k: usize, out: &mut [f64]);

    /// Hot bin of column `(i, k)` when the tensor is binary.
    fn hot_bin(&self, _i: usize, _k: usize) -> Option<usize> {
        None
    }
}

impl VisionColumns for BinaryVisionTensor {
    fn dims(&self) -> (usize, usize, usize) {
        self.shape()
    }

    fn fill_column(&self, i: usize, k: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[BinaryVisionTensor::hot_bin(self, i, k) - 1] = 1.0;
    }

    fn hot_bin(&self, i: usize, k: usize) -> Option<usize> {
        Some(BinaryVisionTensor::hot_bin(self, i, k))
    }
}

impl VisionColumns for SoftVisionTensor {
    fn dims(&self) -> (usize, usize, usize) {
        self.shape()
    }

    fn fill_column(&self, i: usize, k: usize, out: &mut [f64]) {
        out.copy_from_slice(self.column(i, k));
    }
}

fn check_distribution(col: &[f64]) -> Result<()> {
    let ok = col.iter().all(|p| p.is_finite() && *p >= 0.0)
        && (col.iter().sum::<f64>() - 1.0).abs() <= COLUMN_SUM_TOLERANCE;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("not a probability distribution: {col:?}")))
    }
}

fn cdf_l1(p: &[f64], q: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut total = 0.0;
    // the last CDF difference is zero for distributions and is skipped
    for (a, b) in p.iter().zip(q).take(p.len().saturating_sub(1)) {
        diff += a - b;
        total += diff.abs();
    }
    total
}

/// 1-Wasserstein distance between two bin distributions, in bin-index units.
pub fn w1_column(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape(format!("{} bins", p.len()), format!("{} bins", q.len())));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    Ok(cdf_l1(p, q))
}

/// Sum of per-column 1-Wasserstein distances, in bin-index units.
///
/// Multiply by [`CodecParams::bin_width`] (see [`to_value_units`]) to express
/// the result in units of the normalized series.
pub fn emd_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: VisionColumns + ?Sized,
    B: VisionColumns + ?Sized,
{
    Ok(column_distances(a, b)?.into_iter().sum())
}

/// Per-column distances in bin-index units, ordered channel-major then by step.
pub fn column_distances<A, B>(a: &A, b: &B) -> Result<Vec<f64>>
where
    A: VisionColumns + ?Sized,
    B: VisionColumns + ?Sized,
{
    let (c, h, t) = a.dims();
    if b.dims() != (c, h, t) {
        return Err(Error::shape(format!("{:?}", (c, h, t)), format!("{:?}", b.dims())));
    }
    let mut ca = vec![0.0; h];
    let mut cb = vec![0.0; h];
    let mut out = Vec::with_capacity(c * t);
    for i in 0..c {
        for k in 0..t {
            if let (Some(ja), Some(jb)) = (a.hot_bin(i, k), b.hot_bin(i, k)) {
                out.push(ja.abs_diff(jb) as f64);
                continue;
            }
            a.fill_column(i, k, &mut ca);
            b.fill_column(i, k, &mut cb);
            out.push(cdf_l1(&ca, &cb));
        }
    }
    Ok(out)
}

/// Converts a distance in bin-index units to normalized-series units.
pub fn to_value_units(distance: f64, params: &CodecParams) -> f64 {
    distance * params.bin_width()
}

/// Mean per-column EMD of a prediction against its target, with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    /// `∂loss/∂p` laid out like [`SoftVisionTensor::as_columns`].
    pub gradient: Vec<f64>,
}

/// EMD loss averaged over the `c·t` columns, and its (sub)gradient with
/// respect to every predicted probability.
///
/// With `C_m` the CDF difference of a column at bin `m`, the derivative with
/// respect to `p_l` is `Σ_{m=l}^{h-1} sign(C_m) / (c·t)`, using `sign(0) = 0`.
pub fn emd_loss_and_grad(pred: &SoftVisionTensor, target: &BinaryVisionTensor) -> Result<LossReport> {
    let (c, h, t) = pred.shape();
    if target.shape() != (c, h, t) {
        return Err(Error::shape(format!("{:?}", (c, h, t)), format!("{:?}", target.shape())));
    }
    let columns = (c * t) as f64;
    let mut gradient = vec![0.0; c * h * t];
    let mut total = 0.0;
    let mut signs = vec![0.0; h];
    for i in 0..c {
        for k in 0..t {
            let col = pred.column(i, k);
            let hot = target.hot_bin(i, k) - 1;
            let mut diff = 0.0;
            for m in 0..h - 1 {
                diff += col[m] - f64::from(u8::from(m == hot));
                total += diff.abs();
                signs[m] = sign(diff);
            }
            let g = &mut gradient[(i * t + k) * h..(i * t + k + 1) * h];
            let mut suffix = 0.0;
            for l in (0..h - 1).rev() {
                suffix += signs[l];
                g[l] = suffix / columns;
            }
            g[h - 1] = 0.0;
        }
    }
    Ok(LossReport {
        loss: total / columns,
        gradient,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
