//! System measurement error (SME) of the codec under standard-normal inputs.
//!
//! For a standard-normal value the expected roundtrip error
//! `|decode(encode(s)) - s|` is bounded per element by
//!
//! ```text
//! χ(ms, h) = ms·((Φ(ms) − Φ(−ms))/h − 2 + 2Φ(ms)) + √(2/π)·exp(−ms²/2)
//! ```
//!
//! where the first term accounts for values inside `[-ms, ms]` (error at most
//! `ms/h`) and the rest for the saturated tails. For a `c × t` series the
//! bound on the summed error is `c·t·χ`. `χ` is convex then concave in `ms`
//! with a single minimizer `ms*(h)`, found here by bisection on `∂χ/∂ms`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::codec::{roundtrip_value, CodecParams};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Bracket searched for the optimal maximum scale.
pub const MS_BRACKET: (f64, f64) = (1e-3, 20.0);
/// Default absolute tolerance on `ms*`.
pub const DEFAULT_MS_TOLERANCE: f64 = 1e-6;
/// Resolutions listed in the reference table of optimal scales.
pub const TABLE1_RESOLUTIONS: [usize; 5] = [50, 100, 200, 400, 800];

/// Standard normal CDF, `Φ(x) = erfc(−x/√2)/2`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Evaluation point of the SME bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    h: usize,
    ms: f64,
    /// `None` for the per-element bound, `Some(c·t)` for a whole series.
    elements: Option<usize>,
}

impl BoundQuery {
    /// Per-element bound at `(h, ms)`.
    pub fn new(h: usize, ms: f64) -> Result<Self> {
        let p = CodecParams::new(h, ms)?;
        Ok(BoundQuery {
            h: p.h(),
            ms: p.ms(),
            elements: None,
        })
    }

    pub fn for_params(params: &CodecParams) -> Self {
        BoundQuery {
            h: params.h(),
            ms: params.ms(),
            elements: None,
        }
    }

    /// Bound on the summed error of a `channels × steps` series.
    pub fn whole_series(mut self, channels: usize, steps: usize) -> Self {
        self.elements = Some(channels * steps);
        self
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn ms(&self) -> f64 {
        self.ms
    }

    pub fn per_element(&self) -> bool {
        self.elements.is_none()
    }

    fn scale(&self) -> f64 {
        self.elements.map_or(1.0, |n| n as f64)
    }
}

fn chi(ms: f64, h: f64) -> f64 {
    let inner = std_normal_cdf(ms) - std_normal_cdf(-ms);
    let upper_tail = std_normal_cdf(-ms);
    ms * (inner / h - 2.0 * upper_tail) + (2.0 / PI).sqrt() * (-0.5 * ms * ms).exp()
}

fn chi_prime(ms: f64, h: f64) -> f64 {
    let inner = std_normal_cdf(ms) - std_normal_cdf(-ms);
    let upper_tail = std_normal_cdf(-ms);
    inner / h - 2.0 * upper_tail + ms / h * (2.0 / PI).sqrt() * (-0.5 * ms * ms).exp()
}

/// Upper bound on the expected L1 roundtrip error.
pub fn sme_upper_bound(q: &BoundQuery) -> f64 {
    q.scale() * chi(q.ms, q.h as f64)
}

/// `∂/∂ms` of [`sme_upper_bound`].
pub fn bound_derivative(q: &BoundQuery) -> f64 {
    q.scale() * chi_prime(q.ms, q.h as f64)
}

/// `∂²/∂ms²` of [`sme_upper_bound`]; positive below `ms = √(h+2)`, negative above.
pub fn bound_second_derivative(q: &BoundQuery) -> f64 {
    let h = q.h as f64;
    q.scale() * (2.0 / PI).sqrt() * (-0.5 * q.ms * q.ms).exp() * (2.0 + h - q.ms * q.ms) / h
}

/// Maximum scale minimizing the per-element bound for resolution `h`.
///
/// Bisects `∂χ/∂ms` on [`MS_BRACKET`] until the bracket is narrower than `tol`.
pub fn solve_optimal_ms(h: usize, tol: f64) -> Result<f64> {
    if h < 2 {
        return Err(Error::InvalidParams(format!("h must be >= 2, got {h}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be > 0, got {tol}")));
    }
    let hf = h as f64;
    let (mut lo, mut hi) = MS_BRACKET;
    let (f_lo, f_hi) = (chi_prime(lo, hf), chi_prime(hi, hf));
    // a minimum needs the derivative to go from negative to positive
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoSignChange { h, lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi_prime(mid, hf) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Number of sign changes of `∂χ/∂ms` over `points` equally spaced values in `(0, upper]`.
pub fn derivative_sign_changes(h: usize, points: usize, upper: f64) -> usize {
    let hf = h as f64;
    let mut changes = 0;
    let mut prev: Option<bool> = None;
    for n in 1..=points {
        let ms = upper * n as f64 / points as f64;
        let d = chi_prime(ms, hf);
        if d == 0.0 {
            continue;
        }
        let positive = d > 0.0;
        if prev.is_some_and(|p| p != positive) {
            changes += 1;
        }
        prev = Some(positive);
    }
    changes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub h: usize,
    pub best_ms: f64,
    pub upper_bound: f64,
}

/// Optimal maximum scale and per-element bound for each of [`TABLE1_RESOLUTIONS`].
pub fn reproduce_table1() -> Result<Vec<Table1Row>> {
    optimal_ms_table(&TABLE1_RESOLUTIONS, DEFAULT_MS_TOLERANCE)
}

pub fn optimal_ms_table(resolutions: &[usize], tol: f64) -> Result<Vec<Table1Row>> {
    resolutions
        .iter()
        .map(|&h| {
            let best_ms = solve_optimal_ms(h, tol)?;
            Ok(Table1Row {
                h,
                best_ms,
                upper_bound: chi(best_ms, h as f64),
            })
        })
        .collect()
}

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = String::from("h,best_ms,upper_bound\n");
    for r in rows {
        writeln!(out, "{},{:.6},{:.6}", r.h, r.best_ms, r.upper_bound).unwrap();
    }
    out
}

/// Empirical per-element SME of the codec on standard-normal series.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub h: usize,
    pub ms: f64,
    pub channels: usize,
    pub steps: usize,
    /// Mean over samples of the per-element L1 roundtrip error.
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_error: f64,
    /// Per-element theoretical bound at `(h, ms)`.
    pub bound: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MonteCarloReport {
    /// `mean − 3·stderr ≤ bound`.
    pub fn within_bound(&self) -> bool {
        self.mean - 3.0 * self.std_error <= self.bound
    }

    pub const CSV_HEADER: &'static str = "h,ms,c,t,n,seed,empirical_mean,std_error,bound,within_bound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.h,
            self.ms,
            self.channels,
            self.steps,
            self.samples,
            self.seed,
            self.mean,
            self.std_error,
            self.bound,
            self.within_bound()
        )
    }
}

/// Minimum number of Monte-Carlo samples accepted.
pub const MIN_MC_SAMPLES: usize = 100;

/// Draws `n` independent `c × t` standard-normal series, roundtrips each
/// through the codec and averages the per-element L1 error.
///
/// Sample `i` draws from its own ChaCha stream (`seed`, stream `i`), so the
/// report does not depend on how samples are scheduled across threads.
pub fn monte_carlo_sme(params: &CodecParams, c: usize, t: usize, n: usize, seed: u64) -> Result<MonteCarloReport> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n}"
        )));
    }
    if c == 0 || t == 0 {
        return Err(Error::InvalidParams("series must have c, t >= 1".into()));
    }
    let elements = (c * t) as f64;
    let per_sample: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let err: f64 = (0..c * t)
                .map(|_| {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    (roundtrip_value(s, params) - s).abs()
                })
                .sum();
            err / elements
        })
        .collect();
    let mean = pairwise_sum(&per_sample) / n as f64;
    let sq: Vec<f64> = per_sample.iter().map(|e| (e - mean) * (e - mean)).collect();
    let variance = pairwise_sum(&sq) / (n - 1) as f64;
    Ok(MonteCarloReport {
        h: params.h(),
        ms: params.ms(),
        channels: c,
        steps: t,
        mean,
        std_error: (variance / n as f64).sqrt(),
        bound: sme_upper_bound(&BoundQuery::for_params(params)),
        samples: n,
        seed,
    })
}

/// Bound values along an increasing resolution schedule at fixed `ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub ms: f64,
    /// `(h, per-element bound)` in schedule order.
    pub bounds: Vec<(usize, f64)>,
    /// `lim_{h→∞} χ(ms, h)`: the saturation terms that no resolution removes.
    pub limit: f64,
    pub strictly_decreasing: bool,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ms,h,bound\n");
        for (h, b) in &self.bounds {
            writeln!(out, "{:.6},{},{:.6e}", self.ms, h, b).unwrap();
        }
        out
    }
}

/// Evaluates the bound along `schedule` and its `h → ∞` limit at `ms`.
pub fn check_convergence(ms: f64, schedule: &[usize]) -> Result<ConvergenceReport> {
    if schedule.is_empty() {
        return Err(Error::InvalidParams("empty resolution schedule".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("resolution schedule must be increasing".into()));
    }
    let bounds = schedule
        .iter()
        .map(|&h| Ok((h, sme_upper_bound(&BoundQuery::new(h, ms)?))))
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = bounds.windows(2).all(|w| w[1].1 < w[0].1);
    let limit = chi(ms, f64::INFINITY);
    Ok(ConvergenceReport {
        ms,
        bounds,
        limit,
        strictly_decreasing,
    })
}
