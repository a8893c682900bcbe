//! Recovery diagnostics: incoherence, the deterministic sampling condition,
//! the Bernoulli success probability and the exactly predictable horizon.
//!
//! Leverage scores are normalized so that they sum to the tubal rank `r`
//! over rows (and over columns). With that normalization the incoherence
//! parameter is
//!
//! ```text
//! mu = max(m1 * max_i lev_row(i), m2 * max_j lev_col(j)) / r
//! ```
//!
//! which lies in `[1, max(m1, m2)]` and equals 1 for perfectly spread factors.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::SamplingMask;
use crate::temporal_conv::{conv_tensor, KernelSize, TemporalSeries};
use crate::tensor::DenseTensor;
use crate::tsvd;

/// Coherence of the skinny t-SVD factors of a tensor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncoherenceReport {
    pub mu: f64,
    pub tubal_rank: usize,
    pub multi_rank_sum: usize,
    /// `||U^T * e_i||_F^2` for every horizontal index `i`.
    pub per_row_leverage: Vec<f64>,
    /// `||V^T * e_j||_F^2` for every lateral index `j`.
    pub per_col_leverage: Vec<f64>,
    /// Singular values at or below this were treated as zero.
    pub rank_tolerance: f64,
}

/// Squared Fourier row norms averaged over faces: `(1/m) sum_f ||F_f[i, :]||^2`.
/// By Parseval this equals `||F^T * e_i||_F^2` in the original domain.
fn row_leverage(factor: &DenseTensor) -> Result<Vec<f64>> {
    let spec = tsvd::dft_trailing(factor)?;
    let shape = spec.shape();
    let (rows, cols, m) = (shape.m1(), shape.m2(), shape.face_count());
    let data = spec.data();
    Ok((0..rows)
        .map(|i| {
            let row = &data[i * cols * m..(i + 1) * cols * m];
            row.iter().map(Complex64::norm_sqr).sum::<f64>() / m as f64
        })
        .collect())
}

/// Tightest incoherence parameter of `a`.
pub fn incoherence_mu(a: &DenseTensor) -> Result<IncoherenceReport> {
    let f = tsvd::t_svd(a, true)?;
    let r = f.tubal_rank;
    let rows = row_leverage(&f.u)?;
    let cols = row_leverage(&f.v)?;
    let (m1, m2) = (a.shape().m1() as f64, a.shape().m2() as f64);
    let peak = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    let mu = (m1 * peak(&rows)).max(m2 * peak(&cols)) / r as f64;
    Ok(IncoherenceReport {
        mu,
        tubal_rank: r,
        multi_rank_sum: f.multi_rank_sum(),
        per_row_leverage: rows,
        per_col_leverage: cols,
        rank_tolerance: f.rank_tolerance,
    })
}

/// `1 - 1 / (2 mu r (r_s + 1))`.
pub fn sampling_threshold(mu: f64, r: usize, rs: usize) -> f64 {
    1.0 - 1.0 / (2.0 * mu * r as f64 * (rs as f64 + 1.0))
}

/// Outcome of the deterministic sampling condition `rho(Omega) > rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryCheck {
    pub satisfied: bool,
    /// Minimum horizontal/lateral sampling ratio of the mask.
    pub lhs: f64,
    pub rhs: f64,
    pub mu: f64,
    pub r: usize,
    pub r_s: usize,
}

/// Evaluates the deterministic exact-recovery condition for `a` under `mask`.
pub fn deterministic_recovery_check(mask: &SamplingMask, a: &DenseTensor) -> Result<RecoveryCheck> {
    if mask.shape() != a.shape() {
        return Err(Error::ShapeMismatch { left: mask.shape().dims().to_vec(), right: a.dims().to_vec() });
    }
    let inc = incoherence_mu(a)?;
    let lhs = mask.min_sampling_ratio();
    let rhs = sampling_threshold(inc.mu, inc.tubal_rank, inc.multi_rank_sum);
    Ok(RecoveryCheck { satisfied: lhs > rhs, lhs, rhs, mu: inc.mu, r: inc.tubal_rank, r_s: inc.multi_rank_sum })
}

/// Lower bound `1 - exp(-4 a^2 m0)` on the probability that a Bernoulli(p)
/// mask allows exact recovery, with `a = p - 1 + 1/(2 mu r (r_s + 1))`.
/// Returns 0 when the gap is not positive.
pub fn bernoulli_bound(p: f64, mu: f64, r: usize, rs: usize, m0: usize) -> f64 {
    let gap = p - (sampling_threshold(mu, r, rs));
    if gap > 0.0 {
        -(-4.0 * gap * gap * m0 as f64).exp_m1()
    } else {
        0.0
    }
}

/// [`bernoulli_bound`] with `mu`, `r`, `r_s` and `m0` taken from `a`.
pub fn bernoulli_success_probability(p: f64, a: &DenseTensor) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let inc = incoherence_mu(a)?;
    Ok(bernoulli_bound(p, inc.mu, inc.tubal_rank, inc.multi_rank_sum, a.shape().numel()))
}

/// Largest horizon with a guaranteed exact forecast.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonBound {
    pub h_max: usize,
    pub mu_t: f64,
    pub r_t: usize,
    pub rs_t: usize,
    /// `k / (2 mu_t r_t (rs_t + 1))`; every `h` strictly below it is covered.
    pub bound: f64,
}

/// Largest integer strictly below `bound`, floored at 0.
pub fn largest_integer_below(bound: f64) -> usize {
    if bound <= 0.0 || !bound.is_finite() {
        0
    } else {
        (bound.ceil() - 1.0).max(0.0) as usize
    }
}

/// Horizon guarantee from the incoherence of `T_k(series)`.
///
/// A series whose convolution tensor is zero has no coherence to measure;
/// it is reported with `h_max = 0`, `r_t = 0`.
pub fn max_exact_horizon(series: &TemporalSeries, k: usize) -> Result<HorizonBound> {
    KernelSize::new(k, series.len())?;
    let tk = conv_tensor(series, k)?;
    let inc = match incoherence_mu(&tk) {
        Ok(inc) => inc,
        Err(Error::ZeroTensor) => return Ok(HorizonBound { h_max: 0, mu_t: 0.0, r_t: 0, rs_t: 0, bound: 0.0 }),
        Err(e) => return Err(e),
    };
    let bound = k as f64 / (2.0 * inc.mu * inc.tubal_rank as f64 * (inc.multi_rank_sum as f64 + 1.0));
    Ok(HorizonBound {
        h_max: largest_integer_below(bound),
        mu_t: inc.mu,
        r_t: inc.tubal_rank,
        rs_t: inc.multi_rank_sum,
        bound,
    })
}
