//! Temporal convolution tensors.
//!
//! For a series `M` of shape `(t, n1, ..., np)` the transform `T_k` stacks the
//! first `k` circular time shifts of `M` as a new second mode:
//!
//! ```text
//! T_k(M)[i, j, f] = M[(i - j) mod t, f]      (0-based)
//! ```
//!
//! so column `j` of every fiber is the series delayed by `j` samples and
//! `T_k(M)[:, 0, ...] = M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SamplingMask;
use crate::tensor::{DenseTensor, Shape};
use crate::tsvd;

/// A multidimensional time series; mode 1 is time.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalSeries {
    tensor: DenseTensor,
}

impl TemporalSeries {
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        if tensor.shape().m1() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a series needs at least 2 time samples, got {}",
                tensor.shape().m1()
            )));
        }
        Ok(Self { tensor })
    }

    /// Scalar series stored with shape `(t, 1)`.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(DenseTensor::from_vec(Shape::new(vec![values.len().max(1), 1])?, values.to_vec())?)
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.tensor
    }

    /// Number of time samples `t`.
    pub fn len(&self) -> usize {
        self.tensor.shape().m1()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Extents `(n1, ..., np)` of one time sample.
    pub fn feature_dims(&self) -> &[usize] {
        &self.tensor.dims()[1..]
    }

    /// Number of scalar fibers `n1 * ... * np`.
    pub fn fiber_count(&self) -> usize {
        self.feature_dims().iter().product()
    }

    /// Time sample `i` as a flat slice of length `fiber_count`.
    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.fiber_count();
        &self.tensor.data()[i * n..(i + 1) * n]
    }

    /// Samples `range` as a new series (at least 2 samples) or tensor.
    pub fn slice_time(&self, start: usize, len: usize) -> Result<DenseTensor> {
        if start + len > self.len() || len == 0 {
            return Err(Error::InvalidArgument(format!(
                "time window {start}..{} outside series of length {}",
                start + len,
                self.len()
            )));
        }
        let n = self.fiber_count();
        let mut dims = self.tensor.dims().to_vec();
        dims[0] = len;
        DenseTensor::from_vec(Shape::new(dims)?, self.tensor.data()[start * n..(start + len) * n].to_vec())
    }
}

/// Kernel size `k` with `1 <= k <= t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSize(usize);

impl KernelSize {
    pub fn new(k: usize, t: usize) -> Result<Self> {
        if k == 0 || k > t {
            return Err(Error::InvalidArgument(format!("kernel size {k} outside 1..={t}")));
        }
        Ok(Self(k))
    }

    /// Half the time dimension, rounded up.
    pub fn half(t: usize) -> Self {
        Self(t.div_ceil(2).max(1))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// `[M *_t kernel](i, f) = sum_j M((i - j) mod t, f) * kernel(j)` (0-based).
pub fn temporal_circular_conv(series: &TemporalSeries, kernel: &[f64]) -> Result<TemporalSeries> {
    let t = series.len();
    KernelSize::new(kernel.len(), t)?;
    let n = series.fiber_count();
    let src = series.tensor.data();
    let mut out = vec![0.0; t * n];
    for i in 0..t {
        for (j, &w) in kernel.iter().enumerate() {
            let s = (i + t - j) % t;
            for f in 0..n {
                out[i * n + f] += w * src[s * n + f];
            }
        }
    }
    TemporalSeries::new(DenseTensor::from_vec(series.tensor.shape().clone(), out)?)
}

fn conv_shape(series_dims: &[usize], k: usize) -> Result<Shape> {
    let mut dims = Vec::with_capacity(series_dims.len() + 1);
    dims.push(series_dims[0]);
    dims.push(k);
    dims.extend_from_slice(&series_dims[1..]);
    Shape::new(dims)
}

/// Raw transform on a tensor of shape `(t, features...)`.
pub(crate) fn conv_tensor_raw(x: &DenseTensor, k: usize) -> Result<DenseTensor> {
    let t = x.shape().m1();
    KernelSize::new(k, t)?;
    let n = x.shape().numel() / t;
    let shape = conv_shape(x.dims(), k)?;
    let src = x.data();
    let mut out = vec![0.0; shape.numel()];
    for i in 0..t {
        for j in 0..k {
            let s = (i + t - j) % t;
            out[(i * k + j) * n..(i * k + j + 1) * n].copy_from_slice(&src[s * n..(s + 1) * n]);
        }
    }
    Ok(DenseTensor::from_raw(shape, out))
}

/// Temporal convolution tensor `T_k(M)` of shape `(t, k, n1, ..., np)`.
pub fn conv_tensor(series: &TemporalSeries, k: usize) -> Result<DenseTensor> {
    conv_tensor_raw(&series.tensor, k)
}

/// How `T_k^{-1}` maps a tensor that need not lie in the range of `T_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseMode {
    /// `(1/k) T_k^T`: average of the `k` replicated copies (least squares).
    #[default]
    ScaledAdjoint,
    /// Read the first lateral slice.
    FirstSlice,
}

impl std::str::FromStr for InverseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled-adjoint" => Ok(Self::ScaledAdjoint),
            "first-slice" => Ok(Self::FirstSlice),
            other => Err(Error::InvalidArgument(format!("unknown inverse mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for InverseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ScaledAdjoint => "scaled-adjoint",
            Self::FirstSlice => "first-slice",
        })
    }
}

pub(crate) fn conv_inverse_raw(y: &DenseTensor, mode: InverseMode) -> Result<DenseTensor> {
    if y.shape().order() < 3 {
        return Err(Error::Order { required: 3, actual: y.shape().order() });
    }
    let (t, k) = (y.shape().m1(), y.shape().m2());
    if k > t {
        return Err(Error::InvalidArgument(format!("kernel extent {k} exceeds time extent {t}")));
    }
    let n = y.shape().face_count();
    let mut dims = vec![t];
    dims.extend_from_slice(y.shape().trailing());
    let shape = Shape::new(dims)?;
    let src = y.data();
    let mut out = vec![0.0; t * n];
    match mode {
        InverseMode::FirstSlice => {
            for s in 0..t {
                out[s * n..(s + 1) * n].copy_from_slice(&src[(s * k) * n..(s * k + 1) * n]);
            }
        }
        InverseMode::ScaledAdjoint => {
            // Sample s sits at (i, j) with i = s + j mod t. The mean is taken
            // relative to the j = 0 copy, so k identical copies return it exactly.
            let inv = 1.0 / k as f64;
            for s in 0..t {
                let base = &src[(s * k) * n..(s * k + 1) * n];
                let mut dev = vec![0.0; n];
                for j in 1..k {
                    let i = (s + j) % t;
                    for ((d, v), b) in dev.iter_mut().zip(&src[(i * k + j) * n..(i * k + j + 1) * n]).zip(base) {
                        *d += v - b;
                    }
                }
                for ((a, b), d) in out[s * n..(s + 1) * n].iter_mut().zip(base).zip(&dev) {
                    *a = b + d * inv;
                }
            }
        }
    }
    Ok(DenseTensor::from_raw(shape, out))
}

/// Least-squares pseudo-inverse `(1/k) T_k^T`: the series minimizing
/// `||T_k(x) - y||_F`.
pub fn conv_inverse(y: &DenseTensor) -> Result<TemporalSeries> {
    conv_inverse_with(y, InverseMode::ScaledAdjoint)
}

pub fn conv_inverse_with(y: &DenseTensor, mode: InverseMode) -> Result<TemporalSeries> {
    TemporalSeries::new(conv_inverse_raw(y, mode)?)
}

/// Mask of `Omega_T`, the image of the mask under `T_k`.
pub fn conv_sampling_mask(mask: &SamplingMask, k: usize) -> Result<SamplingMask> {
    SamplingMask::from_indicator(conv_tensor_raw(mask.indicator(), k)?)
}

fn sample_distance(series: &TemporalSeries, a: usize, b: usize) -> f64 {
    series
        .sample(a)
        .iter()
        .zip(series.sample(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Smoothness indicator `eta(M) = sqrt(sum_i ||M_{i+1} - M_i||_F^2)`.
pub fn smoothness_eta(series: &TemporalSeries) -> f64 {
    (0..series.len() - 1).map(|i| sample_distance(series, i + 1, i).powi(2)).sum::<f64>().sqrt()
}

/// Periodicity indicator `beta_tau(M) = max_i ||M_i - M_{i+tau}||_F` with
/// circular extension in time.
pub fn periodicity_beta(series: &TemporalSeries, tau: usize) -> Result<f64> {
    let t = series.len();
    if tau == 0 || tau > t {
        return Err(Error::InvalidArgument(format!("period {tau} outside 1..={t}")));
    }
    Ok((0..t).map(|i| sample_distance(series, i, (i + tau) % t)).fold(0.0, f64::max))
}

/// Distance from `y` to the nearest tensor of tubal rank `<= r`.
pub fn rank_r_error(y: &DenseTensor, r: usize) -> Result<f64> {
    let values = tsvd::face_singular_values(y)?;
    let m = y.shape().face_count() as f64;
    let tail: f64 = values.iter().flat_map(|s| s.iter().skip(r)).map(|v| v * v).sum();
    Ok((tail / m).sqrt())
}

/// `sqrt(t (k + r) / 3) * ceil(k / r) * eta(M)`.
pub fn smoothness_bound(series: &TemporalSeries, k: usize, r: usize) -> Result<f64> {
    let t = series.len();
    KernelSize::new(k, t)?;
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let factor = (t as f64 * (k + r) as f64 / 3.0).sqrt() * k.div_ceil(r) as f64;
    Ok(factor * smoothness_eta(series))
}

/// `tau * t * (ceil(k / tau) - 1) * beta_tau(M)`.
pub fn periodicity_bound(series: &TemporalSeries, k: usize, tau: usize) -> Result<f64> {
    let t = series.len();
    KernelSize::new(k, t)?;
    let beta = periodicity_beta(series, tau)?;
    Ok(tau as f64 * t as f64 * (k.div_ceil(tau) - 1) as f64 * beta)
}
