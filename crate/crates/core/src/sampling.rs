//! Observation sets as 0/1 mask tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

/// Name of the generator behind [`SamplingMask::bernoulli`], recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Provenance of a Bernoulli mask.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernoulliInfo {
    pub algorithm: &'static str,
    pub seed: u64,
    pub p: f64,
    pub empirical_fraction: f64,
    /// Whether the empirical fraction lies within `3 * sqrt(p(1-p)/m0)` of `p`.
    pub within_band: bool,
}

/// Indicator tensor of an observation set with cached sub-tensor tallies.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    indicator: DenseTensor,
    horizontal: Vec<usize>,
    lateral: Vec<usize>,
    bernoulli: Option<BernoulliInfo>,
}

impl SamplingMask {
    pub fn from_indicator(indicator: DenseTensor) -> Result<Self> {
        if let Some((index, &value)) =
            indicator.data().iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0)
        {
            return Err(Error::NotBinary { index, value });
        }
        let shape = indicator.shape();
        let (m1, m2, m) = (shape.m1(), shape.m2(), shape.face_count());
        let mut horizontal = vec![0; m1];
        let mut lateral = vec![0; m2];
        for (lin, &v) in indicator.data().iter().enumerate() {
            if v == 1.0 {
                let ij = lin / m;
                horizontal[ij / m2] += 1;
                lateral[ij % m2] += 1;
            }
        }
        Ok(Self { indicator, horizontal, lateral, bernoulli: None })
    }

    pub fn all_ones(shape: Shape) -> Self {
        Self::from_indicator(DenseTensor::ones(shape)).expect("ones are binary")
    }

    /// Forecasting mask over `(t, trailing...)`: the first `t - h` time
    /// samples observed, the last `h` missing.
    pub fn prediction(t: usize, h: usize, trailing: &[usize]) -> Result<Self> {
        if h >= t {
            return Err(Error::InvalidArgument(format!("horizon {h} must be smaller than length {t}")));
        }
        let mut dims = vec![t];
        dims.extend_from_slice(trailing);
        if dims.len() < 2 {
            dims.push(1);
        }
        let shape = Shape::new(dims)?;
        let per_sample = shape.numel() / t;
        let data = (0..shape.numel()).map(|lin| if lin / per_sample < t - h { 1.0 } else { 0.0 }).collect();
        Self::from_indicator(DenseTensor::from_vec(shape, data)?)
    }

    /// I.i.d. Bernoulli(`p`) mask drawn from a seeded ChaCha8 stream.
    pub fn bernoulli(shape: Shape, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.numel();
        let data = (0..n).map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 }).collect();
        let mut mask = Self::from_indicator(DenseTensor::from_vec(shape, data)?)?;
        let empirical_fraction = mask.count() as f64 / n as f64;
        let band = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        mask.bernoulli = Some(BernoulliInfo {
            algorithm: RNG_ALGORITHM,
            seed,
            p,
            empirical_fraction,
            within_band: (empirical_fraction - p).abs() <= band,
        });
        Ok(mask)
    }

    pub fn shape(&self) -> &Shape {
        self.indicator.shape()
    }

    pub fn indicator(&self) -> &DenseTensor {
        &self.indicator
    }

    pub fn bernoulli_info(&self) -> Option<&BernoulliInfo> {
        self.bernoulli.as_ref()
    }

    pub fn is_observed(&self, lin: usize) -> bool {
        self.indicator.data()[lin] == 1.0
    }

    /// Number of observed entries.
    pub fn count(&self) -> usize {
        self.horizontal.iter().sum()
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.shape().numel()
    }

    /// Observed entries in the `i1`-th horizontal sub-tensor `X(i1, :, ..., :)`.
    pub fn horizontal_count(&self, i1: usize) -> Result<usize> {
        self.horizontal
            .get(i1)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i1, extent: self.horizontal.len() })
    }

    /// Observed entries in the `i2`-th lateral sub-tensor `X(:, i2, :, ..., :)`.
    pub fn lateral_count(&self, i2: usize) -> Result<usize> {
        self.lateral
            .get(i2)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i2, extent: self.lateral.len() })
    }

    pub fn horizontal_counts(&self) -> &[usize] {
        &self.horizontal
    }

    pub fn lateral_counts(&self) -> &[usize] {
        &self.lateral
    }

    /// Smallest observed fraction over all horizontal and lateral sub-tensors.
    pub fn min_sampling_ratio(&self) -> f64 {
        let shape = self.shape();
        let m = shape.face_count() as f64;
        let h_den = shape.m2() as f64 * m;
        let l_den = shape.m1() as f64 * m;
        let h = self.horizontal.iter().map(|&c| c as f64 / h_den);
        let l = self.lateral.iter().map(|&c| c as f64 / l_den);
        h.chain(l).fold(1.0, f64::min)
    }

    /// Mask of the unobserved entries.
    pub fn complement(&self) -> Self {
        let flipped = self.indicator.scale(-1.0).map(|v| v + 1.0).expect("finite");
        Self::from_indicator(flipped).expect("complement of a binary mask is binary")
    }

    /// `P_Omega(a)`: keeps observed entries, zeroes the rest.
    pub fn project(&self, a: &DenseTensor) -> Result<DenseTensor> {
        self.indicator.hadamard(a)
    }
}

/// The 4 x 4 x 3 mask used to illustrate sub-tensor sampling numbers: its
/// third horizontal sub-tensor holds 10 observed entries and its second
/// lateral sub-tensor holds 9.
pub fn illustration_mask() -> SamplingMask {
    // rows: i1, columns: (i2, i3) in row-major order, 1 = observed
    #[rustfmt::skip]
    let rows: [[u8; 12]; 4] = [
        [1, 0, 1, 1, 1, 0, 0, 1, 1, 1, 0, 1],
        [0, 1, 1, 1, 0, 1, 1, 1, 0, 1, 1, 0],
        [1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 1, 1],
        [1, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1],
    ];
    let data = rows.iter().flatten().map(|&v| v as f64).collect();
    let shape = Shape::new(vec![4, 4, 3]).expect("static shape");
    SamplingMask::from_indicator(DenseTensor::from_vec(shape, data).expect("static data"))
        .expect("binary fixture")
}
