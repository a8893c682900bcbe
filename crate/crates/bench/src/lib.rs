//! Seeded inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tctnn_core::temporal_conv::TemporalSeries;
use tctnn_core::{DenseTensor, Shape};

/// Standard normal entries, reproducible under `seed`.
pub fn gaussian(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(Shape::new(dims.to_vec()).expect("valid dims"), |_| StandardNormal.sample(&mut rng))
        .expect("finite entries")
}

pub fn gaussian_series(dims: &[usize], seed: u64) -> TemporalSeries {
    TemporalSeries::new(gaussian(dims, seed)).expect("at least two samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_reproducible() {
        assert_eq!(gaussian(&[3, 2, 2], 1), gaussian(&[3, 2, 2], 1));
        assert_ne!(gaussian(&[3, 2, 2], 1), gaussian(&[3, 2, 2], 2));
        assert_eq!(gaussian_series(&[4, 2], 0).len(), 4);
    }
}
