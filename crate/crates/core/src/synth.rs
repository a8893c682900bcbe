//! Seeded synthetic series.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal_conv::TemporalSeries;
use crate::tensor::{DenseTensor, Shape};
use crate::tsvd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Per-fiber sums of sinusoids sharing an integer period.
    Periodic,
    /// Gaussian random walks.
    Smooth,
    /// t-product of two random Gaussian factors of tubal rank `rank`.
    Lowrank,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Self::Periodic),
            "smooth" => Ok(Self::Smooth),
            "lowrank" => Ok(Self::Lowrank),
            other => Err(Error::InvalidArgument(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Period of the periodic kind.
    pub period: usize,
    /// Number of harmonics of the periodic kind.
    pub harmonics: usize,
    /// Periodic kind: each harmonic is a plane wave travelling across the
    /// feature grid with random integer wavenumbers. Otherwise every fiber
    /// draws its own amplitudes and phases.
    pub coherent: bool,
    /// Standard deviation of additive Gaussian noise (periodic kind).
    pub noise: f64,
    /// Standard deviation of random-walk steps (smooth kind).
    pub step: f64,
    /// Tubal rank of the lowrank kind.
    pub rank: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { period: 4, harmonics: 2, coherent: true, noise: 0.0, step: 0.1, rank: 2 }
    }
}

/// Generates a series of shape `dims = (t, n1, ..., np)`.
pub fn synth(kind: SynthKind, dims: &[usize], params: &SynthParams, seed: u64) -> Result<TemporalSeries> {
    let shape = Shape::new(dims.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensor = match kind {
        SynthKind::Periodic => periodic(&shape, params, &mut rng)?,
        SynthKind::Smooth => smooth(&shape, params, &mut rng)?,
        SynthKind::Lowrank => lowrank(&shape, params, &mut rng)?,
    };
    TemporalSeries::new(tensor)
}

fn periodic(shape: &Shape, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    if p.period == 0 || p.harmonics == 0 || !(p.noise >= 0.0) {
        return Err(Error::InvalidArgument("periodic series needs period >= 1, harmonics >= 1, noise >= 0".into()));
    }
    let t = shape.m1();
    let features = &shape.dims()[1..];
    let n: usize = features.iter().product();
    let offsets: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    // Per harmonic: amplitude, phase, and the wavenumber of each feature mode.
    let draw_wave = |h: usize, rng: &mut ChaCha8Rng| {
        let amp: f64 = StandardNormal.sample(rng);
        let phase = rng.random_range(0.0..TAU);
        (amp / h as f64, phase)
    };
    let (waves, wavenumbers): (Vec<Vec<(f64, f64)>>, Vec<Vec<usize>>) = if p.coherent {
        let w: Vec<(f64, f64)> = (1..=p.harmonics).map(|h| draw_wave(h, rng)).collect();
        let k = (0..p.harmonics).map(|_| features.iter().map(|&nj| rng.random_range(0..nj)).collect()).collect();
        (vec![w], k)
    } else {
        let w = (0..n).map(|_| (1..=p.harmonics).map(|h| draw_wave(h, rng)).collect()).collect();
        (w, vec![vec![0; features.len()]; p.harmonics])
    };
    // Spatial phase of fiber `f` for harmonic `h`, from its multi-index.
    let spatial = |f: usize, h: usize| {
        let mut rest = f;
        let mut acc = 0.0;
        for (j, &nj) in features.iter().enumerate().rev() {
            acc += (wavenumbers[h][j] * (rest % nj)) as f64 / nj as f64;
            rest /= nj;
        }
        acc
    };
    let noise = Normal::new(0.0, p.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut data = Vec::with_capacity(t * n);
    for i in 0..t {
        let cycle = (i % p.period) as f64 / p.period as f64;
        for (f, offset) in offsets.iter().enumerate() {
            let fiber = &waves[if p.coherent { 0 } else { f }];
            let clean: f64 = offset
                + fiber
                    .iter()
                    .enumerate()
                    .map(|(h, (amp, phi))| amp * (TAU * ((h + 1) as f64 * cycle - spatial(f, h)) + phi).sin())
                    .sum::<f64>();
            data.push(if p.noise > 0.0 { clean + noise.sample(rng) } else { clean });
        }
    }
    DenseTensor::from_vec(shape.clone(), data)
}

fn smooth(shape: &Shape, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    let step = Normal::new(0.0, p.step).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let t = shape.m1();
    let n = shape.numel() / t;
    let mut level: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mut data = Vec::with_capacity(t * n);
    data.extend_from_slice(&level);
    for _ in 1..t {
        for l in level.iter_mut() {
            *l += step.sample(rng);
        }
        data.extend_from_slice(&level);
    }
    DenseTensor::from_vec(shape.clone(), data)
}

fn lowrank(shape: &Shape, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    if shape.order() < 3 {
        return Err(Error::Order { required: 3, actual: shape.order() });
    }
    if p.rank == 0 || p.rank > shape.m1().min(shape.m2()) {
        return Err(Error::InvalidArgument(format!("rank {} outside 1..=min(m1, m2)", p.rank)));
    }
    let mut gaussian = |s: Shape| DenseTensor::from_fn(s, |_| StandardNormal.sample(&mut *rng));
    let u = gaussian(shape.with_leading(shape.m1(), p.rank)?)?;
    let v = gaussian(shape.with_leading(p.rank, shape.m2())?)?;
    tsvd::t_product(&u, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal_conv::{periodicity_beta, smoothness_eta};

    #[test]
    fn periodic_with_dividing_period_is_exact() {
        for coherent in [true, false] {
            let p = SynthParams { period: 6, coherent, ..Default::default() };
            let s = synth(SynthKind::Periodic, &[24, 3, 2], &p, 1).unwrap();
            assert!(periodicity_beta(&s, 6).unwrap() < 1e-12);
            assert!(periodicity_beta(&s, 5).unwrap() > 1e-3);
        }
    }

    #[test]
    fn coherent_harmonics_are_plane_waves() {
        // Without offsets a single plane wave is a shift of one fiber's series.
        let p = SynthParams { period: 8, harmonics: 1, ..Default::default() };
        let s = synth(SynthKind::Periodic, &[16, 4], &p, 7).unwrap();
        let x = s.tensor();
        let centered = |f: usize| -> Vec<f64> {
            let col: Vec<f64> = (0..16).map(|i| x.data()[i * 4 + f]).collect();
            let mean = col.iter().sum::<f64>() / 16.0;
            col.iter().map(|v| v - mean).collect()
        };
        let base = centered(0);
        for f in 1..4 {
            let other = centered(f);
            let matched = (0..8).any(|lag| (0..16).all(|i| (other[i] - base[(i + lag) % 16]).abs() < 1e-12));
            assert!(matched, "fiber {f} is not a time shift of fiber 0");
        }
    }

    #[test]
    fn smooth_eta_is_in_band() {
        let (t, n, sigma) = (200, 6, 0.05);
        let p = SynthParams { step: sigma, ..Default::default() };
        for seed in 0..20 {
            let s = synth(SynthKind::Smooth, &[t, n], &p, seed).unwrap();
            let scale = sigma * ((t * n) as f64).sqrt();
            let eta = smoothness_eta(&s);
            assert!(eta <= 3.0 * scale && eta >= scale / 3.0);
        }
    }

    #[test]
    fn lowrank_has_requested_tubal_rank() {
        let p = SynthParams { rank: 2, ..Default::default() };
        let s = synth(SynthKind::Lowrank, &[6, 5, 4], &p, 3).unwrap();
        assert_eq!(tsvd::tubal_rank(s.tensor()).unwrap(), 2);
        assert!(synth(SynthKind::Lowrank, &[6, 5], &p, 3).is_err());
        assert!(synth(SynthKind::Lowrank, &[6, 5, 4], &SynthParams { rank: 6, ..p }, 3).is_err());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let p = SynthParams { noise: 0.1, ..Default::default() };
        for kind in [SynthKind::Periodic, SynthKind::Smooth, SynthKind::Lowrank] {
            let a = synth(kind, &[8, 3, 2], &p, 42).unwrap();
            assert_eq!(a, synth(kind, &[8, 3, 2], &p, 42).unwrap());
            assert_ne!(a, synth(kind, &[8, 3, 2], &p, 43).unwrap());
        }
        assert!("bogus".parse::<SynthKind>().is_err());
    }
}
