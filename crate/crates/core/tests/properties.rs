use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tctnn_core::sampling::SamplingMask;
use tctnn_core::solver::{solve_tctnn, AdmmConfig};
use tctnn_core::temporal_conv::{conv_inverse, conv_sampling_mask, conv_tensor, TemporalSeries};
use tctnn_core::{theory, tsvd, DenseTensor, Shape};

fn gaussian(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), |_| rng.sample(StandardNormal)).unwrap()
}

fn order3or4() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=5, 3..=4)
}

fn series_dims() -> impl Strategy<Value = Vec<usize>> {
    (2usize..=12, prop::collection::vec(1usize..=4, 1..=2)).prop_map(|(t, rest)| [vec![t], rest].concat())
}

fn random_mask(shape: &Shape, seed: u64) -> SamplingMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(0.2..0.9);
    let mut ind = DenseTensor::from_fn(shape.clone(), |_| f64::from(rng.random_bool(p))).unwrap();
    ind.set(&vec![0; shape.order()], 1.0);
    SamplingMask::from_indicator(ind).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_index_roundtrips(dims in prop::collection::vec(1usize..=5, 2..=4), seed: u64) {
        let shape = Shape::new(dims).unwrap();
        let strides = shape.strides();
        prop_assert_eq!(*strides.last().unwrap(), 1);
        let mut t = DenseTensor::zeros(shape.clone());
        let lin = (seed as usize) % shape.numel();
        let idx = shape.multi_index(lin);
        prop_assert_eq!(idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>(), lin);
        let v = (seed as f64).sqrt();
        t.set(&idx, v);
        prop_assert_eq!(t.get(&idx).to_bits(), v.to_bits());
    }

    #[test]
    fn bcirc_is_linear(dims in order3or4(), seed: u64, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let a = gaussian(&dims, seed);
        let b = gaussian(&dims, seed ^ 1);
        let mut mix = a.scale(alpha);
        mix.axpy(beta, &b).unwrap();
        let mut expected = a.bcirc().unwrap().scale(alpha);
        expected.axpy(beta, &b.bcirc().unwrap()).unwrap();
        let got = mix.bcirc().unwrap();
        prop_assert!(got.distance(&expected).unwrap() <= 1e-12 * expected.frobenius_norm().max(1.0));
    }

    #[test]
    fn bfold_inverts_bunfold(dims in order3or4(), seed: u64) {
        let a = gaussian(&dims, seed);
        let unfolded = a.bunfold().unwrap();
        prop_assert_eq!(&DenseTensor::bfold(&unfolded, a.shape()).unwrap(), &a);
        prop_assert_eq!(DenseTensor::bfold(&unfolded, a.shape()).unwrap().bunfold().unwrap(), unfolded);
    }

    #[test]
    fn t_product_matches_block_circulant(dims in order3or4(), l in 1usize..=5, seed: u64) {
        let a = gaussian(&[vec![dims[0], l], dims[2..].to_vec()].concat(), seed);
        let b = gaussian(&[vec![l, dims[1]], dims[2..].to_vec()].concat(), seed ^ 2);
        let fast = tsvd::t_product(&a, &b).unwrap();
        let oracle = DenseTensor::bfold(&a.bcirc().unwrap().matmul(&b.bunfold().unwrap()).unwrap(), fast.shape()).unwrap();
        prop_assert!(fast.distance(&oracle).unwrap() <= 1e-10 * oracle.frobenius_norm().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn dual_norm_inequality(dims in order3or4(), seed: u64) {
        let a = gaussian(&dims, seed);
        let b = gaussian(&dims, seed ^ 3);
        let inner = a.inner(&b).unwrap().abs();
        prop_assert!(inner <= tsvd::tnn(&a).unwrap() * tsvd::spectral_norm(&b).unwrap() + 1e-9);
    }

    #[test]
    fn svt_shrinks_singular_values_and_rank(dims in order3or4(), seed: u64, frac in 0.0f64..1.2) {
        let a = gaussian(&dims, seed);
        let before = tsvd::face_singular_values(&a).unwrap();
        let tau = frac * before.iter().flatten().copied().fold(0.0, f64::max);
        let y = tsvd::t_svt(&a, tau).unwrap();
        let after = tsvd::face_singular_values(&y).unwrap();
        for (sb, sa) in before.iter().zip(&after) {
            for (b, v) in sb.iter().zip(sa) {
                prop_assert!((v - (b - tau).max(0.0)).abs() <= 1e-9);
            }
        }
        prop_assert!(tsvd::tubal_rank(&y).unwrap() <= tsvd::tubal_rank(&a).unwrap());
    }

    #[test]
    fn mask_counts_are_consistent(dims in order3or4(), seed: u64) {
        let shape = Shape::new(dims).unwrap();
        let mask = random_mask(&shape, seed);
        prop_assert_eq!(mask.horizontal_counts().iter().sum::<usize>(), mask.count());
        prop_assert_eq!(mask.lateral_counts().iter().sum::<usize>(), mask.count());
    }

    #[test]
    fn sampling_ratio_ignores_trailing_permutations(dims in order3or4(), seed: u64, mode_pick: usize) {
        let shape = Shape::new(dims.clone()).unwrap();
        let mask = random_mask(&shape, seed);
        let mode = 2 + mode_pick % (dims.len() - 2);
        let mut perm: Vec<usize> = (0..dims[mode]).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % dims[mode]);
        let permuted = DenseTensor::from_fn(shape.clone(), |ix| {
            let mut src = ix.to_vec();
            src[mode] = perm[ix[mode]];
            mask.indicator().get(&src)
        }).unwrap();
        let permuted = SamplingMask::from_indicator(permuted).unwrap();
        prop_assert_eq!(permuted.min_sampling_ratio(), mask.min_sampling_ratio());
    }

    #[test]
    fn projection_is_idempotent_and_contractive(dims in order3or4(), seed: u64, alpha in -2.0f64..2.0) {
        let shape = Shape::new(dims.clone()).unwrap();
        let mask = random_mask(&shape, seed);
        let a = gaussian(&dims, seed ^ 4);
        let b = gaussian(&dims, seed ^ 5);
        let pa = mask.project(&a).unwrap();
        prop_assert_eq!(&mask.project(&pa).unwrap(), &pa);
        prop_assert!(pa.frobenius_norm() <= a.frobenius_norm());
        let mut lin = a.clone();
        lin.axpy(alpha, &b).unwrap();
        let mut expected = pa.clone();
        expected.axpy(alpha, &mask.project(&b).unwrap()).unwrap();
        prop_assert!(mask.project(&lin).unwrap().distance(&expected).unwrap() <= 1e-12 * expected.frobenius_norm().max(1.0));
    }

    #[test]
    fn conv_tensor_scales_norm_and_inverts(dims in series_dims(), seed: u64, kpick: usize) {
        let x = TemporalSeries::new(gaussian(&dims, seed)).unwrap();
        let k = 1 + kpick % x.len();
        let tk = conv_tensor(&x, k).unwrap();
        let ratio = tk.frobenius_norm().powi(2) / x.tensor().frobenius_norm().powi(2);
        prop_assert!((ratio - k as f64).abs() <= 1e-12 * k as f64);
        prop_assert_eq!(conv_inverse(&tk).unwrap(), x.clone());
        let first = DenseTensor::from_fn(x.tensor().shape().clone(), |ix| {
            let mut at = vec![ix[0], 0];
            at.extend_from_slice(&ix[1..]);
            tk.get(&at)
        }).unwrap();
        prop_assert_eq!(&first, x.tensor());
    }

    #[test]
    fn sampling_commutes_with_convolution(dims in series_dims(), seed: u64, kpick: usize) {
        let x = TemporalSeries::new(gaussian(&dims, seed)).unwrap();
        let k = 1 + kpick % x.len();
        let mask = random_mask(x.tensor().shape(), seed ^ 6);
        let lhs = conv_sampling_mask(&mask, k).unwrap().project(&conv_tensor(&x, k).unwrap()).unwrap();
        let rhs = conv_tensor(&TemporalSeries::new(mask.project(x.tensor()).unwrap()).unwrap(), k).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn leverage_sums_to_tubal_rank(dims in order3or4(), seed: u64) {
        let a = gaussian(&dims, seed);
        let inc = theory::incoherence_mu(&a).unwrap();
        let r = inc.tubal_rank as f64;
        prop_assert!((inc.per_row_leverage.iter().sum::<f64>() - r).abs() <= 1e-8);
        prop_assert!((inc.per_col_leverage.iter().sum::<f64>() - r).abs() <= 1e-8);
        prop_assert!(inc.mu >= 1.0 - 1e-9);
        let mask = random_mask(a.shape(), seed ^ 7);
        let check = theory::deterministic_recovery_check(&mask, &a).unwrap();
        prop_assert!(check.rhs > 0.0 && check.rhs < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_keeps_observations_and_is_deterministic(dims in series_dims(), seed: u64) {
        let x = gaussian(&dims, seed);
        let mask = random_mask(x.shape(), seed ^ 8);
        let observed = TemporalSeries::new(mask.project(&x).unwrap()).unwrap();
        let cfg = AdmmConfig { max_iters: 200, ..Default::default() };
        let (out, report) = solve_tctnn(&observed, &mask, &cfg).unwrap();
        prop_assert_eq!(mask.project(out.tensor()).unwrap(), observed.tensor().clone());
        if report.converged && report.iterations > 0 {
            let tk = conv_tensor(&out, cfg.kernel.resolve(out.len()).unwrap()).unwrap();
            prop_assert!(report.feasibility_gap <= 1e-6 * tk.frobenius_norm().max(f64::MIN_POSITIVE));
        }
        let (again, rerun) = solve_tctnn(&observed, &mask, &cfg).unwrap();
        prop_assert_eq!(again, out);
        prop_assert_eq!(rerun.rel_changes.len(), report.rel_changes.len());
        for (p, q) in rerun.rel_changes.iter().zip(&report.rel_changes) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }
}

/// Doubling `n1` should roughly double the per-iteration cost.
#[test]
fn iteration_cost_scales_with_features() {
    let cfg = AdmmConfig { max_iters: 10, mu0: 1e-5, rel_tol: 1e-300, feas_tol: 1e-300, ..Default::default() };
    let time = |n1: usize| {
        let x = gaussian(&[48, n1, 4], 9);
        let mask = SamplingMask::prediction(48, 5, &[n1, 4]).unwrap();
        let observed = TemporalSeries::new(mask.project(&x).unwrap()).unwrap();
        let mut samples: Vec<f64> = (0..5)
            .map(|_| {
                let (_, r) = solve_tctnn(&observed, &mask, &cfg).unwrap();
                assert_eq!(r.iterations, 10);
                r.wall_time.as_secs_f64() / r.iterations as f64
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        samples[2]
    };
    let ratio = time(8) / time(4);
    assert!(ratio <= 2.6, "doubling n1 scaled iteration time by {ratio:.2}");
}
