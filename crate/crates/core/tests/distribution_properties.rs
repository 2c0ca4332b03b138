use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qdt::analysis::PovmSet;
use qdt::prob::{hellinger_sq, simplex_project};
use qdt::rabi::{exact_unitary_oracle, ideal_distribution_at_phase};
use qdt::simulator::{build_detector, BlurKernel};
use qdt::{DarkCountModel, DetectorMatrix, DiagonalState, ProbVector, SyntheticDetectorSpec};

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5.0f64..5.0, len)
}

proptest! {
    #[test]
    fn projection_lands_on_simplex_and_is_idempotent(x in finite_vec(1..40)) {
        let p = simplex_project(&x);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = simplex_project(&p);
        for (a, b) in p.iter().zip(again.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    /// The projection is the nearest simplex point: no other sampled
    /// distribution is closer.
    #[test]
    fn projection_is_nearest(x in finite_vec(2..12), y in proptest::collection::vec(0.0f64..1.0, 12)) {
        let p = simplex_project(&x);
        let y: Vec<f64> = y[..x.len()].to_vec();
        let total: f64 = y.iter().sum();
        prop_assume!(total > 1e-9);
        let q: Vec<f64> = y.iter().map(|v| v / total).collect();
        let d = |a: &[f64]| a.iter().zip(&x).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
        prop_assert!(d(&p) <= d(&q) + 1e-12);
    }

    #[test]
    fn random_detectors_form_complete_povms(n_max in 0usize..30, seed in any::<u64>()) {
        let v = DetectorMatrix::random(n_max, &mut ChaCha8Rng::seed_from_u64(seed));
        let povm = PovmSet::from_matrix(&v);
        prop_assert_eq!(povm.len(), n_max + 1);
        prop_assert!(povm.completeness_residual() < 1e-12);
        prop_assert!(PovmSet::from_elements((0..=n_max).map(|n| v.row(n).to_vec()).collect()).is_ok());
    }

    #[test]
    fn synthetic_detectors_are_stochastic(
        sigma in 0.0f64..2.0,
        dark in 0.0f64..2.0,
        loss in 0.0f64..0.5,
        n_max in 1usize..60,
        integrated in any::<bool>(),
    ) {
        let kernel = if integrated { BlurKernel::BinIntegrated } else { BlurKernel::Sampled };
        let spec = SyntheticDetectorSpec::new(sigma, DarkCountModel::new(dark).unwrap(), loss, n_max)
            .unwrap()
            .with_kernel(kernel);
        let v = build_detector(&spec).unwrap();
        prop_assert_eq!(v.n_max(), n_max);
        prop_assert!(v.column_sum_residual() < 1e-12);
        prop_assert!(v.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!(PovmSet::from_matrix(&v).completeness_residual() < 1e-12);
    }

    #[test]
    fn binomial_mixture_matches_unitary_oracle(n in 0usize..=16, theta in 0.0f64..std::f64::consts::PI) {
        let closed = ideal_distribution_at_phase(&DiagonalState::fixed(n), theta);
        let oracle = exact_unitary_oracle(n, theta).unwrap();
        for k in 0..=n {
            prop_assert!((closed.prob(k) - oracle.prob(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn ideal_distribution_is_normalized(mean in 0.5f64..60.0, std in 0.0f64..10.0, theta in 0.0f64..6.3) {
        let state = DiagonalState::gaussian(mean, std).unwrap();
        let p = ideal_distribution_at_phase(&state, theta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let expected = state.mean() * (theta / 2.0).sin().powi(2);
        prop_assert!((p.mean() - expected).abs() < 1e-9 * (1.0 + expected));
    }

    #[test]
    fn hellinger_is_bounded_and_symmetric(a in proptest::collection::vec(0.0f64..1.0, 8), b in proptest::collection::vec(0.0f64..1.0, 8)) {
        prop_assume!(a.iter().sum::<f64>() > 1e-6 && b.iter().sum::<f64>() > 1e-6);
        let p = ProbVector::new(a).unwrap();
        let q = ProbVector::new(b).unwrap();
        let d = hellinger_sq(&p, &q);
        prop_assert!((-1e-15..=2.0 + 1e-12).contains(&d));
        prop_assert!((d - hellinger_sq(&q, &p)).abs() < 1e-15);
        prop_assert!(hellinger_sq(&p, &p).abs() < 1e-15);
    }
}
