use proptest::prelude::*;

use qdt::metrology::{
    build_squeezed_state, rotate_by_expm, rotated_number_distribution, PhaseEstimator, SectorCache,
    SpinSector,
};
use qdt::special::binomial_pmf;
use qdt::{DiagonalState, SqueezedEnsemble};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The eigenbasis rotation agrees with a dense matrix exponential.
    #[test]
    fn rotation_matches_dense_exponential(n in 1usize..=50, s in 0.05f64..1.5, theta in -3.2f64..3.2) {
        let psi = build_squeezed_state(s, n).unwrap();
        let sector = SpinSector::<f64>::new(n).unwrap();
        let fast = sector.rotate(&psi, theta);
        let dense = rotate_by_expm(&psi, theta);
        for (a, b) in fast.iter().zip(&dense) {
            prop_assert!((a.re - b).abs() < 1e-9 && a.im.abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn rotated_distribution_is_normalized(mean in 5.0f64..80.0, dn in 0.0f64..6.0, s in 0.02f64..1.0, theta in 0.0f64..3.2) {
        let cache = SectorCache::new();
        let ens = SqueezedEnsemble::gaussian(s, mean, dn).unwrap();
        let p = rotated_number_distribution(&ens, theta, &cache).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.iter().all(|&x| x >= -1e-15));
    }

    /// `4 Var(J_x) ≈ s N` once the Gaussian spans several eigenvalues.
    #[test]
    fn squeezing_sets_jx_variance(n in 20usize..120, s in 0.3f64..1.0) {
        let cache = SectorCache::new();
        let ens = SqueezedEnsemble::new(s, &DiagonalState::fixed(n)).unwrap();
        let var = ens.variance_jx(&cache).unwrap();
        let ratio = 4.0 * var / (s * n as f64);
        prop_assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn jx_variance_grows_with_s(n in 4usize..80, s in 0.02f64..0.9, ds in 0.01f64..0.5) {
        let cache = SectorCache::new();
        let var = |s: f64| SqueezedEnsemble::new(s, &DiagonalState::fixed(n)).unwrap().variance_jx(&cache).unwrap();
        prop_assert!(var(s + ds) > var(s));
    }

    /// Without squeezing the rotated state is close to a coherent spin
    /// state, whose number distribution is binomial.
    #[test]
    fn unsqueezed_state_is_nearly_binomial(n in 30usize..100, theta in 0.0f64..3.14) {
        let cache = SectorCache::new();
        let ens = SqueezedEnsemble::new(1.0, &DiagonalState::fixed(n)).unwrap();
        let p = rotated_number_distribution(&ens, theta, &cache).unwrap();
        let b = binomial_pmf(n, (theta / 2.0).sin().powi(2));
        let tv: f64 = 0.5 * p.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        prop_assert!(tv < 0.02, "total variation {tv}");
    }
}

#[test]
fn ideal_unsqueezed_fixed_number_sits_at_standard_limit() {
    let cache = SectorCache::new();
    let ens = SqueezedEnsemble::new(1.0, &DiagonalState::fixed(36)).unwrap();
    let opt = PhaseEstimator::new(&ens, None, &cache)
        .unwrap()
        .optimize()
        .unwrap();
    assert!((opt.gain - 1.0).abs() < 1e-3, "{}", opt.gain);
}

#[test]
fn f32_and_f64_sectors_agree() {
    let a = SpinSector::<f32>::new(20).unwrap();
    let b = SpinSector::<f64>::new(20).unwrap();
    for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
        assert!((*x as f64 - y).abs() < 1e-4);
    }
}
