//! Optimizer invariants on small synthetic problems.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qdt::simulator::{build_detector, sample_dataset};
use qdt::tomography::{
    fit_moments, reconstruct, reconstruct_from, InitialGuess, TomographyProblem,
};
use qdt::{
    CostKind, DarkCountModel, DetectorMatrix, DiagonalState, ExperimentPlan, HistogramDataset,
    RabiParams, SyntheticDetectorSpec, TomographyConfig, UpdateRule,
};

const TIMES: [f64; 5] = [0.0, 6.0, 12.0, 20.0, 30.0];

fn small_dataset(seed: u64, shots: u64) -> HistogramDataset {
    let spec = SyntheticDetectorSpec::new(0.4, DarkCountModel::new(0.2).unwrap(), 0.0, 20).unwrap();
    let v = build_detector(&spec).unwrap();
    let plan = ExperimentPlan {
        times_us: TIMES.to_vec(),
        shots_per_time: shots,
        rabi: RabiParams::from_cyclic_khz(8.2).unwrap(),
        state: DiagonalState::gaussian(8.0, 2.0).unwrap(),
        rng_seed: seed,
    };
    sample_dataset(&plan, &v).unwrap()
}

/// Fourth-order derivative at zero of `f` from central differences at `h`
/// and `h / 2`. The Hellinger cost curves sharply near small entries, where
/// a plain central difference is off in the fifth digit.
fn derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

fn assert_feasible(v: &DetectorMatrix, rho: &DiagonalState, omega: f64) {
    for m in 0..v.dim() {
        let col = v.column(m);
        assert!(
            col.iter().all(|&x| x >= 0.0 && x.is_finite()),
            "column {m} has a negative entry"
        );
        assert!(
            (col.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "column {m} not normalized"
        );
    }
    assert!(rho.as_slice().iter().all(|&x| x >= 0.0));
    assert!((rho.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(omega > 0.0 && omega.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Stopping after each outer iteration always leaves a feasible point,
    /// and the cost never rises from one iteration to the next.
    #[test]
    fn every_step_stays_feasible(seed in 0u64..1000, multiplicative in any::<bool>(), precondition in any::<bool>()) {
        let data = small_dataset(seed, 400);
        let fit = fit_moments(&data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let guess = InitialGuess {
            v: DetectorMatrix::random(data.n_max(), &mut rng),
            rho: DiagonalState::gaussian(fit.mean_n, fit.std_n).unwrap(),
            rabi: fit.rabi,
        };
        let base = TomographyConfig {
            cost_cutoff: 1e-12,
            update: if multiplicative { UpdateRule::Multiplicative } else { UpdateRule::Projected },
            precondition_v: precondition,
            ..TomographyConfig::default()
        };
        let mut previous = f64::INFINITY;
        for k in 1..=4 {
            let config = TomographyConfig { max_outer_iters: k, ..base.clone() };
            let result = reconstruct_from(&data, &config, guess.clone(), fit.clone()).unwrap();
            assert_feasible(&result.v, &result.rho, result.omega_r());
            for pair in result.cost_trace.windows(2) {
                prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "cost rose: {:?}", pair);
            }
            prop_assert!(result.final_cost <= previous * (1.0 + 1e-12));
            previous = result.final_cost;
        }
    }

    /// Directional finite differences along feasible directions match the
    /// analytic gradient.
    #[test]
    fn gradient_matches_finite_differences(
        seed in 0u64..1000,
        kl in any::<bool>(),
        pick in proptest::collection::vec((0usize..64, 0usize..64, 0usize..64), 6),
    ) {
        let data = small_dataset(seed, 300);
        let kind = if kl { CostKind::KullbackLeibler } else { CostKind::Hellinger };
        let n_max = data.n_max();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let v = DetectorMatrix::random(n_max, &mut rng);
        let rho = DiagonalState::gaussian(7.5, 2.5).unwrap();
        let rho = rho.as_slice().to_vec();
        let omega = 2.0 * std::f64::consts::PI * 8.0e3;
        let problem = TomographyProblem::new(&data, n_max, rho.len(), kind).unwrap();
        let grad = problem.gradient(&v, &rho, omega).unwrap();
        let cost = |v: &DetectorMatrix, rho: &[f64], omega: f64| problem.cost(v, rho, omega).unwrap();
        let dim = v.dim();
        // Large enough to stay clear of round-off in an O(1) cost, small
        // enough to keep every entry of V positive.
        let step = |x: f64| (0.1 * x).min(1e-5);
        let close = |fd: f64, an: f64| (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()) + 1e-10;

        for &(a, b, m) in &pick {
            let (a, b, m) = (a % dim, b % dim, m % dim);
            if a == b {
                continue;
            }
            // Move mass between two rows of column m.
            let h = step(v.get(a, m).min(v.get(b, m)));
            let along = |t: f64| {
                let mut data = v.as_slice().to_vec();
                data[a * dim + m] += t;
                data[b * dim + m] -= t;
                cost(&DetectorMatrix::new(n_max, data).unwrap(), &rho, omega)
            };
            let fd = derivative(along, h);
            let an = grad.v[a * dim + m] - grad.v[b * dim + m];
            prop_assert!(close(fd, an), "V[{a},{b}][{m}]: fd {fd:e} vs analytic {an:e}");
        }
        for &(i, j, _) in &pick {
            let (i, j) = (i % rho.len(), j % rho.len());
            if i == j {
                continue;
            }
            // The cost is smooth in ρ off the simplex too, so tail entries
            // may dip below zero during the difference.
            let h = 1e-5;
            let along = |t: f64| {
                let mut r = rho.clone();
                r[i] += t;
                r[j] -= t;
                cost(&v, &r, omega)
            };
            let fd = derivative(along, h);
            let an = grad.rho[i] - grad.rho[j];
            prop_assert!(close(fd, an), "rho[{i},{j}]: fd {fd:e} vs analytic {an:e}");
        }
        let h = 1e-6 * omega;
        let fd = derivative(|t| cost(&v, &rho, omega + t), h);
        prop_assert!(close(fd, grad.omega), "omega: fd {fd:e} vs analytic {:e}", grad.omega);
    }

    /// Same seed, same reconstruction; sampling is reproducible too.
    #[test]
    fn reconstruction_is_reproducible(seed in 0u64..1000) {
        let data = small_dataset(seed, 300);
        prop_assert_eq!(&data, &small_dataset(seed, 300));
        let config = TomographyConfig { rng_seed: seed, max_outer_iters: 20, ..TomographyConfig::default() };
        let a = reconstruct(&data, &config).unwrap();
        let b = reconstruct(&data, &config).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn different_seeds_give_different_samples() {
    assert_ne!(small_dataset(1, 300), small_dataset(2, 300));
}

/// A sparse scan once fitted a near-zero frequency with an enormous
/// amplitude; the starting state must stay on the scale of the counts.
#[test]
fn moment_fit_stays_on_count_scale() {
    for seed in [10, 39, 139, 525, 800] {
        let data = small_dataset(seed, 300);
        let fit = fit_moments(&data).unwrap();
        assert!(
            fit.mean_n <= 4.0 * (data.n_max() + 1) as f64,
            "seed {seed}: {}",
            fit.mean_n
        );
        reconstruct(
            &data,
            &TomographyConfig {
                max_outer_iters: 5,
                ..TomographyConfig::default()
            },
        )
        .unwrap();
    }
}
