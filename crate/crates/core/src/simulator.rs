//! Synthetic ground-truth detectors and finite-shot histogram datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dataset::HistogramDataset;
use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::prob::convolve;
use crate::rabi::{ideal_distribution, DarkCountModel, RabiParams};
use crate::scalar::Real;
use crate::special::{binomial_pmf, normal_cdf};
use crate::state::DiagonalState;

/// How the Gaussian counting noise is discretized onto integer offsets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BlurKernel {
    /// Density sampled at integer offsets and renormalized.
    #[default]
    Sampled,
    /// Density integrated over unit bins centered on the integers.
    BinIntegrated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDetectorSpec<T> {
    /// Standard deviation of the counting noise, in atoms.
    pub sigma: T,
    pub dark: DarkCountModel<T>,
    /// Per-atom probability of not being detected.
    pub loss: T,
    pub n_max: usize,
    pub kernel: BlurKernel,
}

impl<T: Real> SyntheticDetectorSpec<T> {
    pub fn new(sigma: T, dark: DarkCountModel<T>, loss: T, n_max: usize) -> Result<Self> {
        let spec = Self {
            sigma,
            dark,
            loss,
            n_max,
            kernel: BlurKernel::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_kernel(mut self, kernel: BlurKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn noiseless(n_max: usize) -> Self {
        Self {
            sigma: T::zero(),
            dark: DarkCountModel::none(),
            loss: T::zero(),
            n_max,
            kernel: BlurKernel::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.loss >= T::zero() && self.loss <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "loss must lie in [0, 1], got {}",
                self.loss
            )));
        }
        Ok(())
    }

    /// Offset weights of the counting noise, indexed from `-reach`.
    fn blur_weights(&self) -> (usize, Vec<T>) {
        if self.sigma == T::zero() {
            return (0, vec![T::one()]);
        }
        let sigma = self.sigma.f64();
        let reach = (8.0 * sigma).ceil() as usize + 1;
        let raw: Vec<f64> = (0..=2 * reach)
            .map(|i| {
                let d = i as f64 - reach as f64;
                match self.kernel {
                    BlurKernel::Sampled => (-d * d / (2.0 * sigma * sigma)).exp(),
                    BlurKernel::BinIntegrated => {
                        normal_cdf((d + 0.5) / sigma) - normal_cdf((d - 0.5) / sigma)
                    }
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        (reach, raw.into_iter().map(|w| T::lit(w / total)).collect())
    }
}

/// Column `m`: binomial thinning by `1 − loss`, Gaussian blur on integer
/// offsets, then Poisson dark counts. Offsets below zero fold into `n = 0`
/// and mass above `n_max` folds into `n = n_max`.
pub fn build_detector<T: Real>(spec: &SyntheticDetectorSpec<T>) -> Result<DetectorMatrix<T>> {
    spec.validate()?;
    let dim = spec.n_max + 1;
    let (reach, blur) = spec.blur_weights();
    let dark = spec.dark.distribution();
    let keep = T::one() - spec.loss;
    let mut columns = Vec::with_capacity(dim);
    for m in 0..dim {
        let thinned = binomial_pmf(m, keep);
        let mut blurred = vec![T::zero(); m + reach + 1];
        for (j, &pj) in thinned.iter().enumerate() {
            if pj == T::zero() {
                continue;
            }
            for (i, &w) in blur.iter().enumerate() {
                let n = (j + i).saturating_sub(reach);
                blurred[n] += pj * w;
            }
        }
        let full = convolve(&blurred, &dark);
        let mut col = vec![T::zero(); dim];
        for (n, x) in full.into_iter().enumerate() {
            col[n.min(spec.n_max)] += x;
        }
        columns.push(col);
    }
    DetectorMatrix::from_columns(&columns)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan<T> {
    pub times_us: Vec<T>,
    pub shots_per_time: u64,
    pub rabi: RabiParams<T>,
    pub state: DiagonalState<T>,
    pub rng_seed: u64,
}

impl<T: Real> ExperimentPlan<T> {
    fn validate(&self) -> Result<()> {
        if self.times_us.is_empty() {
            return Err(Error::InvalidParameter("plan has no times".into()));
        }
        if self.shots_per_time == 0 {
            return Err(Error::InvalidParameter(
                "shots per time must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Detection probabilities `P_V(n | t) = Σ_m V[n][m] P_id(m | t)`.
pub fn detected_distribution<T: Real>(
    v: &DetectorMatrix<T>,
    state: &DiagonalState<T>,
    rabi: &RabiParams<T>,
    t_us: T,
) -> Vec<T> {
    v.apply(&ideal_distribution(state, rabi, t_us))
}

/// Draws `plan.shots_per_time` shots per time from `P_V(n | t_j)`.
pub fn sample_dataset<T: Real>(
    plan: &ExperimentPlan<T>,
    v: &DetectorMatrix<T>,
) -> Result<HistogramDataset<T>> {
    plan.validate()?;
    let shots = vec![plan.shots_per_time; plan.times_us.len()];
    sample_histograms(
        v,
        &plan.state,
        &plan.rabi,
        &plan.times_us,
        &shots,
        plan.rng_seed,
    )
}

/// Draws `shots[j]` shots at each time. Time `j` uses stream `j` of a
/// ChaCha generator keyed by `seed`, so the times are independent and the
/// result does not depend on evaluation order.
pub fn sample_histograms<T: Real>(
    v: &DetectorMatrix<T>,
    state: &DiagonalState<T>,
    rabi: &RabiParams<T>,
    times_us: &[T],
    shots: &[u64],
    seed: u64,
) -> Result<HistogramDataset<T>> {
    if times_us.len() != shots.len() {
        return Err(Error::InvalidParameter(
            "one shot count per time required".into(),
        ));
    }
    let counts = times_us
        .iter()
        .zip(shots)
        .enumerate()
        .map(|(j, (&t, &n))| {
            let probs = detected_distribution(v, state, rabi, t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            sample_multinomial(&probs, n, &mut rng)
        })
        .collect();
    HistogramDataset::from_counts(times_us.to_vec(), counts)
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<T: Real, R: Rng + ?Sized>(
    probs: &[T],
    shots: u64,
    rng: &mut R,
) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().map(|p| p.f64().max(0.0)).sum();
    for (slot, p) in out.iter_mut().zip(probs) {
        if remaining == 0 {
            break;
        }
        let p = p.f64().max(0.0);
        let conditional = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if conditional >= 1.0 {
            remaining
        } else if conditional <= 0.0 {
            0
        } else {
            Binomial::new(remaining, conditional)
                .expect("conditional probability in (0, 1)")
                .sample(rng)
        };
        *slot = draw;
        remaining -= draw;
        mass -= p;
    }
    if remaining > 0 {
        // Round-off left a few shots unassigned; give them to the largest bin.
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(k, _)| k)
            .unwrap_or(0);
        out[best] += remaining;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_detector_is_identity() {
        let v = build_detector(&SyntheticDetectorSpec::<f64>::noiseless(12)).unwrap();
        assert_eq!(v, DetectorMatrix::identity(12));
    }

    #[test]
    fn loss_is_binomial_thinning() {
        let spec = SyntheticDetectorSpec::new(0.0f64, DarkCountModel::none(), 0.5, 10).unwrap();
        let v = build_detector(&spec).unwrap();
        let want = [1.0, 4.0, 6.0, 4.0, 1.0];
        for n in 0..=10 {
            let expected = if n <= 4 { want[n] / 16.0 } else { 0.0 };
            assert!((v.get(n, 4) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_detector_folds_low_tail_into_zero() {
        let spec = SyntheticDetectorSpec::new(0.4, DarkCountModel::none(), 0.0, 10).unwrap();
        let v = build_detector(&spec).unwrap();
        let z: f64 = 1.0
            + (1..=5)
                .map(|d| 2.0 * (-((d * d) as f64) / 0.32).exp())
                .sum::<f64>();
        assert!((v.get(1, 1) - 1.0 / z).abs() < 1e-12);
        assert!(v.get(0, 0) > v.get(1, 1));
        assert!(v.column_sum_residual() < 1e-12);
    }

    #[test]
    fn zero_time_without_noise_is_all_zero() {
        let plan = ExperimentPlan {
            times_us: vec![0.0f64],
            shots_per_time: 500,
            rabi: RabiParams::from_cyclic_khz(8.2).unwrap(),
            state: DiagonalState::gaussian(35.4, 6.4).unwrap(),
            rng_seed: 3,
        };
        let d = sample_dataset(&plan, &DetectorMatrix::identity(60)).unwrap();
        assert_eq!(d.counts()[0][0], 500);
    }

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = sample_multinomial(&[0.2f64, 0.3, 0.5], 1000, &mut rng);
        assert_eq!(draw.iter().sum::<u64>(), 1000);
    }
}
