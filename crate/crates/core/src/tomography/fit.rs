//! Starting point for the reconstruction from the Rabi oscillation of the
//! first two count moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::HistogramDataset;
use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::rabi::RabiParams;
use crate::scalar::Real;
use crate::state::{DiagonalState, GAUSSIAN_SPAN};

use super::config::TomographyConfig;

const FREQ_GRID: usize = 4000;
const GOLDEN_ITERS: usize = 200;
/// Largest accepted oscillation amplitude, in units of the largest count
/// the dataset can hold. Beyond it the scan does not identify the atom
/// number, and near-constant `sin²` designs would otherwise fit any size.
const AMPLITUDE_CAP: f64 = 4.0;

/// Result of the two moment fits.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFit<T> {
    /// Amplitude of the mean-count oscillation, read as the mean atom number.
    pub mean_n: T,
    pub std_n: T,
    /// Constant offset of the mean count.
    pub offset: T,
    pub rabi: RabiParams<T>,
    /// Root-mean-square residual of the mean-count fit.
    pub rms_residual: T,
    /// The second-moment fit gave no usable width and `√mean_n` was used.
    pub std_fallback: bool,
}

/// Fits `⟨n⟩(t) = A sin²(π f t) + C` and
/// `⟨n²⟩(t) = Σ_{k=0}^{4} b_k sin^k(π f t)` to the dataset. With
/// `sin²(π f t) = p(t)`, the `p²` coefficient of the second moment is
/// `⟨N(N − 1)⟩`, so the width follows from `ΔN² = b_4 + A − A²`.
pub fn fit_moments<T: Real>(data: &HistogramDataset<T>) -> Result<MomentFit<T>> {
    if data.len() < 3 {
        return Err(Error::InvalidDataset(format!(
            "moment fits need at least 3 distinct times, got {}",
            data.len()
        )));
    }
    let times: Vec<f64> = data.times_us().iter().map(|t| t.f64()).collect();
    let moments: Vec<(f64, f64)> = data
        .count_moments()
        .iter()
        .map(|(a, b)| (a.f64(), b.f64()))
        .collect();
    let means: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    if t_max <= 0.0 {
        return Err(Error::InvalidDataset("all pulse durations are zero".into()));
    }

    let a_max = AMPLITUDE_CAP * (data.n_max() + 1) as f64;
    let (freq_mhz, amp, offset, sse) = fit_frequency(&times, &means, t_max, a_max)?;
    let rms_residual = (sse / times.len() as f64).sqrt();

    let sines: Vec<f64> = times
        .iter()
        .map(|&t| (std::f64::consts::PI * freq_mhz * t).sin())
        .collect();
    let design: Vec<f64> = sines
        .iter()
        .flat_map(|&s| (0..5).map(move |k| s.powi(k)))
        .collect();
    let second: Vec<f64> = moments.iter().map(|m| m.1).collect();
    let variance = if times.len() >= 5 {
        least_squares(&design, times.len(), 5, &second)
            .ok()
            .map(|b| b[4] + amp - amp * amp)
    } else {
        None
    };
    let (std_n, std_fallback) = match variance {
        // Round-off can push an exactly number-squeezed fit slightly negative.
        Some(var) if var.is_finite() && var >= -1e-6 * amp * amp => {
            (var.max(0.0).sqrt().min(amp), false)
        }
        _ => (amp.sqrt(), true),
    };

    Ok(MomentFit {
        mean_n: T::lit(amp),
        std_n: T::lit(std_n),
        offset: T::lit(offset),
        rabi: RabiParams::new(T::lit(2.0 * std::f64::consts::PI * freq_mhz * 1e6))?,
        rms_residual: T::lit(rms_residual),
        std_fallback,
    })
}

/// Linear amplitude and offset for a fixed frequency, with their SSE.
fn linear_part(times: &[f64], y: &[f64], f: f64) -> Option<(f64, f64, f64)> {
    let n = times.len() as f64;
    let x: Vec<f64> = times
        .iter()
        .map(|&t| (std::f64::consts::PI * f * t).sin().powi(2))
        .collect();
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-14 * n * sxx.max(1e-300) {
        return None;
    }
    let a = (n * sxy - sx * sy) / det;
    let c = (sy - a * sx) / n;
    let sse = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (a * xi + c - yi).powi(2))
        .sum();
    Some((a, c, sse))
}

fn fit_frequency(times: &[f64], y: &[f64], t_max: f64, a_max: f64) -> Result<(f64, f64, f64, f64)> {
    let mut spacings: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    spacings.sort_by(f64::total_cmp);
    let median = spacings[spacings.len() / 2];
    let f_hi = (4.0 / t_max).max(0.5 / median);
    let objective = |f: f64| match linear_part(times, y, f) {
        Some((a, _, sse)) if a > 0.0 && a <= a_max => sse,
        _ => f64::INFINITY,
    };
    let step = f_hi / FREQ_GRID as f64;
    let (best, best_sse) = (1..=FREQ_GRID)
        .map(|i| (i, objective(step * i as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    if !best_sse.is_finite() {
        return Err(Error::FitNonConvergence {
            reason: format!("no frequency gives an oscillation amplitude in (0, {a_max}]"),
            residual: f64::INFINITY,
        });
    }
    let f = golden_min(
        objective,
        step * (best as f64 - 1.0).max(1e-3),
        step * (best as f64 + 1.0),
    );
    let (a, c, sse) = linear_part(times, y, f).ok_or(Error::FitNonConvergence {
        reason: "degenerate design at the fitted frequency".into(),
        residual: best_sse,
    })?;
    if !(a > 0.0 && a <= a_max && sse.is_finite()) {
        return Err(Error::FitNonConvergence {
            reason: format!("fitted amplitude {a} is outside (0, {a_max}]"),
            residual: sse,
        });
    }
    Ok((f, a, c, sse))
}

/// Golden-section minimizer on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if (hi - lo).abs() <= 1e-15 * (lo.abs() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Starting `(ρ, Ω_R, V)`: a Gaussian state from the moment fits on
/// `0 .. rho_len`, the fitted frequency, and a uniformly random
/// column-stochastic `V` drawn from `config.rng_seed`.
pub fn init_from_fits<T: Real>(
    data: &HistogramDataset<T>,
    config: &TomographyConfig,
) -> Result<(DiagonalState<T>, RabiParams<T>, DetectorMatrix<T>)> {
    let fit = fit_moments(data)?;
    let n_max = data.n_max();
    let rho = initial_state(&fit, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    Ok((rho, fit.rabi, DetectorMatrix::random(n_max, &mut rng)))
}

/// Gaussian state padded with zeros to cover both the detected range and
/// `mean + 6 std`.
pub(crate) fn initial_state<T: Real>(fit: &MomentFit<T>, n_max: usize) -> Result<DiagonalState<T>> {
    let gaussian = DiagonalState::gaussian(fit.mean_n, fit.std_n)?;
    let span = (fit.mean_n + T::lit(GAUSSIAN_SPAN) * fit.std_n)
        .ceil()
        .to_usize()
        .unwrap_or(0);
    let len = n_max.max(span).max(gaussian.n_max()) + 1;
    let mut weights = gaussian.as_slice().to_vec();
    weights.resize(len, T::zero());
    DiagonalState::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabi::ideal_distribution;

    #[test]
    fn noiseless_single_number_recovers_frequency() {
        let rabi = RabiParams::from_cyclic_khz(8.2f64).unwrap();
        let state = DiagonalState::fixed(30);
        let times: Vec<f64> = (0..10).map(|k| 4.0 * k as f64).collect();
        let histos = times
            .iter()
            .map(|&t| ideal_distribution(&state, &rabi, t))
            .collect();
        let data = HistogramDataset::from_histograms(times, histos, vec![1000; 10]).unwrap();
        let fit = fit_moments(&data).unwrap();
        assert!((fit.rabi.omega_r() / rabi.omega_r() - 1.0).abs() < 1e-6);
        assert!((fit.mean_n - 30.0).abs() < 1e-6);
        assert!(fit.offset.abs() < 1e-6);
        assert!(fit.std_n < 1e-2, "{}", fit.std_n);
    }

    #[test]
    fn seeds_change_only_the_detector() {
        let rabi = RabiParams::from_cyclic_khz(8.2f64).unwrap();
        let state = DiagonalState::gaussian(20.0, 3.0).unwrap();
        let times: Vec<f64> = (0..8).map(|k| 4.0 * k as f64).collect();
        let histos = times
            .iter()
            .map(|&t| ideal_distribution(&state, &rabi, t))
            .collect();
        let data = HistogramDataset::from_histograms(times, histos, vec![1000; 8]).unwrap();
        let a = init_from_fits(&data, &TomographyConfig::default().with_seed(1)).unwrap();
        let b = init_from_fits(&data, &TomographyConfig::default().with_seed(2)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_ne!(a.2, b.2);
    }

    #[test]
    fn too_few_times_rejected() {
        let data =
            HistogramDataset::from_counts(vec![0.0f64, 1.0], vec![vec![1], vec![1]]).unwrap();
        assert!(fit_moments(&data).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_min(|x| (x - 0.3).powi(2), -1.0, 2.0);
        assert!((x - 0.3).abs() < 1e-7);
    }
}
