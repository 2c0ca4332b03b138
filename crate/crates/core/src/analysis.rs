//! Physical characterization of a detector matrix: POVM elements, their
//! Wigner functions, count-offset statistics and Fisher information.

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{fold_into, DetectorMatrix};
use crate::error::{Error, Result};
use crate::prob::NORM_TOL;
use crate::rabi::{ideal_distribution, RabiParams};
use crate::scalar::Real;
use crate::special::{binomial_pmf_dp_with, binomial_pmf_with, laguerre_scaled, LnFactorial};
use crate::state::DiagonalState;
use crate::tomography::fit::golden_min;

/// Floor on detection probabilities in the Fisher-information denominator.
pub const FISHER_FLOOR: f64 = 1e-12;
pub const WIGNER_HALF_WIDTH: f64 = 6.0;
pub const WIGNER_POINTS: usize = 241;
/// Offsets `k = n − m` used for the width fit, on the loss-free side.
pub const SIGMA_FIT_OFFSETS: [i64; 4] = [0, -1, -2, -3];

/// Fock-diagonal POVM elements; element `n` holds `⟨m|Π_n|m⟩ = V[n][m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmSet<T> {
    elements: Vec<Vec<T>>,
}

impl<T: Real> PovmSet<T> {
    pub fn from_matrix(v: &DetectorMatrix<T>) -> Self {
        Self {
            elements: (0..v.dim()).map(|n| v.row(n).to_vec()).collect(),
        }
    }

    /// Builds from explicit diagonals, checking `0 ≤ Π_n ≤ 1` and completeness.
    pub fn from_elements(elements: Vec<Vec<T>>) -> Result<Self> {
        let set = Self { elements };
        let dim = set.elements.first().map_or(0, Vec::len);
        if dim == 0 || set.elements.iter().any(|e| e.len() != dim) {
            return Err(Error::InvalidDetector(
                "POVM elements must share a non-zero dimension".into(),
            ));
        }
        let tol = T::lit(NORM_TOL);
        if set
            .elements
            .iter()
            .flatten()
            .any(|&x| !(x >= -tol && x <= T::one() + tol))
        {
            return Err(Error::InvalidDetector(
                "POVM diagonal entry outside [0, 1]".into(),
            ));
        }
        if set.completeness_residual() > tol {
            return Err(Error::InvalidDetector(
                "POVM elements do not sum to the identity".into(),
            ));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, n: usize) -> Option<&[T]> {
        self.elements.get(n).map(Vec::as_slice)
    }

    /// Largest deviation of `Σ_n Π_n` from the identity.
    pub fn completeness_residual(&self) -> T {
        let dim = self.elements.first().map_or(0, Vec::len);
        (0..dim)
            .map(|m| (self.elements.iter().map(|e| e[m]).sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// `W(x, p) = Σ_m d_m (−1)^m / π · e^{−(x² + p²)} L_m(2(x² + p²))` for a
/// Fock-diagonal operator with diagonal `d`.
pub fn wigner_at<T: Real>(diagonal: &[T], x: T, p: T) -> T {
    if diagonal.is_empty() {
        return T::zero();
    }
    let r2 = x * x + p * p;
    let lag = laguerre_scaled(diagonal.len() - 1, T::lit(2.0) * r2);
    let sum: T = diagonal
        .iter()
        .zip(&lag)
        .enumerate()
        .map(|(m, (&d, &l))| if m % 2 == 0 { d * l } else { -d * l })
        .sum();
    sum / T::PI()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid<T> {
    pub n: usize,
    pub x_axis: Vec<T>,
    pub p_axis: Vec<T>,
    /// Row-major over `(x, p)`: `values[i * p_axis.len() + j] = W(x_i, p_j)`.
    pub values: Vec<T>,
}

impl<T: Real> WignerGrid<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.p_axis.len() + j]
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Evenly spaced axis over `[-6, 6]` with 241 points.
pub fn default_axis<T: Real>() -> Vec<T> {
    linspace(
        T::lit(-WIGNER_HALF_WIDTH),
        T::lit(WIGNER_HALF_WIDTH),
        WIGNER_POINTS,
    )
}

pub fn linspace<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * T::of(i) / T::of(points - 1))
            .collect(),
    }
}

/// Wigner function of `Π_n` on the grid `x_axis × p_axis`.
pub fn wigner<T: Real>(
    povm: &PovmSet<T>,
    n: usize,
    x_axis: &[T],
    p_axis: &[T],
) -> Result<WignerGrid<T>> {
    let diagonal = povm.element(n).ok_or_else(|| {
        Error::InvalidParameter(format!("outcome {n} beyond n_max {}", povm.len() - 1))
    })?;
    if x_axis.iter().chain(p_axis).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Wigner axes must be finite".into()));
    }
    let values = x_axis
        .par_iter()
        .flat_map_iter(|&x| p_axis.iter().map(move |&p| wigner_at(diagonal, x, p)))
        .collect();
    Ok(WignerGrid {
        n,
        x_axis: x_axis.to_vec(),
        p_axis: p_axis.to_vec(),
        values,
    })
}

/// Smallest grid value; negative values mark a nonclassical element.
pub fn wigner_negativity<T: Real>(grid: &WignerGrid<T>) -> T {
    grid.min()
}

/// Distribution of the count offset `k = n − m`, weighted by how often `m`
/// atoms arrive over the measured times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionStats<T> {
    /// Smallest offset represented in `offset_dist`.
    pub offset_min: i64,
    pub offset_dist: Vec<T>,
    /// Probability of `k = 0`.
    pub diagonal_mass: T,
    /// Width of a zero-centred Gaussian fitted to `k ∈ {0, −1, −2, −3}`.
    pub sigma: T,
}

impl<T: Real> ResolutionStats<T> {
    pub fn prob(&self, k: i64) -> T {
        let idx = k - self.offset_min;
        if idx < 0 {
            return T::zero();
        }
        self.offset_dist
            .get(idx as usize)
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Arrival weights `P_m ∝ Σ_j P_id(m | t_j)`, folded onto `0 ..= n_max`.
pub fn arrival_weights<T: Real>(
    rho: &DiagonalState<T>,
    params: &RabiParams<T>,
    times_us: &[T],
    n_max: usize,
) -> Result<Vec<T>> {
    if times_us.is_empty() {
        return Err(Error::InvalidParameter(
            "no times to weight arrivals".into(),
        ));
    }
    let mut total = vec![T::zero(); n_max + 1];
    for &t in times_us {
        for (slot, x) in total
            .iter_mut()
            .zip(fold_into(&ideal_distribution(rho, params, t), n_max + 1))
        {
            *slot += x;
        }
    }
    let norm = T::of(times_us.len());
    Ok(total.into_iter().map(|x| x / norm).collect())
}

pub fn resolution_stats<T: Real>(
    v: &DetectorMatrix<T>,
    rho: &DiagonalState<T>,
    params: &RabiParams<T>,
    times_us: &[T],
) -> Result<ResolutionStats<T>> {
    let weights = arrival_weights(rho, params, times_us, v.n_max())?;
    Ok(offset_statistics(v, &weights))
}

/// Offset statistics for explicit arrival weights (normalized internally).
pub fn offset_statistics<T: Real>(v: &DetectorMatrix<T>, weights: &[T]) -> ResolutionStats<T> {
    let dim = v.dim();
    let total: T = weights.iter().take(dim).copied().sum();
    let mut dist = vec![T::zero(); 2 * dim - 1];
    for (m, &w) in weights.iter().take(dim).enumerate() {
        if w == T::zero() {
            continue;
        }
        for n in 0..dim {
            dist[n + dim - 1 - m] += v.get(n, m) * w / total;
        }
    }
    let offset_min = -(dim as i64 - 1);
    let mut stats = ResolutionStats {
        offset_min,
        offset_dist: dist,
        diagonal_mass: T::zero(),
        sigma: T::zero(),
    };
    stats.diagonal_mass = stats.prob(0);
    stats.sigma = fit_sigma(&SIGMA_FIT_OFFSETS.map(|k| (k as f64, stats.prob(k).f64())));
    stats
}

/// Least-squares fit of `A exp(−k² / 2σ²)` with the amplitude solved in
/// closed form for each trial width. All mass at `k = 0` gives `σ = 0`.
fn fit_sigma<T: Real>(points: &[(f64, f64)]) -> T {
    if points.iter().all(|&(k, y)| k == 0.0 || y <= 0.0) {
        return T::zero();
    }
    let sse = |log_sigma: f64| {
        let s = log_sigma.exp();
        let g: Vec<f64> = points
            .iter()
            .map(|&(k, _)| (-k * k / (2.0 * s * s)).exp())
            .collect();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        let gy: f64 = g.iter().zip(points).map(|(x, p)| x * p.1).sum();
        let a = gy / gg;
        g.iter()
            .zip(points)
            .map(|(x, p)| (a * x - p.1).powi(2))
            .sum::<f64>()
    };
    let (lo, hi, steps) = (1e-3f64.ln(), 20f64.ln(), 400);
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + h * i as f64)
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .expect("non-empty grid");
    T::lit(golden_min(sse, best - h, best + h).exp())
}

/// Probability of reading exactly `m` when `m` atoms arrive.
pub fn assignment_fidelity<T: Real>(v: &DetectorMatrix<T>, m: usize) -> Result<T> {
    if m > v.n_max() {
        return Err(Error::InvalidParameter(format!(
            "m = {m} beyond n_max {}",
            v.n_max()
        )));
    }
    Ok(v.get(m, m))
}

/// Detection probabilities at phase `θ` and their analytic `θ`-derivative.
/// Without a detector the arrival distribution itself is returned.
pub fn detected_with_derivative<T: Real>(
    v: Option<&DetectorMatrix<T>>,
    rho: &DiagonalState<T>,
    theta: T,
) -> (Vec<T>, Vec<T>) {
    let half = theta / T::lit(2.0);
    let p = half.sin().powi(2);
    let dp = theta.sin() / T::lit(2.0);
    let lf = LnFactorial::new(rho.n_max());
    let mut prob = vec![T::zero(); rho.n_max() + 1];
    let mut deriv = vec![T::zero(); rho.n_max() + 1];
    for (n_total, &w) in rho.as_slice().iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let b = binomial_pmf_with(&lf, n_total, p);
        let db = binomial_pmf_dp_with(&lf, n_total, p);
        for m in 0..=n_total {
            prob[m] += w * b[m];
            deriv[m] += w * db[m] * dp;
        }
    }
    match v {
        Some(v) => (v.apply(&prob), v.apply(&deriv)),
        None => (prob, deriv),
    }
}

/// `F(θ) = Σ_n (∂_θ P_V(n | θ))² / P_V(n | θ)`, with the denominator floored.
pub fn fisher_information<T: Real>(
    v: Option<&DetectorMatrix<T>>,
    rho: &DiagonalState<T>,
    theta: T,
) -> T {
    let floor = T::lit(FISHER_FLOOR);
    let (prob, deriv) = detected_with_derivative(v, rho, theta);
    prob.iter()
        .zip(&deriv)
        .map(|(&p, &d)| d * d / p.max(floor))
        .sum()
}

/// One row of a Fisher sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FisherPoint<T> {
    pub theta: T,
    pub fisher: T,
    /// `⟨N⟩ cos²(θ/2)`, the ideal-detection reference for Poissonian states.
    pub fisher_ideal: T,
}

pub fn fisher_sweep<T: Real>(
    v: Option<&DetectorMatrix<T>>,
    rho: &DiagonalState<T>,
    thetas: &[T],
) -> Vec<FisherPoint<T>> {
    let mean = rho.mean();
    thetas
        .par_iter()
        .map(|&theta| FisherPoint {
            theta,
            fisher: fisher_information(v, rho, theta),
            fisher_ideal: mean * (theta / T::lit(2.0)).cos().powi(2),
        })
        .collect()
}
