//! Phase sensitivity of squeezed-state superpositions read out by counting
//! atoms in one level, with ideal or noisy detection.
//!
//! Spin operators act on a fixed-`N` sector in the number basis `k = n_a`
//! with `J_z` eigenvalue `k − N/2`. At `θ = 0` all atoms are in level `b`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::linalg::{expm, least_squares, tridiagonal_eigen};
use crate::prob::ProbVector;
use crate::scalar::Real;
use crate::state::DiagonalState;
use crate::tomography::fit::golden_min;

/// Largest sector handled by the dense eigen-decomposition.
pub const MAX_ATOMS: usize = 400;
pub const THETA_GRID: usize = 400;
pub const S_GRID: usize = 60;
pub const S_MIN: f64 = 0.01;
pub const S_MAX: f64 = 1.0;
/// Step of the symmetric finite difference for `d⟨n⟩/dθ`.
pub const THETA_STEP: f64 = 1e-4;
/// Sectors with `ρ_N` below this fraction of the largest weight are dropped.
pub const SECTOR_PRUNE: f64 = 1e-6;

/// `⟨k+1| J_x |k⟩ = √((k+1)(N−k)) / 2`.
fn jx_offdiag<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|k| T::lit(0.5) * T::of((k + 1) * (n - k)).sqrt())
        .collect()
}

/// Eigenbasis of `J_x` for one sector, with `J_z` expressed in it.
#[derive(Clone, Debug)]
pub struct SpinSector<T> {
    n: usize,
    eigenvalues: Vec<T>,
    /// Row-major `Q[k][q]`: component `k` of eigenvector `q`.
    vectors: Vec<T>,
    /// `J_z` in the eigenbasis is tridiagonal; its diagonal and off-diagonal.
    jz_diag: Vec<T>,
    jz_off: Vec<T>,
}

impl<T: Real> SpinSector<T> {
    /// Diagonalizes `J_x`. Eigenvector signs are fixed so that each has a
    /// positive overlap with the all-in-`b` state `k = 0`; far from the
    /// centre that overlap underflows, so the sign is carried outward from
    /// the central vector by requiring `⟨q|J_z|q+1⟩ < 0`, which holds exactly
    /// under that convention.
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_ATOMS {
            return Err(Error::InvalidParameter(format!(
                "sector N = {n} exceeds the {MAX_ATOMS}-atom limit"
            )));
        }
        let dim = n + 1;
        let eig = tridiagonal_eigen(&vec![T::zero(); dim], &jx_offdiag(n))?;
        let mut vectors = eig.vectors;
        let mu: Vec<T> = (0..dim)
            .map(|k| T::of(k) - T::of(n) / T::lit(2.0))
            .collect();
        let flip = |v: &mut [T], q: usize| {
            for k in 0..dim {
                v[k * dim + q] = -v[k * dim + q];
            }
        };
        let coupling = |v: &[T], q: usize| {
            (0..dim)
                .map(|k| v[k * dim + q] * mu[k] * v[k * dim + q + 1])
                .sum::<T>()
        };
        let centre = n / 2;
        if vectors[centre] < T::zero() {
            flip(&mut vectors, centre);
        }
        for q in centre..n {
            if coupling(&vectors, q) > T::zero() {
                flip(&mut vectors, q + 1);
            }
        }
        for q in (0..centre).rev() {
            if coupling(&vectors, q) > T::zero() {
                flip(&mut vectors, q);
            }
        }
        let jz_diag = (0..dim)
            .map(|q| (0..dim).map(|k| vectors[k * dim + q].powi(2) * mu[k]).sum())
            .collect();
        let jz_off = (0..n).map(|q| coupling(&vectors, q)).collect();
        Ok(Self {
            n,
            eigenvalues: eig.values,
            vectors,
            jz_diag,
            jz_off,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    #[inline]
    pub fn vector_entry(&self, k: usize, q: usize) -> T {
        self.vectors[k * (self.n + 1) + q]
    }

    /// Normalized weights `∝ exp(−μ² / (N s))` on the `J_x` eigenstates.
    pub fn squeezed_coefficients(&self, s: T) -> Vec<T> {
        let scale = T::of(self.n.max(1)) * s;
        let raw: Vec<T> = self
            .eigenvalues
            .iter()
            .map(|&mu| (-(mu * mu) / scale).exp())
            .collect();
        let norm = raw.iter().map(|&c| c * c).sum::<T>().sqrt();
        raw.into_iter().map(|c| c / norm).collect()
    }

    /// Number-basis amplitudes of the state with eigenbasis coefficients `c`.
    pub fn to_number_basis(&self, c: &[T]) -> Vec<T> {
        let dim = self.n + 1;
        (0..dim)
            .map(|k| {
                self.vectors[k * dim..(k + 1) * dim]
                    .iter()
                    .zip(c)
                    .map(|(&q, &x)| q * x)
                    .sum()
            })
            .collect()
    }

    /// Spin moments of the real state with eigenbasis coefficients `c`.
    pub fn moments(&self, c: &[T]) -> SpinMoments<T> {
        let dim = self.n + 1;
        let jz_c: Vec<T> = (0..dim)
            .map(|q| {
                let mut x = self.jz_diag[q] * c[q];
                if q > 0 {
                    x += self.jz_off[q - 1] * c[q - 1];
                }
                if q + 1 < dim {
                    x += self.jz_off[q] * c[q + 1];
                }
                x
            })
            .collect();
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
        let jx_c: Vec<T> = c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&x, &l)| x * l)
            .collect();
        SpinMoments {
            jz: dot(c, &jz_c),
            jx: dot(c, &jx_c),
            jz2: dot(&jz_c, &jz_c),
            jx2: dot(&jx_c, &jx_c),
            jzx: T::lit(2.0) * dot(&jz_c, &jx_c),
        }
    }

    /// `exp(−iθ J_y) ψ` through the `J_x` eigenbasis, using
    /// `J_y = R J_x R†` with `R = diag(e^{−iπ k/2})`.
    pub fn rotate(&self, psi: &[T], theta: T) -> Vec<Complex<T>> {
        let phased = self.phased(&self.rotation_weights(psi), theta);
        (0..=self.n)
            .map(|k| self.row_amplitude(k, &phased) * quarter_turn::<T>(k))
            .collect()
    }

    /// `w_q e^{−iθμ_q}`. The `J_x` spectrum is the ladder `μ_q = q − N/2`, so
    /// the phases follow from one complex exponential by recurrence.
    fn phased(&self, w: &[Complex<T>], theta: T) -> Vec<Complex<T>> {
        let step = Complex::from_polar(T::one(), -theta);
        let mut z = Complex::from_polar(T::one(), theta * T::of(self.n) / T::lit(2.0));
        w.iter()
            .map(|&wq| {
                let out = wq * z;
                z *= step;
                out
            })
            .collect()
    }

    /// `w = Qᵀ R† ψ`.
    fn rotation_weights(&self, psi: &[T]) -> Vec<Complex<T>> {
        let dim = self.n + 1;
        let mut w = vec![Complex::new(T::zero(), T::zero()); dim];
        for (k, &amp) in psi.iter().enumerate() {
            if amp == T::zero() {
                continue;
            }
            let z = quarter_turn::<T>(k).conj() * amp;
            for (slot, &q) in w.iter_mut().zip(&self.vectors[k * dim..(k + 1) * dim]) {
                *slot += z * q;
            }
        }
        w
    }

    fn row_amplitude(&self, k: usize, phased: &[Complex<T>]) -> Complex<T> {
        let dim = self.n + 1;
        self.vectors[k * dim..(k + 1) * dim]
            .iter()
            .zip(phased)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (&q, &z)| {
                acc + z * q
            })
    }
}

/// `e^{−iπk/2}`, exact for integer `k`.
fn quarter_turn<T: Real>(k: usize) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), -T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), T::one()),
    }
}

/// First and second spin moments of a fixed-`N` state; `jzx` is
/// `⟨J_z J_x + J_x J_z⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinMoments<T> {
    pub jz: T,
    pub jx: T,
    pub jz2: T,
    pub jx2: T,
    pub jzx: T,
}

impl<T: Real> SpinMoments<T> {
    /// `⟨k⟩` and `⟨k²⟩` after `exp(−iθ J_y)`, from
    /// `U† J_z U = J_z cos θ − J_x sin θ` and `k = N/2 + J_z`.
    pub fn number_moments(&self, n: usize, theta: T) -> (T, T) {
        let (s, c) = theta.sin_cos();
        let half = T::of(n) / T::lit(2.0);
        let jz = self.jz * c - self.jx * s;
        let jz2 = self.jz2 * c * c + self.jx2 * s * s - self.jzx * s * c;
        (half + jz, half * half + T::lit(2.0) * half * jz + jz2)
    }
}

/// Real antisymmetric `A = (J₊ − J₋)/2`, so that `exp(−iθ J_y) = exp(−θ A)`.
pub fn rotation_generator<T: Real>(n: usize) -> Vec<T> {
    let dim = n + 1;
    let mut a = vec![T::zero(); dim * dim];
    for (k, &x) in jx_offdiag::<T>(n).iter().enumerate() {
        a[(k + 1) * dim + k] = x;
        a[k * dim + k + 1] = -x;
    }
    a
}

/// `exp(−iθ J_y) ψ` by scaling-and-squaring of the generator; independent of
/// the eigen-decomposition route.
pub fn rotate_by_expm<T: Real>(psi: &[T], theta: T) -> Vec<T> {
    let dim = psi.len();
    let a: Vec<T> = rotation_generator::<T>(dim - 1)
        .into_iter()
        .map(|x| -theta * x)
        .collect();
    let u = expm(&a, dim);
    (0..dim)
        .map(|i| {
            u[i * dim..(i + 1) * dim]
                .iter()
                .zip(psi)
                .map(|(&x, &y)| x * y)
                .sum()
        })
        .collect()
}

/// Shared, lazily filled per-`N` eigen-decompositions.
#[derive(Debug, Default)]
pub struct SectorCache<T> {
    sectors: Mutex<HashMap<usize, Arc<SpinSector<T>>>>,
}

impl<T: Real> SectorCache<T> {
    pub fn new() -> Self {
        Self {
            sectors: Mutex::new(HashMap::new()),
        }
    }

    pub fn sector(&self, n: usize) -> Result<Arc<SpinSector<T>>> {
        if let Some(s) = self.sectors.lock().expect("cache lock").get(&n) {
            return Ok(Arc::clone(s));
        }
        let built = Arc::new(SpinSector::new(n)?);
        let mut map = self.sectors.lock().expect("cache lock");
        Ok(Arc::clone(map.entry(n).or_insert(built)))
    }

    /// Builds all missing sectors in parallel.
    pub fn prefetch(&self, ns: &[usize]) -> Result<()> {
        let missing: Vec<usize> = {
            let map = self.sectors.lock().expect("cache lock");
            ns.iter()
                .copied()
                .filter(|n| !map.contains_key(n))
                .collect()
        };
        let built = missing
            .par_iter()
            .map(|&n| SpinSector::new(n).map(|s| (n, Arc::new(s))))
            .collect::<Result<Vec<_>>>()?;
        self.sectors.lock().expect("cache lock").extend(built);
        Ok(())
    }
}

/// Normalized `Σ_μ e^{−μ²/(N s)} |μ⟩_x` in the number basis. The amplitude
/// exponent gives `4 Var(J_x) = s N` in the continuum limit.
pub fn build_squeezed_state<T: Real>(s: T, n_total: usize) -> Result<Vec<T>> {
    check_squeezing(s)?;
    if n_total == 0 {
        return Err(Error::InvalidParameter(
            "squeezed state needs N >= 1".into(),
        ));
    }
    let sector = SpinSector::new(n_total)?;
    Ok(sector.to_number_basis(&sector.squeezed_coefficients(s)))
}

fn check_squeezing<T: Real>(s: T) -> Result<()> {
    if !(s > T::zero() && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "squeezing parameter must be > 0, got {s}"
        )));
    }
    Ok(())
}

/// Mixture over total number of fixed-`N` squeezed states.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezedEnsemble<T> {
    s: T,
    rho: DiagonalState<T>,
}

impl<T: Real> SqueezedEnsemble<T> {
    /// Sectors below `SECTOR_PRUNE` of the peak weight are dropped and the
    /// remainder renormalized.
    pub fn new(s: T, rho: &DiagonalState<T>) -> Result<Self> {
        check_squeezing(s)?;
        let peak = rho.as_slice().iter().copied().fold(T::zero(), T::max);
        let cut = peak * T::lit(SECTOR_PRUNE);
        let mut weights: Vec<T> = rho
            .as_slice()
            .iter()
            .map(|&w| if w < cut { T::zero() } else { w })
            .collect();
        while weights.len() > 1 && weights.last() == Some(&T::zero()) {
            weights.pop();
        }
        if weights.len() > MAX_ATOMS + 1 {
            return Err(Error::InvalidParameter(format!(
                "state extends to N = {}, beyond the {MAX_ATOMS}-atom limit",
                weights.len() - 1
            )));
        }
        Ok(Self {
            s,
            rho: DiagonalState::new(weights)?,
        })
    }

    /// Gaussian total number with mean `mean_n` and width `dn`.
    pub fn gaussian(s: T, mean_n: T, dn: T) -> Result<Self> {
        Self::new(s, &DiagonalState::gaussian(mean_n, dn)?)
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn rho(&self) -> &DiagonalState<T> {
        &self.rho
    }

    pub fn mean_n(&self) -> T {
        self.rho.mean()
    }

    fn active(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.rho
            .as_slice()
            .iter()
            .copied()
            .enumerate()
            .filter(|&(n, w)| n > 0 && w > T::zero())
    }

    /// Ensemble `⟨J_x²⟩ − ⟨J_x⟩²` over the mixture.
    pub fn variance_jx(&self, cache: &SectorCache<T>) -> Result<T> {
        let (mut m1, mut m2) = (T::zero(), T::zero());
        for (n, w) in self.active() {
            let sector = cache.sector(n)?;
            let m = sector.moments(&sector.squeezed_coefficients(self.s));
            m1 += w * m.jx;
            m2 += w * m.jx2;
        }
        Ok(m2 - m1 * m1)
    }
}

/// Level-`a` number distribution after `exp(−iθ J_y)`, mixed over `ρ_N`.
pub fn rotated_number_distribution<T: Real>(
    ensemble: &SqueezedEnsemble<T>,
    theta: T,
    cache: &SectorCache<T>,
) -> Result<ProbVector<T>> {
    let mut out = vec![T::zero(); ensemble.rho.n_max() + 1];
    if let Some(&w0) = ensemble.rho.as_slice().first() {
        out[0] += w0;
    }
    for (n, w) in ensemble.active() {
        let sector = cache.sector(n)?;
        let psi = sector.to_number_basis(&sector.squeezed_coefficients(ensemble.s));
        for (k, amp) in sector.rotate(&psi, theta).into_iter().enumerate() {
            out[k] += w * amp.norm_sqr();
        }
    }
    ProbVector::new(out)
}

/// Detected-count moments as a function of the arrival number:
/// `E[n | k] = p₁(k) + δ₁(k)` and `E[n² | k] = p₂(k) + δ₂(k)` with quadratic
/// `p₁, p₂` and corrections `δ` kept only where they are non-negligible.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentModel<T> {
    first: [T; 3],
    second: [T; 3],
    corrections: Vec<(usize, T, T)>,
}

impl<T: Real> MomentModel<T> {
    pub fn ideal() -> Self {
        Self {
            first: [T::zero(), T::one(), T::zero()],
            second: [T::zero(), T::zero(), T::one()],
            corrections: Vec::new(),
        }
    }

    /// Quadratics are fitted to the middle half of the columns; every column
    /// whose moments deviate by more than 1e-10 (relative) carries an
    /// explicit correction.
    pub fn from_detector(v: &DetectorMatrix<T>) -> Result<Self> {
        let dim = v.dim();
        if dim < 8 {
            return Err(Error::InvalidDetector(
                "detector too small for a moment model".into(),
            ));
        }
        let moments = v.column_moments();
        let lo = dim / 4;
        let hi = (3 * dim / 4).max(lo + 3);
        // Fit in a centred, scaled variable to keep the design well conditioned.
        let centre = T::of(lo + hi) / T::lit(2.0);
        let half = T::of(hi - lo) / T::lit(2.0);
        let rows: Vec<T> = (lo..hi)
            .flat_map(|k| {
                let u = (T::of(k) - centre) / half;
                [T::one(), u, u * u]
            })
            .collect();
        let fit = |pick: &dyn Fn(&(T, T)) -> T| -> Result<[T; 3]> {
            let y: Vec<T> = moments[lo..hi].iter().map(pick).collect();
            let c = least_squares(&rows, hi - lo, 3, &y)?;
            let (b, g) = (c[1] / half, c[2] / (half * half));
            Ok([
                c[0] - b * centre + g * centre * centre,
                b - T::lit(2.0) * g * centre,
                g,
            ])
        };
        let first = fit(&|m| m.0)?;
        let second = fit(&|m| m.1)?;
        let poly = |c: &[T; 3], k: usize| {
            let x = T::of(k);
            c[0] + c[1] * x + c[2] * x * x
        };
        let tol = T::lit(1e-10);
        let corrections = moments
            .iter()
            .enumerate()
            .filter_map(|(k, &(m1, m2))| {
                let d1 = m1 - poly(&first, k);
                let d2 = m2 - poly(&second, k);
                let big = d1.abs() > tol * (T::one() + m1.abs())
                    || d2.abs() > tol * (T::one() + m2.abs());
                big.then_some((k, d1, d2))
            })
            .collect();
        Ok(Self {
            first,
            second,
            corrections,
        })
    }

    /// Arrival numbers with explicit corrections and their `(δ₁, δ₂)`.
    pub fn corrections(&self) -> &[(usize, T, T)] {
        &self.corrections
    }
}

struct PreparedSector<T> {
    n: usize,
    weight: T,
    moments: SpinMoments<T>,
    sector: Arc<SpinSector<T>>,
    /// `Qᵀ R† ψ₀`, present when the detector model has corrections.
    weights: Vec<Complex<T>>,
}

/// Detected mean and variance of the count as functions of `θ` for one
/// ensemble and detector.
pub struct PhaseEstimator<T> {
    sectors: Vec<PreparedSector<T>>,
    vacuum: T,
    model: MomentModel<T>,
    mean_n: T,
}

/// Best working point found by [`PhaseEstimator::optimize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseOptimum<T> {
    pub theta: T,
    pub phase_variance: T,
    pub gain: T,
}

impl<T: Real> PhaseEstimator<T> {
    pub fn new(
        ensemble: &SqueezedEnsemble<T>,
        detector: Option<&DetectorMatrix<T>>,
        cache: &SectorCache<T>,
    ) -> Result<Self> {
        let model = match detector {
            Some(v) => {
                if v.n_max() < ensemble.rho.n_max() {
                    return Err(Error::InvalidDetector(format!(
                        "detector n_max {} below largest atom number {}; extend it first",
                        v.n_max(),
                        ensemble.rho.n_max()
                    )));
                }
                MomentModel::from_detector(v)?
            }
            None => MomentModel::ideal(),
        };
        let active: Vec<(usize, T)> = ensemble.active().collect();
        cache.prefetch(&active.iter().map(|a| a.0).collect::<Vec<_>>())?;
        let sectors = active
            .into_iter()
            .map(|(n, weight)| {
                let sector = cache.sector(n)?;
                let c = sector.squeezed_coefficients(ensemble.s);
                let moments = sector.moments(&c);
                let weights = if model.corrections.is_empty() {
                    Vec::new()
                } else {
                    sector.rotation_weights(&sector.to_number_basis(&c))
                };
                Ok(PreparedSector {
                    n,
                    weight,
                    moments,
                    sector,
                    weights,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sectors,
            vacuum: ensemble
                .rho
                .as_slice()
                .first()
                .copied()
                .unwrap_or_else(T::zero),
            model,
            mean_n: ensemble.mean_n(),
        })
    }

    /// Mean and second moment of the detected count at phase `θ`.
    pub fn detected_moments(&self, theta: T) -> (T, T) {
        let m = &self.model;
        let (mut e1, mut e2) = (self.vacuum * m.first[0], self.vacuum * m.second[0]);
        if let Some(&(0, d1, d2)) = m.corrections.first() {
            e1 += self.vacuum * d1;
            e2 += self.vacuum * d2;
        }
        for ps in &self.sectors {
            let (k1, k2) = ps.moments.number_moments(ps.n, theta);
            let mut s1 = m.first[0] + m.first[1] * k1 + m.first[2] * k2;
            let mut s2 = m.second[0] + m.second[1] * k1 + m.second[2] * k2;
            if !ps.weights.is_empty() {
                let phased = ps.sector.phased(&ps.weights, theta);
                for &(k, d1, d2) in m.corrections.iter().take_while(|c| c.0 <= ps.n) {
                    let p = ps.sector.row_amplitude(k, &phased).norm_sqr();
                    s1 += p * d1;
                    s2 += p * d2;
                }
            }
            e1 += ps.weight * s1;
            e2 += ps.weight * s2;
        }
        (e1, e2)
    }

    /// `(Δθ)² = Var(n) / (d⟨n⟩/dθ)²` with a symmetric finite difference.
    pub fn phase_variance(&self, theta: T) -> Result<T> {
        let h = T::lit(THETA_STEP);
        let (e1, e2) = self.detected_moments(theta);
        let slope =
            (self.detected_moments(theta + h).0 - self.detected_moments(theta - h).0) / (h + h);
        if !(slope.abs() > T::lit(1e-9) * (T::one() + e1.abs())) {
            return Err(Error::UnusablePhase {
                theta: theta.f64(),
                reason: "mean count is stationary".into(),
            });
        }
        let var = (e2 - e1 * e1).max(T::zero());
        Ok(var / (slope * slope))
    }

    pub fn gain(&self, phase_variance: T) -> T {
        T::one() / (self.mean_n * phase_variance)
    }

    /// Grid over `(0, π)` followed by golden-section refinement.
    pub fn optimize(&self) -> Result<PhaseOptimum<T>> {
        let objective = |theta: f64| {
            self.phase_variance(T::lit(theta))
                .map(|v| v.f64())
                .ok()
                .filter(|v| v.is_finite())
                .unwrap_or(f64::INFINITY)
        };
        let pi = std::f64::consts::PI;
        let grid: Vec<f64> = (1..=THETA_GRID)
            .map(|i| pi * i as f64 / (THETA_GRID + 1) as f64)
            .collect();
        let (best, best_val) = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| (i, objective(t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        if !best_val.is_finite() {
            return Err(Error::UnusablePhase {
                theta: f64::NAN,
                reason: "no usable working point in (0, π)".into(),
            });
        }
        let lo = if best == 0 {
            grid[0] * 0.5
        } else {
            grid[best - 1]
        };
        let hi = if best + 1 == grid.len() {
            (grid[best] + pi) * 0.5
        } else {
            grid[best + 1]
        };
        let refined = golden_min(objective, lo, hi);
        let (theta, var) = if objective(refined) <= best_val {
            (refined, objective(refined))
        } else {
            (grid[best], best_val)
        };
        let phase_variance = T::lit(var);
        Ok(PhaseOptimum {
            theta: T::lit(theta),
            phase_variance,
            gain: self.gain(phase_variance),
        })
    }
}

/// `(Δθ)²` at a fixed phase.
pub fn phase_sensitivity<T: Real>(
    ensemble: &SqueezedEnsemble<T>,
    theta: T,
    detector: Option<&DetectorMatrix<T>>,
) -> Result<T> {
    PhaseEstimator::new(ensemble, detector, &SectorCache::new())?.phase_variance(theta)
}

/// Gain `G = 1 / (N̄ (Δθ)²)` optimized over `θ` on an `(s, ΔN)` grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainMap<T> {
    pub n_mean: T,
    pub s_axis: Vec<T>,
    pub dn_axis: Vec<T>,
    /// Row-major over `(s, ΔN)`.
    pub gain: Vec<T>,
    pub theta_opt: Vec<T>,
}

impl<T: Real> GainMap<T> {
    pub fn get(&self, i_s: usize, i_dn: usize) -> T {
        self.gain[i_s * self.dn_axis.len() + i_dn]
    }

    pub fn max(&self) -> T {
        self.gain.iter().copied().fold(T::zero(), T::max)
    }

    /// Cells without a sub-shot-noise gain.
    pub fn at_or_below_sql(&self) -> Vec<bool> {
        self.gain.iter().map(|&g| g <= T::one()).collect()
    }
}

pub fn gain_map<T: Real>(
    n_mean: T,
    detector: Option<&DetectorMatrix<T>>,
    s_axis: &[T],
    dn_axis: &[T],
) -> Result<GainMap<T>> {
    gain_map_with(n_mean, detector, s_axis, dn_axis, &SectorCache::new())
}

pub fn gain_map_with<T: Real>(
    n_mean: T,
    detector: Option<&DetectorMatrix<T>>,
    s_axis: &[T],
    dn_axis: &[T],
    cache: &SectorCache<T>,
) -> Result<GainMap<T>> {
    if s_axis.is_empty() || dn_axis.is_empty() {
        return Err(Error::InvalidParameter(
            "gain map axes must be non-empty".into(),
        ));
    }
    if let Some(&dn) = dn_axis.iter().find(|d| !(**d >= T::zero())) {
        return Err(Error::InvalidParameter(format!(
            "number fluctuation must be >= 0, got {dn}"
        )));
    }
    let cells: Vec<(T, T)> = s_axis
        .iter()
        .flat_map(|&s| dn_axis.iter().map(move |&d| (s, d)))
        .collect();
    let optima = cells
        .par_iter()
        .map(|&(s, dn)| {
            let ensemble = SqueezedEnsemble::gaussian(s, n_mean, dn)?;
            PhaseEstimator::new(&ensemble, detector, cache)?.optimize()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainMap {
        n_mean,
        s_axis: s_axis.to_vec(),
        dn_axis: dn_axis.to_vec(),
        gain: optima.iter().map(|o| o.gain).collect(),
        theta_opt: optima.iter().map(|o| o.theta).collect(),
    })
}

/// Log-spaced squeezing grid.
pub fn log_axis<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * T::of(i) / T::of(points - 1)).exp())
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingPoint<T> {
    pub n_mean: T,
    pub dn: T,
    pub gain: T,
    pub s_opt: T,
    pub theta_opt: T,
}

/// Gain optimized over `s` (log grid on `[0.01, 1]`, then golden section in
/// `ln s`) and over `θ`.
pub fn optimize_squeezing<T: Real>(
    n_mean: T,
    dn: T,
    detector: Option<&DetectorMatrix<T>>,
    cache: &SectorCache<T>,
) -> Result<ScalingPoint<T>> {
    let evaluate = |s: f64| -> Result<PhaseOptimum<T>> {
        let ensemble = SqueezedEnsemble::gaussian(T::lit(s), n_mean, dn)?;
        PhaseEstimator::new(&ensemble, detector, cache)?.optimize()
    };
    let grid = log_axis(S_MIN, S_MAX, S_GRID);
    let gains = grid
        .iter()
        .map(|&s| evaluate(s).map(|o| o.gain.f64()))
        .collect::<Result<Vec<_>>>()?;
    let best = gains
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let refined = golden_min(
        |ls| {
            evaluate(ls.exp())
                .map(|o| -o.gain.f64())
                .unwrap_or(f64::INFINITY)
        },
        lo,
        hi,
    )
    .exp();
    let (s_opt, optimum) = match evaluate(refined) {
        Ok(o) if o.gain.f64() >= gains[best] => (refined, o),
        _ => (grid[best], evaluate(grid[best])?),
    };
    Ok(ScalingPoint {
        n_mean,
        dn,
        gain: optimum.gain,
        s_opt: T::lit(s_opt),
        theta_opt: optimum.theta,
    })
}

/// Gain versus `N̄` with `ΔN = √N̄`, optimized over `s` and `θ`.
pub fn gain_scaling<T: Real>(
    detector: Option<&DetectorMatrix<T>>,
    n_axis: &[T],
) -> Result<Vec<ScalingPoint<T>>> {
    gain_scaling_with(detector, n_axis, &SectorCache::new())
}

pub fn gain_scaling_with<T: Real>(
    detector: Option<&DetectorMatrix<T>>,
    n_axis: &[T],
    cache: &SectorCache<T>,
) -> Result<Vec<ScalingPoint<T>>> {
    if let Some(&n) = n_axis
        .iter()
        .find(|&&n| !(n > T::zero() && n <= T::of(MAX_ATOMS)))
    {
        return Err(Error::InvalidParameter(format!(
            "mean atom number {n} outside (0, {MAX_ATOMS}]"
        )));
    }
    n_axis
        .par_iter()
        .map(|&n| optimize_squeezing(n, n.sqrt(), detector, cache))
        .collect()
}

/// Slope of `ln y` against `ln x` by least squares.
pub fn power_law_exponent<T: Real>(points: &[(T, T)]) -> Result<T> {
    if points.len() < 2
        || points
            .iter()
            .any(|&(x, y)| !(x > T::zero() && y > T::zero()))
    {
        return Err(Error::InvalidParameter(
            "power-law fit needs >= 2 positive points".into(),
        ));
    }
    let rows: Vec<T> = points
        .iter()
        .flat_map(|&(x, _)| [T::one(), x.ln()])
        .collect();
    let y: Vec<T> = points.iter().map(|&(_, y)| y.ln()).collect();
    Ok(least_squares(&rows, points.len(), 2, &y)?[1])
}

pub fn gain_to_db<T: Real>(gain: T) -> T {
    T::lit(10.0) * gain.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_state_is_symmetric() {
        let psi = build_squeezed_state(1.0f64, 1).unwrap();
        let sector = SpinSector::<f64>::new(1).unwrap();
        let c = sector.squeezed_coefficients(1.0);
        assert!((c[0] - c[1]).abs() < 1e-15);
        assert!((psi.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jz_is_tridiagonal_in_jx_basis() {
        let n = 9;
        let s = SpinSector::<f64>::new(n).unwrap();
        for q in 0..=n {
            for r in 0..=n {
                let z: f64 = (0..=n)
                    .map(|k| {
                        s.vector_entry(k, q) * (k as f64 - n as f64 / 2.0) * s.vector_entry(k, r)
                    })
                    .sum();
                if q.abs_diff(r) > 1 {
                    assert!(z.abs() < 1e-12);
                }
            }
            assert!(s.vector_entry(0, q) > 0.0);
        }
        for (q, &t) in s.jz_off.iter().enumerate() {
            assert!((t + 0.5 * (((q + 1) * (n - q)) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_moments_match_dense_rotation() {
        let cache = SectorCache::new();
        let ens = SqueezedEnsemble::new(0.3f64, &DiagonalState::fixed(14)).unwrap();
        let sector = cache.sector(14).unwrap();
        let m = sector.moments(&sector.squeezed_coefficients(0.3));
        for &theta in &[0.2, 1.0, 2.2] {
            let d = rotated_number_distribution(&ens, theta, &cache).unwrap();
            let (k1, k2) = m.number_moments(14, theta);
            let e1: f64 = d.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            let e2: f64 = d.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
            assert!((k1 - e1).abs() < 1e-10 && (k2 - e2).abs() < 1e-9);
        }
    }

    #[test]
    fn db_conversion() {
        assert!((gain_to_db(6.03f64) - 7.80).abs() < 0.01);
    }

    #[test]
    fn power_law_of_exact_monomial() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 9.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(0.25)))
            .collect();
        assert!((power_law_exponent(&pts).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn synthetic_detector_needs_few_corrections() {
        use crate::rabi::DarkCountModel;
        use crate::simulator::{build_detector, SyntheticDetectorSpec};
        let spec =
            SyntheticDetectorSpec::new(0.4, DarkCountModel::new(0.27).unwrap(), 0.0, 420).unwrap();
        let model = MomentModel::from_detector(&build_detector(&spec).unwrap()).unwrap();
        assert!(
            model.corrections().len() < 20,
            "{}",
            model.corrections().len()
        );
    }
}
