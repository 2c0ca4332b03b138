//! Forward model for resonant two-mode Rabi coupling of a Fock-diagonal state.
//!
//! Phases follow `θ = Ω_R t` with single-atom transfer probability
//! `sin²(θ/2)`. Pulse durations are in microseconds, `Ω_R` in rad/s.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen;
use crate::prob::{convolve, ProbVector};
use crate::scalar::Real;
use crate::special::{binomial_pmf_with, poisson_pmf, LnFactorial};
use crate::state::DiagonalState;

/// Largest atom number accepted by the dense unitary oracle.
pub const ORACLE_MAX_ATOMS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiParams<T> {
    omega_r: T,
}

impl<T: Real> RabiParams<T> {
    /// `omega_r` is the angular Rabi frequency in rad/s.
    pub fn new(omega_r: T) -> Result<Self> {
        if !(omega_r.is_finite() && omega_r > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "Rabi frequency must be > 0, got {omega_r}"
            )));
        }
        Ok(Self { omega_r })
    }

    /// From a cyclic frequency in kHz (`Ω_R = 2π · f`).
    pub fn from_cyclic_khz(khz: T) -> Result<Self> {
        Self::new(T::lit(2.0) * T::PI() * khz * T::lit(1e3))
    }

    pub fn omega_r(&self) -> T {
        self.omega_r
    }

    pub fn cyclic_khz(&self) -> T {
        self.omega_r / (T::lit(2.0) * T::PI() * T::lit(1e3))
    }

    /// Rotation angle after a pulse of `t_us` microseconds.
    pub fn phase(&self, t_us: T) -> T {
        self.omega_r * t_us * T::lit(1e-6)
    }
}

/// Poissonian spurious counts added by the detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarkCountModel<T> {
    mean_dark: T,
}

impl<T: Real> DarkCountModel<T> {
    pub fn new(mean_dark: T) -> Result<Self> {
        if !(mean_dark.is_finite() && mean_dark >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "dark count mean must be >= 0, got {mean_dark}"
            )));
        }
        Ok(Self { mean_dark })
    }

    pub fn none() -> Self {
        Self {
            mean_dark: T::zero(),
        }
    }

    pub fn mean_dark(&self) -> T {
        self.mean_dark
    }

    pub fn distribution(&self) -> ProbVector<T> {
        poisson_pmf(self.mean_dark, T::lit(1e-16))
    }
}

pub fn transfer_prob<T: Real>(params: &RabiParams<T>, t_us: T) -> T {
    transfer_prob_at_phase(params.phase(t_us))
}

#[inline]
pub fn transfer_prob_at_phase<T: Real>(theta: T) -> T {
    let s = (theta / T::lit(2.0)).sin();
    s * s
}

/// Level-a number distribution `Σ_N ρ_N Binomial(m; N, p(t))`.
pub fn ideal_distribution<T: Real>(
    state: &DiagonalState<T>,
    params: &RabiParams<T>,
    t_us: T,
) -> ProbVector<T> {
    ideal_distribution_at_phase(state, params.phase(t_us))
}

pub fn ideal_distribution_at_phase<T: Real>(state: &DiagonalState<T>, theta: T) -> ProbVector<T> {
    let p = transfer_prob_at_phase(theta);
    let lf = LnFactorial::new(state.n_max());
    let mut out = vec![T::zero(); state.n_max() + 1];
    for (n_total, &weight) in state.as_slice().iter().enumerate() {
        if weight == T::zero() {
            continue;
        }
        for (m, b) in binomial_pmf_with(&lf, n_total, p).into_iter().enumerate() {
            out[m] += weight * b;
        }
    }
    ProbVector::new(out).expect("mixture of binomials is a distribution")
}

/// Brute-force number distribution of `exp(−iθ J_x)|0⟩_a|N⟩_b`, obtained by
/// diagonalizing the fixed-N two-mode Hamiltonian. Independent of the
/// binomial closed form used by [`ideal_distribution`].
pub fn exact_unitary_oracle<T: Real>(n_total: usize, theta: T) -> Result<ProbVector<T>> {
    if n_total > ORACLE_MAX_ATOMS {
        return Err(Error::InvalidParameter(format!(
            "unitary oracle limited to {ORACLE_MAX_ATOMS} atoms, got {n_total}"
        )));
    }
    let dim = n_total + 1;
    // ⟨k+1| (a†b + a b†)/2 |k⟩ = √((k+1)(N−k)) / 2, k = atoms in level a.
    let off: Vec<T> = (0..n_total)
        .map(|k| T::lit(0.5) * T::of((k + 1) * (n_total - k)).sqrt())
        .collect();
    let eig = tridiagonal_eigen(&vec![T::zero(); dim], &off)?;
    let phases: Vec<Complex<T>> = eig
        .values
        .iter()
        .map(|&lambda| Complex::from_polar(T::one(), -theta * lambda))
        .collect();
    let probs = (0..dim)
        .map(|k| {
            let amp: Complex<T> = (0..dim)
                .map(|q| phases[q] * (eig.vector_entry(k, q) * eig.vector_entry(0, q)))
                .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z);
            amp.norm_sqr()
        })
        .collect();
    ProbVector::new(probs)
}

/// Reference model: Gaussian total number, ideal binomial transfer, then
/// convolution with Poisson dark counts.
pub fn reference_binomial_model<T: Real>(
    mean_n: T,
    std_n: T,
    params: &RabiParams<T>,
    t_us: T,
    dark: &DarkCountModel<T>,
) -> Result<ProbVector<T>> {
    if !(mean_n > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "mean atom number must be > 0, got {mean_n}"
        )));
    }
    let state = DiagonalState::gaussian(mean_n, std_n)?;
    let ideal = ideal_distribution(&state, params, t_us);
    ProbVector::new(convolve(&ideal, &dark.distribution()))
}
