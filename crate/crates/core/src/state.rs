//! Fock-diagonal many-body input states.

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::scalar::Real;

/// Number of standard deviations kept above the mean when discretizing a
/// Gaussian total-number distribution.
pub const GAUSSIAN_SPAN: f64 = 6.0;

/// Weights `ρ_N` of the state `Σ_N ρ_N |N⟩_b|0⟩_a⟨0|_a⟨N|_b`, index = total
/// atom number.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalState<T> {
    rho: ProbVector<T>,
}

impl<T: Real> DiagonalState<T> {
    pub fn new(rho: Vec<T>) -> Result<Self> {
        ProbVector::new(rho)
            .map(|rho| Self { rho })
            .map_err(|e| Error::InvalidState(e.to_string()))
    }

    pub fn from_prob(rho: ProbVector<T>) -> Self {
        Self { rho }
    }

    /// All weight on a single total number.
    pub fn fixed(n_total: usize) -> Self {
        Self {
            rho: ProbVector::delta(n_total + 1, n_total),
        }
    }

    /// Gaussian weights `exp(−(N − mean)² / 2 std²)` on integers
    /// `0 ..= ceil(mean + 6 std)`, renormalized. `std = 0` collapses to the
    /// integer nearest `mean`.
    pub fn gaussian(mean: T, std: T) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite()) || mean < T::zero() || std < T::zero() {
            return Err(Error::InvalidState(format!(
                "gaussian needs finite mean >= 0 and std >= 0, got ({mean}, {std})"
            )));
        }
        if std == T::zero() {
            let n = mean.round().to_usize().unwrap_or(0);
            return Ok(Self::fixed(n));
        }
        let hi = (mean + T::lit(GAUSSIAN_SPAN) * std)
            .ceil()
            .to_usize()
            .unwrap_or(0);
        let two_var = T::lit(2.0) * std * std;
        // Exponents are taken relative to the integer nearest the mean, so a
        // narrow Gaussian between two integers cannot underflow to zero.
        let nearest = T::of(mean.round().to_usize().unwrap_or(0).min(hi)) - mean;
        let floor = nearest * nearest;
        let weights = (0..=hi)
            .map(|n| {
                let d = T::of(n) - mean;
                (-(d * d - floor) / two_var).exp()
            })
            .collect();
        Self::new(weights)
    }

    /// Poissonian total number with the given mean, truncated where the
    /// remaining tail is below 1e-16.
    pub fn poisson(mean: T) -> Result<Self> {
        if !(mean.is_finite() && mean > T::zero()) {
            return Err(Error::InvalidState(format!(
                "poisson mean must be > 0, got {mean}"
            )));
        }
        Ok(Self {
            rho: crate::special::poisson_pmf(mean, T::lit(1e-16)),
        })
    }

    pub fn weights(&self) -> &ProbVector<T> {
        &self.rho
    }

    pub fn as_slice(&self) -> &[T] {
        &self.rho
    }

    /// Largest represented total number.
    pub fn n_max(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn mean(&self) -> T {
        self.rho.mean()
    }

    pub fn std(&self) -> T {
        self.rho.variance().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrow_gaussian_between_integers_is_valid() {
        let s = DiagonalState::gaussian(0.5f64, 7.7e-4).unwrap();
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let s = DiagonalState::<f64>::gaussian(35.4, 6.4).unwrap();
        assert!((s.mean() - 35.4).abs() < 1e-6);
        assert!((s.std() - 6.4).abs() < 1e-3);
        assert_eq!(s.n_max(), 74);
    }

    #[test]
    fn gaussian_zero_width_is_fixed() {
        assert_eq!(
            DiagonalState::<f64>::gaussian(12.3, 0.0).unwrap(),
            DiagonalState::fixed(12)
        );
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(DiagonalState::new(vec![0.5, -0.5, 1.0]).is_err());
        assert!(DiagonalState::<f64>::gaussian(-1.0, 1.0).is_err());
    }
}
