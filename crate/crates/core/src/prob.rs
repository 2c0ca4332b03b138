//! Probability vectors over outcome counts and the statistical distances
//! used to compare them.

use std::cmp::Ordering;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance on the normalization of every probability object in the crate.
pub const NORM_TOL: f64 = 1e-9;

/// Non-negative weights over outcome counts `n = 0, 1, ...` summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector<T> {
    entries: Vec<T>,
}

impl<T: Real> ProbVector<T> {
    /// Validates and renormalizes `entries`.
    ///
    /// Entries slightly below zero (above `-NORM_TOL`) are treated as round-off
    /// and clipped; anything more negative, non-finite, or an all-zero vector
    /// is rejected.
    pub fn new(mut entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        let tol = T::lit(NORM_TOL);
        for (n, x) in entries.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidProbability(format!(
                    "entry {n} is not finite"
                )));
            }
            if *x < -tol {
                return Err(Error::InvalidProbability(format!(
                    "entry {n} is negative ({x})"
                )));
            }
            if *x < T::zero() {
                *x = T::zero();
            }
        }
        let total: T = entries.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::InvalidProbability("entries sum to zero".into()));
        }
        for x in entries.iter_mut() {
            *x /= total;
        }
        Ok(Self { entries })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| T::of(c as usize)).collect())
    }

    pub fn delta(len: usize, at: usize) -> Self {
        let mut entries = vec![T::zero(); len.max(at + 1)];
        entries[at] = T::one();
        Self { entries }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs at least one outcome");
        Self {
            entries: vec![T::one() / T::of(len); len],
        }
    }

    /// Wraps entries that are already known to be a normalized distribution.
    pub(crate) fn from_normalized(entries: Vec<T>) -> Self {
        debug_assert!(!entries.is_empty());
        Self { entries }
    }

    /// Probability of outcome `n`, zero beyond the stored range.
    pub fn prob(&self, n: usize) -> T {
        self.entries.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<T> {
        self.entries
    }

    /// Largest outcome with non-zero probability.
    pub fn support_max(&self) -> usize {
        self.entries
            .iter()
            .rposition(|&p| p > T::zero())
            .unwrap_or(0)
    }

    pub fn mean(&self) -> T {
        self.entries
            .iter()
            .enumerate()
            .map(|(n, &p)| T::of(n) * p)
            .sum()
    }

    pub fn variance(&self) -> T {
        let mean = self.mean();
        self.entries
            .iter()
            .enumerate()
            .map(|(n, &p)| {
                let d = T::of(n) - mean;
                d * d * p
            })
            .sum()
    }

    pub fn total_variation(&self, other: &Self) -> T {
        let len = self.len().max(other.len());
        (0..len)
            .map(|n| (self.prob(n) - other.prob(n)).abs())
            .sum::<T>()
            / T::lit(2.0)
    }

    /// Discrete convolution (distribution of the sum of independent counts).
    pub fn convolve(&self, other: &Self) -> Self {
        Self::from_normalized(convolve(&self.entries, &other.entries))
    }
}

impl<T> Deref for ProbVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.entries
    }
}

pub(crate) fn convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Squared Hellinger distance `Σ (√p − √q)²`; the shorter input is zero-padded.
pub fn hellinger_sq<T: Real>(p: &[T], q: &[T]) -> T {
    let len = p.len().max(q.len());
    (0..len)
        .map(|n| {
            let a = p
                .get(n)
                .copied()
                .unwrap_or_else(T::zero)
                .max(T::zero())
                .sqrt();
            let b = q
                .get(n)
                .copied()
                .unwrap_or_else(T::zero)
                .max(T::zero())
                .sqrt();
            (a - b) * (a - b)
        })
        .sum()
}

/// Bhattacharyya coefficient `Σ √p √q`, equal to `1 − hellinger_sq / 2` for
/// normalized inputs.
pub fn fidelity<T: Real>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q.iter())
        .map(|(&a, &b)| (a.max(T::zero()) * b.max(T::zero())).sqrt())
        .sum()
}

/// Euclidean projection of `x` onto the probability simplex.
pub fn simplex_project<T: Real>(x: &[T]) -> ProbVector<T> {
    assert!(!x.is_empty(), "cannot project an empty vector");
    let mut out = x.to_vec();
    project_simplex_in_place(&mut out, &mut Vec::with_capacity(x.len()));
    ProbVector::from_normalized(out)
}

/// In-place sort-and-threshold simplex projection. `scratch` is reused between
/// calls to avoid reallocating inside optimizer loops.
pub(crate) fn project_simplex_in_place<T: Real>(x: &mut [T], scratch: &mut Vec<T>) {
    scratch.clear();
    scratch.extend_from_slice(x);
    scratch.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumulative = T::zero();
    let mut tau = T::zero();
    for (k, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - T::one()) / T::of(k + 1);
        if u - candidate > T::zero() {
            tau = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - tau).max(T::zero());
    }
    // Remove the last ulp-level drift so column sums stay within NORM_TOL.
    let total: T = x.iter().copied().sum();
    if total > T::zero() {
        for v in x.iter_mut() {
            *v /= total;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(x: &[f64]) -> ProbVector<f64> {
        ProbVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn hellinger_examples() {
        let p = pv(&[0.3, 0.7]);
        assert_eq!(hellinger_sq(&p, &p), 0.0);
        assert!((hellinger_sq(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])) - 2.0).abs() < 1e-15);
        let d = hellinger_sq(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0]));
        assert!((d - (2.0 - 2f64.sqrt())).abs() < 1e-12, "{d}");
    }

    #[test]
    fn hellinger_zero_pads() {
        let short = pv(&[1.0]);
        let long = pv(&[1.0, 0.0, 0.0]);
        assert_eq!(hellinger_sq(&short, &long), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        assert!((fidelity(&p, &p) - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])), 0.0);
        let f = fidelity(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0]));
        assert!((f - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(simplex_project(&[0.2, 0.8]).as_slice(), &[0.2, 0.8]);
        assert_eq!(simplex_project(&[2.0, 0.0]).as_slice(), &[1.0, 0.0]);
        for &x in simplex_project(&[0.5f64, 0.5, 0.5]).iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_preserves_order_of_entries() {
        let p = simplex_project(&[0.1, 3.0, -1.0, 2.5]);
        assert_eq!(p.as_slice(), &[0.0, 0.75, 0.0, 0.25]);
    }

    #[test]
    fn construction_rejects_bad_entries() {
        assert!(ProbVector::<f64>::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, -0.1]).is_err());
        assert!(ProbVector::new(vec![0.0, 0.0]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        let p = ProbVector::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn works_in_single_precision() {
        let p = ProbVector::<f32>::new(vec![0.5, 0.5]).unwrap();
        let q = ProbVector::<f32>::delta(2, 0);
        assert!((hellinger_sq(&p, &q) - (2.0 - 2f32.sqrt())).abs() < 1e-6);
    }
}
