//! Column-stochastic detector response matrices.

use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::{ProbVector, NORM_TOL};
use crate::scalar::Real;

/// Stochastic map `V[n][m]`: probability of detecting `n` atoms when `m`
/// arrive. Square, indexed `0..=n_max` on both axes, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DetectorMatrix<T> {
    /// Builds from row-major data; every column must be a distribution.
    pub fn new(n_max: usize, data: Vec<T>) -> Result<Self> {
        let dim = n_max + 1;
        if data.len() != dim * dim {
            return Err(Error::InvalidDetector(format!(
                "expected {} entries for n_max = {n_max}, got {}",
                dim * dim,
                data.len()
            )));
        }
        let matrix = Self { dim, data };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Builds from columns `V[·][m]`, each renormalized.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 {
            return Err(Error::InvalidDetector("no columns".into()));
        }
        let mut data = vec![T::zero(); dim * dim];
        for (m, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::InvalidDetector(format!(
                    "column {m} has {} entries, expected {dim}",
                    col.len()
                )));
            }
            let col = ProbVector::new(col.clone())
                .map_err(|e| Error::InvalidDetector(format!("column {m}: {e}")))?;
            for (n, &x) in col.iter().enumerate() {
                data[n * dim + m] = x;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(n_max: usize) -> Self {
        let dim = n_max + 1;
        let mut data = vec![T::zero(); dim * dim];
        for k in 0..dim {
            data[k * dim + k] = T::one();
        }
        Self { dim, data }
    }

    /// Entries drawn uniformly from `[0, 1)`, each column normalized.
    pub fn random<R: Rng + ?Sized>(n_max: usize, rng: &mut R) -> Self {
        let dim = n_max + 1;
        let mut data: Vec<T> = (0..dim * dim)
            .map(|_| T::lit(rng.random::<f64>()))
            .collect();
        for m in 0..dim {
            let total: T = (0..dim).map(|n| data[n * dim + m]).sum();
            for n in 0..dim {
                data[n * dim + m] /= total;
            }
        }
        Self { dim, data }
    }

    fn validate(&self) -> Result<()> {
        let tol = T::lit(NORM_TOL);
        for m in 0..self.dim {
            let mut total = T::zero();
            for n in 0..self.dim {
                let x = self.get(n, m);
                if !x.is_finite() || x < T::zero() {
                    return Err(Error::InvalidDetector(format!("V[{n}][{m}] = {x}")));
                }
                total += x;
            }
            if (total - T::one()).abs() > tol {
                return Err(Error::InvalidDetector(format!(
                    "column {m} sums to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> T {
        self.data[n * self.dim + m]
    }

    pub fn row(&self, n: usize) -> &[T] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn column(&self, m: usize) -> Vec<T> {
        (0..self.dim).map(|n| self.get(n, m)).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Largest deviation of a column sum from one.
    pub fn column_sum_residual(&self) -> T {
        (0..self.dim)
            .map(|m| ((0..self.dim).map(|n| self.get(n, m)).sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// `V · p`. Arrival probabilities beyond `n_max` are assigned to the last
    /// column, matching the truncation of the count domain at `n_max`.
    pub fn apply(&self, p: &[T]) -> Vec<T> {
        let folded = fold_into(p, self.dim);
        let mut out = vec![T::zero(); self.dim];
        for (n, slot) in out.iter_mut().enumerate() {
            let row = self.row(n);
            *slot = row.iter().zip(&folded).map(|(&v, &q)| v * q).sum();
        }
        out
    }

    /// `V · p` as a validated distribution.
    pub fn apply_dist(&self, p: &ProbVector<T>) -> ProbVector<T> {
        ProbVector::from_normalized(self.apply(p))
    }

    /// Per-column conditional moments `(Σ_n n V[n][m], Σ_n n² V[n][m])`.
    pub fn column_moments(&self) -> Vec<(T, T)> {
        (0..self.dim)
            .map(|m| {
                (0..self.dim).fold((T::zero(), T::zero()), |(a, b), n| {
                    let x = self.get(n, m);
                    let nn = T::of(n);
                    (a + nn * x, b + nn * nn * x)
                })
            })
            .collect()
    }

    /// Enlarges the matrix to `n_max`, filling new columns by shifting the
    /// response of `template` column along the diagonal. Mass shifted past the
    /// new `n_max` is folded into the last row.
    pub fn extend_shift_invariant(&self, n_max: usize, template: usize) -> Result<Self> {
        if n_max < self.n_max() {
            return Err(Error::InvalidParameter(format!(
                "cannot shrink detector from n_max {} to {n_max}",
                self.n_max()
            )));
        }
        if template > self.n_max() {
            return Err(Error::InvalidParameter(format!(
                "template column {template} beyond n_max {}",
                self.n_max()
            )));
        }
        let dim = n_max + 1;
        let mut data = vec![T::zero(); dim * dim];
        let template_col = self.column(template);
        for m in 0..dim {
            if m < self.dim {
                for n in 0..self.dim {
                    data[n * dim + m] = self.get(n, m);
                }
            } else {
                for (n_t, &x) in template_col.iter().enumerate() {
                    let n = (n_t + m - template).min(n_max);
                    data[n * dim + m] += x;
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Restriction to arrivals `0 ..= n_max`, with detections above `n_max`
    /// folded into the last row.
    pub fn truncate(&self, n_max: usize) -> Result<Self> {
        if n_max > self.n_max() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate detector with n_max {} to {n_max}",
                self.n_max()
            )));
        }
        let dim = n_max + 1;
        let mut data = vec![T::zero(); dim * dim];
        for n in 0..self.dim {
            for m in 0..dim {
                data[n.min(n_max) * dim + m] += self.get(n, m);
            }
        }
        Ok(Self { dim, data })
    }
}

/// Truncates `p` to `dim` entries, adding the tail mass to the last entry.
pub(crate) fn fold_into<T: Real>(p: &[T], dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    for (m, &x) in p.iter().enumerate() {
        out[m.min(dim - 1)] += x;
    }
    out
}
