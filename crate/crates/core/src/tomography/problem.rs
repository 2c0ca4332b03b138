//! Cost of a candidate `(V, ρ, Ω_R)` against a dataset and its analytic
//! gradient.

use crate::dataset::HistogramDataset;
use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{binomial_pmf_with, LnFactorial};

use super::config::CostKind;

/// Floor on model probabilities inside square roots, ratios and logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Gradient of the cost with respect to every model parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    /// Row-major, same layout as [`DetectorMatrix::as_slice`].
    pub v: Vec<T>,
    pub rho: Vec<T>,
    /// Derivative with respect to `Ω_R` in rad/s.
    pub omega: T,
}

/// Fixed data side of the reconstruction: targets padded to `n_max + 1`
/// counts and the total-number domain `0 .. rho_len`.
#[derive(Clone, Debug)]
pub struct TomographyProblem<T> {
    times_s: Vec<T>,
    targets: Vec<Vec<T>>,
    dim: usize,
    rho_len: usize,
    kind: CostKind,
    lf: LnFactorial<T>,
}

impl<T: Real> TomographyProblem<T> {
    pub fn new(
        data: &HistogramDataset<T>,
        n_max: usize,
        rho_len: usize,
        kind: CostKind,
    ) -> Result<Self> {
        if n_max < data.n_max() {
            return Err(Error::InvalidParameter(format!(
                "n_max {n_max} below largest observed count {}",
                data.n_max()
            )));
        }
        if rho_len == 0 {
            return Err(Error::InvalidParameter("empty total-number domain".into()));
        }
        let dim = n_max + 1;
        let targets = data
            .histograms()
            .iter()
            .map(|h| {
                let mut t = h.to_vec();
                t.resize(dim, T::zero());
                t
            })
            .collect();
        Ok(Self {
            times_s: data.times_us().iter().map(|&t| t * T::lit(1e-6)).collect(),
            targets,
            dim,
            rho_len,
            kind,
            lf: LnFactorial::new(rho_len),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho_len(&self) -> usize {
        self.rho_len
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    /// Per time, the matrix `B[m][N] = Binomial(m; N, p(t))` stored at
    /// `m * rho_len + N`.
    pub(crate) fn binomials(&self, omega: T) -> Vec<Vec<T>> {
        let r = self.rho_len;
        self.times_s
            .iter()
            .map(|&t| {
                let half = omega * t / T::lit(2.0);
                let p = half.sin().powi(2);
                let mut b = vec![T::zero(); r * r];
                for n_total in 0..r {
                    for (m, x) in binomial_pmf_with(&self.lf, n_total, p)
                        .into_iter()
                        .enumerate()
                    {
                        b[m * r + n_total] = x;
                    }
                }
                b
            })
            .collect()
    }

    /// Arrival distributions folded onto `0 ..= n_max`.
    pub(crate) fn ideal(&self, binom: &[Vec<T>], rho: &[T]) -> Vec<Vec<T>> {
        let r = self.rho_len;
        binom
            .iter()
            .map(|b| {
                let mut out = vec![T::zero(); self.dim];
                for m in 0..r {
                    let row = &b[m * r..(m + 1) * r];
                    let x: T = row[m..].iter().zip(&rho[m..]).map(|(&b, &w)| b * w).sum();
                    out[m.min(self.dim - 1)] += x;
                }
                out
            })
            .collect()
    }

    pub(crate) fn detected(&self, v: &[T], ideal: &[Vec<T>]) -> Vec<Vec<T>> {
        let d = self.dim;
        ideal
            .iter()
            .map(|pid| {
                (0..d)
                    .map(|n| {
                        v[n * d..(n + 1) * d]
                            .iter()
                            .zip(pid)
                            .map(|(&a, &b)| a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn cost_of(&self, detected: &[Vec<T>]) -> T {
        let floor = T::lit(PROB_FLOOR);
        detected
            .iter()
            .zip(&self.targets)
            .map(|(pv, h)| match self.kind {
                CostKind::Hellinger => pv
                    .iter()
                    .zip(h)
                    .map(|(&p, &q)| {
                        let d = p.max(T::zero()).sqrt() - q.sqrt();
                        d * d
                    })
                    .sum::<T>(),
                CostKind::KullbackLeibler => pv
                    .iter()
                    .zip(h)
                    .filter(|(_, &q)| q > T::zero())
                    .map(|(&p, &q)| q * (q / p.max(floor)).ln())
                    .sum::<T>(),
            })
            .sum()
    }

    /// `∂C/∂P_V(n | t_j)`.
    pub(crate) fn residual_grad(&self, detected: &[Vec<T>]) -> Vec<Vec<T>> {
        let floor = T::lit(PROB_FLOOR);
        detected
            .iter()
            .zip(&self.targets)
            .map(|(pv, h)| {
                pv.iter()
                    .zip(h)
                    .map(|(&p, &q)| match self.kind {
                        CostKind::Hellinger => T::one() - (q / p.max(floor)).sqrt(),
                        CostKind::KullbackLeibler => -q / p.max(floor),
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn grad_v(&self, residual: &[Vec<T>], ideal: &[Vec<T>]) -> Vec<T> {
        let d = self.dim;
        let mut out = vec![T::zero(); d * d];
        for (g, pid) in residual.iter().zip(ideal) {
            for n in 0..d {
                let gn = g[n];
                for (slot, &q) in out[n * d..(n + 1) * d].iter_mut().zip(pid) {
                    *slot += gn * q;
                }
            }
        }
        out
    }

    /// Pulls the residual back to arrival numbers `m < rho_len`:
    /// `h_j(m) = Σ_n g_j(n) V[n][min(m, n_max)]`.
    pub(crate) fn pull_back(&self, v: &[T], residual: &[Vec<T>]) -> Vec<Vec<T>> {
        let d = self.dim;
        residual
            .iter()
            .map(|g| {
                let mut col = vec![T::zero(); d];
                for (n, &gn) in g.iter().enumerate() {
                    for (slot, &x) in col.iter_mut().zip(&v[n * d..(n + 1) * d]) {
                        *slot += gn * x;
                    }
                }
                (0..self.rho_len).map(|m| col[m.min(d - 1)]).collect()
            })
            .collect()
    }

    pub(crate) fn grad_rho(&self, pulled: &[Vec<T>], binom: &[Vec<T>]) -> Vec<T> {
        let r = self.rho_len;
        let mut out = vec![T::zero(); r];
        for (h, b) in pulled.iter().zip(binom) {
            for (m, &hm) in h.iter().enumerate() {
                for n_total in m..r {
                    out[n_total] += hm * b[m * r + n_total];
                }
            }
        }
        out
    }

    /// Uses `∂B(m; N, p)/∂p = N [B(m−1; N−1, p) − B(m; N−1, p)]` and
    /// `∂p/∂Ω = t sin(Ω t) / 2`.
    pub(crate) fn grad_omega(&self, pulled: &[Vec<T>], binom: &[Vec<T>], rho: &[T], omega: T) -> T {
        let r = self.rho_len;
        let mut total = T::zero();
        for ((h, b), &t) in pulled.iter().zip(binom).zip(&self.times_s) {
            let dp = t * (omega * t).sin() / T::lit(2.0);
            if dp == T::zero() {
                continue;
            }
            let mut acc = T::zero();
            for n_total in 1..r {
                if rho[n_total] == T::zero() {
                    continue;
                }
                let below = n_total - 1;
                let s: T = (0..=below)
                    .map(|m| b[m * r + below] * (h[m + 1] - h[m]))
                    .sum();
                acc += rho[n_total] * T::of(n_total) * s;
            }
            total += acc * dp;
        }
        total
    }

    fn check_shapes(&self, v: &DetectorMatrix<T>, rho: &[T]) -> Result<()> {
        if v.dim() != self.dim || rho.len() != self.rho_len {
            return Err(Error::InvalidParameter(format!(
                "expected V of dim {} and rho of length {}, got {} and {}",
                self.dim,
                self.rho_len,
                v.dim(),
                rho.len()
            )));
        }
        Ok(())
    }

    /// Total cost of a candidate.
    pub fn cost(&self, v: &DetectorMatrix<T>, rho: &[T], omega: T) -> Result<T> {
        self.check_shapes(v, rho)?;
        let ideal = self.ideal(&self.binomials(omega), rho);
        Ok(self.cost_of(&self.detected(v.as_slice(), &ideal)))
    }

    /// Model detection distributions `P_V(n | t_j)` for every time.
    pub fn predictions(&self, v: &DetectorMatrix<T>, rho: &[T], omega: T) -> Result<Vec<Vec<T>>> {
        self.check_shapes(v, rho)?;
        let ideal = self.ideal(&self.binomials(omega), rho);
        Ok(self.detected(v.as_slice(), &ideal))
    }

    pub fn gradient(&self, v: &DetectorMatrix<T>, rho: &[T], omega: T) -> Result<Gradient<T>> {
        self.check_shapes(v, rho)?;
        let binom = self.binomials(omega);
        let ideal = self.ideal(&binom, rho);
        let detected = self.detected(v.as_slice(), &ideal);
        let residual = self.residual_grad(&detected);
        let pulled = self.pull_back(v.as_slice(), &residual);
        Ok(Gradient {
            v: self.grad_v(&residual, &ideal),
            rho: self.grad_rho(&pulled, &binom),
            omega: self.grad_omega(&pulled, &binom, rho, omega),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabi::{ideal_distribution, RabiParams};
    use crate::state::DiagonalState;

    fn exact_dataset(
        v: &DetectorMatrix<f64>,
        rho: &DiagonalState<f64>,
        omega: f64,
    ) -> HistogramDataset<f64> {
        let rabi = RabiParams::new(omega).unwrap();
        let times = vec![0.0, 5.0, 11.0, 20.0];
        let histos = times
            .iter()
            .map(|&t| v.apply_dist(&ideal_distribution(rho, &rabi, t)))
            .collect();
        HistogramDataset::from_histograms(times, histos, vec![1000; 4]).unwrap()
    }

    #[test]
    fn exact_data_has_zero_cost() {
        let v = DetectorMatrix::<f64>::identity(12);
        let rho = DiagonalState::gaussian(8.0, 1.5).unwrap();
        let omega = 2.0 * std::f64::consts::PI * 8.2e3;
        let data = exact_dataset(&v, &rho, omega);
        let mut padded = rho.as_slice().to_vec();
        padded.resize(rho.n_max() + 3, 0.0);
        let problem = TomographyProblem::new(&data, 12, padded.len(), CostKind::Hellinger).unwrap();
        assert!(problem.cost(&v, &padded, omega).unwrap() < 1e-20);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let v = DetectorMatrix::<f64>::identity(5);
        let rho = DiagonalState::fixed(3);
        let data = exact_dataset(&v, &rho, 1e5);
        let problem = TomographyProblem::new(&data, 5, 4, CostKind::Hellinger).unwrap();
        assert!(problem
            .cost(&DetectorMatrix::identity(6), rho.as_slice(), 1e5)
            .is_err());
    }
}
