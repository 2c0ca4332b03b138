//! Discrete distributions and special functions.

use crate::prob::ProbVector;
use crate::scalar::Real;

/// Table of `ln k!` for `k = 0 ..= max`.
#[derive(Clone, Debug)]
pub struct LnFactorial<T> {
    table: Vec<T>,
}

impl<T: Real> LnFactorial<T> {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        table.push(T::zero());
        let mut acc = 0.0f64;
        for k in 1..=max {
            acc += (k as f64).ln();
            table.push(T::lit(acc));
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, k: usize) -> T {
        self.table[k]
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> T {
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

/// `Binomial(m; n, p)` for `m = 0 ..= n`, evaluated in log space.
pub fn binomial_pmf<T: Real>(n: usize, p: T) -> Vec<T> {
    binomial_pmf_with(&LnFactorial::new(n), n, p)
}

pub fn binomial_pmf_with<T: Real>(lf: &LnFactorial<T>, n: usize, p: T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if p <= T::zero() {
        out[0] = T::one();
        return out;
    }
    if p >= T::one() {
        out[n] = T::one();
        return out;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    for (m, slot) in out.iter_mut().enumerate() {
        *slot = (lf.ln_choose(n, m) + T::of(m) * lp + T::of(n - m) * lq).exp();
    }
    out
}

/// `∂/∂p Binomial(m; n, p) = n [B(m−1; n−1, p) − B(m; n−1, p)]`.
pub fn binomial_pmf_dp_with<T: Real>(lf: &LnFactorial<T>, n: usize, p: T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if n == 0 {
        return out;
    }
    let lower = binomial_pmf_with(lf, n - 1, p);
    let nn = T::of(n);
    for m in 0..=n {
        let left = if m >= 1 { lower[m - 1] } else { T::zero() };
        let right = if m < n { lower[m] } else { T::zero() };
        out[m] = nn * (left - right);
    }
    out
}

/// Poisson probabilities with the given mean, truncated once the terms past
/// the mode fall below `tol`, then renormalized.
pub fn poisson_pmf<T: Real>(mean: T, tol: T) -> ProbVector<T> {
    if mean <= T::zero() {
        return ProbVector::delta(1, 0);
    }
    let mut out = vec![(-mean).exp()];
    let mut k = 0usize;
    loop {
        let next = out[k] * mean / T::of(k + 1);
        k += 1;
        out.push(next);
        if T::of(k) > mean && next < tol {
            break;
        }
    }
    ProbVector::new(out).expect("poisson weights are positive")
}

/// Values `e^{−z/2} L_m(z)` for `m = 0 ..= m_max` by the three-term recurrence
/// `L_{m+1} = ((2m + 1 − z) L_m − m L_{m−1}) / (m + 1)`. The exponential
/// prefactor is carried through the recurrence so large `z` stays in range.
pub fn laguerre_scaled<T: Real>(m_max: usize, z: T) -> Vec<T> {
    let mut out = Vec::with_capacity(m_max + 1);
    let l0 = (-z / T::lit(2.0)).exp();
    out.push(l0);
    if m_max == 0 {
        return out;
    }
    out.push((T::one() - z) * l0);
    for m in 1..m_max {
        let mm = T::of(m);
        let next = ((T::lit(2.0) * mm + T::one() - z) * out[m] - mm * out[m - 1]) / (mm + T::one());
        out.push(next);
    }
    out
}

/// Standard normal cumulative distribution.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
