//! Small dense linear algebra: symmetric tridiagonal eigensolver, least
//! squares, and the real matrix exponential.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_QL_ITERS: usize = 60;

/// Eigen-decomposition of a real symmetric matrix. `vectors` is row-major;
/// column `k` is the eigenvector for `values[k]`. Values ascend.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub dim: usize,
}

impl<T: Real> SymmetricEigen<T> {
    #[inline]
    pub fn vector_entry(&self, row: usize, k: usize) -> T {
        self.vectors[row * self.dim + k]
    }
}

/// Implicit QL with Wilkinson shifts on the tridiagonal matrix with diagonal
/// `diag` and sub/super-diagonal `off` (`off.len() == diag.len() − 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<SymmetricEigen<T>> {
    let n = diag.len();
    assert!(n > 0 && off.len() + 1 == n, "tridiagonal shape mismatch");
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(T::zero());
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    let two = T::lit(2.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERS {
                return Err(Error::EigenNonConvergence(MAX_QL_ITERS));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs().copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk = &mut z[k * n..(k + 1) * n];
                    let f = zk[i + 1];
                    zk[i + 1] = s * zk[i] + c * f;
                    zk[i] = c * zk[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + new_k] = z[row * n + old_k];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        dim: n,
    })
}

/// Least-squares solution of `A x ≈ b` by Householder QR. `a` is row-major
/// `rows × cols` with `rows >= cols`.
pub fn least_squares<T: Real>(a: &[T], rows: usize, cols: usize, b: &[T]) -> Result<Vec<T>> {
    if rows < cols || a.len() != rows * cols || b.len() != rows {
        return Err(Error::InvalidParameter(format!(
            "least squares needs rows >= cols ({rows} x {cols})"
        )));
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..cols {
        let norm = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::InvalidParameter(format!(
                "rank-deficient design (column {k})"
            )));
        }
        let alpha = if r[k * cols + k] > T::zero() {
            -norm
        } else {
            norm
        };
        let mut v: Vec<T> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        for j in k..cols {
            let dot: T = (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= f * v[i - k];
            }
        }
        let dot: T = (k..rows).map(|i| v[i - k] * y[i]).sum();
        let f = T::lit(2.0) * dot / vnorm2;
        for i in k..rows {
            y[i] -= f * v[i - k];
        }
    }
    let scale = (0..cols)
        .map(|k| r[k * cols + k].abs())
        .fold(T::zero(), T::max);
    let mut x = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let diag = r[k * cols + k];
        if diag.abs() <= scale * T::lit(1e-14) {
            return Err(Error::InvalidParameter(format!(
                "rank-deficient design (column {k})"
            )));
        }
        let acc: T = ((k + 1)..cols).map(|j| r[k * cols + j] * x[j]).sum();
        x[k] = (y[k] - acc) / diag;
    }
    Ok(x)
}

/// Row-major square matrix product.
pub fn mat_mul<T: Real>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// `exp(A)` for a real square matrix by scaling and squaring of a truncated
/// Taylor series.
pub fn expm<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<T>())
        .fold(T::zero(), T::max);
    let mut squarings = 0u32;
    let mut scale = T::one();
    while norm * scale > T::lit(0.25) {
        scale /= T::lit(2.0);
        squarings += 1;
    }
    let scaled: Vec<T> = a.iter().map(|&x| x * scale).collect();
    let mut result = vec![T::zero(); n * n];
    let mut term = vec![T::zero(); n * n];
    for i in 0..n {
        result[i * n + i] = T::one();
        term[i * n + i] = T::one();
    }
    for k in 1..=24 {
        term = mat_mul(&term, &scaled, n);
        let inv = T::one() / T::of(k);
        for x in term.iter_mut() {
            *x *= inv;
        }
        let mut largest = T::zero();
        for (r, &t) in result.iter_mut().zip(&term) {
            *r += t;
            largest = largest.max(t.abs());
        }
        if largest < T::epsilon() * T::lit(1e-3) {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, n);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_eigen_reconstructs_matrix() {
        let diag = [2.0, -1.0, 0.5, 3.0, 1.0];
        let off = [1.0, 0.3, -0.7, 2.0];
        let eig = tridiagonal_eigen(&diag, &off).unwrap();
        let n = diag.len();
        for i in 0..n {
            for j in 0..n {
                let rebuilt: f64 = (0..n)
                    .map(|k| eig.vector_entry(i, k) * eig.values[k] * eig.vector_entry(j, k))
                    .sum();
                let want = if i == j {
                    diag[i]
                } else if i + 1 == j {
                    off[i]
                } else if j + 1 == i {
                    off[j]
                } else {
                    0.0
                };
                assert!((rebuilt - want).abs() < 1e-12);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spin_jx_spectrum_is_equally_spaced() {
        let n_total = 9usize;
        let off: Vec<f64> = (0..n_total)
            .map(|k| 0.5 * (((k + 1) * (n_total - k)) as f64).sqrt())
            .collect();
        let eig = tridiagonal_eigen(&vec![0.0; n_total + 1], &off).unwrap();
        for (k, &v) in eig.values.iter().enumerate() {
            assert!((v - (k as f64 - 4.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_recovers_polynomial() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let coef = [1.0, -2.0, 0.5, 3.0];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &x in &xs {
            let row: Vec<f64> = (0..4).map(|k| x.powi(k)).collect();
            b.push(row.iter().zip(&coef).map(|(r, c)| r * c).sum());
            a.extend(row);
        }
        let sol = least_squares(&a, 8, 4, &b).unwrap();
        for (s, c) in sol.iter().zip(&coef) {
            assert!((s - c).abs() < 1e-9);
        }
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 1.3f64;
        let a = [0.0, -t, t, 0.0];
        let e = expm(&a, 2);
        assert!((e[0] - t.cos()).abs() < 1e-14);
        assert!((e[1] + t.sin()).abs() < 1e-14);
        assert!((e[2] - t.sin()).abs() < 1e-14);
    }
}
