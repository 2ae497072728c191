//! Small dense vector and matrix helpers on plain slices.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    // scaled to avoid overflow on large entries
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = a.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

#[inline]
pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    let d: Vec<T> = sub(a, b);
    norm(&d)
}

#[inline]
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[inline]
pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[inline]
pub fn scale<T: Real>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

/// `a + s * b`
#[inline]
pub fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn mat_vec<T: Real>(m: &[Vec<T>], x: &[T]) -> Vec<T> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// Spectral norm of a square or rectangular matrix by power iteration on `MᵀM`.
pub fn spectral_norm<T: Real>(m: &[Vec<T>]) -> T {
    if m.is_empty() || m[0].is_empty() {
        return T::zero();
    }
    let cols = m[0].len();
    let mut v: Vec<T> = (0..cols)
        .map(|i| T::one() + T::lit(0.1) * T::from_usize_lossy(i))
        .collect();
    let mut est = T::zero();
    for _ in 0..500 {
        let mv = mat_vec(m, &v);
        let mut w = vec![T::zero(); cols];
        for (row, &y) in m.iter().zip(&mv) {
            for (wj, &mij) in w.iter_mut().zip(row) {
                *wj += mij * y;
            }
        }
        let nw = norm(&w);
        if nw == T::zero() {
            return T::zero();
        }
        let next = nw.sqrt();
        v = scale(T::one() / nw, &w);
        if (next - est).abs() <= T::epsilon() * T::lit(16.0) * next {
            est = next;
            break;
        }
        est = next;
    }
    // power iteration converges from below; tighten with the Rayleigh value
    let mv = mat_vec(m, &v);
    est.max(norm(&mv))
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense<T: Real>(m: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pmax == T::zero() || !pmax.is_finite() {
            return Err(Error::Internal("singular linear system".into()));
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= factor * v;
            }
            let v = rhs[col];
            rhs[r] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Ok(x)
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom == T::zero() {
        return Err(Error::Internal("zero pivot in tridiagonal solve".into()));
    }
    c[0] = if n > 1 { upper[0] / denom } else { T::zero() };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == T::zero() {
            return Err(Error::Internal("zero pivot in tridiagonal solve".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = vec![vec![3.0, 0.0], vec![0.0, -5.0]];
        assert!((spectral_norm(&m) - 5.0_f64).abs() < 1e-12);
    }

    #[test]
    fn dense_and_tridiagonal_agree() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let dense: Vec<Vec<f64>> = (0..4)
            .map(|i: usize| {
                (0..4)
                    .map(|j| if i == j { 4.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let y = solve_dense(&dense, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_handles_large_entries() {
        let v = [3e200_f64, 4e200];
        assert!((norm(&v) / 5e200 - 1.0).abs() < 1e-15);
    }
}
