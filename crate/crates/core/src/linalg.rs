//! Small dense linear algebra on row-major slices.
//!
//! Matrices here are tiny (the active feature dimension after kernel
//! selection, or at most `p` base features), so plain loops are enough.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `XᵀX` for a row-major `rows × cols` matrix.
pub fn gram(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        for i in 0..cols {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            let gi = &mut g[i * cols..(i + 1) * cols];
            for j in i..cols {
                gi[j] += xi * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            g[i * cols + j] = g[j * cols + i];
        }
    }
    g
}

/// `y = A x` for a square row-major `n × n` matrix.
pub fn sym_matvec(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        y[i] = dot(&a[i * n..(i + 1) * n], x);
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag.is_nan() || diag <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = libm::sqrt(diag);
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves `L z = b` in place.
pub fn forward_substitute(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        let row = &l[i * n..i * n + i];
        for (k, lik) in row.iter().enumerate() {
            v -= lik * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Solves `Lᵀ z = b` in place.
pub fn backward_substitute_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    forward_substitute(l, n, &mut x);
    backward_substitute_transposed(l, n, &mut x);
    x
}

/// `log det A` from the Cholesky factor of `A`.
pub fn log_det(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| 2.0 * libm::log(l[i * n + i])).sum()
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// The returned value is a lower estimate; callers that need an upper bound
/// should inflate it or guard with backtracking.
pub fn max_eigenvalue(a: &[f64], n: usize, iterations: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // A non-constant start avoids being orthogonal to the leading eigenvector
    // for the symmetric designs produced by cosine features.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).recip()).collect();
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        sym_matvec(a, n, &v, &mut w);
        let next = dot(&v, &w);
        core::mem::swap(&mut v, &mut w);
        if (next - estimate).abs() <= 1e-12 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let x = cholesky_solve(&l, 3, &[1.0, 2.0, 3.0]);
        let mut ax = [0.0; 3];
        sym_matvec(&a, 3, &x, &mut ax);
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky(&a, 2),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn power_iteration_diagonal() {
        let a = [3.0, 0.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 1.0];
        assert!((max_eigenvalue(&a, 3, 1000) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn gram_matches_definition() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let g = gram(&x, 3, 2);
        assert_eq!(g, vec![35.0, 44.0, 44.0, 56.0]);
    }
}
