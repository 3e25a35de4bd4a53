//! Small dense linear algebra for the logistic fit: Cholesky factorisation of
//! symmetric positive-definite matrices and a column-dependence scan.

use crate::scalar::Real;

/// Lower Cholesky factor of a row-major `n x n` SPD matrix, or `None` when a
/// pivot is not safely positive.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let floor = max_diag * T::epsilon() * T::of_usize(n.max(1));
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > floor) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b`.
pub fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i * n + k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = l[k * n + i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Inverse of `L L^T`, row-major.
pub fn cholesky_inverse<T: Real>(l: &[T], n: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); n * n];
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = cholesky_solve(l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

/// Indices of columns that are (numerically) linear combinations of the
/// columns before them.
///
/// Modified Gram-Schmidt with one reorthogonalisation pass; a column is
/// dependent when its residual norm is at most `rel_tol` times its own norm.
pub fn dependent_columns<T: Real>(columns: &[Vec<T>], rel_tol: T) -> Vec<usize> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let dot: T = q.iter().zip(&v).map(|(&a, &b)| a * b).sum();
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm0 == T::zero() || !(norm > rel_tol * norm0) {
            dependent.push(j);
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    dependent
}
