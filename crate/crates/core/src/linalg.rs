//! Small dense linear algebra for the matrices this crate works with
//! (risk matrices, GP kernel matrices, feature covariances). All inputs are
//! at most a few hundred rows, so plain O(n^3) routines are used.

use ndarray::{Array1, Array2};

use crate::error::MedleyError;
use crate::Result;

/// Lower-triangular Cholesky factor of a symmetric matrix.
///
/// Returns `None` when the matrix is not positive definite (a non-positive
/// pivot is encountered).
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solve `L^T x = b` for lower-triangular `L`.
pub fn back_substitute(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solve `A x = b` through an existing Cholesky factor `L` of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    back_substitute(l, &forward_substitute(l, b))
}

/// Extend the Cholesky factor of an n x n matrix to n+1 x n+1 after
/// appending one row/column `(k, kappa)` to the underlying matrix.
///
/// Returns `None` when the extended matrix is not positive definite.
pub fn cholesky_extend(l: &Array2<f64>, k: &Array1<f64>, kappa: f64) -> Option<Array2<f64>> {
    let n = l.nrows();
    debug_assert_eq!(k.len(), n);
    let c = forward_substitute(l, k);
    let d2 = kappa - c.dot(&c);
    if d2 <= 0.0 || !d2.is_finite() {
        return None;
    }
    let mut out = Array2::<f64>::zeros((n + 1, n + 1));
    for i in 0..n {
        for j in 0..=i {
            out[[i, j]] = l[[i, j]];
        }
    }
    for j in 0..n {
        out[[n, j]] = c[j];
    }
    out[[n, n]] = d2.sqrt();
    Some(out)
}

/// `log det A` from its Cholesky factor.
pub fn log_det_from_cholesky(l: &Array2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
///
/// Works for any invertible `A` (the ensemble risk matrix can be
/// indefinite). Fails on (numerically) singular input.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(MedleyError::Dimension {
            expected: n,
            got: a.ncols().max(b.len()),
        });
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[[col, col]].abs();
        for r in col + 1..n {
            let v = m[[r, col]].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(MedleyError::numerical("singular matrix in solve"));
        }
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for c in i + 1..n {
            s -= m[[i, c]] * x[c];
        }
        x[i] = s / m[[i, i]];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Deterministic: sweep order is fixed and ties keep input order.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (slot, &idx) in order.iter().enumerate() {
        vals[slot] = m[[idx, idx]];
        for r in 0..n {
            vecs[[r, slot]] = v[[r, idx]];
        }
    }
    (vals, vecs)
}
