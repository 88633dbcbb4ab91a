//! Small dense symmetric linear algebra kernels.
//!
//! Deterministic single-threaded implementations; matrix sizes here are the
//! embedding dimension (a few hundred at most), so cubic algorithms are fine.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Largest absolute asymmetry |a_ij - a_ji|.
pub fn asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Cholesky factorization A = L·Lᵀ of a symmetric positive definite matrix.
/// Returns the lower-triangular factor; fails if A is not positive definite.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("cholesky: matrix must be square"));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::numeric(format!(
                        "cholesky: matrix not positive definite (pivot {sum:e} at {i})"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        inv[[col, col]] = 1.0 / l[[col, col]];
        for row in (col + 1)..n {
            let mut sum = 0.0;
            for k in col..row {
                sum += l[[row, k]] * inv[[k, col]];
            }
            inv[[row, col]] = -sum / l[[row, row]];
        }
    }
    inv
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// columns of an orthonormal matrix. Ties keep the original dimension order.
pub fn sym_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("sym_eigh: matrix must be square"));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut m = a.clone();
    // Work on the symmetrized matrix so tiny asymmetries cannot stall the sweep.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let scale: f64 = (0..n)
        .map(|i| m[[i, i]].abs())
        .fold(1e-300f64, f64::max);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[[i, j]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
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
    // Stable sort keeps input dimension order on ties.
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (rank, &idx) in order.iter().enumerate() {
        vals[rank] = m[[idx, idx]];
        for k in 0..n {
            vecs[[k, rank]] = v[[k, idx]];
        }
    }
    if vals.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("sym_eigh: non-finite eigenvalue"));
    }
    Ok((vals, vecs))
}

/// Inverse square root A^{-1/2} of a symmetric positive definite matrix.
pub fn spd_inverse_sqrt(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (vals, vecs) = sym_eigh(a)?;
    let n = vals.len();
    if vals.iter().any(|&x| x <= 0.0) {
        return Err(Error::numeric(
            "spd_inverse_sqrt: matrix not positive definite",
        ));
    }
    let mut scaled = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let f = 1.0 / vals[j].sqrt();
        for i in 0..n {
            scaled[[i, j]] = vecs[[i, j]] * f;
        }
    }
    Ok(scaled.dot(&vecs.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_spd(n: usize, rng: &mut ChaCha20Rng) -> Array2<f64> {
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let mut spd = a.dot(&a.t());
        for i in 0..n {
            spd[[i, i]] += 0.5;
        }
        spd
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for n in [1, 2, 5, 9] {
            let a = random_spd(n, &mut rng);
            let l = cholesky(&a).unwrap();
            let back = l.dot(&l.t());
            for i in 0..n {
                for j in 0..n {
                    assert_abs_diff_eq!(back[[i, j]], a[[i, j]], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn lower_inverse_is_inverse() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = random_spd(6, &mut rng);
        let l = cholesky(&a).unwrap();
        let li = lower_inverse(&l);
        let prod = li.dot(&l);
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigh_reconstructs_and_sorts() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in [1, 2, 4, 8, 17] {
            let a = random_spd(n, &mut rng);
            let (vals, vecs) = sym_eigh(&a).unwrap();
            for k in 1..n {
                assert!(vals[k - 1] >= vals[k] - 1e-12);
            }
            // V diag(vals) Vᵀ == A
            let mut lam = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                lam[[i, i]] = vals[i];
            }
            let back = vecs.dot(&lam).dot(&vecs.t());
            for i in 0..n {
                for j in 0..n {
                    assert_abs_diff_eq!(back[[i, j]], a[[i, j]], epsilon = 1e-9);
                }
            }
            // orthonormal columns
            let gram = vecs.t().dot(&vecs);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[[i, j]], expect, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigh_diagonal_keeps_order_on_ties() {
        let a = array![[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]];
        let (vals, vecs) = sym_eigh(&a).unwrap();
        assert_eq!(vals.to_vec(), vec![3.0, 3.0, 2.0]);
        // first eigenvector should be the earlier tied dimension (index 1)
        assert_abs_diff_eq!(vecs[[1, 0]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vecs[[2, 1]].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_spd(5, &mut rng);
        let w = spd_inverse_sqrt(&a).unwrap();
        let back = w.dot(&a).dot(&w.t());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(back[[i, j]], expect, epsilon = 1e-9);
            }
        }
    }
}
