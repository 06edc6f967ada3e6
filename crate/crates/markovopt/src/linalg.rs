//! Small dense linear-algebra kernels.
//!
//! Matrices are row-major slices with explicit dimensions. Problem sizes in
//! this crate are small (tens of states, at most a few hundred columns), so
//! simple dense algorithms are sufficient and keep the whole numeric core
//! generic over the scalar type.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm_sq<S: Scalar>(a: &[S]) -> S {
    dot(a, a)
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<S: Scalar>(x: &mut [S], alpha: S) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `out = A x` for a row-major `rows x cols` matrix.
pub fn mat_vec<S: Scalar>(a: &[S], rows: usize, cols: usize, x: &[S], out: &mut [S]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (i, oi) in out.iter_mut().enumerate() {
        *oi = dot(&a[i * cols..(i + 1) * cols], x);
    }
}

/// `out = A^T x` for a row-major `rows x cols` matrix.
pub fn mat_t_vec<S: Scalar>(a: &[S], rows: usize, cols: usize, x: &[S], out: &mut [S]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.fill(S::zero());
    for i in 0..rows {
        let xi = x[i];
        if xi != S::zero() {
            axpy(xi, &a[i * cols..(i + 1) * cols], out);
        }
    }
}

/// `(n x m) * (m x k)` row-major matrix product.
pub fn mat_mul<S: Scalar>(a: &[S], b: &[S], n: usize, m: usize, k: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), m * k);
    let mut out = vec![S::zero(); n * k];
    for i in 0..n {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail != S::zero() {
                let brow = &b[l * k..(l + 1) * k];
                axpy(ail, brow, &mut out[i * k..(i + 1) * k]);
            }
        }
    }
    out
}

pub fn frobenius_norm<S: Scalar>(a: &[S]) -> S {
    norm(a)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is consumed as scratch. Fails with [`Error::SingularSystem`] when a
/// pivot is negligible relative to the largest initial entry.
pub fn solve_dense<S: Scalar>(mut a: Vec<S>, mut b: Vec<S>, n: usize) -> Result<Vec<S>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let max_abs = a.iter().fold(S::zero(), |m, &v| m.max(v.abs()));
    let tol = max_abs.max(S::one()) * S::of(1e-13) * S::of(n as f64);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() <= tol {
            return Err(Error::SingularSystem);
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != S::zero() {
                a[r * n + col] = S::zero();
                for c in col + 1..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= f * v;
                }
                b[r] = b[r] - f * b[col];
            }
        }
    }
    let mut x = vec![S::zero(); n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * x[c];
        }
        x[col] = s / a[col * n + col];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, sorted in
/// descending order.
pub fn symmetric_eigenvalues<S: Scalar>(a: &[S], n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let off = |m: &[S]| -> S {
        let mut s = S::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let scale0 = frobenius_norm(&m).max(S::one());
    let tol = scale0 * S::of(1e-15) * S::of(n as f64);
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= scale0 * S::of(1e-18) {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (S::of(2.0) * apq);
                let t = {
                    let s = if theta >= S::zero() {
                        S::one()
                    } else {
                        -S::one()
                    };
                    s / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                // Rotate rows and columns p, q.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut evals: Vec<S> = (0..n).map(|i| m[i * n + i]).collect();
    evals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    evals
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix via power
/// iteration (deterministic start vector).
pub fn largest_eigenvalue_spd<S: Scalar>(a: &[S], n: usize) -> S {
    let mut v = vec![S::one() / S::of(n as f64).sqrt(); n];
    let mut av = vec![S::zero(); n];
    let mut lambda = S::zero();
    for _ in 0..20_000 {
        mat_vec(a, n, n, &v, &mut av);
        let nrm = norm(&av);
        if nrm == S::zero() {
            return S::zero();
        }
        let next = dot(&v, &av);
        for (vi, &ai) in v.iter_mut().zip(av.iter()) {
            *vi = ai / nrm;
        }
        if (next - lambda).abs() <= next.abs() * S::of(1e-13) + S::of(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Estimates the spectral radius of a square matrix via normalized repeated
/// squaring: `rho(A) = lim ||A^k||_F^(1/k)`.
///
/// The log of the accumulated scaling is tracked in `f64` because it grows
/// like `2^k * ln(rho)`.
pub fn spectral_radius_estimate<S: Scalar>(a: &[S], n: usize) -> f64 {
    const SQUARINGS: i32 = 44;
    // Invariant: A^(2^k) = exp(log_scale) * m.
    let mut m = a.to_vec();
    let mut log_scale = 0.0f64;
    for _ in 0..SQUARINGS {
        let f = frobenius_norm(&m).as_f64();
        if f == 0.0 {
            return 0.0;
        }
        if !f.is_finite() {
            return f64::INFINITY;
        }
        log_scale = (log_scale + f.ln()) * 2.0;
        let inv = S::of(1.0 / f);
        scale(&mut m, inv);
        m = mat_mul(&m, &m, n, n, n);
    }
    let f = frobenius_norm(&m).as_f64();
    if f == 0.0 {
        return 0.0;
    }
    ((log_scale + f.ln()) / 2.0f64.powi(SQUARINGS)).exp()
}

/// Haar-distributed random orthogonal matrix: QR of a standard Gaussian
/// matrix via modified Gram-Schmidt (re-orthogonalized), which leaves the
/// diagonal of R positive as the Haar construction requires.
pub fn haar_orthogonal<S: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<S> {
    // Columns of g, orthonormalized in place.
    let mut cols: Vec<Vec<S>> = (0..d)
        .map(|_| (0..d).map(|_| S::standard_normal(rng)).collect())
        .collect();
    for j in 0..d {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for _pass in 0..2 {
            for q in done.iter() {
                let r = dot(q, v);
                axpy(-r, q, v);
            }
        }
        let nrm = norm(v);
        scale(v, S::one() / nrm);
    }
    let mut out = vec![S::zero(); d * d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            out[i * d + j] = col[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_recovers_known_solution() {
        let a = vec![4.0f64, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x_true = vec![1.0, -2.0, 0.5];
        let mut b = vec![0.0; 3];
        mat_vec(&a, 3, 3, &x_true, &mut b);
        let x = solve_dense(a, b, 3).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            solve_dense(a, vec![1.0, 2.0], 2),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn jacobi_matches_hand_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let evals = symmetric_eigenvalues(&[2.0f64, 1.0, 1.0, 2.0], 2);
        assert!((evals[0] - 3.0).abs() < 1e-12);
        assert!((evals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_matrix_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 8;
        let q: Vec<f64> = haar_orthogonal(d, &mut rng);
        let mut qt = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                qt[j * d + i] = q[i * d + j];
            }
        }
        let prod = mat_mul(&qt, &q, d, d, d);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * d + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_radius_of_scaled_rotation() {
        // Rotation scaled by 0.9 has spectral radius 0.9.
        let c = (0.3f64).cos() * 0.9;
        let s = (0.3f64).sin() * 0.9;
        let a = vec![c, -s, s, c];
        let rho = spectral_radius_estimate(&a, 2);
        assert!((rho - 0.9).abs() < 1e-9, "rho = {rho}");
    }

    #[test]
    fn power_iteration_spd() {
        let a = vec![2.0f64, 1.0, 1.0, 2.0];
        let l = largest_eigenvalue_spd(&a, 2);
        assert!((l - 3.0).abs() < 1e-10);
    }
}
