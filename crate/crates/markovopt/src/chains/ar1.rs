//! Vector AR(1) process `x_t = A x_{t-1} + n_t` with Gaussian noise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Stationarity margin: processes with an estimated spectral radius within
/// 1e-9 of 1 are rejected as numerically indistinguishable from unstable.
const RADIUS_MARGIN: f64 = 1e-9;

/// Stationary vector autoregressive process of order one.
///
/// The per-coordinate noise variance defaults to `1/d`, matching the
/// `N(0, (1/d) I)` innovations the non-convex benchmark uses.
#[derive(Debug, Clone)]
pub struct Ar1Process<S> {
    dim: usize,
    a: Vec<S>,
    noise_variance: S,
    noise_std: S,
    state: Vec<S>,
}

impl<S: Scalar> Ar1Process<S> {
    /// Builds the process from a row-major `d x d` coefficient matrix; the
    /// spectral radius of `A` must be below 1 (estimated by normalized
    /// repeated squaring). The initial state is the zero vector.
    pub fn new(dim: usize, a: Vec<S>, noise_variance: S) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSize(0));
        }
        if a.len() != dim * dim {
            return Err(Error::DimensionMismatch(a.len(), dim * dim));
        }
        if !(noise_variance >= S::zero()) {
            return Err(Error::InvalidParams(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        let rho = linalg::spectral_radius_estimate(&a, dim);
        if !(rho < 1.0 - RADIUS_MARGIN) {
            return Err(Error::UnstableAr(rho));
        }
        Ok(Self {
            dim,
            a,
            noise_variance,
            noise_std: noise_variance.sqrt(),
            state: vec![S::zero(); dim],
        })
    }

    /// Convenience constructor using the default `1/d` noise variance.
    pub fn with_default_noise(dim: usize, a: Vec<S>) -> Result<Self> {
        Self::new(dim, a, S::one() / S::of(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficients(&self) -> &[S] {
        &self.a
    }

    pub fn noise_variance(&self) -> S {
        self.noise_variance
    }

    pub fn state(&self) -> &[S] {
        &self.state
    }

    /// Advances one step: `x <- A x + noise`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut next = vec![S::zero(); self.dim];
        linalg::mat_vec(&self.a, self.dim, self.dim, &self.state, &mut next);
        for v in next.iter_mut() {
            *v += self.noise_std * S::standard_normal(rng);
        }
        self.state = next;
    }

    /// Solves the stationary covariance equation `Sigma = A Sigma A^T + Q`
    /// (with `Q = noise_variance * I`) by fixed-point iteration; converges
    /// because the spectral radius of `A` is below 1.
    pub fn stationary_covariance(&self) -> Vec<S> {
        let d = self.dim;
        let mut sigma = vec![S::zero(); d * d];
        let tol = S::of(1e-14);
        for _ in 0..100_000 {
            let asig = linalg::mat_mul(&self.a, &sigma, d, d, d);
            // asig * A^T
            let mut next = vec![S::zero(); d * d];
            for i in 0..d {
                for j in 0..d {
                    next[i * d + j] =
                        linalg::dot(&asig[i * d..(i + 1) * d], &self.a[j * d..(j + 1) * d]);
                }
            }
            for i in 0..d {
                next[i * d + i] += self.noise_variance;
            }
            let mut delta = S::zero();
            for (&a, &b) in next.iter().zip(&sigma) {
                delta = delta.max((a - b).abs());
            }
            sigma = next;
            if delta <= tol {
                break;
            }
        }
        sigma
    }
}
