//! Two-state Markovian linear regression.
//!
//! Each state `i` of a symmetric 2-state chain carries its own design matrix
//! and targets; the learner only sees the data of the state the chain is in.
//! With the uniform stationary distribution, averaging the per-state losses
//!
//! ```text
//! f(w; i) = 1/(2n) ||X_i w - y_i||^2
//! ```
//!
//! recovers the population objective `F(w) = 1/(4n) ||X w - y||^2` over the
//! stacked system exactly, so suboptimality can be measured against the
//! closed-form least-squares optimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::GradientOracle;
use crate::linalg;
use crate::optim::Domain;
use crate::scalar::Scalar;

/// Regression problem instance with a precomputed optimum.
#[derive(Debug, Clone)]
pub struct RegressionInstance<S> {
    rows: usize,
    dim: usize,
    x: [Vec<S>; 2],
    y: [Vec<S>; 2],
    radius: S,
    w_star: Vec<S>,
    f_star: S,
    regularized: bool,
}

impl<S: Scalar> RegressionInstance<S> {
    /// Generates an instance: standard-normal designs, per-state planted
    /// weights, targets `y_i = X_i w_i + eps` with per-entry noise variance
    /// `noise_variance`. The ball radius is `1.1 ||w_ls||`, keeping the
    /// unconstrained optimum feasible.
    pub fn generate(rows: usize, dim: usize, noise_variance: S, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise_std = noise_variance.sqrt();
        let mut x: [Vec<S>; 2] = [Vec::new(), Vec::new()];
        let mut y: [Vec<S>; 2] = [Vec::new(), Vec::new()];
        for state in 0..2 {
            let planted: Vec<S> = (0..dim).map(|_| S::standard_normal(&mut rng)).collect();
            let mut xs = Vec::with_capacity(rows * dim);
            for _ in 0..rows * dim {
                xs.push(S::standard_normal(&mut rng));
            }
            let mut ys = vec![S::zero(); rows];
            linalg::mat_vec(&xs, rows, dim, &planted, &mut ys);
            for v in ys.iter_mut() {
                *v += noise_std * S::standard_normal(&mut rng);
            }
            x[state] = xs;
            y[state] = ys;
        }
        let [x1, x2] = x;
        let [y1, y2] = y;
        Self::from_parts(rows, dim, x1, y1, x2, y2, None).expect("generated dimensions are valid")
    }

    /// Builds an instance from explicit data. `radius = None` picks
    /// `1.1 ||w_ls||`; an explicit radius may make the least-squares solution
    /// infeasible, in which case the optimum is found by projected gradient.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        rows: usize,
        dim: usize,
        x1: Vec<S>,
        y1: Vec<S>,
        x2: Vec<S>,
        y2: Vec<S>,
        radius: Option<S>,
    ) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidSize(rows.min(dim)));
        }
        for (xs, ys) in [(&x1, &y1), (&x2, &y2)] {
            if xs.len() != rows * dim {
                return Err(Error::DimensionMismatch(xs.len(), rows * dim));
            }
            if ys.len() != rows {
                return Err(Error::DimensionMismatch(ys.len(), rows));
            }
        }
        let mut inst = Self {
            rows,
            dim,
            x: [x1, x2],
            y: [y1, y2],
            radius: S::zero(),
            w_star: Vec::new(),
            f_star: S::zero(),
            regularized: false,
        };
        let w_ls = inst.least_squares()?;
        let ls_norm = linalg::norm(&w_ls);
        inst.radius = match radius {
            Some(r) => {
                if !(r > S::zero()) {
                    return Err(Error::InvalidParams(format!(
                        "ball radius must be positive, got {r}"
                    )));
                }
                r
            }
            None => S::of(1.1) * ls_norm.max(S::of(1e-12)),
        };
        if ls_norm <= inst.radius {
            inst.f_star = inst.objective(&w_ls);
            inst.w_star = w_ls;
        } else {
            let w = inst.ball_constrained_optimum()?;
            inst.f_star = inst.objective(&w);
            inst.w_star = w;
        }
        Ok(inst)
    }

    /// Unconstrained minimizer via the stacked normal equations; a singular
    /// system is regularized by `1e-12 I` with a warning.
    fn least_squares(&mut self) -> Result<Vec<S>> {
        let d = self.dim;
        let mut h = vec![S::zero(); d * d];
        let mut rhs = vec![S::zero(); d];
        for state in 0..2 {
            let xs = &self.x[state];
            for r in 0..self.rows {
                let row = &xs[r * d..(r + 1) * d];
                for i in 0..d {
                    let xi = row[i];
                    if xi != S::zero() {
                        linalg::axpy(xi, row, &mut h[i * d..(i + 1) * d]);
                    }
                }
                linalg::axpy(self.y[state][r], row, &mut rhs);
            }
        }
        match linalg::solve_dense(h.clone(), rhs.clone(), d) {
            Ok(w) => Ok(w),
            Err(Error::SingularSystem) => {
                log::warn!("singular normal equations; regularizing by 1e-12 I");
                self.regularized = true;
                for i in 0..d {
                    h[i * d + i] += S::of(1e-12);
                }
                linalg::solve_dense(h, rhs, d)
            }
            Err(e) => Err(e),
        }
    }

    /// Projected gradient descent onto the ball, run to a gradient-map norm
    /// below 1e-10.
    fn ball_constrained_optimum(&self) -> Result<Vec<S>> {
        let d = self.dim;
        let domain = Domain::l2_ball(self.radius)?;
        // Lipschitz constant of grad F is the top eigenvalue of H / (2n).
        let mut h = vec![S::zero(); d * d];
        for state in 0..2 {
            let xs = &self.x[state];
            for r in 0..self.rows {
                let row = &xs[r * d..(r + 1) * d];
                for i in 0..d {
                    let xi = row[i];
                    if xi != S::zero() {
                        linalg::axpy(xi, row, &mut h[i * d..(i + 1) * d]);
                    }
                }
            }
        }
        let scale = S::one() / (S::of(2.0) * S::of(self.rows as f64));
        linalg::scale(&mut h, scale);
        let lipschitz = linalg::largest_eigenvalue_spd(&h, d) * S::of(1.01);
        let step = S::one() / lipschitz.max(S::of(1e-12));
        let mut w = domain.project(&vec![S::zero(); d]);
        let mut grad = vec![S::zero(); d];
        for _ in 0..1_000_000u64 {
            self.population_gradient(&w, &mut grad);
            let mut next = w.clone();
            linalg::axpy(-step, &grad, &mut next);
            domain.project_in_place(&mut next);
            let mut map_norm = S::zero();
            for (a, b) in w.iter().zip(&next) {
                map_norm += (*a - *b) * (*a - *b);
            }
            let map_norm = map_norm.sqrt() / step;
            w = next;
            if map_norm < S::of(1e-10) {
                break;
            }
        }
        Ok(w)
    }

    /// `grad F(w) = (grad f(w; 1) + grad f(w; 2)) / 2`, exact.
    pub fn population_gradient(&self, w: &[S], out: &mut [S]) {
        let mut g = vec![S::zero(); self.dim];
        out.fill(S::zero());
        for state in 0..2 {
            self.loss_gradient_into(w, state, &mut g);
            linalg::axpy(S::of(0.5), &g, out);
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn was_regularized(&self) -> bool {
        self.regularized
    }

    /// `(w*, F*)`.
    pub fn optimum(&self) -> (&[S], S) {
        (&self.w_star, self.f_star)
    }

    /// Per-state loss and gradient:
    /// `f(w; i) = 1/(2n) ||X_i w - y_i||^2`,
    /// `grad = 1/n X_i^T (X_i w - y_i)`.
    pub fn loss_gradient(&self, w: &[S], state: usize) -> Result<(S, Vec<S>)> {
        if state >= 2 {
            return Err(Error::BadState(state));
        }
        let mut grad = vec![S::zero(); self.dim];
        let loss = self.loss_gradient_into(w, state, &mut grad);
        Ok((loss, grad))
    }

    fn loss_gradient_into(&self, w: &[S], state: usize, grad: &mut [S]) -> S {
        let n = self.rows;
        let d = self.dim;
        let xs = &self.x[state];
        let ys = &self.y[state];
        let mut resid = vec![S::zero(); n];
        linalg::mat_vec(xs, n, d, w, &mut resid);
        for (r, y) in resid.iter_mut().zip(ys) {
            *r -= *y;
        }
        linalg::mat_t_vec(xs, n, d, &resid, grad);
        let inv_n = S::one() / S::of(n as f64);
        linalg::scale(grad, inv_n);
        linalg::norm_sq(&resid) * S::of(0.5) * inv_n
    }

    /// Population objective `F(w) = 1/(4n) ||stacked residual||^2`, the
    /// uniform average of the two per-state losses.
    pub fn objective(&self, w: &[S]) -> S {
        let mut total = S::zero();
        let mut resid = vec![S::zero(); self.rows];
        for state in 0..2 {
            linalg::mat_vec(&self.x[state], self.rows, self.dim, w, &mut resid);
            for (r, y) in resid.iter_mut().zip(&self.y[state]) {
                *r -= *y;
            }
            total += linalg::norm_sq(&resid);
        }
        total / (S::of(4.0) * S::of(self.rows as f64))
    }

    pub fn suboptimality(&self, w: &[S]) -> S {
        self.objective(w) - self.f_star
    }

    /// Largest per-state gradient norm over random probes in the ball; the
    /// empirical stand-in for the bounded-gradient constant G.
    pub fn max_gradient_norm_on_ball(&self, probes: usize, seed: u64) -> S {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grad = vec![S::zero(); self.dim];
        let mut best = S::zero();
        for _ in 0..probes {
            let mut w: Vec<S> = (0..self.dim)
                .map(|_| S::standard_normal(&mut rng))
                .collect();
            let norm = linalg::norm(&w);
            let r = self.radius * S::unit_uniform(&mut rng);
            linalg::scale(&mut w, r / norm);
            for state in 0..2 {
                self.loss_gradient_into(&w, state, &mut grad);
                best = best.max(linalg::norm(&grad));
            }
        }
        best
    }
}

impl<S: Scalar> GradientOracle<S> for RegressionInstance<S> {
    type Obs = usize;

    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&self, w: &[S], obs: &usize, out: &mut [S]) {
        debug_assert!(*obs < 2);
        self.loss_gradient_into(w, *obs, out);
    }
}
