//! TD(0) policy evaluation with linear function approximation over finite
//! Markov reward processes.
//!
//! The semi-gradient at a transition `(s, r, s')` is
//!
//! ```text
//! g(theta; z) = (r + gamma phi(s')^T theta - phi(s)^T theta) phi(s)
//! ```
//!
//! and its steady-state mean `g_bar(theta)` vanishes at the TD fixed point
//! `theta*`, obtained here exactly from the stationary linear system. The
//! quality metric is the stationary-weighted squared value error
//! `sum_s mu(s) (V_theta*(s) - V_theta(s))^2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chains::{ChainStream, Distribution, FiniteChain, MarkovStream};
use crate::error::{Error, Result};
use crate::estimators::{GradientOracle, LevelDistribution};
use crate::linalg;
use crate::optim::{run_method, Budget, Domain, Method, MetricFn, RunParams, RunTrace, StepSign};
use crate::scalar::Scalar;

/// State-reward-next-state triplet observed from the MRP.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: usize,
    pub reward: S,
    pub next_state: usize,
}

/// Finite Markov reward process with linear features.
#[derive(Debug, Clone)]
pub struct Mrp<S> {
    chain: FiniteChain<S>,
    n: usize,
    dim: usize,
    /// Per-transition rewards, row-major `n x n`.
    rewards: Vec<S>,
    /// Feature rows `phi(s)`, row-major `n x d`, each with norm <= 1.
    features: Vec<S>,
    gamma: S,
    radius: S,
    stationary: Distribution<S>,
    theta_star: Vec<S>,
}

impl<S: Scalar> Mrp<S> {
    /// Builds an MRP; `radius = None` defaults to `2 ||theta*||` so that the
    /// projected TD iterates always have the fixed point inside the ball.
    pub fn new(
        chain: FiniteChain<S>,
        rewards: Vec<S>,
        features: Vec<S>,
        dim: usize,
        gamma: S,
        radius: Option<S>,
    ) -> Result<Self> {
        let n = chain.n_states();
        if rewards.len() != n * n {
            return Err(Error::DimensionMismatch(rewards.len(), n * n));
        }
        if features.len() != n * dim {
            return Err(Error::DimensionMismatch(features.len(), n * dim));
        }
        if !(gamma >= S::zero() && gamma < S::one()) {
            return Err(Error::InvalidParams(format!(
                "discount must lie in [0, 1), got {gamma}"
            )));
        }
        for s in 0..n {
            let row = &features[s * dim..(s + 1) * dim];
            if linalg::norm(row) > S::one() + S::of(1e-12) {
                return Err(Error::InvalidParams(format!(
                    "feature row {s} has norm > 1"
                )));
            }
        }
        let stationary = chain.stationary_distribution()?;
        let theta_star = solve_theta_star(&chain, &stationary, &rewards, &features, dim, gamma)?;
        let star_norm = linalg::norm(&theta_star);
        let radius = match radius {
            Some(r) => {
                if !(r > S::zero()) {
                    return Err(Error::InvalidParams(format!(
                        "projection radius must be positive, got {r}"
                    )));
                }
                if star_norm > r {
                    return Err(Error::InvalidParams(format!(
                        "projection radius {r} excludes theta* (norm {star_norm})"
                    )));
                }
                r
            }
            None => {
                if star_norm > S::zero() {
                    star_norm + star_norm
                } else {
                    // Degenerate zero fixed point still needs a positive ball.
                    S::one()
                }
            }
        };
        Ok(Self {
            chain,
            n,
            dim,
            rewards,
            features,
            gamma,
            radius,
            stationary,
            theta_star,
        })
    }

    /// Random MRP: Dirichlet(1) transition rows (redrawn until ergodic),
    /// rewards uniform in `[-1, 1]`, unit-normalized Gaussian feature rows.
    pub fn random(n: usize, dim: usize, gamma: S, seed: u64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidSize(n.min(dim)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = loop {
            let mut p = vec![S::zero(); n * n];
            for i in 0..n {
                let mut sum = S::zero();
                for j in 0..n {
                    // Dirichlet(1) row = normalized unit exponentials.
                    let e = -S::unit_uniform(&mut rng).max(S::of(1e-300)).ln();
                    p[i * n + j] = e;
                    sum += e;
                }
                for j in 0..n {
                    p[i * n + j] /= sum;
                }
                // Exact renormalization of the largest entry to absorb
                // rounding in the row sum.
                let row_sum: S = p[i * n..(i + 1) * n].iter().copied().sum();
                p[i * n + n - 1] += S::one() - row_sum;
            }
            let chain = FiniteChain::new(n, p)?;
            if chain.is_ergodic() {
                break chain;
            }
        };
        let rewards: Vec<S> = (0..n * n)
            .map(|_| S::of(2.0) * S::unit_uniform(&mut rng) - S::one())
            .collect();
        let mut features = vec![S::zero(); n * dim];
        for s in 0..n {
            let row = &mut features[s * dim..(s + 1) * dim];
            for v in row.iter_mut() {
                *v = S::standard_normal(&mut rng);
            }
            let nrm = linalg::norm(row);
            linalg::scale(row, S::one() / nrm);
        }
        Self::new(chain, rewards, features, dim, gamma, None)
    }

    /// Tabular variant: identity features (`d = n`).
    pub fn tabular(chain: FiniteChain<S>, rewards: Vec<S>, gamma: S) -> Result<Self> {
        let n = chain.n_states();
        let mut features = vec![S::zero(); n * n];
        for s in 0..n {
            features[s * n + s] = S::one();
        }
        Self::new(chain, rewards, features, n, gamma, None)
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn chain(&self) -> &FiniteChain<S> {
        &self.chain
    }

    pub fn stationary(&self) -> &Distribution<S> {
        &self.stationary
    }

    pub fn theta_star(&self) -> &[S] {
        &self.theta_star
    }

    pub fn feature_row(&self, s: usize) -> &[S] {
        &self.features[s * self.dim..(s + 1) * self.dim]
    }

    pub fn reward(&self, s: usize, s_next: usize) -> S {
        self.rewards[s * self.n + s_next]
    }

    pub fn r_max(&self) -> S {
        self.rewards.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }

    /// Expected one-step reward `sum_s' P(s, s') R(s, s')`.
    pub fn expected_reward(&self, s: usize) -> S {
        linalg::dot(
            self.chain.row(s),
            &self.rewards[s * self.n..(s + 1) * self.n],
        )
    }

    /// TD(0) semi-gradient at one transition.
    pub fn semi_gradient(&self, theta: &[S], z: &Transition<S>) -> Result<Vec<S>> {
        if z.state >= self.n {
            return Err(Error::BadState(z.state));
        }
        if z.next_state >= self.n {
            return Err(Error::BadState(z.next_state));
        }
        let mut out = vec![S::zero(); self.dim];
        self.semi_gradient_into(theta, z, &mut out);
        Ok(out)
    }

    fn semi_gradient_into(&self, theta: &[S], z: &Transition<S>, out: &mut [S]) {
        let phi_s = self.feature_row(z.state);
        let phi_next = self.feature_row(z.next_state);
        let delta =
            z.reward + self.gamma * linalg::dot(phi_next, theta) - linalg::dot(phi_s, theta);
        for (o, &p) in out.iter_mut().zip(phi_s) {
            *o = delta * p;
        }
    }

    /// Steady-state mean of the semi-gradient, computed exactly:
    /// `sum_s mu(s) sum_s' P(s,s') (R + gamma phi(s')^T theta
    ///  - phi(s)^T theta) phi(s)`.
    pub fn bar_g(&self, theta: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        for s in 0..self.n {
            let phi_s = self.feature_row(s);
            let v_s = linalg::dot(phi_s, theta);
            let mut expected_delta = S::zero();
            for s_next in 0..self.n {
                let p = self.chain.entry(s, s_next);
                if p > S::zero() {
                    let v_next = linalg::dot(self.feature_row(s_next), theta);
                    expected_delta += p * (self.reward(s, s_next) + self.gamma * v_next - v_s);
                }
            }
            linalg::axpy(self.stationary.get(s) * expected_delta, phi_s, &mut out);
        }
        out
    }

    /// Stationary-weighted squared value error against the TD fixed point:
    /// `sum_s mu(s) (V_theta*(s) - V_theta(s))^2`.
    pub fn value_error(&self, theta: &[S]) -> S {
        let mut total = S::zero();
        for s in 0..self.n {
            let phi = self.feature_row(s);
            let gap = linalg::dot(phi, &self.theta_star) - linalg::dot(phi, theta);
            total += self.stationary.get(s) * gap * gap;
        }
        total
    }

    /// Transition stream starting from `start`.
    pub fn stream(&self, start: usize, seed: u64) -> Result<MrpStream<S>> {
        if start >= self.n {
            return Err(Error::BadState(start));
        }
        Ok(MrpStream {
            chain_stream: ChainStream::new(self.chain.clone(), start, seed)?,
            rewards: self.rewards.clone(),
            n: self.n,
            state: start,
        })
    }
}

/// `theta*` solves `A theta = b` with
/// `A = sum_s mu(s) phi(s) (phi(s) - gamma E_s'[phi(s')])^T` and
/// `b = sum_s mu(s) E_s'[R] phi(s)`.
fn solve_theta_star<S: Scalar>(
    chain: &FiniteChain<S>,
    stationary: &Distribution<S>,
    rewards: &[S],
    features: &[S],
    dim: usize,
    gamma: S,
) -> Result<Vec<S>> {
    let n = chain.n_states();
    let mut a = vec![S::zero(); dim * dim];
    let mut b = vec![S::zero(); dim];
    let mut phi_bar = vec![S::zero(); dim];
    for s in 0..n {
        let mu_s = stationary.get(s);
        let phi_s = &features[s * dim..(s + 1) * dim];
        phi_bar.fill(S::zero());
        let mut r_bar = S::zero();
        for s_next in 0..n {
            let p = chain.entry(s, s_next);
            if p > S::zero() {
                linalg::axpy(p, &features[s_next * dim..(s_next + 1) * dim], &mut phi_bar);
                r_bar += p * rewards[s * n + s_next];
            }
        }
        for i in 0..dim {
            let w = mu_s * phi_s[i];
            for j in 0..dim {
                a[i * dim + j] += w * (phi_s[j] - gamma * phi_bar[j]);
            }
        }
        linalg::axpy(mu_s * r_bar, phi_s, &mut b);
    }
    linalg::solve_dense(a, b, dim)
}

/// Stream of MRP transitions; consecutive observations overlap in the state
/// (`next_state` of one transition is `state` of the next).
#[derive(Debug, Clone)]
pub struct MrpStream<S> {
    chain_stream: ChainStream<S>,
    rewards: Vec<S>,
    n: usize,
    state: usize,
}

impl<S: Scalar> MarkovStream for MrpStream<S> {
    type Obs = Transition<S>;

    fn next_obs(&mut self) -> Transition<S> {
        let s = self.state;
        let s_next = self.chain_stream.next_obs();
        self.state = s_next;
        Transition {
            state: s,
            reward: self.rewards[s * self.n + s_next],
            next_state: s_next,
        }
    }

    fn samples_emitted(&self) -> u64 {
        self.chain_stream.samples_emitted()
    }
}

/// Semi-gradient oracle over MRP transitions.
#[derive(Debug, Clone, Copy)]
pub struct TdOracle<'a, S> {
    pub mrp: &'a Mrp<S>,
}

impl<S: Scalar> GradientOracle<S> for TdOracle<'_, S> {
    type Obs = Transition<S>;

    fn dim(&self) -> usize {
        self.mrp.dim()
    }

    fn gradient(&self, theta: &[S], obs: &Transition<S>, out: &mut [S]) {
        self.mrp.semi_gradient_into(theta, obs, out);
    }
}

/// Projected TD with the MLMC estimator and AdaGrad-Norm rate: ascent steps
/// `theta <- proj(theta + eta g)` on the ball `||theta|| <= R` with
/// `alpha = sqrt(2) R`, recording the value error of the running average.
pub fn run_td_mag<S: Scalar>(
    mrp: &Mrp<S>,
    iterations: u64,
    seed: u64,
    record_every: u64,
) -> Result<RunTrace<S>> {
    let levels = LevelDistribution::truncated_geometric(5)?;
    let params = RunParams {
        alpha: S::of(2.0).sqrt() * mrp.radius(),
        record_every,
        sign: StepSign::Ascent,
        ..RunParams::new(Domain::l2_ball(mrp.radius())?, levels)
    };
    let mut stream = mrp.stream(0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let oracle = TdOracle { mrp };
    let metric: &MetricFn<S> =
        &|theta: &[S]| vec![("value_error".to_string(), mrp.value_error(theta))];
    run_method(
        Method::Mag,
        &oracle,
        &mut stream,
        Budget::Iterations(iterations),
        &params,
        &mut rng,
        metric,
    )
}
