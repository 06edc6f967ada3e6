//! Finite Markov chains, stationary distributions and mixing-time analysis.
//!
//! A [`FiniteChain`] is a row-stochastic transition matrix. The distance from
//! stationarity at time `t` is
//!
//! ```text
//! d_mix(t) = max_z TV(P^t(z, .), mu)
//! ```
//!
//! and the mixing time `tau_mix(eps)` is the smallest `t` with
//! `d_mix(t) <= eps` (`eps = 1/4` by convention). Everything here is computed
//! exactly from matrix powers; nothing is estimated from sampled trajectories.
//!
//! Mixing-time analysis covers finite chains only. The [`Ar1Process`] is
//! simulated as a data source but no mixing time is defined or computed for
//! it; anything that needs a mixing time (the data-drop baseline's gap, the
//! eigenvalue bounds) requires a finite chain.

mod ar1;
mod stream;

pub use ar1::Ar1Process;
pub use stream::{Ar1Stream, ChainStream, MarkovStream};

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Default cap on time arguments for exact matrix-power analysis.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

/// Support-graph threshold: entries above this count as edges.
const SUPPORT_EPS: f64 = 1e-15;

/// Probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<S> {
    w: Vec<S>,
}

impl<S: Scalar> Distribution<S> {
    /// Validates non-negativity and that the weights sum to 1 within 1e-12.
    pub fn new(w: Vec<S>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(bad) = w.iter().find(|&&v| v < S::zero() || !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "negative or non-finite weight {bad}"
            )));
        }
        let sum: S = w.iter().copied().sum();
        if (sum - S::one()).abs() > S::of(1e-12) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { w })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            w: vec![S::one() / S::of(n as f64); n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn weights(&self) -> &[S] {
        &self.w
    }

    pub fn get(&self, i: usize) -> S {
        self.w[i]
    }
}

/// Total variation distance between two distributions on the same finite
/// space, computed as half the L1 distance (equivalent to the
/// sup-over-events definition on finite spaces).
pub fn total_variation<S: Scalar>(p: &Distribution<S>, q: &Distribution<S>) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(p.len(), q.len()));
    }
    Ok(tv_slices(p.weights(), q.weights()))
}

fn tv_slices<S: Scalar>(p: &[S], q: &[S]) -> S {
    let mut s = S::zero();
    for (&a, &b) in p.iter().zip(q) {
        s += (a - b).abs();
    }
    s * S::of(0.5)
}

/// Ergodic analysis target: a time-homogeneous Markov chain on a finite state
/// space, stored as a row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain<S> {
    n: usize,
    p: Vec<S>,
    ergodic: bool,
}

impl<S: Scalar> FiniteChain<S> {
    /// Builds a chain from a row-major `n x n` transition matrix. Every row
    /// must sum to 1 within 1e-12 and all entries must lie in `[0, 1]`.
    /// Ergodicity (irreducibility + aperiodicity) is determined here once.
    pub fn new(n: usize, p: Vec<S>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        if p.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                p.len()
            )));
        }
        for (idx, &v) in p.iter().enumerate() {
            if !(v >= S::zero() && v <= S::one()) {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({}, {}) = {v} outside [0, 1]",
                    idx / n,
                    idx % n
                )));
            }
        }
        for i in 0..n {
            let sum: S = p[i * n..(i + 1) * n].iter().copied().sum();
            if (sum - S::one()).abs() > S::of(1e-12) {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {sum}")));
            }
        }
        let ergodic = is_irreducible(&p, n) && is_aperiodic(&p, n);
        Ok(Self { n, p, ergodic })
    }

    /// Reads the plain-text matrix format: first line `n`, then `n` rows of
    /// `n` whitespace-separated probabilities.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            for tok in line.split_whitespace() {
                tokens.push(tok.to_string());
            }
        }
        let mut it = tokens.iter();
        let n: usize = it
            .next()
            .ok_or_else(|| Error::InvalidMatrix("empty matrix file".into()))?
            .parse()
            .map_err(|e| Error::InvalidMatrix(format!("bad state count: {e}")))?;
        let mut p = Vec::with_capacity(n * n);
        for tok in it {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::InvalidMatrix(format!("bad entry {tok:?}: {e}")))?;
            p.push(S::of(v));
        }
        Self::new(n, p)
    }

    pub fn from_matrix_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        self.p[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.p[i * self.n..(i + 1) * self.n]
    }

    pub fn matrix(&self) -> &[S] {
        &self.p
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodic
    }

    fn require_ergodic(&self) -> Result<()> {
        if self.ergodic {
            Ok(())
        } else {
            Err(Error::NonErgodic)
        }
    }

    /// Stationary distribution via power iteration on `P^T` (per-step L1
    /// tolerance 1e-14, capped at 10^6 iterations).
    pub fn stationary_distribution(&self) -> Result<Distribution<S>> {
        self.require_ergodic()?;
        let n = self.n;
        let mut mu = vec![S::one() / S::of(n as f64); n];
        let mut next = vec![S::zero(); n];
        let tol = S::of(1e-14);
        for _ in 0..DEFAULT_STEP_CAP {
            linalg::mat_t_vec(&self.p, n, n, &mu, &mut next);
            // Renormalize to absorb rounding drift.
            let sum: S = next.iter().copied().sum();
            for v in next.iter_mut() {
                *v /= sum;
            }
            let mut delta = S::zero();
            for (&a, &b) in next.iter().zip(&mu) {
                delta += (a - b).abs();
            }
            std::mem::swap(&mut mu, &mut next);
            if delta <= tol {
                break;
            }
        }
        Distribution::new(mu)
    }

    /// `P^t` by repeated squaring (row-major).
    pub fn matrix_power(&self, t: u64) -> Vec<S> {
        let n = self.n;
        let mut result = identity::<S>(n);
        let mut base = self.p.clone();
        let mut e = t;
        while e > 0 {
            if e & 1 == 1 {
                result = linalg::mat_mul(&result, &base, n, n, n);
            }
            e >>= 1;
            if e > 0 {
                base = linalg::mat_mul(&base, &base, n, n, n);
            }
        }
        result
    }

    /// Worst-case total-variation distance from stationarity after `t` steps,
    /// using the default step cap.
    pub fn d_mix(&self, t: u64) -> Result<S> {
        self.d_mix_with_cap(t, DEFAULT_STEP_CAP)
    }

    pub fn d_mix_with_cap(&self, t: u64, cap: u64) -> Result<S> {
        self.require_ergodic()?;
        if t > cap {
            return Err(Error::CapExceeded(cap));
        }
        let mu = self.stationary_distribution()?;
        let pt = self.matrix_power(t);
        let n = self.n;
        let mut worst = S::zero();
        for z in 0..n {
            worst = worst.max(tv_slices(&pt[z * n..(z + 1) * n], mu.weights()));
        }
        Ok(worst)
    }

    /// Smallest `t` with `d_mix(t) <= eps`, found by doubling then bisection.
    /// A 1e-9 slack is applied to the threshold comparison to absorb the
    /// rounding of exact matrix powers.
    pub fn mixing_time(&self, eps: S) -> Result<u64> {
        self.require_ergodic()?;
        if !(eps > S::zero() && eps <= S::one()) {
            return Err(Error::InvalidParams(format!(
                "mixing-time threshold must lie in (0, 1], got {eps}"
            )));
        }
        let threshold = eps + S::of(1e-9);
        let qualifies = |t: u64| -> Result<bool> { Ok(self.d_mix(t)? <= threshold) };
        if qualifies(0)? {
            return Ok(0);
        }
        let mut hi = 1u64;
        loop {
            if qualifies(hi)? {
                break;
            }
            if hi >= DEFAULT_STEP_CAP {
                return Err(Error::CapExceeded(DEFAULT_STEP_CAP));
            }
            hi = (hi * 2).min(DEFAULT_STEP_CAP);
        }
        // d_mix is non-increasing in t: bisect for the smallest qualifying t
        // in (lo, hi], where lo fails.
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if qualifies(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn default_mixing_time(&self) -> Result<u64> {
        self.mixing_time(S::of(0.25))
    }

    /// Eigenvalue bounds on the mixing time of a reversible ergodic chain:
    ///
    /// ```text
    /// |l2| / (1 - l*) * ln 2  <=  tau_mix  <=  1 / (1 - l*) * ln(4 / mu_min)
    /// ```
    ///
    /// with `l* = max(|l2|, |ln|)` over the eigenvalues `1 = l1 > l2 >= ...`
    /// of `P`. Eigenvalues are computed on the symmetrized matrix
    /// `D^(1/2) P D^(-1/2)` with `D = diag(mu)`, which has the same spectrum
    /// exactly when the chain is reversible.
    pub fn eigen_mixing_bounds(&self) -> Result<(S, S)> {
        self.require_ergodic()?;
        let mu = self.stationary_distribution()?;
        let n = self.n;
        // Detailed balance within 1e-9.
        for i in 0..n {
            for j in 0..n {
                let lhs = mu.get(i) * self.entry(i, j);
                let rhs = mu.get(j) * self.entry(j, i);
                if (lhs - rhs).abs() > S::of(1e-9) {
                    return Err(Error::NotReversible);
                }
            }
        }
        let mut sym = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = (mu.get(i) / mu.get(j)).sqrt() * self.entry(i, j);
            }
        }
        // Force exact symmetry before the eigensolve.
        for i in 0..n {
            for j in i + 1..n {
                let avg = (sym[i * n + j] + sym[j * n + i]) * S::of(0.5);
                sym[i * n + j] = avg;
                sym[j * n + i] = avg;
            }
        }
        let evals = linalg::symmetric_eigenvalues(&sym, n);
        let lambda_2 = if n >= 2 { evals[1] } else { S::zero() };
        let lambda_n = if n >= 2 { evals[n - 1] } else { S::zero() };
        let lambda_star = lambda_2.abs().max(lambda_n.abs());
        let gap = S::one() - lambda_star;
        let mu_min = mu
            .weights()
            .iter()
            .copied()
            .fold(S::infinity(), |m, v| m.min(v));
        let lower = lambda_2.abs() / gap * S::of(2.0).ln();
        let upper = (S::of(4.0) / mu_min).ln() / gap;
        Ok((lower, upper))
    }
}

fn identity<S: Scalar>(n: usize) -> Vec<S> {
    let mut m = vec![S::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = S::one();
    }
    m
}

/// Support adjacency: `p[i][j] > SUPPORT_EPS`.
fn support<S: Scalar>(p: &[S], n: usize) -> Vec<Vec<usize>> {
    let eps = S::of(SUPPORT_EPS);
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| p[i * n + j] > eps)
                .collect::<Vec<usize>>()
        })
        .collect()
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Irreducibility via reachability closure on the support graph: every state
/// reaches state 0 and is reachable from it.
fn is_irreducible<S: Scalar>(p: &[S], n: usize) -> bool {
    let adj = support(p, n);
    if !reachable(&adj, 0).iter().all(|&b| b) {
        return false;
    }
    let mut radj = vec![Vec::new(); n];
    for (u, outs) in adj.iter().enumerate() {
        for &v in outs {
            radj[v].push(u);
        }
    }
    reachable(&radj, 0).iter().all(|&b| b)
}

/// Aperiodicity of an irreducible chain: the period equals the gcd of
/// `dist(u) + 1 - dist(v)` over support edges `(u, v)`, where `dist` is the
/// BFS distance from state 0; this is the gcd of all closed-walk lengths
/// through state 0.
fn is_aperiodic<S: Scalar>(p: &[S], n: usize) -> bool {
    let adj = support(p, n);
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[0] = 0;
    queue.push_back(0);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for (u, outs) in adj.iter().enumerate() {
        if dist[u] == usize::MAX {
            continue;
        }
        for &v in outs {
            if dist[v] == usize::MAX {
                continue;
            }
            let diff = (dist[u] as i64 + 1 - dist[v] as i64).unsigned_abs();
            g = gcd(g, diff);
        }
    }
    g == 1
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Symmetric 2-state chain: `[[1-p, p], [p, 1-p]]` for `p` in `(0, 1)`.
pub fn two_state_chain<S: Scalar>(p: S) -> Result<FiniteChain<S>> {
    if !(p > S::zero() && p < S::one()) {
        return Err(Error::InvalidProbability(p.as_f64()));
    }
    FiniteChain::new(2, vec![S::one() - p, p, p, S::one() - p])
}

/// Time reversal of the winning-streak chain on `n >= 3` states, whose mixing
/// time is exactly `n - 1`:
///
/// ```text
/// P(1, i) = mu(i),   P(i, i-1) = 1 for 2 <= i <= n-1,
/// P(n, n) = P(n, n-1) = 1/2,
/// mu(i) = 2^-i (i < n),  mu(n) = 2^-(n-1)
/// ```
pub fn winning_streak_reversal<S: Scalar>(n: usize) -> Result<FiniteChain<S>> {
    if n < 3 {
        return Err(Error::InvalidSize(n));
    }
    let mu = winning_streak_stationary::<S>(n);
    let mut p = vec![S::zero(); n * n];
    p[..n].copy_from_slice(&mu);
    for i in 1..n - 1 {
        p[i * n + i - 1] = S::one();
    }
    let half = S::of(0.5);
    p[(n - 1) * n + n - 1] = half;
    p[(n - 1) * n + n - 2] = half;
    FiniteChain::new(n, p)
}

/// The closed-form stationary vector of [`winning_streak_reversal`].
pub fn winning_streak_stationary<S: Scalar>(n: usize) -> Vec<S> {
    (1..=n)
        .map(|i| S::of(0.5).powi(i.min(n - 1) as i32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ergodic_chain(n: usize, rng: &mut ChaCha8Rng) -> FiniteChain<f64> {
        // Strictly positive rows are always ergodic.
        let mut p = vec![0.0f64; n * n];
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v: f64 = rng.gen_range(0.05..1.0);
                p[i * n + j] = v;
                sum += v;
            }
            for j in 0..n {
                p[i * n + j] /= sum;
            }
        }
        FiniteChain::new(n, p).unwrap()
    }

    #[test]
    fn two_state_stationary_is_uniform() {
        let chain = two_state_chain(0.3f64).unwrap();
        let mu = chain.stationary_distribution().unwrap();
        assert!((mu.get(0) - 0.5).abs() < 1e-12);
        assert!((mu.get(1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn winning_streak_stationary_matches_construction() {
        let chain = winning_streak_reversal::<f64>(3).unwrap();
        assert_eq!(chain.row(0), &[0.5, 0.25, 0.25]);
        assert_eq!(chain.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(chain.row(2), &[0.0, 0.5, 0.5]);
        let mu = chain.stationary_distribution().unwrap();
        for (got, want) in mu.weights().iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn doubly_stochastic_chain_has_uniform_stationary() {
        // Circulant doubly-stochastic matrix with a self loop.
        let p = vec![0.5f64, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5];
        let chain = FiniteChain::new(3, p).unwrap();
        let mu = chain.stationary_distribution().unwrap();
        for &v in mu.weights() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn total_variation_examples() {
        let p = Distribution::new(vec![0.75f64, 0.25]).unwrap();
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        assert!((total_variation(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        let a = Distribution::new(vec![1.0, 0.0]).unwrap();
        let b = Distribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        let c = Distribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(matches!(
            total_variation(&a, &c),
            Err(Error::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn winning_streak_mixes_exactly_at_n_minus_1() {
        for n in [3usize, 5, 8] {
            let chain = winning_streak_reversal::<f64>(n).unwrap();
            let d_before = chain.d_mix(n as u64 - 2).unwrap();
            let d_after = chain.d_mix(n as u64 - 1).unwrap();
            assert!(d_before >= 0.25 - 1e-12, "n={n}: d_mix(n-2)={d_before}");
            assert!(d_after <= 1e-12, "n={n}: d_mix(n-1)={d_after}");
            assert_eq!(chain.default_mixing_time().unwrap(), n as u64 - 1);
        }
    }

    #[test]
    fn two_state_d_mix_matches_closed_form() {
        // Diagonalizing [[1-p, p], [p, 1-p]] gives d_mix(t) = (1-2p)^t / 2.
        for p in [0.05f64, 0.2, 0.45] {
            let chain = two_state_chain(p).unwrap();
            for t in 0..40u64 {
                let exact = 0.5 * (1.0 - 2.0 * p).powi(t as i32);
                let got = chain.d_mix(t).unwrap();
                assert!((got - exact).abs() < 1e-12, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn mixing_time_two_state_quarter() {
        let chain = two_state_chain(0.25f64).unwrap();
        assert_eq!(chain.mixing_time(0.25).unwrap(), 1);
    }

    #[test]
    fn mixing_time_threshold_one_is_zero() {
        let chain = two_state_chain(0.3f64).unwrap();
        assert_eq!(chain.mixing_time(1.0).unwrap(), 0);
        assert!(chain.mixing_time(0.0).is_err());
        assert!(chain.mixing_time(1.5).is_err());
    }

    #[test]
    fn d_mix_cap_is_enforced() {
        let chain = two_state_chain(0.3f64).unwrap();
        assert!(matches!(
            chain.d_mix_with_cap(11, 10),
            Err(Error::CapExceeded(10))
        ));
    }

    #[test]
    fn non_ergodic_chains_are_rejected_by_analysis() {
        // Periodic two-state flip chain.
        let chain = FiniteChain::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(!chain.is_ergodic());
        assert!(matches!(
            chain.stationary_distribution(),
            Err(Error::NonErgodic)
        ));
        assert!(matches!(chain.d_mix(3), Err(Error::NonErgodic)));
        // Reducible chain: two absorbing states.
        let chain = FiniteChain::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(!chain.is_ergodic());
    }

    #[test]
    fn two_state_boundary_probabilities_rejected() {
        assert!(matches!(
            two_state_chain(0.0f64),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(
            two_state_chain(1.0f64),
            Err(Error::InvalidProbability(_))
        ));
        let chain = two_state_chain(0.5f64).unwrap();
        assert_eq!(chain.row(0), &[0.5, 0.5]);
        assert_eq!(chain.row(1), &[0.5, 0.5]);
        let chain = two_state_chain(1e-4f64).unwrap();
        assert_eq!(chain.entry(0, 1), 1e-4);
        assert_eq!(chain.entry(1, 0), 1e-4);
    }

    #[test]
    fn winning_streak_powers_reach_stationarity_exactly() {
        for n in [3usize, 5, 8] {
            let chain = winning_streak_reversal::<f64>(n).unwrap();
            let mu = winning_streak_stationary::<f64>(n);
            let pt = chain.matrix_power(n as u64 - 1);
            for z in 0..n {
                for j in 0..n {
                    assert!(
                        (pt[z * n + j] - mu[j]).abs() < 1e-12,
                        "n={n} row {z} col {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn winning_streak_size_validation() {
        assert!(matches!(
            winning_streak_reversal::<f64>(2),
            Err(Error::InvalidSize(2))
        ));
    }

    #[test]
    fn eigen_bounds_two_state() {
        // lambda_2 = 1 - 2p; for p = 1e-4 the bounds evaluate to
        // (1-2p)/(2p) ln 2 = 3465.0 and ln 8 / (2p) = 10397.2.
        let chain = two_state_chain(1e-4f64).unwrap();
        let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
        assert!((lower - 3465.0).abs() < 0.5, "lower = {lower}");
        assert!((upper - 10397.2).abs() < 0.5, "upper = {upper}");
        // p = 0.5 gives lambda_2 = 0, hence a vanishing lower bound.
        let chain = two_state_chain(0.5f64).unwrap();
        let (lower, _) = chain.eigen_mixing_bounds().unwrap();
        assert!(lower.abs() < 1e-12);
    }

    #[test]
    fn eigen_bounds_reject_irreversible_chain() {
        // A 3-cycle with asymmetric probabilities is ergodic but not
        // reversible.
        let p = vec![0.1, 0.8, 0.1, 0.1, 0.1, 0.8, 0.8, 0.1, 0.1];
        let chain = FiniteChain::new(3, p).unwrap();
        assert!(chain.is_ergodic());
        assert!(matches!(
            chain.eigen_mixing_bounds(),
            Err(Error::NotReversible)
        ));
    }

    #[test]
    fn two_state_second_eigenvalue_is_one_minus_2p() {
        for p in [0.3f64, 0.1, 0.01, 1e-4] {
            let chain = two_state_chain(p).unwrap();
            let evals = linalg::symmetric_eigenvalues(chain.matrix(), 2);
            assert!((evals[0] - 1.0).abs() < 1e-12);
            assert!((evals[1] - (1.0 - 2.0 * p)).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_bounds_sandwich_exact_mixing_time() {
        for p in [0.3f64, 0.1, 0.01, 0.001] {
            let chain = two_state_chain(p).unwrap();
            let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
            let tau = chain.default_mixing_time().unwrap() as f64;
            assert!(lower <= tau && tau <= upper, "p={p}: {lower} {tau} {upper}");
        }
    }

    #[test]
    fn d_mix_non_increasing_and_geometric_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let chain = random_ergodic_chain(4, &mut rng);
            let mut prev = f64::INFINITY;
            for t in 0..=50u64 {
                let d = chain.d_mix(t).unwrap();
                assert!(d <= prev + 1e-12);
                prev = d;
            }
            let tau = chain.default_mixing_time().unwrap();
            for ell in 1..=4u64 {
                let d = chain.d_mix(ell * tau).unwrap();
                assert!(
                    d <= 0.5f64.powi(ell as i32) + 1e-9,
                    "d_mix({ell} tau) = {d}"
                );
            }
        }
    }

    #[test]
    fn stationary_fixed_point_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 5, 9] {
            let chain = random_ergodic_chain(n, &mut rng);
            let mu = chain.stationary_distribution().unwrap();
            let mut mu_p = vec![0.0f64; n];
            linalg::mat_t_vec(chain.matrix(), n, n, mu.weights(), &mut mu_p);
            let resid: f64 = mu_p
                .iter()
                .zip(mu.weights())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(resid < 1e-11, "residual {resid}");
        }
    }

    #[test]
    fn matrix_file_round_trip() {
        let text = "2\n0.7 0.3\n0.3 0.7\n";
        let chain = FiniteChain::<f64>::from_reader(text.as_bytes()).unwrap();
        assert_eq!(chain.n_states(), 2);
        assert_eq!(chain.entry(0, 1), 0.3);
        assert!(chain.is_ergodic());
        let bad = "2\n0.7 0.4\n0.3 0.7\n";
        assert!(FiniteChain::<f64>::from_reader(bad.as_bytes()).is_err());
    }

    mod tv_props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tv_is_a_bounded_metric(
                raw_p in proptest::collection::vec(1e-3f64..1.0, 4),
                raw_q in proptest::collection::vec(1e-3f64..1.0, 4),
            ) {
                let to_dist = |raw: &[f64]| {
                    let sum: f64 = raw.iter().sum();
                    Distribution::new(raw.iter().map(|v| v / sum).collect()).unwrap()
                };
                let p = to_dist(&raw_p);
                let q = to_dist(&raw_q);
                let d = total_variation(&p, &q).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
                let d_rev = total_variation(&q, &p).unwrap();
                prop_assert!((d - d_rev).abs() < 1e-15);
                prop_assert!(total_variation(&p, &p).unwrap() < 1e-15);
            }
        }
    }
}
