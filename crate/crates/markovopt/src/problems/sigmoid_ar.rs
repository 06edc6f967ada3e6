//! Non-convex sigmoid regression over an AR(1) feature process.
//!
//! Features follow `xi_t = A xi_{t-1} + n_t` with `n_t ~ N(0, (1/d) I)` and a
//! RandBiMod coefficient matrix (symmetric, half the spectrum at `rho`, half
//! at `rho/3`). Labels are the sign of `u . xi` for a fixed random unit
//! direction `u`, kept with probability 0.8 and flipped otherwise. The loss
//! is `l(w; xi, y) = 1/2 (sigma(w . xi) - y)^2`.
//!
//! The population objective has no closed form; [`MonteCarloObjective`]
//! freezes one long stationary trajectory and evaluates the empirical mean
//! loss (and the squared norm of the empirical mean gradient) against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chains::{Ar1Process, MarkovStream};
use crate::error::{Error, Result};
use crate::estimators::GradientOracle;
use crate::linalg;
use crate::scalar::Scalar;

/// `A = U diag(rho, ..., rho, rho/3, ..., rho/3) U^T` with Haar-random `U`.
pub fn randbimod<S: Scalar, R: Rng + ?Sized>(d: usize, rho: S, rng: &mut R) -> Result<Vec<S>> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    if !(rho > S::zero() && rho < S::one()) {
        return Err(Error::InvalidParams(format!(
            "RandBiMod spectral parameter must lie in (0, 1), got {rho}"
        )));
    }
    let u = linalg::haar_orthogonal::<S, R>(d, rng);
    let third = rho / S::of(3.0);
    // A = (U Lambda) U^T, assembled column by column.
    let mut a = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            let mut v = S::zero();
            for k in 0..d {
                let lambda = if k < d / 2 { rho } else { third };
                v += u[i * d + k] * lambda * u[j * d + k];
            }
            a[i * d + j] = v;
        }
    }
    // Symmetrize away the last rounding bit.
    for i in 0..d {
        for j in i + 1..d {
            let avg = (a[i * d + j] + a[j * d + i]) * S::of(0.5);
            a[i * d + j] = avg;
            a[j * d + i] = avg;
        }
    }
    Ok(a)
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Loss and gradient of `1/2 (sigma(w . xi) - y)^2` at one observation.
fn sigmoid_loss_grad_into<S: Scalar>(w: &[S], xi: &[S], label: bool, grad: &mut [S]) -> S {
    let y = if label { S::one() } else { S::zero() };
    let z = linalg::dot(w, xi);
    let s = sigmoid(z);
    let err = s - y;
    let factor = err * s * (S::one() - s);
    for (g, &x) in grad.iter_mut().zip(xi) {
        *g = factor * x;
    }
    err * err * S::of(0.5)
}

/// One labeled observation from the AR(1) process.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidSample<S> {
    pub features: Vec<S>,
    pub label: bool,
}

/// Problem instance: RandBiMod dynamics plus the labeling direction.
#[derive(Debug, Clone)]
pub struct SigmoidArInstance<S> {
    dim: usize,
    rho: S,
    a: Vec<S>,
    u: Vec<S>,
    flip_prob: S,
}

impl<S: Scalar> SigmoidArInstance<S> {
    pub fn generate(dim: usize, rho: S, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = randbimod(dim, rho, &mut rng)?;
        let mut u: Vec<S> = (0..dim).map(|_| S::standard_normal(&mut rng)).collect();
        let n = linalg::norm(&u);
        linalg::scale(&mut u, S::one() / n);
        Ok(Self {
            dim,
            rho,
            a,
            u,
            flip_prob: S::of(0.2),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> S {
        self.rho
    }

    pub fn matrix(&self) -> &[S] {
        &self.a
    }

    pub fn direction(&self) -> &[S] {
        &self.u
    }

    /// Label rule: threshold bit of `u . xi`, kept w.p. 0.8, flipped w.p. 0.2.
    pub fn label<R: Rng + ?Sized>(&self, xi: &[S], rng: &mut R) -> bool {
        let clean = linalg::dot(&self.u, xi) > S::zero();
        if S::unit_uniform(rng) < self.flip_prob {
            !clean
        } else {
            clean
        }
    }

    pub fn loss_gradient(&self, w: &[S], xi: &[S], label: bool) -> (S, Vec<S>) {
        let mut grad = vec![S::zero(); self.dim];
        let loss = sigmoid_loss_grad_into(w, xi, label, &mut grad);
        (loss, grad)
    }

    /// Fresh AR(1) process with the default `1/d` noise variance, started at
    /// the zero vector.
    pub fn ar_process(&self) -> Result<Ar1Process<S>> {
        Ar1Process::with_default_noise(self.dim, self.a.clone())
    }

    pub fn stream(&self, seed: u64) -> Result<SigmoidArStream<S>> {
        Ok(SigmoidArStream {
            process: self.ar_process()?,
            u: self.u.clone(),
            flip_prob: self.flip_prob,
            rng: ChaCha8Rng::seed_from_u64(seed),
            emitted: 0,
        })
    }
}

impl<S: Scalar> GradientOracle<S> for SigmoidArInstance<S> {
    type Obs = SigmoidSample<S>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&self, w: &[S], obs: &SigmoidSample<S>, out: &mut [S]) {
        sigmoid_loss_grad_into(w, &obs.features, obs.label, out);
    }
}

/// Stream of labeled AR(1) observations; one RNG drives both the innovation
/// noise and the label flips, in that fixed order per emission.
#[derive(Debug, Clone)]
pub struct SigmoidArStream<S> {
    process: Ar1Process<S>,
    u: Vec<S>,
    flip_prob: S,
    rng: ChaCha8Rng,
    emitted: u64,
}

impl<S: Scalar> MarkovStream for SigmoidArStream<S> {
    type Obs = SigmoidSample<S>;

    fn next_obs(&mut self) -> SigmoidSample<S> {
        self.process.step(&mut self.rng);
        let features = self.process.state().to_vec();
        let clean = linalg::dot(&self.u, &features) > S::zero();
        let label = if S::unit_uniform(&mut self.rng) < self.flip_prob {
            !clean
        } else {
            clean
        };
        self.emitted += 1;
        SigmoidSample { features, label }
    }

    fn samples_emitted(&self) -> u64 {
        self.emitted
    }
}

/// Frozen Monte Carlo evaluation set for the population objective: a long
/// stationary trajectory (burn-in discarded) shared by every method and seed
/// of an experiment.
#[derive(Debug, Clone)]
pub struct MonteCarloObjective<S> {
    features: Vec<S>,
    labels: Vec<bool>,
    count: usize,
    dim: usize,
}

impl<S: Scalar> MonteCarloObjective<S> {
    pub fn new(
        instance: &SigmoidArInstance<S>,
        seed: u64,
        burn_in: usize,
        samples: usize,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidSize(0));
        }
        let mut stream = instance.stream(seed)?;
        for _ in 0..burn_in {
            stream.next_obs();
        }
        let dim = instance.dim();
        let mut features = Vec::with_capacity(samples * dim);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let obs = stream.next_obs();
            features.extend_from_slice(&obs.features);
            labels.push(obs.label);
        }
        Ok(Self {
            features,
            labels,
            count: samples,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Empirical mean loss over the frozen trajectory.
    pub fn objective(&self, w: &[S]) -> S {
        let mut total = S::zero();
        let mut grad = vec![S::zero(); self.dim];
        for i in 0..self.count {
            let xi = &self.features[i * self.dim..(i + 1) * self.dim];
            total += sigmoid_loss_grad_into(w, xi, self.labels[i], &mut grad);
        }
        total / S::of(self.count as f64)
    }

    /// Squared norm of the empirical mean gradient over the frozen
    /// trajectory; the stationarity proxy recorded alongside the objective.
    pub fn gradient_norm_sq(&self, w: &[S]) -> S {
        let mut mean = vec![S::zero(); self.dim];
        let mut grad = vec![S::zero(); self.dim];
        for i in 0..self.count {
            let xi = &self.features[i * self.dim..(i + 1) * self.dim];
            sigmoid_loss_grad_into(w, xi, self.labels[i], &mut grad);
            linalg::axpy(S::one(), &grad, &mut mean);
        }
        linalg::scale(&mut mean, S::one() / S::of(self.count as f64));
        linalg::norm_sq(&mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn randbimod_spectrum_and_symmetry() {
        let d = 10;
        let rho = 0.99f64;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = randbimod(d, rho, &mut rng).unwrap();
        for i in 0..d {
            for j in 0..d {
                assert!((a[i * d + j] - a[j * d + i]).abs() < 1e-12);
            }
        }
        let evals = linalg::symmetric_eigenvalues(&a, d);
        for (k, &ev) in evals.iter().enumerate() {
            let want = if k < d / 2 { rho } else { rho / 3.0 };
            assert!((ev - want).abs() < 1e-9, "eigenvalue {k}: {ev} vs {want}");
        }
        assert!(matches!(
            randbimod::<f64, _>(7, 0.9, &mut rng),
            Err(Error::OddDimension(7))
        ));
    }

    #[test]
    fn randbimod_is_a_valid_ar_coefficient() {
        let inst = SigmoidArInstance::<f64>::generate(10, 0.99, 12).unwrap();
        // Spectral radius rho < 1: construction must pass.
        let process = inst.ar_process().unwrap();
        assert_eq!(process.dim(), 10);
        assert!((inst.rho() - 0.99).abs() < 1e-15);
        assert!((linalg::norm(inst.direction()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_and_gradient_at_zero_weight() {
        let inst = SigmoidArInstance::<f64>::generate(4, 0.9, 1).unwrap();
        let xi = vec![0.4, -1.0, 2.0, 0.1];
        let (loss, grad) = inst.loss_gradient(&[0.0; 4], &xi, false);
        // sigma(0) = 1/2, sigma'(0) = 1/4: loss 1/8, gradient xi / 8.
        assert!((loss - 0.125).abs() < 1e-15);
        for (g, x) in grad.iter().zip(&xi) {
            assert!((g - 0.125 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_features_give_zero_gradient() {
        let inst = SigmoidArInstance::<f64>::generate(4, 0.9, 2).unwrap();
        for label in [false, true] {
            let (loss, grad) = inst.loss_gradient(&[0.3, -0.2, 0.9, 1.1], &[0.0; 4], label);
            assert_eq!(grad, vec![0.0; 4]);
            let y = if label { 1.0 } else { 0.0 };
            assert!((loss - 0.5 * (0.5 - y) * (0.5 - y)).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = SigmoidArInstance::<f64>::generate(6, 0.9, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-6;
        for _ in 0..20 {
            let w: Vec<f64> = (0..6)
                .map(|_| 0.5 * f64::standard_normal(&mut rng))
                .collect();
            let xi: Vec<f64> = (0..6).map(|_| f64::standard_normal(&mut rng)).collect();
            let label = rng.gen_bool(0.5);
            let (_, grad) = inst.loss_gradient(&w, &xi, label);
            for k in 0..6 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[k] += h;
                wm[k] -= h;
                let (lp, _) = inst.loss_gradient(&wp, &xi, label);
                let (lm, _) = inst.loss_gradient(&wm, &xi, label);
                let fd = (lp - lm) / (2.0 * h);
                let denom = linalg::norm(&grad).max(1e-9);
                assert!(((grad[k] - fd) / denom).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn label_flip_frequency_matches_spec() {
        let inst = SigmoidArInstance::<f64>::generate(4, 0.9, 3).unwrap();
        // Fixed feature vector with u . xi > 0.
        let mut xi = inst.direction().to_vec();
        linalg::scale(&mut xi, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let draws = 100_000u64;
        let mut ones = 0u64;
        for _ in 0..draws {
            if inst.label(&xi, &mut rng) {
                ones += 1;
            }
        }
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.8).abs() < 0.005, "kept-label frequency {freq}");
    }

    #[test]
    fn monte_carlo_objective_at_zero_is_exactly_one_eighth() {
        let inst = SigmoidArInstance::<f64>::generate(6, 0.9, 10).unwrap();
        let mc = MonteCarloObjective::new(&inst, 99, 100, 500).unwrap();
        // l(0; xi, y) = 1/2 (1/2 - y)^2 = 1/8 for both labels.
        assert!((mc.objective(&[0.0; 6]) - 0.125).abs() < 1e-15);
        assert!(mc.gradient_norm_sq(&[0.0; 6]).is_finite());
        assert_eq!(mc.len(), 500);
    }

    #[test]
    fn stream_counts_and_is_deterministic() {
        let inst = SigmoidArInstance::<f64>::generate(4, 0.9, 5).unwrap();
        let mut a = inst.stream(123).unwrap();
        let mut b = inst.stream(123).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_obs(), b.next_obs());
        }
        assert_eq!(a.samples_emitted(), 50);
    }
}
