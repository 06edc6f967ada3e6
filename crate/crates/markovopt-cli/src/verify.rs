//! Invariant suites runnable from the CLI: every check runs with fixed seeds,
//! measures its slack, and reports pass/fail. The `verify` subcommand exits
//! nonzero when any check fails.

use markovopt::chains::{
    two_state_chain, winning_streak_reversal, winning_streak_stationary, Ar1Process, ChainStream,
    FiniteChain, MarkovStream,
};
use markovopt::estimators::{level_decomposition, mlmc_gradient, LevelDistribution};
use markovopt::linalg;
use markovopt::optim::{AdaGradState, Domain};
use markovopt::problems::{randbimod, Mrp, RegressionInstance, SigmoidArInstance, Transition};
use markovopt::scalar::Scalar;
use markovopt::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{HarnessError, Result};

/// Outcome of one named invariant check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn random_ergodic_chain(n: usize, rng: &mut ChaCha8Rng) -> FiniteChain<Real> {
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
    FiniteChain::new(n, p).expect("strictly positive rows are stochastic and ergodic")
}

// ---------------------------------------------------------------------------
// chains suite

pub fn check_winning_streak() -> Check {
    let mut worst_row_err = 0.0f64;
    let mut passed = true;
    let mut details = Vec::new();
    for n in [3usize, 5, 8] {
        let chain = winning_streak_reversal::<Real>(n).expect("n >= 3");
        let mu = winning_streak_stationary::<Real>(n);
        let pt = chain.matrix_power(n as u64 - 1);
        for z in 0..n {
            for j in 0..n {
                worst_row_err = worst_row_err.max((pt[z * n + j] - mu[j]).abs());
            }
        }
        let d_before = chain.d_mix(n as u64 - 2).unwrap();
        let d_after = chain.d_mix(n as u64 - 1).unwrap();
        let tau = chain.default_mixing_time().unwrap();
        passed &= worst_row_err < 1e-12
            && d_before >= 0.25 - 1e-12
            && d_after < 1e-12
            && tau == n as u64 - 1;
        details.push(format!(
            "n={n}: d_mix(n-2)={d_before:.3}, d_mix(n-1)={d_after:.1e}, tau={tau}"
        ));
    }
    details.push(format!("max |P^(n-1) - mu| = {worst_row_err:.1e}"));
    Check::new(
        "chains::winning_streak_exactness",
        passed,
        details.join("; "),
    )
}

pub fn check_mixing_sandwich() -> Check {
    let mut passed = true;
    let mut details = Vec::new();
    for p in [0.3f64, 0.1, 0.01, 0.001] {
        let chain = two_state_chain(p).unwrap();
        let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
        let tau = chain.default_mixing_time().unwrap() as f64;
        passed &= lower <= tau && tau <= upper;
        details.push(format!("p={p}: {lower:.2} <= {tau} <= {upper:.2}"));
    }
    Check::new("chains::eigen_bounds_sandwich", passed, details.join("; "))
}

pub fn check_eigen_bounds_values() -> Check {
    let chain = two_state_chain(1e-4f64).unwrap();
    let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
    let passed = (lower - 3465.0).abs() < 0.5 && (upper - 10397.2).abs() < 0.5;
    Check::new(
        "chains::eigen_bounds_p1e-4",
        passed,
        format!("bounds ({lower:.1}, {upper:.1}) vs reference (3465.0, 10397.2)"),
    )
}

pub fn check_d_mix_monotone_and_decay() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut passed = true;
    let mut worst_violation = 0.0f64;
    for _ in 0..3 {
        let chain = random_ergodic_chain(4, &mut rng);
        let mut prev = f64::INFINITY;
        for t in 0..=50u64 {
            let d = chain.d_mix(t).unwrap();
            worst_violation = worst_violation.max(d - prev);
            passed &= d <= prev + 1e-12;
            prev = d;
        }
        let tau = chain.default_mixing_time().unwrap();
        for ell in 1..=4u64 {
            let d = chain.d_mix(ell * tau).unwrap();
            passed &= d <= 0.5f64.powi(ell as i32) + 1e-9;
        }
    }
    Check::new(
        "chains::d_mix_monotone_and_geometric_decay",
        passed,
        format!("worst monotonicity violation {worst_violation:.1e}"),
    )
}

pub fn check_stationary_fixed_point() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
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
        worst = worst.max(resid);
    }
    Check::new(
        "chains::stationary_fixed_point",
        worst < 1e-11,
        format!("max |mu P - mu|_1 = {worst:.1e}"),
    )
}

pub fn check_two_state_d_mix_closed_form() -> Check {
    let mut worst = 0.0f64;
    for p in [0.05f64, 0.2, 0.45] {
        let chain = two_state_chain(p).unwrap();
        for t in 0..40u64 {
            let exact = 0.5 * (1.0 - 2.0 * p).powi(t as i32);
            worst = worst.max((chain.d_mix(t).unwrap() - exact).abs());
        }
    }
    Check::new(
        "chains::two_state_closed_form",
        worst < 1e-12,
        format!("max |d_mix - (1-2p)^t/2| = {worst:.1e}"),
    )
}

pub fn check_stream_frequency() -> Check {
    let chain = two_state_chain(0.3f64).unwrap();
    let mut stream = ChainStream::new(chain, 0, 12345).unwrap();
    let mut prev = 0usize;
    let mut flips = 0u64;
    let n = 1_000_000u64;
    for _ in 0..n {
        let next = stream.next_obs();
        if next != prev {
            flips += 1;
        }
        prev = next;
    }
    let freq = flips as f64 / n as f64;
    Check::new(
        "chains::stream_transition_frequency",
        (freq - 0.3).abs() < 0.002,
        format!("empirical 0.3-chain flip frequency {freq:.4}"),
    )
}

pub fn check_ar1_stationary_covariance() -> Check {
    let d = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q: Vec<f64> = linalg::haar_orthogonal(d, &mut rng);
    let a: Vec<f64> = q.iter().map(|v| 0.7 * v).collect();
    let mut process = Ar1Process::new(d, a, 1.0 / d as f64).unwrap();
    let sigma = process.stationary_covariance();
    let mut emp = vec![0.0f64; d * d];
    for _ in 0..1_000 {
        process.step(&mut rng);
    }
    let samples = 1_000_000usize;
    for _ in 0..samples {
        process.step(&mut rng);
        let x = process.state();
        for i in 0..d {
            for j in 0..d {
                emp[i * d + j] += x[i] * x[j];
            }
        }
    }
    for v in emp.iter_mut() {
        *v /= samples as f64;
    }
    let diff: f64 = emp
        .iter()
        .zip(&sigma)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = diff / scale;
    Check::new(
        "chains::ar1_covariance_fixed_point",
        rel < 0.1,
        format!("relative Frobenius error {rel:.3} over {samples} samples"),
    )
}

// ---------------------------------------------------------------------------
// estimators suite

/// Shared by the acceptance suite: max telescoping residual over `trials`
/// random (stream, w) pairs of the regression oracle.
pub fn telescoping_residual(trials: u64) -> f64 {
    let inst = RegressionInstance::<Real>::generate(12, 6, 1e-3, 100);
    let chain = two_state_chain(0.2f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let dists = [
        LevelDistribution::full_geometric(16).unwrap(),
        LevelDistribution::truncated_geometric(4).unwrap(),
    ];
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut stream =
            ChainStream::new(chain.clone(), (trial % 2) as usize, 200 + trial).unwrap();
        let w: Vec<f64> = (0..6)
            .map(|_| 2.0 * f64::standard_normal(&mut rng))
            .collect();
        let samples: Vec<usize> = (0..16).map(|_| stream.next_obs()).collect();
        let levels = level_decomposition(&inst, &w, &samples).unwrap();
        for dist in &dists {
            let j_max = dist.j_max() as usize;
            let mut acc = levels[0].clone();
            for j in 1..=j_max {
                let weight: f64 =
                    dist.level_probability::<f64>(j as u32) * dist.compensator::<f64>(j as u32);
                for k in 0..acc.len() {
                    acc[k] += weight * (levels[j][k] - levels[j - 1][k]);
                }
            }
            for k in 0..acc.len() {
                worst = worst.max((acc[k] - levels[j_max][k]).abs());
            }
        }
    }
    worst
}

pub fn check_telescoping() -> Check {
    let worst = telescoping_residual(100);
    Check::new(
        "estimators::telescoping_identity",
        worst < 1e-10,
        format!("max residual {worst:.1e} over 100 pairs"),
    )
}

/// Shared by the acceptance suite: Monte Carlo mean of samples consumed per
/// MLMC draw at horizon 8.
pub fn mean_sample_count_t8(draws: u64) -> f64 {
    let inst = RegressionInstance::<Real>::generate(4, 2, 1e-3, 55);
    let chain = two_state_chain(0.25f64).unwrap();
    let mut stream = ChainStream::new(chain, 0, 56).unwrap();
    let dist = LevelDistribution::full_geometric(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    let w = vec![0.1f64, -0.2];
    let mut total = 0u64;
    for _ in 0..draws {
        total += mlmc_gradient(&inst, &w, &mut stream, &dist, &mut rng).samples_consumed;
    }
    total as f64 / draws as f64
}

pub fn check_sample_count() -> Check {
    let mean = mean_sample_count_t8(100_000);
    let analytic = LevelDistribution::full_geometric(1 << 20)
        .unwrap()
        .expected_sample_count::<f64>();
    let exact = analytic == 20.0 + 0.5f64.powi(20);
    Check::new(
        "estimators::expected_sample_count",
        (mean - 3.125).abs() < 0.05 && exact,
        format!("MC mean {mean:.4} vs 3.125; analytic T=2^20 exact: {exact}"),
    )
}

pub fn check_level_distribution() -> Check {
    let k5 = LevelDistribution::truncated_geometric(5).unwrap();
    let p1: f64 = k5.level_probability(1);
    let total: f64 = (1..=5).map(|j| k5.level_probability::<f64>(j)).sum();
    let full = LevelDistribution::full_geometric(1 << 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 1_000_000u64;
    let mut count3 = 0u64;
    for _ in 0..draws {
        if full.draw_level(&mut rng) == 3 {
            count3 += 1;
        }
    }
    let freq = count3 as f64 / draws as f64;
    let passed = (p1 - 16.0 / 31.0).abs() < 1e-15
        && (total - 1.0).abs() < 1e-15
        && (freq - 0.125).abs() < 0.002;
    Check::new(
        "estimators::level_distribution",
        passed,
        format!("P(J=1|K=5)={p1:.6}, sum={total:.1}, freq(J=3)={freq:.4}"),
    )
}

pub fn check_bias_decay() -> Check {
    let inst = RegressionInstance::<Real>::generate(50, 20, 1e-3, 7);
    let chain = two_state_chain(0.01f64).unwrap();
    let mut wrng = ChaCha8Rng::seed_from_u64(8);
    let w: Vec<f64> = (0..20).map(|_| f64::standard_normal(&mut wrng)).collect();
    let mut exact = vec![0.0f64; 20];
    inst.population_gradient(&w, &mut exact);
    let draws = 10_000u64;
    let mut errors = Vec::new();
    for (case, horizon) in [(0u64, 1u64 << 4), (1, 1 << 8), (2, 1 << 12)] {
        let dist = LevelDistribution::full_geometric(horizon).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9 + case);
        let mut mean = vec![0.0f64; 20];
        for d in 0..draws {
            let mut stream = ChainStream::new(chain.clone(), 0, 0x5000 + case * draws + d).unwrap();
            let est = mlmc_gradient(&inst, &w, &mut stream, &dist, &mut rng);
            linalg::axpy(1.0 / draws as f64, &est.gradient, &mut mean);
        }
        let mut diff = mean;
        linalg::axpy(-1.0, &exact, &mut diff);
        errors.push(linalg::norm(&diff));
    }
    Check::new(
        "estimators::bias_decay_in_horizon",
        errors[0] > errors[1] && errors[1] > errors[2],
        format!(
            "|mean - grad F| at T=2^4,2^8,2^12: {:.3}, {:.3}, {:.3}",
            errors[0], errors[1], errors[2]
        ),
    )
}

pub fn check_second_moment_monotonicity() -> Check {
    let inst = RegressionInstance::<Real>::generate(50, 20, 1e-3, 11);
    let mut wrng = ChaCha8Rng::seed_from_u64(12);
    let w: Vec<f64> = (0..20).map(|_| f64::standard_normal(&mut wrng)).collect();
    let dist = LevelDistribution::full_geometric(1 << 12).unwrap();
    let draws = 10_000u64;
    let mut moments = Vec::new();
    for p in [0.1f64, 0.01, 0.001] {
        let chain = two_state_chain(p).unwrap();
        let mut stream = ChainStream::new(chain, 0, 900).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(901);
        let mut total = 0.0f64;
        for _ in 0..draws {
            let est = mlmc_gradient(&inst, &w, &mut stream, &dist, &mut rng);
            total += linalg::norm_sq(&est.gradient);
        }
        moments.push(total / draws as f64);
    }
    Check::new(
        "estimators::second_moment_monotone_in_mixing_time",
        moments[0] <= moments[1] && moments[1] <= moments[2],
        format!(
            "E||g||^2 at p=0.1,0.01,0.001: {:.1}, {:.1}, {:.1}",
            moments[0], moments[1], moments[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// optim suite

/// Shared by the acceptance suite: worst regret slack (lhs - rhs, negative
/// is good) over random gradient sequences and comparator points.
pub fn regret_worst_slack(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let dim = 5;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let radius: f64 = rng.gen_range(0.1..3.0);
        let diameter = 2.0 * radius;
        let dom = Domain::l2_ball(radius).unwrap();
        let t_len = rng.gen_range(1usize..60);
        let mut st = AdaGradState::new(diameter / 2.0f64.sqrt()).unwrap();
        let mut w = vec![0.0f64; dim];
        let mut iterates = Vec::new();
        let mut grads = Vec::new();
        for _ in 0..t_len {
            let scale: f64 = rng.gen_range(0.0..4.0);
            let mut g: Vec<f64> = (0..dim).map(|_| f64::standard_normal(&mut rng)).collect();
            linalg::scale(&mut g, scale);
            iterates.push(w.clone());
            st.step_in_place(&mut w, &g, &dom);
            grads.push(g);
        }
        let sum_sq: f64 = grads.iter().map(|g| linalg::norm_sq(g)).sum();
        let rhs = diameter * (2.0 * sum_sq).sqrt();
        for _ in 0..20 {
            let mut u: Vec<f64> = (0..dim).map(|_| f64::standard_normal(&mut rng)).collect();
            let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
            let n = linalg::norm(&u);
            linalg::scale(&mut u, r / n);
            let lhs: f64 = iterates
                .iter()
                .zip(&grads)
                .map(|(wt, g)| {
                    g.iter()
                        .zip(wt.iter().zip(&u))
                        .map(|(gi, (wi, ui))| gi * (wi - ui))
                        .sum::<f64>()
                })
                .sum();
            worst = worst.max(lhs - rhs);
        }
    }
    worst
}

/// Shared by the acceptance suite: worst Auer-Gentile slack over random
/// non-negative sequences.
pub fn auer_gentile_worst_slack(instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let n = rng.gen_range(1usize..100);
        let a: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.0..5.0)
                }
            })
            .collect();
        let mut prefix = 0.0;
        let mut lhs = 0.0;
        for &ai in &a {
            prefix += ai;
            if prefix > 0.0 {
                lhs += ai / prefix.sqrt();
            }
        }
        worst = worst.max(lhs - 2.0 * prefix.sqrt());
    }
    worst
}

pub fn check_regret_inequality() -> Check {
    let worst = regret_worst_slack(200);
    Check::new(
        "optim::adagrad_regret_inequality",
        worst <= 1e-9,
        format!("worst lhs - rhs = {worst:.3e} over 200 x 20 instances"),
    )
}

pub fn check_auer_gentile() -> Check {
    let worst = auer_gentile_worst_slack(200);
    Check::new(
        "optim::auer_gentile_inequality",
        worst <= 1e-9,
        format!("worst lhs - rhs = {worst:.3e} over 200 sequences"),
    )
}

pub fn check_eta_monotone_and_projection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dom = Domain::l2_ball(1.0f64).unwrap();
    let mut st = AdaGradState::new(0.5f64).unwrap();
    let mut w = vec![0.0f64; 3];
    let mut prev = f64::INFINITY;
    let mut passed = true;
    for _ in 0..200 {
        let g: Vec<f64> = (0..3).map(|_| f64::standard_normal(&mut rng)).collect();
        st.step_in_place(&mut w, &g, &dom);
        let eta = st.eta().unwrap();
        passed &= eta <= prev + 1e-15;
        prev = eta;
    }
    for _ in 0..500 {
        let x: Vec<f64> = (0..3)
            .map(|_| 4.0 * f64::standard_normal(&mut rng))
            .collect();
        let y: Vec<f64> = (0..3)
            .map(|_| 4.0 * f64::standard_normal(&mut rng))
            .collect();
        let px = dom.project(&x);
        let py = dom.project(&y);
        passed &= linalg::norm(&px) <= 1.0 + 1e-12;
        let ppx = dom.project(&px);
        passed &= px.iter().zip(&ppx).all(|(a, b)| (a - b).abs() < 1e-12);
        let before: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let after: f64 = px
            .iter()
            .zip(&py)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        passed &= after <= before + 1e-12;
    }
    Check::new(
        "optim::eta_monotone_and_projection_properties",
        passed,
        "step sizes non-increasing; projection idempotent, bounded, non-expansive".to_string(),
    )
}

pub fn check_run_determinism() -> Check {
    use crate::config::{Experiment, ExperimentConfig, Scale};
    let mut config = ExperimentConfig::preset(Experiment::Td, Scale::Desk);
    config.sample_budget = 5_000;
    config.record_every = 1_000;
    config.seeds = 2;
    let a = crate::runner::collect_rows(&config).unwrap();
    let b = crate::runner::collect_rows(&config).unwrap();
    Check::new(
        "optim::run_determinism",
        a == b,
        format!("{} rows reproduced bit-identically", a.len()),
    )
}

// ---------------------------------------------------------------------------
// problems suite

/// Shared by the acceptance suite: worst finite-difference relative error
/// over `probes` probes for each oracle (regression, sigmoid, TD loss with a
/// frozen bootstrap target).
pub fn finite_difference_worst_error(probes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let h = 1e-6;
    let mut worst = 0.0f64;

    let reg = RegressionInstance::<Real>::generate(8, 4, 1e-3, 5);
    for i in 0..probes {
        let state = i % 2;
        let w: Vec<f64> = (0..4).map(|_| f64::standard_normal(&mut rng)).collect();
        let (_, grad) = reg.loss_gradient(&w, state).unwrap();
        let mut err = 0.0f64;
        for k in 0..4 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let (lp, _) = reg.loss_gradient(&wp, state).unwrap();
            let (lm, _) = reg.loss_gradient(&wm, state).unwrap();
            err += (grad[k] - (lp - lm) / (2.0 * h)).powi(2);
        }
        worst = worst.max(err.sqrt() / linalg::norm(&grad).max(1e-12));
    }

    let sig = SigmoidArInstance::<Real>::generate(6, 0.9, 7).unwrap();
    for _ in 0..probes {
        let w: Vec<f64> = (0..6)
            .map(|_| 0.5 * f64::standard_normal(&mut rng))
            .collect();
        let xi: Vec<f64> = (0..6).map(|_| f64::standard_normal(&mut rng)).collect();
        let label = rng.gen_bool(0.5);
        let (_, grad) = sig.loss_gradient(&w, &xi, label);
        let mut err = 0.0f64;
        for k in 0..6 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let (lp, _) = sig.loss_gradient(&wp, &xi, label);
            let (lm, _) = sig.loss_gradient(&wm, &xi, label);
            err += (grad[k] - (lp - lm) / (2.0 * h)).powi(2);
        }
        worst = worst.max(err.sqrt() / linalg::norm(&grad).max(1e-9));
    }

    // Semi-gradient as a function of theta with the bootstrap target frozen
    // at the probe point: minus the gradient of the frozen TD loss
    // 1/2 (r + gamma phi(s')^T theta0 - phi(s)^T theta)^2.
    let mrp = Mrp::<Real>::random(5, 3, 0.9, 42).unwrap();
    let mut stream = mrp.stream(0, 43).unwrap();
    for _ in 0..probes {
        let z: Transition<Real> = stream.next_obs();
        let theta: Vec<f64> = (0..3)
            .map(|_| 2.0 * f64::standard_normal(&mut rng))
            .collect();
        let g = mrp.semi_gradient(&theta, &z).unwrap();
        let target = z.reward + mrp.gamma() * linalg::dot(mrp.feature_row(z.next_state), &theta);
        let frozen_loss = |t: &[f64]| -> f64 {
            let delta = target - linalg::dot(mrp.feature_row(z.state), t);
            0.5 * delta * delta
        };
        let mut err = 0.0f64;
        for k in 0..3 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (frozen_loss(&tp) - frozen_loss(&tm)) / (2.0 * h);
            err += (g[k] + fd).powi(2);
        }
        worst = worst.max(err.sqrt() / linalg::norm(&g).max(1e-9));
    }
    worst
}

pub fn check_finite_differences() -> Check {
    let worst = finite_difference_worst_error(50);
    Check::new(
        "problems::finite_difference_agreement",
        worst < 1e-5,
        format!("worst relative error {worst:.2e} over 50 probes per oracle"),
    )
}

/// Shared by the acceptance suite: worst slack of the steady-state TD
/// inequality over random MRPs and probes.
pub fn td_inequality_worst_slack(mrps: u64, probes_each: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..mrps {
        let mrp = Mrp::<Real>::random(5, 3, 0.9, seed).unwrap();
        for _ in 0..probes_each {
            let theta: Vec<f64> = (0..3)
                .map(|_| 4.0 * f64::standard_normal(&mut rng))
                .collect();
            let g = mrp.bar_g(&theta);
            let lhs: f64 = g
                .iter()
                .zip(mrp.theta_star().iter().zip(&theta))
                .map(|(gi, (s, t))| gi * (s - t))
                .sum();
            let rhs = (1.0 - mrp.gamma()) * mrp.value_error(&theta);
            worst = worst.max(rhs - lhs);
        }
    }
    worst
}

pub fn check_td_inequality() -> Check {
    let worst = td_inequality_worst_slack(100, 10);
    Check::new(
        "problems::td_steady_state_inequality",
        worst <= 1e-9,
        format!("worst rhs - lhs = {worst:.3e} over 100 MRPs x 10 probes"),
    )
}

pub fn check_randbimod_and_labels() -> Check {
    let d = 10;
    let rho = 0.99f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<f64> = randbimod(d, rho, &mut rng).unwrap();
    let mut sym_err = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            sym_err = sym_err.max((a[i * d + j] - a[j * d + i]).abs());
        }
    }
    let evals = linalg::symmetric_eigenvalues(&a, d);
    let mut spec_err = 0.0f64;
    for (k, &ev) in evals.iter().enumerate() {
        let want = if k < d / 2 { rho } else { rho / 3.0 };
        spec_err = spec_err.max((ev - want).abs());
    }
    let inst = SigmoidArInstance::<Real>::generate(4, 0.9, 3).unwrap();
    let mut xi = inst.direction().to_vec();
    linalg::scale(&mut xi, 2.0);
    let mut lrng = ChaCha8Rng::seed_from_u64(44);
    let draws = 100_000u64;
    let mut ones = 0u64;
    for _ in 0..draws {
        if inst.label(&xi, &mut lrng) {
            ones += 1;
        }
    }
    let freq = ones as f64 / draws as f64;
    let passed = sym_err < 1e-12 && spec_err < 1e-9 && (freq - 0.8).abs() < 0.005;
    Check::new(
        "problems::randbimod_spectrum_and_label_flips",
        passed,
        format!("symmetry {sym_err:.1e}, spectrum {spec_err:.1e}, kept-label freq {freq:.4}"),
    )
}

pub fn check_td_fixed_point() -> Check {
    let mut passed = true;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mrp = Mrp::<Real>::random(5, 3, 0.9, seed).unwrap();
        worst = worst.max(linalg::norm(&mrp.bar_g(mrp.theta_star())));
    }
    passed &= worst < 1e-10;
    let chain = two_state_chain(0.3f64).unwrap();
    let rewards = vec![0.5, -1.0, 0.25, 0.75];
    let tab = Mrp::tabular(chain, rewards, 0.0).unwrap();
    for s in 0..2 {
        passed &= (tab.theta_star()[s] - tab.expected_reward(s)).abs() < 1e-12;
    }
    Check::new(
        "problems::td_fixed_point",
        passed,
        format!("max |g_bar(theta*)| = {worst:.1e}; gamma=0 tabular matches expected rewards"),
    )
}

pub fn check_semi_gradient_bound() -> Check {
    let mrp = Mrp::<Real>::random(5, 3, 0.9, 42).unwrap();
    let bound = mrp.r_max() + 2.0 * mrp.radius();
    let mut stream = mrp.stream(0, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let z = stream.next_obs();
        let mut theta: Vec<f64> = (0..3).map(|_| f64::standard_normal(&mut rng)).collect();
        let norm = linalg::norm(&theta);
        let r = mrp.radius() * f64::unit_uniform(&mut rng);
        linalg::scale(&mut theta, r / norm);
        let g = mrp.semi_gradient(&theta, &z).unwrap();
        worst = worst.max(linalg::norm(&g));
    }
    Check::new(
        "problems::semi_gradient_bound",
        worst <= bound + 1e-12,
        format!("max ||g|| = {worst:.3} vs bound r_max + 2R = {bound:.3}"),
    )
}

pub fn check_regression_oracle_identities() -> Check {
    let inst = RegressionInstance::<Real>::generate(9, 5, 1e-3, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut passed = true;
    for _ in 0..50 {
        let w: Vec<f64> = (0..5).map(|_| f64::standard_normal(&mut rng)).collect();
        let (l1, _) = inst.loss_gradient(&w, 0).unwrap();
        let (l2, _) = inst.loss_gradient(&w, 1).unwrap();
        passed &= (0.5 * (l1 + l2) - inst.objective(&w)).abs() < 1e-10;
    }
    let (_, f_star) = inst.optimum();
    for _ in 0..1_000 {
        let mut w: Vec<f64> = (0..5).map(|_| f64::standard_normal(&mut rng)).collect();
        let r = inst.radius() * f64::unit_uniform(&mut rng);
        let n = linalg::norm(&w);
        linalg::scale(&mut w, r / n);
        passed &= f_star <= inst.objective(&w) + 1e-9;
    }
    let bound = inst.max_gradient_norm_on_ball(200, 19);
    passed &= bound.is_finite();
    Check::new(
        "problems::regression_oracle_identities",
        passed,
        format!(
            "per-state average equals objective; F* optimal on probes; gradient bound {bound:.2}"
        ),
    )
}

// ---------------------------------------------------------------------------

pub fn suite(name: &str) -> Result<Vec<Check>> {
    let chains = || {
        vec![
            check_winning_streak(),
            check_mixing_sandwich(),
            check_eigen_bounds_values(),
            check_d_mix_monotone_and_decay(),
            check_stationary_fixed_point(),
            check_two_state_d_mix_closed_form(),
            check_stream_frequency(),
            check_ar1_stationary_covariance(),
        ]
    };
    let estimators = || {
        vec![
            check_telescoping(),
            check_sample_count(),
            check_level_distribution(),
            check_bias_decay(),
            check_second_moment_monotonicity(),
        ]
    };
    let optim = || {
        vec![
            check_regret_inequality(),
            check_auer_gentile(),
            check_eta_monotone_and_projection(),
            check_run_determinism(),
        ]
    };
    let problems = || {
        vec![
            check_finite_differences(),
            check_td_inequality(),
            check_randbimod_and_labels(),
            check_td_fixed_point(),
            check_semi_gradient_bound(),
            check_regression_oracle_identities(),
        ]
    };
    Ok(match name {
        "chains" => chains(),
        "estimators" => estimators(),
        "optim" => optim(),
        "problems" => problems(),
        "all" => {
            let mut all = chains();
            all.extend(estimators());
            all.extend(optim());
            all.extend(problems());
            all
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown suite {other:?} (expected chains|estimators|optim|problems|all)"
            )))
        }
    })
}

/// Prints one line per check and returns whether everything passed.
pub fn run_and_report(name: &str) -> Result<bool> {
    let checks = suite(name)?;
    let mut all_passed = true;
    for check in &checks {
        let status = if check.passed { "ok  " } else { "FAIL" };
        println!("{status} {:<55} {}", check.name, check.detail);
        all_passed &= check.passed;
    }
    let passed_count = checks.iter().filter(|c| c.passed).count();
    println!("{passed_count}/{} checks passed", checks.len());
    Ok(all_passed)
}
