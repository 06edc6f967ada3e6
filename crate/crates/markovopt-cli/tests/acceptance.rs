//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances are pinned in the assertions.

use markovopt::chains::{two_state_chain, winning_streak_reversal, winning_streak_stationary};
use markovopt::estimators::LevelDistribution;
use markovopt::linalg;
use markovopt::problems::{randbimod, run_td_mag, Mrp};
use markovopt_cli::config::{Experiment, ExperimentConfig, MethodName, Scale};
use markovopt_cli::runner::{collect_rows, run_experiment, CsvRow};
use markovopt_cli::verify;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Criterion {
    number: u32,
    what: &'static str,
}

impl Criterion {
    fn assert(self, passed: bool, detail: &str) {
        let status = if passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {:>2}: {} -- {detail}",
            self.number, self.what
        );
        assert!(passed, "criterion {} failed: {detail}", self.number);
    }
}

/// Mean final metric value per method over seeds, taking each seed's last
/// record of `metric`.
fn mean_final_metric(rows: &[CsvRow], method: &str, metric: &str) -> f64 {
    let mut last: std::collections::BTreeMap<u32, f64> = Default::default();
    for row in rows {
        if row.method == method && row.metric_name == metric {
            last.insert(row.seed, row.metric_value);
        }
    }
    assert!(!last.is_empty(), "no rows for {method}/{metric}");
    last.values().sum::<f64>() / last.len() as f64
}

#[test]
fn criterion_01_telescoping_identity() {
    let worst = verify::telescoping_residual(100);
    Criterion {
        number: 1,
        what: "telescoping identity on 100 random (stream, w) pairs",
    }
    .assert(
        worst < 1e-10,
        &format!("max coordinate residual {worst:.2e} (< 1e-10)"),
    );
}

#[test]
fn criterion_02_expected_sample_count() {
    let mean = verify::mean_sample_count_t8(100_000);
    let analytic = LevelDistribution::full_geometric(1 << 20)
        .unwrap()
        .expected_sample_count::<f64>();
    let exact = analytic == 20.0 + 0.5f64.powi(20);
    Criterion {
        number: 2,
        what: "expected MLMC sample count",
    }
    .assert(
        (mean - 3.125).abs() < 0.05 && exact,
        &format!(
            "MC mean {mean:.4} (3.125 +/- 0.05); analytic T=2^20 = 20 + 2^-20 exactly: {exact}"
        ),
    );
}

#[test]
fn criterion_03_mixing_bounds_sandwich() {
    let mut passed = true;
    let mut details = Vec::new();
    for p in [0.3f64, 0.1, 0.01, 0.001] {
        let chain = two_state_chain(p).unwrap();
        let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
        let tau = chain.default_mixing_time().unwrap() as f64;
        passed &= lower <= tau && tau <= upper;
        details.push(format!("p={p}: {lower:.2}<={tau}<={upper:.2}"));
    }
    let chain = two_state_chain(1e-4f64).unwrap();
    let (lower, upper) = chain.eigen_mixing_bounds().unwrap();
    passed &= (lower - 3465.0).abs() < 0.5 && (upper - 10397.2).abs() < 0.5;
    details.push(format!(
        "p=1e-4: ({lower:.1}, {upper:.1}) vs (3465.0, 10397.2)"
    ));
    Criterion {
        number: 3,
        what: "eigenvalue bounds sandwich the exact mixing time",
    }
    .assert(passed, &details.join("; "));
}

#[test]
fn criterion_04_winning_streak_exactness() {
    let mut passed = true;
    let mut worst_row = 0.0f64;
    let mut details = Vec::new();
    for n in [3usize, 5, 8] {
        let chain = winning_streak_reversal::<f64>(n).unwrap();
        let mu = winning_streak_stationary::<f64>(n);
        let pt = chain.matrix_power(n as u64 - 1);
        for z in 0..n {
            for j in 0..n {
                worst_row = worst_row.max((pt[z * n + j] - mu[j]).abs());
            }
        }
        let d_before = chain.d_mix(n as u64 - 2).unwrap();
        let tau = chain.default_mixing_time().unwrap();
        passed &= worst_row < 1e-12 && d_before >= 0.25 - 1e-12 && tau == n as u64 - 1;
        details.push(format!("n={n}: d_mix(n-2)={d_before:.3}, tau={tau}"));
    }
    details.push(format!("max |P^(n-1) - mu| = {worst_row:.1e}"));
    Criterion {
        number: 4,
        what: "winning-streak reversal exactness for n in {3, 5, 8}",
    }
    .assert(passed, &details.join("; "));
}

#[test]
fn criterion_05_regret_and_auer_gentile() {
    let regret = verify::regret_worst_slack(200);
    let auer = verify::auer_gentile_worst_slack(200);
    Criterion {
        number: 5,
        what: "AdaGrad regret and Auer-Gentile inequalities on 200 instances",
    }
    .assert(
        regret <= 1e-9 && auer <= 1e-9,
        &format!("worst slacks: regret {regret:.2e}, Auer-Gentile {auer:.2e} (<= 1e-9)"),
    );
}

#[test]
fn criterion_06_fig1_desk_ordering() {
    let config = ExperimentConfig::preset(Experiment::Fig1, Scale::Desk);
    let rows = collect_rows(&config).unwrap();
    let mag = mean_final_metric(&rows, "MAG", "suboptimality");
    let adagrad = mean_final_metric(&rows, "AdaGrad", "suboptimality");
    let sgd = mean_final_metric(&rows, "SGD", "suboptimality");
    Criterion {
        number: 6,
        what: "fig1 desk: MAG mean final suboptimality <= AdaGrad and SGD",
    }
    .assert(
        mag <= adagrad && mag <= sgd,
        &format!("MAG {mag:.4}, AdaGrad {adagrad:.4}, SGD {sgd:.4} (5-seed means)"),
    );
}

#[test]
fn criterion_07_fig2_desk_degradation_trend() {
    let config = ExperimentConfig::preset(Experiment::Fig2, Scale::Desk);
    let rows = collect_rows(&config).unwrap();
    let mean_at = |method: &str, p: &str| -> f64 {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method && r.step == p)
            .map(|r| r.metric_value)
            .collect();
        assert_eq!(vals.len(), 5, "expected 5 seeds for {method} at p={p}");
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let mag_ratio = mean_at("MAG", "0.001") / mean_at("MAG", "0.1");
    let sgd_ratio = mean_at("SGD", "0.001") / mean_at("SGD", "0.1");
    Criterion {
        number: 7,
        what: "fig2 desk: MAG degrades more gracefully than SGD",
    }
    .assert(
        mag_ratio <= sgd_ratio,
        &format!("degradation ratios p=1e-3/p=1e-1: MAG {mag_ratio:.1}, SGD {sgd_ratio:.1}"),
    );
}

#[test]
fn criterion_08_td_suite() {
    let slack = verify::td_inequality_worst_slack(100, 10);
    let inequality_ok = slack <= 1e-9;

    let mrp = Mrp::<f64>::random(5, 3, 0.9, 12345).unwrap();
    let initial = mrp.value_error(&[0.0, 0.0, 0.0]);
    let mut finals = Vec::new();
    for seed in 0..5u64 {
        let trace = run_td_mag(&mrp, 10_000, 1000 + seed, 0).unwrap();
        finals.push(mrp.value_error(&trace.average_iterate));
    }
    let final_mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let reduction = initial / final_mean;

    let chain = two_state_chain(0.3f64).unwrap();
    let rewards = vec![0.5, -1.0, 0.25, 0.75];
    let tabular = Mrp::tabular(chain, rewards, 0.0).unwrap();
    let mut linf = Vec::new();
    for seed in 0..5u64 {
        let trace = run_td_mag(&tabular, 10_000, 2000 + seed, 0).unwrap();
        let err = trace
            .average_iterate
            .iter()
            .zip(tabular.theta_star())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        linf.push(err);
    }
    let linf_mean = linf.iter().sum::<f64>() / linf.len() as f64;

    Criterion {
        number: 8,
        what: "TD suite: steady-state inequality, 10x error reduction, tabular sanity",
    }
    .assert(
        inequality_ok && reduction >= 10.0 && linf_mean < 0.1,
        &format!(
            "inequality slack {slack:.2e}; value_error {initial:.4} -> {final_mean:.5} \
             ({reduction:.0}x); gamma=0 tabular mean l_inf {linf_mean:.4}"
        ),
    );
}

#[test]
fn criterion_09_gradient_oracles_finite_differences() {
    let worst = verify::finite_difference_worst_error(50);
    Criterion {
        number: 9,
        what: "finite-difference agreement of all gradient oracles",
    }
    .assert(
        worst < 1e-5,
        &format!("worst relative error {worst:.2e} over 50 probes per oracle (< 1e-5)"),
    );
}

#[test]
fn criterion_10_nonconvex_desk() {
    let config = ExperimentConfig::preset(Experiment::Nonconvex, Scale::Desk);
    assert_eq!(config.dim, 10);
    assert_eq!(config.rho, 0.99);
    assert_eq!(config.sample_budget, 100_000);
    let rows = collect_rows(&config).unwrap();
    let mag_final = mean_final_metric(&rows, "MAG", "mc_objective");
    // l(0; xi, y) = 1/2 (1/2 - y)^2 = 1/8 regardless of the data, so the
    // value at the initialization w_1 = 0 is exactly 0.125.
    let objective_improved = mag_final < 0.125;

    // RandBiMod spectrum and label-flip frequency per the generator spec.
    let d = 10;
    let rho = 0.99f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<f64> = randbimod(d, rho, &mut rng).unwrap();
    let evals = linalg::symmetric_eigenvalues(&a, d);
    let mut spectrum_err = 0.0f64;
    for (k, &ev) in evals.iter().enumerate() {
        let want = if k < d / 2 { rho } else { rho / 3.0 };
        spectrum_err = spectrum_err.max((ev - want).abs());
    }
    let inst = markovopt::SigmoidAr::generate(d, rho, 77).unwrap();
    let mut xi = inst.direction().to_vec();
    linalg::scale(&mut xi, 3.0);
    let mut lrng = ChaCha8Rng::seed_from_u64(78);
    let mut kept = 0u64;
    let draws = 100_000u64;
    for _ in 0..draws {
        if inst.label(&xi, &mut lrng) {
            kept += 1;
        }
    }
    let kept_freq = kept as f64 / draws as f64;

    Criterion {
        number: 10,
        what: "nonconvex desk: MAG improves the MC objective; RandBiMod matches",
    }
    .assert(
        objective_improved && spectrum_err < 1e-9 && (kept_freq - 0.8).abs() < 0.005,
        &format!(
            "MAG mean final objective {mag_final:.4} (< 0.125 at init); \
             spectrum error {spectrum_err:.1e}; kept-label frequency {kept_freq:.4}"
        ),
    );
}

#[test]
fn criterion_11_harness_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::preset(Experiment::Fig1, Scale::Desk);
    config.sample_budget = 50_000;
    config.record_every = 10_000;
    config.seeds = 2;
    config.methods = vec![MethodName::Mag, MethodName::SgdDd];
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    config.out = out_a.clone();
    run_experiment(&config).unwrap();
    config.out = out_b.clone();
    run_experiment(&config).unwrap();
    let bytes_a = std::fs::read(&out_a).unwrap();
    let bytes_b = std::fs::read(&out_b).unwrap();
    let fig1_identical = bytes_a == bytes_b;

    let mut td = ExperimentConfig::preset(Experiment::Td, Scale::Desk);
    td.seeds = 3;
    let td_a = dir.path().join("td_a.csv");
    let td_b = dir.path().join("td_b.csv");
    td.out = td_a.clone();
    run_experiment(&td).unwrap();
    td.out = td_b.clone();
    run_experiment(&td).unwrap();
    let td_identical = std::fs::read(&td_a).unwrap() == std::fs::read(&td_b).unwrap();

    Criterion {
        number: 11,
        what: "rerunning a preset with the same base seed is byte-identical",
    }
    .assert(
        fig1_identical && td_identical,
        &format!(
            "fig1 ({} bytes) and td ({} bytes) reproduced exactly",
            bytes_a.len(),
            std::fs::read(&td_a).unwrap().len()
        ),
    );
}
