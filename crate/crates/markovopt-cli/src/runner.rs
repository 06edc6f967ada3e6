//! Experiment execution: builds problem instances and streams per
//! (method, seed) run, drives the optimizer, and writes the run CSV.
//!
//! CSV schema (stable, LF line endings, 17 significant digits for values):
//!
//! ```text
//! experiment,method,seed,step,samples_cum,level,metric_name,metric_value
//! ```
//!
//! `step` is the deterministic x-axis value of a row: the nominal sample
//! mark `k * record_every` for sample-indexed records, or the swept
//! parameter value for fig2 rows. `samples_cum` is the actual cumulative
//! sample count of the recording iteration, which varies across seeds for
//! MLMC methods.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use markovopt::chains::{two_state_chain, ChainStream, FiniteChain};
use markovopt::estimators::LevelDistribution;
use markovopt::linalg;
use markovopt::optim::{run_method, Budget, Domain, Method, MetricFn, RunParams, StepSign};
use markovopt::problems::{MonteCarloObjective, Mrp, RegressionInstance, SigmoidArInstance};
use markovopt::scalar::Scalar;
use markovopt::Real;

use crate::config::{Experiment, ExperimentConfig, MethodName};
use crate::{HarnessError, Result};

pub const CSV_HEADER: &str =
    "experiment,method,seed,step,samples_cum,level,metric_name,metric_value";

/// One output row, with `step` preformatted.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub method: String,
    pub seed: u32,
    pub step: String,
    pub samples_cum: u64,
    pub level: u32,
    pub metric_name: String,
    pub metric_value: f64,
}

impl CsvRow {
    fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.16e}",
            self.experiment,
            self.method,
            self.seed,
            self.step,
            self.samples_cum,
            self.level,
            self.metric_name,
            self.metric_value
        )
    }
}

/// Per-run seed derivation.
pub fn run_seed(base_seed: u64, seed_index: u32, method_ordinal: u64) -> u64 {
    base_seed
        ^ 1_000_003u64
            .wrapping_mul(seed_index as u64)
            .wrapping_add(7_919u64.wrapping_mul(method_ordinal))
}

/// Instance seed: shared by every method at one seed index, so methods
/// face the same problem data and differ only in their run randomness.
fn instance_seed(base_seed: u64, seed_index: u32) -> u64 {
    run_seed(base_seed, seed_index, 0) ^ 0x9e37_79b9_7f4a_7c15
}

const STREAM_SALT: u64 = 0;
const METHOD_RNG_SALT: u64 = 0x517c_c1b7_2722_0a95;
const EVAL_SALT: u64 = 0x2545_f491_4f6c_dd1d;

/// Problem data prepared once per seed index and shared across methods.
enum ProblemBundle {
    Regression(RegressionInstance<Real>),
    Sigmoid {
        instance: SigmoidArInstance<Real>,
        eval: MonteCarloObjective<Real>,
    },
    Td(Mrp<Real>),
}

/// Monte Carlo evaluation budget for the non-convex population objective.
const MC_BURN_IN: usize = 100_000;
const MC_SAMPLES: usize = 100_000;

fn prepare_bundle(config: &ExperimentConfig, seed_index: u32) -> Result<ProblemBundle> {
    let iseed = instance_seed(config.base_seed, seed_index);
    Ok(match config.experiment {
        Experiment::Fig1 | Experiment::Fig2 => {
            ProblemBundle::Regression(RegressionInstance::generate(
                config.regression_rows,
                config.dim,
                config.noise_variance,
                iseed,
            ))
        }
        Experiment::Nonconvex => {
            let instance = SigmoidArInstance::generate(config.dim, config.rho, iseed)?;
            let eval =
                MonteCarloObjective::new(&instance, iseed ^ EVAL_SALT, MC_BURN_IN, MC_SAMPLES)?;
            ProblemBundle::Sigmoid { instance, eval }
        }
        Experiment::Td => ProblemBundle::Td(Mrp::random(
            config.td_states,
            config.td_features,
            config.td_gamma,
            iseed,
        )?),
        Experiment::Custom => {
            let path = config.chain_file.as_ref().expect("validated");
            let chain = FiniteChain::from_matrix_file(path)?;
            // More features than states makes the TD fixed-point system
            // singular; cap the default at the chain size.
            let dim = config.td_features.min(chain.n_states());
            ProblemBundle::Td(custom_mrp(chain, dim, config.td_gamma, iseed)?)
        }
    })
}

/// Random rewards and unit-norm features over a user-supplied chain.
fn custom_mrp(chain: FiniteChain<Real>, dim: usize, gamma: f64, seed: u64) -> Result<Mrp<Real>> {
    let n = chain.n_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards: Vec<f64> = (0..n * n)
        .map(|_| 2.0 * f64::unit_uniform(&mut rng) - 1.0)
        .collect();
    let mut features = vec![0.0f64; n * dim];
    for s in 0..n {
        let row = &mut features[s * dim..(s + 1) * dim];
        for v in row.iter_mut() {
            *v = f64::standard_normal(&mut rng);
        }
        let norm = linalg::norm(row);
        linalg::scale(row, 1.0 / norm);
    }
    Ok(Mrp::new(chain, rewards, features, dim, gamma, None)?)
}

/// One run to execute: `sweep` carries the fig2 transition parameter.
#[derive(Debug, Clone, Copy)]
struct RunJob {
    method: MethodName,
    seed_index: u32,
    sweep: Option<f64>,
}

fn level_distribution(config: &ExperimentConfig) -> Result<LevelDistribution> {
    let dist = match config.mlmc {
        crate::config::MlmcKind::Truncated => {
            LevelDistribution::truncated_geometric(config.mlmc_levels)?
        }
        crate::config::MlmcKind::Full => {
            LevelDistribution::full_geometric(config.mlmc_horizon.unwrap_or(config.sample_budget))?
        }
    };
    Ok(dist.with_compensation(config.compensation))
}

/// Formats a float so that round parameter values print compactly ("0.001").
fn format_param(p: f64) -> String {
    format!("{p}")
}

fn resolve_method(
    config: &ExperimentConfig,
    name: MethodName,
    chain: Option<&FiniteChain<Real>>,
) -> Result<Method> {
    Ok(match name {
        MethodName::Mag => Method::Mag,
        MethodName::AdaGrad => Method::AdaGrad,
        MethodName::Sgd => Method::Sgd,
        MethodName::SgdMlmc => Method::SgdMlmc,
        MethodName::SgdDd => {
            let gap = match config.sgd_dd_gap {
                Some(gap) => gap,
                None => {
                    let chain = chain.ok_or_else(|| {
                        HarnessError::Config(
                            "SGD_DD gap cannot be auto-wired without a finite chain".into(),
                        )
                    })?;
                    chain.default_mixing_time()?
                }
            };
            Method::SgdDd { gap }
        }
    })
}

/// Runs one job and buffers its rows.
fn execute_job(
    config: &ExperimentConfig,
    bundles: &[ProblemBundle],
    job: RunJob,
) -> Result<Vec<CsvRow>> {
    let bundle = &bundles[job.seed_index as usize];
    let seed = run_seed(config.base_seed, job.seed_index, job.method.ordinal());
    let levels = level_distribution(config)?;
    let experiment_name = config.experiment.name().to_string();
    let mut rows = Vec::new();

    match (config.experiment, bundle) {
        (Experiment::Fig1, ProblemBundle::Regression(inst)) => {
            let chain = two_state_chain(config.chain_p)?;
            let method = resolve_method(config, job.method, Some(&chain))?;
            let mut stream = ChainStream::new(chain, 0, seed ^ STREAM_SALT)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ METHOD_RNG_SALT);
            let domain = Domain::l2_ball(inst.radius())?;
            let params = RunParams {
                alpha: config.alpha.unwrap_or_else(|| domain.default_alpha()),
                sgd_rate_scale: config.sgd_c,
                record_every: config.record_every,
                ..RunParams::new(domain, levels)
            };
            let metric: &MetricFn<Real> =
                &|w| vec![("suboptimality".to_string(), inst.suboptimality(w))];
            push_gap_row(&mut rows, &experiment_name, &method, job.seed_index);
            let trace = run_method(
                method,
                inst,
                &mut stream,
                Budget::Samples(config.sample_budget),
                &params,
                &mut rng,
                metric,
            )?;
            push_trace_rows(&mut rows, &experiment_name, &trace, job.seed_index);
        }
        (Experiment::Fig2, ProblemBundle::Regression(inst)) => {
            let p = job.sweep.expect("fig2 jobs carry a sweep value");
            let chain = two_state_chain(p)?;
            let method = resolve_method(config, job.method, Some(&chain))?;
            let mut stream = ChainStream::new(chain, 0, seed ^ STREAM_SALT)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ METHOD_RNG_SALT);
            let domain = Domain::l2_ball(inst.radius())?;
            let params = RunParams {
                alpha: config.alpha.unwrap_or_else(|| domain.default_alpha()),
                sgd_rate_scale: config.sgd_c,
                record_every: 0,
                ..RunParams::new(domain, levels)
            };
            let trace = run_method(
                method,
                inst,
                &mut stream,
                Budget::Samples(config.sample_budget),
                &params,
                &mut rng,
                &markovopt::optim::no_metric,
            )?;
            rows.push(CsvRow {
                experiment: experiment_name,
                method: trace.method.clone(),
                seed: job.seed_index,
                step: format_param(p),
                samples_cum: trace.samples_total,
                level: 0,
                metric_name: "final_suboptimality".to_string(),
                metric_value: inst.suboptimality(&trace.average_iterate),
            });
        }
        (Experiment::Nonconvex, ProblemBundle::Sigmoid { instance, eval }) => {
            let method = resolve_method(config, job.method, None)?;
            let mut stream = instance.stream(seed ^ STREAM_SALT)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ METHOD_RNG_SALT);
            // Unconstrained run with alpha = 1, matching the stationary-point
            // analysis of the adaptive method; the nominal unit ball of the
            // problem statement is not enforced here.
            let params = RunParams {
                alpha: config.alpha.unwrap_or(1.0),
                sgd_rate_scale: config.sgd_c,
                record_every: config.record_every,
                select_random_iterate: true,
                ..RunParams::new(Domain::Unconstrained, levels)
            };
            let metric: &MetricFn<Real> = &|w| {
                vec![
                    ("mc_objective".to_string(), eval.objective(w)),
                    ("grad_norm_sq".to_string(), eval.gradient_norm_sq(w)),
                ]
            };
            push_gap_row(&mut rows, &experiment_name, &method, job.seed_index);
            let trace = run_method(
                method,
                instance,
                &mut stream,
                Budget::Samples(config.sample_budget),
                &params,
                &mut rng,
                metric,
            )?;
            push_trace_rows(&mut rows, &experiment_name, &trace, job.seed_index);
        }
        (Experiment::Td | Experiment::Custom, ProblemBundle::Td(mrp)) => {
            let method = resolve_method(config, job.method, Some(mrp.chain()))?;
            let mut stream = mrp.stream(0, seed ^ STREAM_SALT)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ METHOD_RNG_SALT);
            let domain = Domain::l2_ball(mrp.radius())?;
            let params = RunParams {
                alpha: config.alpha.unwrap_or(2.0f64.sqrt() * mrp.radius()),
                sgd_rate_scale: config.sgd_c,
                record_every: config.record_every,
                sign: StepSign::Ascent,
                ..RunParams::new(domain, levels)
            };
            let oracle = markovopt::problems::TdOracle { mrp };
            let metric: &MetricFn<Real> =
                &|theta| vec![("value_error".to_string(), mrp.value_error(theta))];
            push_gap_row(&mut rows, &experiment_name, &method, job.seed_index);
            let trace = run_method(
                method,
                &oracle,
                &mut stream,
                Budget::Samples(config.sample_budget),
                &params,
                &mut rng,
                metric,
            )?;
            push_trace_rows(&mut rows, &experiment_name, &trace, job.seed_index);
        }
        _ => unreachable!("bundle kind matches the experiment"),
    }
    Ok(rows)
}

/// SGD-DD runs record the gap they used; the baseline is not oblivious to
/// the mixing time and the output should show it.
fn push_gap_row(rows: &mut Vec<CsvRow>, experiment: &str, method: &Method, seed: u32) {
    if let Method::SgdDd { gap } = method {
        rows.push(CsvRow {
            experiment: experiment.to_string(),
            method: method.name().to_string(),
            seed,
            step: "0".to_string(),
            samples_cum: 0,
            level: 0,
            metric_name: "sgd_dd_gap".to_string(),
            metric_value: *gap as f64,
        });
    }
}

fn push_trace_rows(rows: &mut Vec<CsvRow>, experiment: &str, trace: &markovopt::Trace, seed: u32) {
    for record in &trace.records {
        for (name, value) in &record.metrics {
            rows.push(CsvRow {
                experiment: experiment.to_string(),
                method: trace.method.clone(),
                seed,
                step: record.mark.to_string(),
                samples_cum: record.samples_cum,
                level: record.level,
                metric_name: name.clone(),
                metric_value: *value,
            });
        }
    }
}

fn enumerate_jobs(config: &ExperimentConfig) -> Vec<RunJob> {
    let mut jobs = Vec::new();
    match config.experiment {
        Experiment::Fig2 => {
            for &p in &config.p_list {
                for &method in &config.methods {
                    for seed_index in 0..config.seeds {
                        jobs.push(RunJob {
                            method,
                            seed_index,
                            sweep: Some(p),
                        });
                    }
                }
            }
        }
        _ => {
            for &method in &config.methods {
                for seed_index in 0..config.seeds {
                    jobs.push(RunJob {
                        method,
                        seed_index,
                        sweep: None,
                    });
                }
            }
        }
    }
    jobs
}

/// Runs every (method, seed[, parameter]) job of the experiment and returns
/// the rows in deterministic job order regardless of scheduling.
pub fn collect_rows(config: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    config.validate()?;
    let bundles: Vec<ProblemBundle> = (0..config.seeds)
        .map(|seed_index| prepare_bundle(config, seed_index))
        .collect::<Result<_>>()?;
    let jobs = enumerate_jobs(config);
    let workers = if config.jobs == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        config.jobs
    }
    .min(jobs.len())
    .max(1);

    let mut results: Vec<Option<Result<Vec<CsvRow>>>> = Vec::new();
    results.resize_with(jobs.len(), || None);
    if workers <= 1 {
        for (slot, job) in results.iter_mut().zip(&jobs) {
            *slot = Some(execute_job(config, &bundles, *job));
        }
    } else {
        let next = AtomicUsize::new(0);
        let results_mutex = Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= jobs.len() {
                        break;
                    }
                    let outcome = execute_job(config, &bundles, jobs[idx]);
                    results_mutex.lock().unwrap()[idx] = Some(outcome);
                });
            }
        });
    }

    let mut rows = Vec::new();
    for slot in results {
        rows.extend(slot.expect("every job ran")?);
    }
    Ok(rows)
}

/// Runs the experiment and writes the CSV; partial output is removed on
/// failure (the file is written to a temp path and renamed).
pub fn run_experiment(config: &ExperimentConfig) -> Result<()> {
    let rows = collect_rows(config)?;
    let tmp = config.out.with_extension("csv.tmp");
    let write = || -> Result<()> {
        let file = fs::File::create(&tmp)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}")?;
        for row in &rows {
            row.write_to(&mut out)?;
        }
        out.flush()?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, &config.out)?;
    log::info!("wrote {} rows to {}", rows.len(), config.out.display());
    Ok(())
}

/// Reads a run CSV back into rows (used by `summarize` and tests).
pub fn read_rows(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| HarnessError::MalformedCsv(e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| HarnessError::MalformedCsv(e.to_string()))?;
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(HarnessError::MalformedCsv(format!(
                "unexpected header {headers:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::MalformedCsv(e.to_string()))?;
        if record.len() != 8 {
            return Err(HarnessError::MalformedCsv(format!(
                "expected 8 fields, got {}",
                record.len()
            )));
        }
        let parse_u64 = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|e| HarnessError::MalformedCsv(format!("bad integer {s:?}: {e}")))
        };
        rows.push(CsvRow {
            experiment: record[0].to_string(),
            method: record[1].to_string(),
            seed: parse_u64(&record[2])? as u32,
            step: record[3].to_string(),
            samples_cum: parse_u64(&record[4])?,
            level: parse_u64(&record[5])? as u32,
            metric_name: record[6].to_string(),
            metric_value: record[7].parse().map_err(|e| {
                HarnessError::MalformedCsv(format!("bad metric value {:?}: {e}", &record[7]))
            })?,
        });
    }
    Ok(rows)
}
