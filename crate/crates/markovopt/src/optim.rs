//! Optimizer loops: MAG (MLMC + AdaGrad-Norm), AdaGrad-Norm, SGD with a
//! `c/sqrt(t)` rate, SGD-MLMC and the data-drop baseline SGD-DD, plus
//! projections and iterate averaging/selection.
//!
//! All methods share one driver, [`run_method`], which pulls gradient
//! estimates from a [`MarkovStream`], applies the method's step rule inside
//! an optional L2-ball domain, and records a metric of the running average
//! iterate on a sample-indexed grid: the fair comparison axis between
//! methods is the number of observed Markovian samples, not the iteration
//! count.

use rand::Rng;

use crate::chains::MarkovStream;
use crate::error::{Error, Result};
use crate::estimators::{
    minibatch_gradient, mlmc_gradient, GradientEstimate, GradientOracle, LevelDistribution,
};
use crate::linalg;
use crate::scalar::Scalar;

/// Optimization domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<S> {
    Unconstrained,
    L2Ball { radius: S },
}

impl<S: Scalar> Domain<S> {
    pub fn l2_ball(radius: S) -> Result<Self> {
        if !(radius > S::zero()) {
            return Err(Error::InvalidParams(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Domain::L2Ball { radius })
    }

    /// Euclidean projection: identity on the unconstrained domain, radial
    /// scaling onto the ball otherwise. Idempotent and non-expansive.
    pub fn project(&self, w: &[S]) -> Vec<S> {
        let mut out = w.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, w: &mut [S]) {
        if let Domain::L2Ball { radius } = *self {
            let n = linalg::norm(w);
            if n > radius {
                linalg::scale(w, radius / n);
            }
        }
    }

    /// Diameter `D = 2R` of a ball domain.
    pub fn diameter(&self) -> Option<S> {
        match *self {
            Domain::Unconstrained => None,
            Domain::L2Ball { radius } => Some(radius + radius),
        }
    }

    /// Default AdaGrad scaling: `D / sqrt(2)` on a bounded domain, 1 when
    /// unconstrained.
    pub fn default_alpha(&self) -> S {
        match self.diameter() {
            Some(d) => d / S::of(2.0).sqrt(),
            None => S::one(),
        }
    }
}

/// Scalar AdaGrad (AdaGrad-Norm) state: the step size is
/// `eta_t = alpha / sqrt(sum_k ||g_k||^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState<S> {
    alpha: S,
    sum_sq: S,
}

impl<S: Scalar> AdaGradState<S> {
    pub fn new(alpha: S) -> Result<Self> {
        if !(alpha > S::zero()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            sum_sq: S::zero(),
        })
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn sum_sq(&self) -> S {
        self.sum_sq
    }

    /// Current step size; `None` before any non-zero gradient arrives.
    pub fn eta(&self) -> Option<S> {
        if self.sum_sq > S::zero() {
            Some(self.alpha / self.sum_sq.sqrt())
        } else {
            None
        }
    }

    /// Accumulates `||g||^2` and applies the projected step
    /// `w <- project(w - eta g)`. While the accumulated sum is zero the
    /// iterate is left unchanged (the update has no epsilon in the
    /// denominator).
    pub fn step_in_place(&mut self, w: &mut [S], g: &[S], domain: &Domain<S>) {
        self.sum_sq += linalg::norm_sq(g);
        if let Some(eta) = self.eta() {
            linalg::axpy(-eta, g, w);
            domain.project_in_place(w);
        }
    }

    /// Pure version of [`AdaGradState::step_in_place`].
    pub fn step(&mut self, w: &[S], g: &[S], domain: &Domain<S>) -> Vec<S> {
        let mut out = w.to_vec();
        self.step_in_place(&mut out, g, domain);
        out
    }
}

/// Optimization method run by [`run_method`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// MLMC estimate + AdaGrad-Norm step.
    Mag,
    /// Single-sample estimate + AdaGrad-Norm step.
    AdaGrad,
    /// Single-sample estimate + `c/sqrt(t)` step.
    Sgd,
    /// MLMC estimate + `c/sqrt(t)` step.
    SgdMlmc,
    /// Data-drop baseline: consume `gap` samples per iteration, update on the
    /// last one only. The gap encodes the mixing time and must be supplied.
    SgdDd { gap: u64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mag => "MAG",
            Method::AdaGrad => "AdaGrad",
            Method::Sgd => "SGD",
            Method::SgdMlmc => "SGD_MLMC",
            Method::SgdDd { .. } => "SGD_DD",
        }
    }

    /// Stable ordinal used in seed derivation and output ordering.
    pub fn ordinal(&self) -> u64 {
        match self {
            Method::Mag => 0,
            Method::AdaGrad => 1,
            Method::Sgd => 2,
            Method::SgdMlmc => 3,
            Method::SgdDd { .. } => 4,
        }
    }

    pub fn uses_mlmc(&self) -> bool {
        matches!(self, Method::Mag | Method::SgdMlmc)
    }

    pub fn uses_adagrad(&self) -> bool {
        matches!(self, Method::Mag | Method::AdaGrad)
    }
}

/// Run length: a fixed iteration count or a stream-sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Iterations(u64),
    Samples(u64),
}

/// Update direction: descent (`w - eta g`) or ascent (`w + eta g`, used by
/// the TD semi-gradient update).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSign {
    #[default]
    Descent,
    Ascent,
}

/// Parameters shared by all methods.
#[derive(Debug, Clone)]
pub struct RunParams<S> {
    pub domain: Domain<S>,
    /// AdaGrad scaling parameter.
    pub alpha: S,
    /// `c` in the SGD-family rate `eta_t = c / sqrt(t)`.
    pub sgd_rate_scale: S,
    /// Level distribution for the MLMC estimator.
    pub levels: LevelDistribution,
    /// Record the metric every this many observed samples (0 = no records).
    pub record_every: u64,
    pub sign: StepSign,
    /// Keep the full iterate history in the trace (memory-heavy; meant for
    /// small analysis runs).
    pub keep_iterates: bool,
    /// Reservoir-select an iterate uniformly from `{w_1, ..., w_T}`.
    pub select_random_iterate: bool,
}

impl<S: Scalar> RunParams<S> {
    /// Defaults: `alpha` from the domain, unit SGD scale, no recording.
    pub fn new(domain: Domain<S>, levels: LevelDistribution) -> Self {
        Self {
            alpha: domain.default_alpha(),
            domain,
            sgd_rate_scale: S::one(),
            levels,
            record_every: 0,
            sign: StepSign::Descent,
            keep_iterates: false,
            select_random_iterate: false,
        }
    }
}

/// One sample-indexed metric record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<S> {
    pub iteration: u64,
    /// Nominal sample mark (`k * record_every`) the record belongs to; the
    /// deterministic cross-seed x-axis value.
    pub mark: u64,
    /// Actual cumulative samples consumed when the mark was crossed.
    pub samples_cum: u64,
    /// MLMC level drawn at the recording iteration (0 for non-MLMC methods).
    pub level: u32,
    pub metrics: Vec<(String, S)>,
}

/// Result of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<S> {
    pub method: String,
    pub records: Vec<TraceRecord<S>>,
    /// Average of the update iterates `w_1, ..., w_T`.
    pub average_iterate: Vec<S>,
    /// Uniformly selected iterate, when requested.
    pub random_selected: Option<Vec<S>>,
    pub iterations: u64,
    pub samples_total: u64,
    /// Full iterate history, when requested.
    pub iterates: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> RunTrace<S> {
    /// Uniform draw among the kept iterates.
    pub fn draw_random_iterate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&[S]> {
        match &self.iterates {
            Some(iterates) => random_iterate(iterates, rng),
            None => Err(Error::EmptyTrace),
        }
    }
}

/// Arithmetic mean of a non-empty iterate sequence.
pub fn average_iterate<S: Scalar>(iterates: &[Vec<S>]) -> Result<Vec<S>> {
    let first = iterates.first().ok_or(Error::EmptyTrace)?;
    let mut avg = vec![S::zero(); first.len()];
    for w in iterates {
        linalg::axpy(S::one(), w, &mut avg);
    }
    linalg::scale(&mut avg, S::one() / S::of(iterates.len() as f64));
    Ok(avg)
}

/// Uniform draw among `{w_1, ..., w_T}`.
pub fn random_iterate<'a, S, R>(iterates: &'a [Vec<S>], rng: &mut R) -> Result<&'a [S]>
where
    S: Scalar,
    R: Rng + ?Sized,
{
    if iterates.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let idx = rng.gen_range(0..iterates.len());
    Ok(&iterates[idx])
}

/// Metric of the running average iterate, evaluated at record marks. Returns
/// named values; every pair becomes one output row.
pub type MetricFn<'a, S> = dyn Fn(&[S]) -> Vec<(String, S)> + 'a;

/// No-op metric for runs that only need the final iterates.
pub fn no_metric<S: Scalar>(_w: &[S]) -> Vec<(String, S)> {
    Vec::new()
}

/// Runs one optimization method against a stream and oracle.
///
/// The iterate starts at `project(0)`. Per iteration: form the gradient
/// estimate (single sample, MLMC draw, or data-drop block), apply the step
/// rule, and record the metric at every crossed sample mark. The stream is
/// never reset between iterations or MLMC levels.
pub fn run_method<S, O, St, R>(
    method: Method,
    oracle: &O,
    stream: &mut St,
    budget: Budget,
    params: &RunParams<S>,
    rng: &mut R,
    metric: &MetricFn<S>,
) -> Result<RunTrace<S>>
where
    S: Scalar,
    O: GradientOracle<S>,
    St: MarkovStream<Obs = O::Obs>,
    R: Rng + ?Sized,
{
    match budget {
        Budget::Iterations(0) | Budget::Samples(0) => {
            return Err(Error::InvalidParams("budget must be positive".into()))
        }
        _ => {}
    }
    if method.uses_adagrad() && !(params.alpha > S::zero()) {
        return Err(Error::InvalidParams("alpha must be positive".into()));
    }
    if !method.uses_adagrad() && !(params.sgd_rate_scale > S::zero()) {
        return Err(Error::InvalidParams(
            "SGD rate scale must be positive".into(),
        ));
    }
    if let Method::SgdDd { gap } = method {
        if gap == 0 {
            return Err(Error::InvalidParams("SGD_DD gap must be >= 1".into()));
        }
    }

    let d = oracle.dim();
    let mut w = params.domain.project(&vec![S::zero(); d]);
    let mut w_sum = vec![S::zero(); d];
    let mut adagrad = AdaGradState::new(params.alpha)?;
    let mut records = Vec::new();
    let mut iterates = params.keep_iterates.then(Vec::new);
    let mut reservoir: Option<Vec<S>> = None;
    let mut iteration = 0u64;
    let mut samples = 0u64;
    let mut next_mark = params.record_every;
    // Marks never exceed a sample budget: the final MLMC draw may overshoot
    // it, and recording past the budget would make row counts seed-dependent.
    let mark_cap = match budget {
        Budget::Samples(b) => b,
        Budget::Iterations(_) => u64::MAX,
    };
    let mut signed = vec![S::zero(); d];

    loop {
        match budget {
            Budget::Iterations(t) if iteration >= t => break,
            Budget::Samples(b) if samples >= b => break,
            _ => {}
        }
        iteration += 1;
        // w_t enters the average before the update, matching the returned
        // mean over the iterates at which gradients are evaluated.
        linalg::axpy(S::one(), &w, &mut w_sum);
        if let Some(hist) = iterates.as_mut() {
            hist.push(w.clone());
        }
        let pre_update = params.select_random_iterate.then(|| w.clone());

        let est: GradientEstimate<S> = match method {
            Method::Mag | Method::SgdMlmc => mlmc_gradient(oracle, &w, stream, &params.levels, rng),
            Method::AdaGrad | Method::Sgd => minibatch_gradient(oracle, &w, stream, 1),
            Method::SgdDd { gap } => {
                for _ in 0..gap - 1 {
                    stream.next_obs();
                }
                let mut est = minibatch_gradient(oracle, &w, stream, 1);
                est.samples_consumed = gap;
                est
            }
        };
        samples += est.samples_consumed;

        signed.copy_from_slice(&est.gradient);
        if params.sign == StepSign::Ascent {
            linalg::scale(&mut signed, -S::one());
        }
        if method.uses_adagrad() {
            adagrad.step_in_place(&mut w, &signed, &params.domain);
        } else {
            let eta = params.sgd_rate_scale / S::of(iteration as f64).sqrt();
            linalg::axpy(-eta, &signed, &mut w);
            params.domain.project_in_place(&mut w);
        }

        if let Some(wt) = pre_update {
            // Reservoir sampling keeps each of w_1..w_T with probability 1/T.
            if rng.gen_range(0..iteration) == 0 {
                reservoir = Some(wt);
            }
        }

        if params.record_every > 0 {
            while samples >= next_mark && next_mark <= mark_cap {
                let mut w_avg = w_sum.clone();
                linalg::scale(&mut w_avg, S::one() / S::of(iteration as f64));
                records.push(TraceRecord {
                    iteration,
                    mark: next_mark,
                    samples_cum: samples,
                    level: est.level,
                    metrics: metric(&w_avg),
                });
                next_mark += params.record_every;
            }
        }
    }

    let mut average = w_sum;
    linalg::scale(&mut average, S::one() / S::of(iteration.max(1) as f64));
    Ok(RunTrace {
        method: method.name().to_string(),
        records,
        average_iterate: average,
        random_selected: reservoir,
        iterations: iteration,
        samples_total: samples,
        iterates,
    })
}
