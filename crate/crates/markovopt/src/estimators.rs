//! Gradient estimation from Markovian streams.
//!
//! Three estimators are provided: a plain average over a fixed minibatch, and
//! the multi-level Monte Carlo (MLMC) estimator
//!
//! ```text
//! g = g^0 + c_J (g^J - g^(J-1)),   J ~ Geom(1/2),
//! ```
//!
//! where `g^j` averages the stochastic gradients of the first `2^j` samples
//! of a single consecutive block pulled from the stream. The level-`J`
//! correction is compensated so that the conditional mean of the estimator
//! telescopes to `g^(j_max)`: the estimator has the bias of a large
//! minibatch at the expected cost of `O(log T)` samples.
//!
//! Two level distributions are supported: the full geometric one (with the
//! overflow branch that returns `g^0` whenever `2^J` exceeds the horizon) and
//! a truncated geometric on `{1, ..., K}`.

use rand::Rng;

use crate::chains::MarkovStream;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// How the level-`J` correction is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compensation {
    /// `c_j = 1 / P(J = j)`; keeps the telescoping identity exact for the
    /// truncated distribution as well.
    ExactInverseProbability,
    /// `c_j = 2^j` regardless of truncation, mirroring the plain geometric
    /// multiplier.
    PaperPowerOfTwo,
}

/// Support of the level distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelKind {
    /// `P(J = j) = 2^-j` for all `j >= 1`; draws with `2^J > horizon` take
    /// the single-sample overflow branch.
    FullGeometric { horizon: u64 },
    /// `P(J = j) = 2^-j / (1 - 2^-K)` on `{1, ..., K}`.
    TruncatedGeometric { levels: u32 },
}

/// Distribution over MLMC levels together with its compensation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelDistribution {
    kind: LevelKind,
    compensation: Compensation,
}

impl LevelDistribution {
    pub fn full_geometric(horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        Ok(Self {
            kind: LevelKind::FullGeometric { horizon },
            compensation: Compensation::ExactInverseProbability,
        })
    }

    pub fn truncated_geometric(levels: u32) -> Result<Self> {
        if levels == 0 || levels > 62 {
            return Err(Error::InvalidParams(format!(
                "truncation level must lie in [1, 62], got {levels}"
            )));
        }
        Ok(Self {
            kind: LevelKind::TruncatedGeometric { levels },
            compensation: Compensation::ExactInverseProbability,
        })
    }

    pub fn with_compensation(mut self, compensation: Compensation) -> Self {
        self.compensation = compensation;
        self
    }

    pub fn kind(&self) -> LevelKind {
        self.kind
    }

    pub fn compensation(&self) -> Compensation {
        self.compensation
    }

    /// Largest level that contributes a correction term: `floor(log2 T)` for
    /// the full distribution, `K` for the truncated one.
    pub fn j_max(&self) -> u32 {
        match self.kind {
            LevelKind::FullGeometric { horizon } => 63 - horizon.leading_zeros(),
            LevelKind::TruncatedGeometric { levels } => levels,
        }
    }

    /// `P(J = j)`.
    pub fn level_probability<S: Scalar>(&self, j: u32) -> S {
        if j == 0 {
            return S::zero();
        }
        match self.kind {
            LevelKind::FullGeometric { .. } => S::of(0.5).powi(j as i32),
            LevelKind::TruncatedGeometric { levels } => {
                if j > levels {
                    S::zero()
                } else {
                    let norm = S::one() - S::of(0.5).powi(levels as i32);
                    S::of(0.5).powi(j as i32) / norm
                }
            }
        }
    }

    /// Correction multiplier `c_j` under the configured compensation.
    pub fn compensator<S: Scalar>(&self, j: u32) -> S {
        match self.compensation {
            Compensation::ExactInverseProbability => self.level_probability::<S>(j).recip(),
            Compensation::PaperPowerOfTwo => S::of(2.0).powi(j as i32),
        }
    }

    /// Draws a level. The full geometric draw counts fair-coin trials until
    /// the first success; the truncated draw inverts the renormalized CDF on
    /// a single uniform.
    pub fn draw_level<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self.kind {
            LevelKind::FullGeometric { .. } => {
                let mut j = 1u32;
                while !rng.gen_bool(0.5) {
                    j += 1;
                }
                j
            }
            LevelKind::TruncatedGeometric { levels } => {
                let u: f64 = rng.gen();
                let norm = 1.0 - 0.5f64.powi(levels as i32);
                let mut cdf = 0.0;
                for j in 1..=levels {
                    cdf += 0.5f64.powi(j as i32) / norm;
                    if u < cdf {
                        return j;
                    }
                }
                levels
            }
        }
    }

    /// Expected number of stream samples consumed per MLMC draw.
    ///
    /// Full geometric with horizon `T`: `1 + sum_{j=1}^{j_max} 2^-j (2^j - 1)
    /// = j_max + 2^-j_max`. Truncated: `sum_j P(J = j) 2^j`.
    pub fn expected_sample_count<S: Scalar>(&self) -> S {
        match self.kind {
            LevelKind::FullGeometric { .. } => {
                let j_max = self.j_max();
                let mut total = S::one();
                for j in 1..=j_max {
                    let p = S::of(0.5).powi(j as i32);
                    total += p * (S::of(2.0).powi(j as i32) - S::one());
                }
                total
            }
            LevelKind::TruncatedGeometric { levels } => {
                let mut total = S::zero();
                for j in 1..=levels {
                    total += self.level_probability::<S>(j) * S::of(2.0).powi(j as i32);
                }
                total
            }
        }
    }

    /// Whether a drawn level exceeds the horizon (full geometric only).
    fn overflows(&self, j: u32) -> bool {
        match self.kind {
            LevelKind::FullGeometric { horizon } => j >= 64 || (1u64 << j) > horizon,
            LevelKind::TruncatedGeometric { .. } => false,
        }
    }
}

/// A gradient estimate together with its sample accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<S> {
    pub gradient: Vec<S>,
    /// Stream samples consumed to form the estimate: `2^level` on the MLMC
    /// level path, 1 on the overflow branch, `n` for an `n`-sample minibatch.
    pub samples_consumed: u64,
    /// Drawn MLMC level `J`; 0 for non-MLMC estimators.
    pub level: u32,
}

/// Per-observation gradient oracle of a problem instance.
pub trait GradientOracle<S: Scalar> {
    type Obs;

    fn dim(&self) -> usize;

    /// Writes the stochastic (semi-)gradient at `w` for one observation.
    fn gradient(&self, w: &[S], obs: &Self::Obs, out: &mut [S]);
}

/// Average of the stochastic gradients over the next `n` stream emissions.
pub fn minibatch_gradient<S, O, St>(
    oracle: &O,
    w: &[S],
    stream: &mut St,
    n: u64,
) -> GradientEstimate<S>
where
    S: Scalar,
    O: GradientOracle<S>,
    St: MarkovStream<Obs = O::Obs>,
{
    let d = oracle.dim();
    let mut sum = vec![S::zero(); d];
    let mut g = vec![S::zero(); d];
    for _ in 0..n {
        let obs = stream.next_obs();
        oracle.gradient(w, &obs, &mut g);
        linalg::axpy(S::one(), &g, &mut sum);
    }
    linalg::scale(&mut sum, S::one() / S::of(n as f64));
    GradientEstimate {
        gradient: sum,
        samples_consumed: n,
        level: 0,
    }
}

/// MLMC gradient estimate: draws a level and delegates to
/// [`mlmc_gradient_at_level`].
pub fn mlmc_gradient<S, O, St, R>(
    oracle: &O,
    w: &[S],
    stream: &mut St,
    dist: &LevelDistribution,
    rng: &mut R,
) -> GradientEstimate<S>
where
    S: Scalar,
    O: GradientOracle<S>,
    St: MarkovStream<Obs = O::Obs>,
    R: Rng + ?Sized,
{
    let j = dist.draw_level(rng);
    mlmc_gradient_at_level(oracle, w, stream, dist, j)
}

/// MLMC estimate at a fixed level `j >= 1` (exposed so tests can pin the
/// level): consumes `2^j` consecutive samples and returns
/// `g^0 + c_j (g^j - g^(j-1))` over nested prefix averages, or the
/// single-sample `g^0` when `2^j` exceeds the horizon.
pub fn mlmc_gradient_at_level<S, O, St>(
    oracle: &O,
    w: &[S],
    stream: &mut St,
    dist: &LevelDistribution,
    j: u32,
) -> GradientEstimate<S>
where
    S: Scalar,
    O: GradientOracle<S>,
    St: MarkovStream<Obs = O::Obs>,
{
    assert!(j >= 1, "MLMC levels start at 1");
    let d = oracle.dim();
    if dist.overflows(j) {
        let mut est = minibatch_gradient(oracle, w, stream, 1);
        est.level = j;
        return est;
    }
    let count = 1u64 << j;
    let half = count / 2;
    let mut g0 = vec![S::zero(); d];
    let mut sum = vec![S::zero(); d];
    let mut sum_half = vec![S::zero(); d];
    let mut g = vec![S::zero(); d];
    for i in 0..count {
        let obs = stream.next_obs();
        oracle.gradient(w, &obs, &mut g);
        if i == 0 {
            g0.copy_from_slice(&g);
        }
        linalg::axpy(S::one(), &g, &mut sum);
        if i + 1 == half {
            sum_half.copy_from_slice(&sum);
        }
    }
    let c = dist.compensator::<S>(j);
    let g_top = S::one() / S::of(count as f64);
    let g_prev = S::one() / S::of(half as f64);
    let mut out = g0;
    for k in 0..d {
        out[k] += c * (sum[k] * g_top - sum_half[k] * g_prev);
    }
    GradientEstimate {
        gradient: out,
        samples_consumed: count,
        level: j,
    }
}

/// Prefix averages `g^j` over the first `2^j` of a fixed sample block, for
/// `j = 0..=log2(len)`. Test oracle for the telescoping identity.
pub fn level_decomposition<S, O>(oracle: &O, w: &[S], samples: &[O::Obs]) -> Result<Vec<Vec<S>>>
where
    S: Scalar,
    O: GradientOracle<S>,
{
    let len = samples.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let d = oracle.dim();
    let j_max = len.trailing_zeros();
    let mut sum = vec![S::zero(); d];
    let mut g = vec![S::zero(); d];
    let mut levels = Vec::with_capacity(j_max as usize + 1);
    for (i, obs) in samples.iter().enumerate() {
        oracle.gradient(w, obs, &mut g);
        linalg::axpy(S::one(), &g, &mut sum);
        let count = i + 1;
        if count.is_power_of_two() {
            let mut avg = sum.clone();
            linalg::scale(&mut avg, S::one() / S::of(count as f64));
            levels.push(avg);
        }
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Oracle mapping state index `i` to a fixed gradient vector.
    struct TableOracle {
        grads: Vec<Vec<f64>>,
    }

    impl GradientOracle<f64> for TableOracle {
        type Obs = usize;

        fn dim(&self) -> usize {
            self.grads[0].len()
        }

        fn gradient(&self, _w: &[f64], obs: &usize, out: &mut [f64]) {
            out.copy_from_slice(&self.grads[*obs]);
        }
    }

    /// Stream replaying a fixed emission sequence (cyclically).
    struct FixedStream {
        seq: Vec<usize>,
        pos: usize,
        emitted: u64,
    }

    impl FixedStream {
        fn new(seq: Vec<usize>) -> Self {
            Self {
                seq,
                pos: 0,
                emitted: 0,
            }
        }
    }

    impl MarkovStream for FixedStream {
        type Obs = usize;

        fn next_obs(&mut self) -> usize {
            let v = self.seq[self.pos % self.seq.len()];
            self.pos += 1;
            self.emitted += 1;
            v
        }

        fn samples_emitted(&self) -> u64 {
            self.emitted
        }
    }

    #[test]
    fn minibatch_averages_fixed_sequence() {
        // Per-state gradients a, b; emission sequence (1,2,2,1) -> hand
        // average over four samples.
        let oracle = TableOracle {
            grads: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        };
        let mut stream = FixedStream::new(vec![0, 1, 1, 0]);
        let est = minibatch_gradient(&oracle, &[0.0, 0.0], &mut stream, 4);
        assert_eq!(est.samples_consumed, 4);
        assert_eq!(est.level, 0);
        assert!((est.gradient[0] - 0.5).abs() < 1e-15);
        assert!((est.gradient[1] - 1.0).abs() < 1e-15);

        let mut stream = FixedStream::new(vec![1]);
        let est = minibatch_gradient(&oracle, &[0.0, 0.0], &mut stream, 1);
        assert_eq!(est.gradient, vec![0.0, 2.0]);
    }

    #[test]
    fn constant_gradient_field_passes_through() {
        let oracle = TableOracle {
            grads: vec![vec![3.0, -1.0]],
        };
        let mut stream = FixedStream::new(vec![0]);
        for n in [1u64, 2, 7] {
            let est = minibatch_gradient(&oracle, &[0.0, 0.0], &mut stream, n);
            assert!((est.gradient[0] - 3.0).abs() < 1e-15);
            assert!((est.gradient[1] + 1.0).abs() < 1e-15);
        }
        // The MLMC correction vanishes when all per-sample gradients agree.
        let dist = LevelDistribution::full_geometric(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let est = mlmc_gradient(&oracle, &[0.0, 0.0], &mut stream, &dist, &mut rng);
            assert!((est.gradient[0] - 3.0).abs() < 1e-12);
            assert!((est.gradient[1] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_branch_consumes_single_sample() {
        let oracle = TableOracle {
            grads: vec![vec![1.0], vec![2.0]],
        };
        let dist = LevelDistribution::full_geometric(8).unwrap();
        let mut stream = FixedStream::new(vec![1, 0, 0, 0]);
        // 2^4 = 16 > 8: only g^0 from one fresh sample.
        let est = mlmc_gradient_at_level(&oracle, &[0.0], &mut stream, &dist, 4);
        assert_eq!(est.samples_consumed, 1);
        assert_eq!(est.level, 4);
        assert_eq!(est.gradient, vec![2.0]);
        assert_eq!(stream.samples_emitted(), 1);
    }

    #[test]
    fn fixed_level_matches_hand_evaluation() {
        // Emissions with per-state gradients a=1, b=2, c=4, d=8 at J=2:
        // g0=a, g1=(a+b)/2, g2=(a+b+c+d)/4, estimate = a + 4 (g2 - g1).
        let oracle = TableOracle {
            grads: vec![vec![1.0], vec![2.0], vec![4.0], vec![8.0]],
        };
        let dist = LevelDistribution::full_geometric(8).unwrap();
        let mut stream = FixedStream::new(vec![0, 1, 2, 3]);
        let est = mlmc_gradient_at_level(&oracle, &[0.0], &mut stream, &dist, 2);
        assert_eq!(est.samples_consumed, 4);
        assert_eq!(est.level, 2);
        let g1 = 1.5;
        let g2 = 15.0 / 4.0;
        assert!((est.gradient[0] - (1.0 + 4.0 * (g2 - g1))).abs() < 1e-12);
    }

    #[test]
    fn full_geometric_level_frequencies() {
        let dist = LevelDistribution::full_geometric(1 << 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 1_000_000u64;
        let mut count3 = 0u64;
        for _ in 0..draws {
            if dist.draw_level(&mut rng) == 3 {
                count3 += 1;
            }
        }
        let freq = count3 as f64 / draws as f64;
        assert!((freq - 0.125).abs() < 0.002, "freq(J=3) = {freq}");
    }

    #[test]
    fn truncated_probabilities_and_degenerate_case() {
        let dist = LevelDistribution::truncated_geometric(5).unwrap();
        let p1: f64 = dist.level_probability(1);
        assert!((p1 - 16.0 / 31.0).abs() < 1e-15);
        let total: f64 = (1..=5).map(|j| dist.level_probability::<f64>(j)).sum();
        assert!((total - 1.0).abs() < 1e-15);

        let single = LevelDistribution::truncated_geometric(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(single.draw_level(&mut rng), 1);
        }
    }

    #[test]
    fn expected_sample_counts() {
        let t8 = LevelDistribution::full_geometric(8).unwrap();
        assert_eq!(t8.expected_sample_count::<f64>(), 3.125);
        let t1 = LevelDistribution::full_geometric(1).unwrap();
        assert_eq!(t1.expected_sample_count::<f64>(), 1.0);
        let t20 = LevelDistribution::full_geometric(1 << 20).unwrap();
        assert_eq!(t20.expected_sample_count::<f64>(), 20.0 + 0.5f64.powi(20),);
        // Truncated K=5: sum_j 2^-j/(1 - 2^-5) * 2^j = 5 / (31/32).
        let k5 = LevelDistribution::truncated_geometric(5).unwrap();
        assert!((k5.expected_sample_count::<f64>() - 160.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn level_decomposition_prefix_averages() {
        let oracle = TableOracle {
            grads: vec![vec![1.0], vec![2.0], vec![4.0], vec![8.0]],
        };
        let levels = level_decomposition(&oracle, &[0.0], &[0usize, 1, 2, 3]).unwrap();
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[0], vec![1.0]);
        assert_eq!(levels[1], vec![1.5]);
        assert_eq!(levels[2], vec![3.75]);

        let single = level_decomposition(&oracle, &[0.0], &[2usize]).unwrap();
        assert_eq!(single, vec![vec![4.0]]);

        let same = level_decomposition(&oracle, &[0.0], &[1usize, 1, 1, 1]).unwrap();
        for level in same {
            assert_eq!(level, vec![2.0]);
        }

        assert!(matches!(
            level_decomposition(&oracle, &[0.0], &[0usize, 1, 2]),
            Err(Error::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn telescoping_identity_table_oracle() {
        // g^0 + sum_j P(J=j) c_j (g^j - g^(j-1)) must equal g^(j_max)
        // whenever P(j) c_j = 1, and g^K for the truncated distribution with
        // exact inverse-probability compensation.
        let oracle = TableOracle {
            grads: (0..16).map(|i| vec![(i * i) as f64, -(i as f64)]).collect(),
        };
        let samples: Vec<usize> = (0..16).collect();
        let levels = level_decomposition(&oracle, &[0.0, 0.0], &samples).unwrap();
        for dist in [
            LevelDistribution::full_geometric(16).unwrap(),
            LevelDistribution::truncated_geometric(4).unwrap(),
        ] {
            let j_max = dist.j_max() as usize;
            let mut acc = levels[0].clone();
            for j in 1..=j_max {
                let w: f64 =
                    dist.level_probability::<f64>(j as u32) * dist.compensator::<f64>(j as u32);
                for k in 0..2 {
                    acc[k] += w * (levels[j][k] - levels[j - 1][k]);
                }
            }
            for k in 0..2 {
                assert!(
                    (acc[k] - levels[j_max][k]).abs() < 1e-10,
                    "{dist:?} coordinate {k}"
                );
            }
        }
    }

    #[test]
    fn monte_carlo_sample_count_t8() {
        let oracle = TableOracle {
            grads: vec![vec![1.0], vec![2.0]],
        };
        let dist = LevelDistribution::full_geometric(8).unwrap();
        let mut stream = FixedStream::new(vec![0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000u64;
        let mut total = 0u64;
        for _ in 0..draws {
            total += mlmc_gradient(&oracle, &[0.0], &mut stream, &dist, &mut rng).samples_consumed;
        }
        let mean = total as f64 / draws as f64;
        assert!((mean - 3.125).abs() < 0.05, "mean consumption {mean}");
        assert_eq!(stream.samples_emitted(), total);
    }
}
