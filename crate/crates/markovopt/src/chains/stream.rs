//! Stateful sample streams over Markov processes.
//!
//! A stream owns its process state and RNG and is never reset or rewound:
//! correlation across optimizer iterations is intrinsic to the setting, so
//! estimators keep pulling from the same stream across iterations and MLMC
//! levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ar1Process, FiniteChain};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Source of correlated observations consumed one at a time.
pub trait MarkovStream {
    type Obs;

    /// Advances the underlying process by one transition and returns the new
    /// observation. Deterministic given the seed and emission history.
    fn next_obs(&mut self) -> Self::Obs;

    /// Number of samples emitted so far; increases by exactly 1 per call to
    /// [`MarkovStream::next_obs`].
    fn samples_emitted(&self) -> u64;
}

/// Stream of state indices from a finite chain.
#[derive(Debug, Clone)]
pub struct ChainStream<S> {
    chain: FiniteChain<S>,
    state: usize,
    rng: ChaCha8Rng,
    emitted: u64,
}

impl<S: Scalar> ChainStream<S> {
    pub fn new(chain: FiniteChain<S>, start_state: usize, seed: u64) -> Result<Self> {
        if start_state >= chain.n_states() {
            return Err(Error::BadState(start_state));
        }
        Ok(Self {
            chain,
            state: start_state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            emitted: 0,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn chain(&self) -> &FiniteChain<S> {
        &self.chain
    }
}

/// Samples the next state from `row` by inverse-CDF on one uniform draw.
pub(crate) fn sample_row<S: Scalar, R: Rng + ?Sized>(row: &[S], rng: &mut R) -> usize {
    let u = S::unit_uniform(rng);
    let mut acc = S::zero();
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

impl<S: Scalar> MarkovStream for ChainStream<S> {
    type Obs = usize;

    fn next_obs(&mut self) -> usize {
        self.state = sample_row(self.chain.row(self.state), &mut self.rng);
        self.emitted += 1;
        self.state
    }

    fn samples_emitted(&self) -> u64 {
        self.emitted
    }
}

/// Stream of state vectors from an AR(1) process.
#[derive(Debug, Clone)]
pub struct Ar1Stream<S> {
    process: Ar1Process<S>,
    rng: ChaCha8Rng,
    emitted: u64,
}

impl<S: Scalar> Ar1Stream<S> {
    pub fn new(process: Ar1Process<S>, seed: u64) -> Self {
        Self {
            process,
            rng: ChaCha8Rng::seed_from_u64(seed),
            emitted: 0,
        }
    }

    pub fn process(&self) -> &Ar1Process<S> {
        &self.process
    }
}

impl<S: Scalar> MarkovStream for Ar1Stream<S> {
    type Obs = Vec<S>;

    fn next_obs(&mut self) -> Vec<S> {
        self.process.step(&mut self.rng);
        self.emitted += 1;
        self.process.state().to_vec()
    }

    fn samples_emitted(&self) -> u64 {
        self.emitted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::two_state_chain;

    #[test]
    fn deterministic_rows_give_deterministic_streams() {
        let chain = FiniteChain::new(2, vec![0.0f64, 1.0, 1.0, 0.0]).unwrap();
        let mut stream = ChainStream::new(chain, 0, 3).unwrap();
        assert_eq!(stream.next_obs(), 1);
        assert_eq!(stream.next_obs(), 0);
        assert_eq!(stream.next_obs(), 1);
        assert_eq!(stream.samples_emitted(), 3);
    }

    #[test]
    fn same_seed_same_emissions() {
        let chain = two_state_chain(0.37f64).unwrap();
        let mut a = ChainStream::new(chain.clone(), 0, 99).unwrap();
        let mut b = ChainStream::new(chain, 0, 99).unwrap();
        for _ in 0..500 {
            assert_eq!(a.next_obs(), b.next_obs());
        }
    }

    #[test]
    fn transition_frequency_matches_p() {
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
        assert!((freq - 0.3).abs() < 0.002, "flip frequency {freq}");
        assert_eq!(stream.samples_emitted(), n);
    }
}
