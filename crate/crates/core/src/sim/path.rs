use serde::Serialize;

use super::{replicate_rng, Sampler};
use crate::error::{Error, Result};
use crate::model::MrwSpec;

/// One simulated trajectory `(M_k, S_k)_{0≤k≤n}`. Walk values are stored in
/// lattice units; `S_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub initial_state: usize,
    pub states: Vec<usize>,
    pub levels: Vec<i128>,
    pub span: f64,
    pub seed: u64,
}

impl PathSample {
    /// Builds a path from states and partial sums (lattice units).
    pub fn new(states: Vec<usize>, levels: Vec<i128>, span: f64, seed: u64) -> Self {
        assert_eq!(states.len(), levels.len());
        assert!(!states.is_empty() && levels[0] == 0);
        PathSample {
            initial_state: states[0],
            states,
            levels,
            span,
            seed,
        }
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// `X_1, …, X_n` in lattice units.
    pub fn increments(&self) -> Vec<i128> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `S_0, …, S_n` in units of the walk.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| l as f64 * self.span).collect()
    }
}

pub fn simulate_path(spec: &MrwSpec, initial_state: usize, n_steps: usize, seed: u64) -> Result<PathSample> {
    if initial_state >= spec.num_states() {
        return Err(Error::UnknownInitialState(initial_state));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let sampler = Sampler::new(spec);
    let mut rng = replicate_rng(seed, 0);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut levels = Vec::with_capacity(n_steps + 1);
    let (mut state, mut level) = (initial_state, 0i128);
    states.push(state);
    levels.push(level);
    for _ in 0..n_steps {
        let (next, jump) = sampler.step(state, &mut rng);
        state = next;
        level += jump as i128;
        states.push(state);
        levels.push(level);
    }
    Ok(PathSample::new(states, levels, spec.span(), seed))
}
