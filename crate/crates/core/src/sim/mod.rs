//! Path simulation, ladder extraction and Monte Carlo estimators.
//!
//! Every replicate draws from its own ChaCha stream selected by
//! `(seed, replicate index)`, and replicate results are reduced in index
//! order, so estimates do not depend on the number of worker threads.

pub mod coupling;
pub mod estimators;
pub mod flower;
mod ladder;
mod path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use coupling::{coupling_experiment, coupling_suite, CouplingReport, CouplingSummary};
pub use estimators::{
    estimate_ladder_occupation, estimate_ladder_occupation_from_law, estimate_sigma0_probability,
    first_hit_ladder_support, OccupationEstimate,
};
pub use ladder::{embedded_renewal, extract_strict_ascending, extract_weak_descending, LadderExtraction};
pub use path::{simulate_path, PathSample};

use crate::model::MrwSpec;

/// RNG for one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Child seed for a named sub-experiment.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn run_replicates<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(f).collect()
}

/// Monte Carlo estimate from i.i.d. replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub replicates: usize,
    pub horizon: u64,
    pub seed: u64,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64], horizon: u64, seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MCEstimate {
            value: mean,
            standard_error: (var / n).sqrt(),
            replicates: samples.len(),
            horizon,
            seed,
        }
    }

    /// `|value − target| ≤ k·SE + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.standard_error + slack
    }
}

/// Precomputed inverse-CDF tables for one model.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
struct Row {
    cum: Vec<f64>,
    targets: Vec<usize>,
    laws: Vec<(Vec<f64>, Vec<i64>)>,
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl Sampler {
    pub(crate) fn new(spec: &MrwSpec) -> Self {
        let rows = (0..spec.num_states())
            .map(|i| {
                let mut acc = 0.0;
                let mut row = Row {
                    cum: Vec::new(),
                    targets: Vec::new(),
                    laws: Vec::new(),
                };
                for (j, p, f) in spec.edges(i) {
                    acc += p;
                    row.cum.push(acc);
                    row.targets.push(j);
                    let mut c = 0.0;
                    let (cum, jumps) = f
                        .measure()
                        .atoms()
                        .map(|(k, w)| {
                            c += w;
                            (c, k)
                        })
                        .unzip();
                    row.laws.push((cum, jumps));
                }
                row
            })
            .collect();
        Sampler { rows }
    }

    #[inline]
    pub(crate) fn step<R: Rng>(&self, state: usize, rng: &mut R) -> (usize, i64) {
        let row = &self.rows[state];
        let e = pick(&row.cum, rng.random::<f64>());
        let (cum, jumps) = &row.laws[e];
        let k = if jumps.len() == 1 {
            0
        } else {
            pick(cum, rng.random::<f64>())
        };
        (row.targets[e], jumps[k])
    }

    pub(crate) fn sample_index<R: Rng>(weights_cum: &[f64], rng: &mut R) -> usize {
        pick(weights_cum, rng.random::<f64>())
    }
}
