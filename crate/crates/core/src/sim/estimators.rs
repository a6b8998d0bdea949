use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{replicate_rng, run_replicates, MCEstimate, Sampler};
use crate::error::{Error, Result};
use crate::model::{build_dual, MrwSpec, StationaryDistribution};

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicates are needed for a standard error".into(),
        ));
    }
    Ok(())
}

/// Long-run occupation of the ladder chain, per state.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationEstimate {
    pub per_state: Vec<MCEstimate>,
    /// Replicates that hit `max_steps` before collecting `n_ladder` epochs;
    /// their frequencies cover only the epochs seen.
    pub exhausted_replicates: usize,
}

/// Runs `reps` independent paths from `initial_state` and records the
/// ladder states with index in `[burn_in, burn_in + n_ladder)`.
pub fn estimate_ladder_occupation(
    spec: &MrwSpec,
    initial_state: usize,
    n_ladder: usize,
    burn_in: usize,
    max_steps: u64,
    seed: u64,
    reps: usize,
) -> Result<OccupationEstimate> {
    if initial_state >= spec.num_states() {
        return Err(Error::UnknownInitialState(initial_state));
    }
    occupation(spec, |_| initial_state, n_ladder, burn_in, max_steps, seed, reps)
}

/// Like [`estimate_ladder_occupation`], but each replicate starts from a
/// state drawn from `law`. Started from the ladder chain's stationary law,
/// no burn-in is needed.
pub fn estimate_ladder_occupation_from_law(
    spec: &MrwSpec,
    law: &[f64],
    n_ladder: usize,
    max_steps: u64,
    seed: u64,
    reps: usize,
) -> Result<OccupationEstimate> {
    if law.len() != spec.num_states() {
        return Err(Error::DimensionMismatch(law.len(), spec.num_states()));
    }
    let cum = cumulative(law);
    occupation(
        spec,
        |rng| Sampler::sample_index(&cum, rng),
        n_ladder,
        0,
        max_steps,
        seed,
        reps,
    )
}

fn cumulative(law: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    law.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn occupation<F>(
    spec: &MrwSpec,
    start: F,
    n_ladder: usize,
    burn_in: usize,
    max_steps: u64,
    seed: u64,
    reps: usize,
) -> Result<OccupationEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync + Send,
{
    check_reps(reps)?;
    if n_ladder == 0 {
        return Err(Error::InvalidArgument("n_ladder must be positive".into()));
    }
    let m = spec.num_states();
    let sampler = Sampler::new(spec);
    let runs = run_replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let mut counts = vec![0u64; m];
        let mut state = start(&mut rng);
        let (mut level, mut record) = (0i128, 0i128);
        let mut index = 0usize;
        let mut seen = 0usize;
        if burn_in == 0 {
            counts[state] += 1;
            seen += 1;
        }
        let mut steps = 0u64;
        while seen < n_ladder && steps < max_steps {
            let (next, jump) = sampler.step(state, &mut rng);
            steps += 1;
            state = next;
            level += jump as i128;
            if level > record {
                record = level;
                index += 1;
                if index >= burn_in {
                    counts[state] += 1;
                    seen += 1;
                }
            }
        }
        (counts, seen, seen < n_ladder)
    });
    let exhausted_replicates = runs.iter().filter(|r| r.2).count();
    if let Some(r) = runs.iter().find(|r| r.1 == 0) {
        return Err(Error::HorizonExhausted {
            steps: max_steps as usize,
            found: r.1,
            wanted: n_ladder,
        });
    }
    let per_state = (0..m)
        .map(|i| {
            let freqs: Vec<f64> = runs.iter().map(|(c, seen, _)| c[i] as f64 / *seen as f64).collect();
            MCEstimate::from_samples(&freqs, max_steps, seed)
        })
        .collect();
    Ok(OccupationEstimate {
        per_state,
        exhausted_replicates,
    })
}

/// Estimates `P(M_0 = i, #S_n > 0 for 1 ≤ n ≤ n_back)` with `M_0 ~ π` and the
/// dual walk run backwards from `M_0`. Truncation at `n_back` biases the
/// estimate upwards; with a fixed seed it is non-increasing in `n_back`.
pub fn estimate_sigma0_probability(
    spec: &MrwSpec,
    pi: &StationaryDistribution,
    n_back: usize,
    seed: u64,
    reps: usize,
) -> Result<Vec<MCEstimate>> {
    check_reps(reps)?;
    if n_back == 0 {
        return Err(Error::InvalidArgument("n_back must be positive".into()));
    }
    let m = spec.num_states();
    let dual = build_dual(spec, pi);
    let sampler = Sampler::new(&dual);
    let cum = cumulative(&pi.pi);
    let runs = run_replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let start = Sampler::sample_index(&cum, &mut rng);
        let (mut state, mut level) = (start, 0i128);
        for _ in 0..n_back {
            let (next, jump) = sampler.step(state, &mut rng);
            state = next;
            level += jump as i128;
            if level <= 0 {
                return (start, false);
            }
        }
        (start, true)
    });
    Ok((0..m)
        .map(|i| {
            let hits: Vec<f64> = runs
                .iter()
                .map(|&(s, ok)| if s == i && ok { 1.0 } else { 0.0 })
                .collect();
            MCEstimate::from_samples(&hits, n_back as u64, seed)
        })
        .collect())
}

/// Fraction of replicates whose ladder chain enters `support` at some
/// ladder index `n ≥ 1` within `horizon` steps.
pub fn first_hit_ladder_support(
    spec: &MrwSpec,
    support: &[usize],
    initial_state: usize,
    horizon: u64,
    seed: u64,
    reps: usize,
) -> Result<MCEstimate> {
    check_reps(reps)?;
    if initial_state >= spec.num_states() {
        return Err(Error::UnknownInitialState(initial_state));
    }
    let mut member = vec![false; spec.num_states()];
    for &s in support {
        *member.get_mut(s).ok_or(Error::UnknownInitialState(s))? = true;
    }
    let sampler = Sampler::new(spec);
    let hits = run_replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let (mut state, mut level, mut record) = (initial_state, 0i128, 0i128);
        for _ in 0..horizon {
            let (next, jump) = sampler.step(state, &mut rng);
            state = next;
            level += jump as i128;
            if level > record {
                record = level;
                if member[state] {
                    return 1.0;
                }
            }
        }
        0.0
    });
    Ok(MCEstimate::from_samples(&hits, horizon, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{stationary_distribution, zoo};

    #[test]
    fn two_cycle_occupation_is_b() {
        let spec = zoo::two_cycle();
        let est = estimate_ladder_occupation(&spec, 0, 50, 1, 10_000, 1, 4).unwrap();
        assert_eq!(est.per_state[0].value, 0.0);
        assert_eq!(est.per_state[1].value, 1.0);
        assert_eq!(est.per_state[1].standard_error, 0.0);
    }

    #[test]
    fn remark2_ladder_states_are_s() {
        let spec = zoo::remark2();
        for start in 0..2 {
            let est = estimate_ladder_occupation(&spec, start, 200, 1, 1_000_000, 3, 4).unwrap();
            assert_eq!(est.per_state[0].value, 1.0);
        }
    }

    #[test]
    fn sigma0_two_cycle() {
        let spec = zoo::two_cycle();
        let pi = stationary_distribution(&spec).unwrap();
        let est = estimate_sigma0_probability(&spec, &pi, 10, 4, 4000).unwrap();
        assert_eq!(est[0].value, 0.0);
        assert!(est[1].within(0.5, 4.0, 0.0), "{:?}", est[1]);
    }

    #[test]
    fn sigma0_all_positive_increments_equals_pi() {
        let text = r#"{"states": ["x", "y"], "transitions": [
            {"from": 0, "to": 1, "prob": 1, "increment": {"support": [1], "weights": [1]}},
            {"from": 1, "to": 0, "prob": 0.5, "increment": {"support": [2], "weights": [1]}},
            {"from": 1, "to": 1, "prob": 0.5, "increment": {"support": [1], "weights": [1]}}],
            "lattice_span": 1}"#;
        let spec = MrwSpec::from_json(text).unwrap();
        let pi = stationary_distribution(&spec).unwrap();
        let est = estimate_sigma0_probability(&spec, &pi, 20, 9, 4000).unwrap();
        let total: f64 = est.iter().map(|e| e.value).sum();
        assert_eq!(total, 1.0);
        for i in 0..2 {
            assert!(est[i].within(pi[i], 4.0, 0.0));
        }
    }

    #[test]
    fn sigma0_is_monotone_in_horizon() {
        let spec = zoo::random_lattice(5, 3, 1.0, 2, 0.2).unwrap();
        let pi = stationary_distribution(&spec).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for n in [1, 2, 5, 10, 50, 200] {
            let v: Vec<f64> = estimate_sigma0_probability(&spec, &pi, n, 17, 500)
                .unwrap()
                .iter()
                .map(|e| e.value)
                .collect();
            if let Some(p) = &prev {
                assert!(v.iter().zip(p).all(|(a, b)| a <= b));
            }
            prev = Some(v);
        }
    }

    #[test]
    fn first_hit_examples() {
        let two = zoo::two_cycle();
        let e = first_hit_ladder_support(&two, &[1], 0, 10, 1, 8).unwrap();
        assert_eq!(e.value, 1.0);
        let r2 = zoo::remark2();
        let e = first_hit_ladder_support(&r2, &[0], 1, 10_000, 1, 50).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn stationary_start_needs_no_burn_in() {
        let spec = zoo::two_cycle();
        let est = estimate_ladder_occupation_from_law(&spec, &[0.0, 1.0], 20, 1000, 2, 4).unwrap();
        assert_eq!(est.per_state[1].value, 1.0);
        assert!(estimate_ladder_occupation_from_law(&spec, &[1.0], 20, 1000, 2, 4).is_err());
    }

    #[test]
    fn too_few_replicates() {
        let spec = zoo::two_cycle();
        assert!(matches!(
            estimate_ladder_occupation(&spec, 0, 5, 0, 100, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }
}
