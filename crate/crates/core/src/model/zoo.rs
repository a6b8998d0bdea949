//! Named model generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{stationary_distribution, MrwSpec};
use super::{validate_spec, RawIncrement, RawModel, RawTransition, StateId, StateRef};
use crate::error::{Error, Result};
pub use crate::sim::flower::PetalRule;

fn edge(from: usize, to: usize, prob: f64, points: &[(f64, f64)]) -> RawTransition {
    RawTransition {
        from: StateRef::Index(from),
        to: StateRef::Index(to),
        prob,
        increment: RawIncrement {
            support: points.iter().map(|p| p.0).collect(),
            weights: points.iter().map(|p| p.1).collect(),
        },
    }
}

fn names(v: &[&str]) -> Vec<StateId> {
    v.iter().map(|s| StateId::Name(s.to_string())).collect()
}

/// `a → b` with increment `+2`, `b → a` with increment `−1`.
pub fn two_cycle() -> MrwSpec {
    validate_spec(RawModel {
        states: names(&["a", "b"]),
        transitions: vec![edge(0, 1, 1.0, &[(2.0, 1.0)]), edge(1, 0, 1.0, &[(-1.0, 1.0)])],
        lattice_span: 1.0,
    })
    .expect("two-cycle is valid")
}

/// Ordinary simple random walk `pδ_{+1} + (1−p)δ_{−1}` as a one-state model.
pub fn simple_rw(p: f64) -> Result<MrwSpec> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InfeasibleParams(format!("simple_rw: p = {p} outside [0, 1]")));
    }
    validate_spec(RawModel {
        states: names(&["0"]),
        transitions: vec![edge(0, 0, 1.0, &[(-1.0, 1.0 - p), (1.0, p)])],
        lattice_span: 1.0,
    })
}

/// Zero-drift model where only transitions into `s` move up:
/// `a → s` with `½δ_{+1} + ½δ_{+3}` and `s → a` with `δ_{−2}`.
pub fn remark2() -> MrwSpec {
    validate_spec(RawModel {
        states: names(&["s", "a"]),
        transitions: vec![
            edge(1, 0, 1.0, &[(1.0, 0.5), (3.0, 0.5)]),
            edge(0, 1, 1.0, &[(-2.0, 1.0)]),
        ],
        lattice_span: 1.0,
    })
    .expect("remark2 model is valid")
}

/// Flower chain with hub `0` and petals `1..=n`; petal weights follow `rule`
/// renormalized over the first `n` petals. Increments are `−1/p_0i` out of
/// the hub and `2 + 1/p_0i` back, with `1/p_0i` taken from the untruncated
/// rule so that jumps stay on the integer lattice.
pub fn flower_truncated(n: usize, rule: PetalRule) -> Result<MrwSpec> {
    if n == 0 {
        return Err(Error::InfeasibleParams("flower_truncated: n must be positive".into()));
    }
    let mut weights = Vec::with_capacity(n);
    let mut jumps = Vec::with_capacity(n);
    for i in 1..=n as u64 {
        let r = rule.reciprocal(i);
        if r > (1i128 << 52) {
            return Err(Error::InfeasibleParams(format!(
                "flower_truncated: petal {i} jump {r} exceeds the exact float range"
            )));
        }
        weights.push(rule.prob(i));
        jumps.push(r as f64);
    }
    let total: f64 = weights.iter().sum();
    let mut states = vec![StateId::Name("0".into())];
    let mut transitions = Vec::with_capacity(2 * n);
    for i in 1..=n {
        states.push(StateId::Name(i.to_string()));
        transitions.push(edge(0, i, weights[i - 1] / total, &[(-jumps[i - 1], 1.0)]));
        transitions.push(edge(i, 0, 1.0, &[(2.0 + jumps[i - 1], 1.0)]));
    }
    // Renormalized weights may miss 1 by rounding; push the residue into
    // the first petal.
    let row: f64 = transitions.iter().step_by(2).map(|t| t.prob).sum();
    transitions[0].prob += 1.0 - row;
    validate_spec(RawModel {
        states,
        transitions,
        lattice_span: 1.0,
    })
}

/// Random model with a dense (hence aperiodic) transition matrix and
/// increment laws on `{−max_jump, …, max_jump}·span`, mixed with an extreme
/// point mass so that the stationary drift equals `drift_target` exactly.
pub fn random_lattice(seed: u64, m: usize, span: f64, max_jump: i64, drift_target: f64) -> Result<MrwSpec> {
    if m == 0 {
        return Err(Error::InfeasibleParams("random_lattice: m must be positive".into()));
    }
    if max_jump < 1 {
        return Err(Error::InfeasibleParams("random_lattice: max_jump must be >= 1".into()));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::InvalidSpan(span));
    }
    let target = drift_target / span;
    if !(target.abs() < max_jump as f64) {
        return Err(Error::InfeasibleParams(format!(
            "random_lattice: |drift_target| must be below max_jump·span = {}",
            max_jump as f64 * span
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (2 * max_jump + 1) as usize;
    let mut probs = vec![0.0; m * m];
    let mut laws = vec![vec![0.0; width]; m * m];
    for i in 0..m {
        let row = &mut probs[i * m..(i + 1) * m];
        for p in row.iter_mut() {
            *p = 0.1 + rng.random::<f64>();
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
        for j in 0..m {
            let law = &mut laws[i * m + j];
            for w in law.iter_mut() {
                let u: f64 = rng.random();
                *w = if u < 0.3 { 0.0 } else { u };
            }
            law[rng.random_range(0..width)] += 0.5;
            let s: f64 = law.iter().sum();
            law.iter_mut().for_each(|w| *w /= s);
        }
    }

    let build = |laws: &[Vec<f64>]| -> Result<MrwSpec> {
        let states = (0..m).map(|i| StateId::Name(format!("s{i}"))).collect();
        let mut transitions = Vec::new();
        for i in 0..m {
            // Absorb rounding so that every row sums to one.
            let row = &probs[i * m..(i + 1) * m];
            let fix = 1.0 - row.iter().sum::<f64>();
            for j in 0..m {
                let points: Vec<(f64, f64)> = laws[i * m + j]
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(k, &w)| ((k as i64 - max_jump) as f64 * span, w))
                    .collect();
                let p = if j == m - 1 { row[j] + fix } else { row[j] };
                transitions.push(edge(i, j, p, &points));
            }
        }
        validate_spec(RawModel {
            states,
            transitions,
            lattice_span: span,
        })
    };

    let draft = build(&laws)?;
    let pi = stationary_distribution(&draft)?;
    let mean_index = |laws: &[Vec<f64>]| -> f64 {
        (0..m)
            .map(|i| {
                pi[i]
                    * (0..m)
                        .map(|j| {
                            probs[i * m + j]
                                * laws[i * m + j]
                                    .iter()
                                    .enumerate()
                                    .map(|(k, w)| (k as i64 - max_jump) as f64 * w)
                                    .sum::<f64>()
                        })
                        .sum::<f64>()
            })
            .sum()
    };
    let mu0 = mean_index(&laws);
    let (extreme, slot) = if mu0 < target {
        (max_jump as f64, width - 1)
    } else {
        (-(max_jump as f64), 0)
    };
    let t = (target - mu0) / (extreme - mu0);
    for law in laws.iter_mut() {
        for w in law.iter_mut() {
            *w *= 1.0 - t;
        }
        law[slot] += t;
        // Renormalize away rounding in the mixture.
        let s: f64 = law.iter().sum();
        law.iter_mut().for_each(|w| *w /= s);
    }
    build(&laws)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimpleRwParams {
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowerParams {
    n: usize,
    #[serde(default)]
    rule: PetalRule,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomLatticeParams {
    seed: u64,
    #[serde(default = "default_m")]
    m: usize,
    #[serde(default = "default_span")]
    span: f64,
    #[serde(default = "default_max_jump")]
    max_jump: i64,
    drift_target: f64,
}

fn default_m() -> usize {
    4
}
fn default_span() -> f64 {
    1.0
}
fn default_max_jump() -> i64 {
    3
}

fn params<T: serde::de::DeserializeOwned>(name: &str, v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        v.clone()
    };
    serde_json::from_value(v).map_err(|e| Error::InfeasibleParams(format!("{name}: {e}")))
}

/// Dispatches a generator by name. Parameters are a JSON object.
pub fn model_zoo(name: &str, p: &serde_json::Value) -> Result<MrwSpec> {
    match name {
        "two_cycle" => Ok(two_cycle()),
        "remark2" => Ok(remark2()),
        "simple_rw" => simple_rw(params::<SimpleRwParams>(name, p)?.p),
        "flower_truncated" => {
            let f: FlowerParams = params(name, p)?;
            flower_truncated(f.n, f.rule)
        }
        "random_lattice" => {
            let r: RandomLatticeParams = params(name, p)?;
            random_lattice(r.seed, r.m, r.span, r.max_jump, r.drift_target)
        }
        other => Err(Error::UnknownGenerator(other.to_string())),
    }
}
