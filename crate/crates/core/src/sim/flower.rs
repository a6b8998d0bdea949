//! The flower chain on `{0, 1, 2, …}`: from the hub 0 the chain jumps to
//! petal `i` with probability `p_i` and returns to the hub on the next step.
//! The hub-to-petal increment is `−1/p_i`, the way back is `2 + 1/p_i`; the
//! dual swaps the two. Petals are drawn lazily, so the state space is
//! effectively infinite.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{replicate_rng, run_replicates, MCEstimate, PathSample};
use crate::error::{Error, Result};

/// Largest petal reciprocal produced by the sampler. Geometric draws above
/// this have probability below `2^-120` and are clamped.
const RECIPROCAL_CAP: i128 = 1 << 120;

/// Petal weights `p_i`, `i ≥ 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PetalRule {
    /// `p_i = 2^{-i}`.
    #[default]
    Geometric,
    /// `p_i = 1/(i(i+1))`.
    Harmonic,
}

impl PetalRule {
    pub fn prob(self, i: u64) -> f64 {
        assert!(i >= 1);
        match self {
            PetalRule::Geometric => 0.5f64.powi(i.min(2000) as i32),
            PetalRule::Harmonic => 1.0 / (i as f64 * (i as f64 + 1.0)),
        }
    }

    /// `1/p_i` as an integer.
    pub fn reciprocal(self, i: u64) -> i128 {
        assert!(i >= 1);
        match self {
            PetalRule::Geometric if i >= 120 => RECIPROCAL_CAP,
            PetalRule::Geometric => 1i128 << i,
            PetalRule::Harmonic => {
                let i = i as i128;
                i.saturating_mul(i + 1).min(RECIPROCAL_CAP)
            }
        }
    }

    pub fn sample<R: Rng>(self, rng: &mut R) -> u64 {
        match self {
            PetalRule::Geometric => {
                let mut i = 1;
                loop {
                    let bits = rng.random::<u64>();
                    if bits != 0 {
                        return i + bits.trailing_zeros() as u64;
                    }
                    i += 64;
                }
            }
            PetalRule::Harmonic => {
                // P(I ≥ i) = 1/i, so I = ⌊1/U⌋ with U uniform on (0, 1].
                let u = 1.0 - rng.random::<f64>();
                (1.0 / u).floor() as u64
            }
        }
    }

    /// Smallest petal whose reciprocal is at least `t`.
    fn first_petal_at_least(self, t: i128) -> u64 {
        if t <= self.reciprocal(1) {
            return 1;
        }
        match self {
            PetalRule::Geometric => (128 - (t - 1).leading_zeros()) as u64,
            PetalRule::Harmonic => {
                let mut i = ((t as f64).sqrt() as u64).max(1);
                while self.reciprocal(i) >= t && i > 1 {
                    i -= 1;
                }
                while self.reciprocal(i) < t {
                    i += 1;
                }
                i
            }
        }
    }

    /// `P(1/p_I ≥ t)` for a petal `I` drawn from the rule.
    pub fn tail_reciprocal_at_least(self, t: i128) -> f64 {
        let i = self.first_petal_at_least(t);
        match self {
            PetalRule::Geometric => 0.5f64.powi((i - 1).min(2000) as i32),
            PetalRule::Harmonic => 1.0 / i as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowerDirection {
    #[default]
    Forward,
    Dual,
}

fn flower_step(rule: PetalRule, direction: FlowerDirection, petal: u64, leaving_hub: bool) -> i128 {
    let r = rule.reciprocal(petal);
    match (direction, leaving_hub) {
        (FlowerDirection::Forward, true) | (FlowerDirection::Dual, false) => -r,
        (FlowerDirection::Forward, false) | (FlowerDirection::Dual, true) => 2 + r,
    }
}

/// Simulates the flower walk from the hub. Petal `i` is stored as state `i`.
pub fn simulate_flower(rule: PetalRule, direction: FlowerDirection, n_steps: usize, seed: u64) -> Result<PathSample> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let mut rng = replicate_rng(seed, 0);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut levels = Vec::with_capacity(n_steps + 1);
    let (mut state, mut level) = (0u64, 0i128);
    states.push(0usize);
    levels.push(0i128);
    for _ in 0..n_steps {
        if state == 0 {
            let petal = rule.sample(&mut rng);
            level += flower_step(rule, direction, petal, true);
            state = petal;
        } else {
            level += flower_step(rule, direction, state, false);
            state = 0;
        }
        states.push(state as usize);
        levels.push(level);
    }
    Ok(PathSample::new(states, levels, 1.0, seed))
}

/// Per-step comparison of a flower path with its closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowerAudit {
    pub direction: FlowerDirection,
    pub steps: usize,
    pub formula_violations: usize,
    /// Steps with `S_n < n − 1`; only meaningful for the dual.
    pub lower_bound_violations: usize,
    pub min_level: i128,
}

impl FlowerAudit {
    pub fn pass(&self) -> bool {
        self.formula_violations == 0 && (self.direction == FlowerDirection::Forward || self.lower_bound_violations == 0)
    }
}

/// Checks `S_n = n` for even `n` and `S_n = n − 1 − 1/p_{M_n}` (forward) or
/// `n + 1 + 1/p_{M_n}` (dual) for odd `n`.
pub fn audit_flower(path: &PathSample, rule: PetalRule, direction: FlowerDirection) -> FlowerAudit {
    let mut audit = FlowerAudit {
        direction,
        steps: path.steps(),
        formula_violations: 0,
        lower_bound_violations: 0,
        min_level: 0,
    };
    for (n, (&s, &level)) in path.states.iter().zip(&path.levels).enumerate() {
        let n_i = n as i128;
        let expected = if n % 2 == 0 {
            (s == 0).then_some(n_i)
        } else if s == 0 {
            None
        } else {
            let r = rule.reciprocal(s as u64);
            Some(match direction {
                FlowerDirection::Forward => n_i - 1 - r,
                FlowerDirection::Dual => n_i + 1 + r,
            })
        };
        if expected != Some(level) {
            audit.formula_violations += 1;
        }
        if level < n_i - 1 {
            audit.lower_bound_violations += 1;
        }
        audit.min_level = audit.min_level.min(level);
    }
    audit
}

/// Exact `P_0(min_{n≤N} S_n ≤ −B)` for the forward walk. Even steps sit at
/// `S_n = n ≥ 0` and odd steps reach `−B` iff `1/p_{M_n} ≥ n − 1 + B`, with
/// independent petals at distinct odd steps.
pub fn flower_min_tail_probability(rule: PetalRule, n: u64, b: i64) -> f64 {
    if b <= 0 {
        return 1.0;
    }
    let mut log_keep = 0.0f64;
    for k in (1..=n).step_by(2) {
        let q = rule.tail_reciprocal_at_least(k as i128 - 1 + b as i128);
        if q >= 1.0 {
            return 1.0;
        }
        log_keep += (-q).ln_1p();
    }
    -log_keep.exp_m1()
}

/// Monte Carlo counterpart of [`flower_min_tail_probability`], simulating
/// the forward walk step by step.
pub fn flower_min_tail_mc(rule: PetalRule, n: u64, b: i64, seed: u64, reps: usize) -> Result<MCEstimate> {
    if reps < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicates are needed for a standard error".into(),
        ));
    }
    let threshold = -(b as i128);
    let hits = run_replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let (mut petal, mut level) = (0u64, 0i128);
        if level <= threshold {
            return 1.0;
        }
        for _ in 0..n {
            if petal == 0 {
                petal = rule.sample(&mut rng);
                level += flower_step(rule, FlowerDirection::Forward, petal, true);
            } else {
                level += flower_step(rule, FlowerDirection::Forward, petal, false);
                petal = 0;
            }
            if level <= threshold {
                return 1.0;
            }
        }
        0.0
    });
    Ok(MCEstimate::from_samples(&hits, n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn petal_weights_are_normalized() {
        for rule in [PetalRule::Geometric, PetalRule::Harmonic] {
            let head: f64 = (1..200_000).map(|i| rule.prob(i)).sum();
            assert!((head - 1.0).abs() < 1e-5, "{rule:?}");
            for i in 1..40 {
                let r = rule.reciprocal(i) as f64;
                assert!((r * rule.prob(i) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tail_matches_brute_force() {
        for rule in [PetalRule::Geometric, PetalRule::Harmonic] {
            for t in -3i128..300 {
                let brute = 1.0
                    - (1..5000)
                        .filter(|&i| rule.reciprocal(i) < t)
                        .map(|i| rule.prob(i))
                        .sum::<f64>();
                let fast = rule.tail_reciprocal_at_least(t);
                assert!((brute - fast).abs() < 1e-3, "{rule:?} t={t}: {brute} vs {fast}");
            }
        }
    }

    #[test]
    fn sampler_frequencies() {
        let mut rng = replicate_rng(1, 0);
        let n = 200_000;
        for rule in [PetalRule::Geometric, PetalRule::Harmonic] {
            let ones = (0..n).filter(|_| rule.sample(&mut rng) == 1).count() as f64 / n as f64;
            assert!((ones - 0.5).abs() < 0.005, "{rule:?} {ones}");
        }
    }

    #[test]
    fn path_formulas_hold() {
        for rule in [PetalRule::Geometric, PetalRule::Harmonic] {
            for dir in [FlowerDirection::Forward, FlowerDirection::Dual] {
                let p = simulate_flower(rule, dir, 10_001, 8).unwrap();
                let a = audit_flower(&p, rule, dir);
                assert!(a.pass(), "{a:?}");
                assert_eq!(p.levels[10], 10);
            }
        }
    }

    #[test]
    fn odd_steps_use_petal_reciprocal() {
        let p = simulate_flower(PetalRule::Geometric, FlowerDirection::Forward, 3, 2).unwrap();
        let i = p.states[1] as i128;
        assert_eq!(p.levels[1], -(1 << i));
        assert_eq!(p.levels[2], 2);
        let d = simulate_flower(PetalRule::Geometric, FlowerDirection::Dual, 3, 2).unwrap();
        assert_eq!(d.levels[1], 2 + (1 << i));
    }

    #[test]
    fn corrupted_path_fails_audit() {
        let mut p = simulate_flower(PetalRule::Geometric, FlowerDirection::Forward, 10, 1).unwrap();
        p.levels[4] += 1;
        assert_eq!(
            audit_flower(&p, PetalRule::Geometric, FlowerDirection::Forward).formula_violations,
            1
        );
    }

    #[test]
    fn tail_probability_edge_cases() {
        assert_eq!(flower_min_tail_probability(PetalRule::Geometric, 1, 0), 1.0);
        // One odd step: S_1 = −2^I ≤ −2 always.
        assert_eq!(flower_min_tail_probability(PetalRule::Geometric, 1, 2), 1.0);
        assert_eq!(flower_min_tail_probability(PetalRule::Geometric, 1, 3), 0.5);
        assert_eq!(flower_min_tail_probability(PetalRule::Geometric, 2, 3), 0.5);
        let p3 = flower_min_tail_probability(PetalRule::Geometric, 3, 3);
        // n = 1 needs 2^I ≥ 3, n = 3 needs 2^I ≥ 5.
        assert!((p3 - (1.0 - 0.5 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn tail_probability_against_mc() {
        for (rule, b) in [(PetalRule::Geometric, 500), (PetalRule::Harmonic, 10_000)] {
            let exact = flower_min_tail_probability(rule, 200, b);
            assert!(exact > 0.1 && exact < 0.9, "{exact}");
            let mc = flower_min_tail_mc(rule, 200, b, 5, 20_000).unwrap();
            assert!(mc.within(exact, 4.0, 0.0), "{rule:?} {exact} {mc:?}");
        }
    }
}
