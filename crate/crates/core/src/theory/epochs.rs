use serde::Serialize;

use super::LadderStationary;
use crate::error::{Error, Result};
use crate::model::{MrwSpec, StationaryDistribution};
use crate::wiener_hopf::{EscapeProbabilities, LadderKernelResult};

/// Distribution of the first strict ascending ladder epoch over the
/// first `m_max` steps for a walk started at level 0 with `M_0 ~ init`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLaw {
    /// `P(σ^> = m)` for `m = 1..=m_max`.
    pub law: Vec<f64>,
    /// Mass that fell below level `−depth` before ascending.
    pub censored: f64,
    /// Mass still in `[−depth, 0]` after `m_max` steps.
    pub alive: f64,
}

/// Time-indexed level recursion on `(state, level)` with levels in
/// `[−depth, 0]` (lattice units).
pub fn epoch_law(spec: &MrwSpec, init: &[f64], m_max: usize, depth: usize) -> Result<EpochLaw> {
    let m = spec.num_states();
    if init.len() != m {
        return Err(Error::DimensionMismatch(init.len(), m));
    }
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be positive".into()));
    }
    let moves: Vec<Vec<(usize, i64, f64)>> = (0..m)
        .map(|i| {
            spec.edges(i)
                .flat_map(|(j, p, f)| f.measure().atoms().map(move |(k, w)| (j, k, p * w)))
                .collect()
        })
        .collect();
    let levels = depth + 1;
    let k = depth as i64;
    // cur[(level + depth)·m + state]
    let mut cur = vec![0.0; levels * m];
    cur[depth * m..].copy_from_slice(init);
    let mut next = vec![0.0; levels * m];
    let mut law = Vec::with_capacity(m_max);
    let mut censored = 0.0;
    for _ in 0..m_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut passed = 0.0;
        for (idx, &w) in cur.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let level = (idx / m) as i64 - k;
            for &(j, x, p) in &moves[idx % m] {
                let target = level + x;
                let mass = w * p;
                if target > 0 {
                    passed += mass;
                } else if target < -k {
                    censored += mass;
                } else {
                    next[(target + k) as usize * m + j] += mass;
                }
            }
        }
        law.push(passed);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(EpochLaw {
        law,
        censored,
        alive: cur.iter().sum(),
    })
}

/// `ν_{i,m} = π^>_i P_i(σ^> = m)`, the joint law of a ladder state and the
/// following inter-ladder time under `P_{π^>}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuTable {
    pub m_max: usize,
    pub depth: usize,
    /// `nu[i][m − 1]`.
    pub nu: Vec<Vec<f64>>,
    /// `P_i(σ^> > m_max)` split into censored and still-running mass.
    pub state_censored: Vec<f64>,
    pub state_alive: Vec<f64>,
    /// `P_{π^>}(σ^> = m)` from the recursion started in `π^>` directly.
    pub epoch_marginal: Vec<f64>,
    /// `1 − Σ_{i, m ≤ m_max} ν_{i,m}`.
    pub defect: f64,
}

impl NuTable {
    /// `Σ_i ν_{i,m}`.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.m_max)
            .map(|m| self.nu.iter().map(|row| row[m]).sum())
            .collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.nu.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn joint_law_nu(spec: &MrwSpec, ladder: &LadderStationary, m_max: usize, depth: usize) -> Result<NuTable> {
    let m = spec.num_states();
    let mut nu = Vec::with_capacity(m);
    let mut state_censored = Vec::with_capacity(m);
    let mut state_alive = Vec::with_capacity(m);
    for i in 0..m {
        let mut init = vec![0.0; m];
        init[i] = 1.0;
        let e = epoch_law(spec, &init, m_max, depth)?;
        nu.push(e.law.iter().map(|p| ladder.pi_ladder[i] * p).collect::<Vec<f64>>());
        state_censored.push(e.censored);
        state_alive.push(e.alive);
    }
    let marginal = epoch_law(spec, &ladder.pi_ladder, m_max, depth)?;
    let total: f64 = nu.iter().flatten().sum();
    Ok(NuTable {
        m_max,
        depth,
        nu,
        state_censored,
        state_alive,
        epoch_marginal: marginal.law,
        defect: 1.0 - total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEpochBound {
    pub state: usize,
    /// `E_i σ^>` from the truncated linear system (a lower estimate).
    pub expected: f64,
    /// `1 / (π_i P_i(#σ^≤ = ∞))` using the lower escape bound.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    /// `Σ_{m ≤ m_max} m P_{π^>}(σ^> = m)`.
    pub truncated_mean: f64,
    /// `P_{π^>}(σ^> > m_max)`.
    pub unresolved_mass: f64,
    /// `Σ_i π^>_i E_i σ^>` from the truncated linear system.
    pub mean: f64,
    /// `1/c` with its enclosure.
    pub inverse_c: f64,
    pub inverse_c_lower: f64,
    pub inverse_c_upper: f64,
    pub per_state: Vec<StateEpochBound>,
}

pub fn expected_ladder_epoch(
    ladder: &LadderStationary,
    nu: &NuTable,
    ascending: &LadderKernelResult,
    escape: &EscapeProbabilities,
    pi: &StationaryDistribution,
    tol: f64,
) -> EpochReport {
    let marginal = nu.column_sums();
    let truncated_mean = marginal.iter().enumerate().map(|(m, p)| (m + 1) as f64 * p).sum();
    let mean = ladder
        .pi_ladder
        .iter()
        .zip(&ascending.expected_steps)
        .map(|(w, e)| w * e)
        .sum();
    let per_state = ladder
        .support
        .iter()
        .map(|&i| {
            let expected = ascending.expected_steps[i];
            let bound = 1.0 / (pi[i] * escape.lower[i]);
            StateEpochBound {
                state: i,
                expected,
                bound,
                holds: expected <= bound * (1.0 + tol),
            }
        })
        .collect();
    EpochReport {
        truncated_mean,
        unresolved_mass: (1.0 - marginal.iter().sum::<f64>()).max(0.0),
        mean,
        inverse_c: 1.0 / ladder.c,
        inverse_c_lower: 1.0 / ladder.c_upper,
        inverse_c_upper: 1.0 / ladder.c_lower,
        per_state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_dual, stationary_distribution, zoo};
    use crate::theory::ladder_stationary_exact;
    use crate::wiener_hopf::{ladder_kernels, TruncationPolicy};

    #[test]
    fn two_cycle_epoch_is_two() {
        let spec = zoo::two_cycle();
        let e = epoch_law(&spec, &[0.0, 1.0], 5, 4).unwrap();
        assert_eq!(e.law, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let a = epoch_law(&spec, &[1.0, 0.0], 5, 4).unwrap();
        assert_eq!(a.law[0], 1.0);
    }

    #[test]
    fn simple_walk_epoch_law_matches_enumeration() {
        // Brute force over all ±1 paths of length ≤ 12.
        let p = 0.6;
        let mut brute = [0.0; 12];
        for n in 1..=12usize {
            for bits in 0u32..(1 << n) {
                let mut s = 0i32;
                let mut first = None;
                let mut prob = 1.0;
                for k in 0..n {
                    let up = bits >> k & 1 == 1;
                    s += if up { 1 } else { -1 };
                    prob *= if up { p } else { 1.0 - p };
                    if s > 0 {
                        first = Some(k + 1);
                        break;
                    }
                }
                if first == Some(n) {
                    brute[n - 1] += prob;
                }
            }
        }
        let spec = zoo::simple_rw(p).unwrap();
        let e = epoch_law(&spec, &[1.0], 12, 64).unwrap();
        for m in 0..12 {
            assert!((e.law[m] - brute[m]).abs() < 1e-14, "m={}", m + 1);
        }
        assert!((e.law[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mass_is_conserved() {
        let spec = zoo::random_lattice(3, 4, 1.0, 3, 0.4).unwrap();
        let e = epoch_law(&spec, &[0.25; 4], 300, 20).unwrap();
        let total: f64 = e.law.iter().sum::<f64>() + e.censored + e.alive;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nu_and_mean_for_simple_walk() {
        let spec = zoo::simple_rw(0.6).unwrap();
        let pi = stationary_distribution(&spec).unwrap();
        let dual = build_dual(&spec, &pi);
        let k = ladder_kernels(&spec, &dual, &pi, &TruncationPolicy::default()).unwrap();
        let ladder = ladder_stationary_exact(&pi, &k.escape).unwrap();
        let nu = joint_law_nu(&spec, &ladder, 3000, k.ascending.depth).unwrap();
        assert!((nu.nu[0][0] - 0.6).abs() < 1e-15);
        assert!(nu.defect < 1e-9, "{}", nu.defect);
        let rep = expected_ladder_epoch(&ladder, &nu, &k.ascending, &k.escape, &pi, 1e-9);
        assert!((rep.mean - 5.0).abs() < 1e-7, "{}", rep.mean);
        assert!((rep.inverse_c - 5.0).abs() < 1e-7);
        assert!(rep.truncated_mean <= rep.mean + 1e-9);
        assert!(rep.per_state[0].holds);
        assert!((rep.per_state[0].bound - 5.0).abs() < 1e-7);
    }
}
