//! Independent coupling of two copies of the walk started in different
//! states, spliced at the first meeting time of the driving chains.
//!
//! With `D = S'_T − S''_T`, the spliced walk is `Ŝ_n = S''_n + D` after `T`.
//! The first strict ladder epoch of `S''` above `Y + (−D)^+` and the first
//! of `Ŝ` above `Y + D^+` coincide, and from there on both ladder epoch
//! sequences are identical.

use serde::Serialize;

use super::{replicate_rng, run_replicates, Sampler};
use crate::error::{Error, Result};
use crate::model::MrwSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub start: (usize, usize),
    pub horizon: u64,
    /// First `n` with `M'_n = M''_n`, if reached within the horizon.
    pub coupling_time: Option<u64>,
    pub y_prime: Option<i128>,
    pub y_second: Option<i128>,
    pub y: Option<i128>,
    /// Index into the ladder epochs of `S''`.
    pub tau: Option<usize>,
    /// Index into the ladder epochs of the spliced walk.
    pub rho: Option<usize>,
    pub first_common_ladder_epoch: Option<u64>,
    /// Number of ladder epochs compared from `τ` and `ρ` onwards.
    pub compared_epochs: usize,
    pub matched_tail: bool,
}

impl CouplingReport {
    pub fn observed(&self) -> bool {
        self.tau.is_some() && self.rho.is_some()
    }
}

/// Strict ascending ladder epochs of a walk given as a level sequence.
fn ladder_epochs(levels: impl Iterator<Item = i128>) -> (Vec<u64>, Vec<i128>) {
    let mut epochs = Vec::new();
    let mut heights = Vec::new();
    let mut record = i128::MIN;
    for (k, s) in levels.enumerate() {
        if k == 0 || s > record {
            record = s;
            epochs.push(k as u64);
            heights.push(s);
        }
    }
    (epochs, heights)
}

fn run_coupling(
    spec: &MrwSpec,
    sampler: &Sampler,
    (i, j): (usize, usize),
    horizon: u64,
    seed: u64,
    pair: u64,
) -> CouplingReport {
    let mut rng_a = replicate_rng(seed, 2 * pair);
    let mut rng_b = replicate_rng(seed, 2 * pair + 1);
    let mut report = CouplingReport {
        start: (i, j),
        horizon,
        coupling_time: None,
        y_prime: None,
        y_second: None,
        y: None,
        tau: None,
        rho: None,
        first_common_ladder_epoch: None,
        compared_epochs: 0,
        matched_tail: false,
    };
    debug_assert!(i < spec.num_states() && j < spec.num_states());

    let (mut ma, mut mb) = (i, j);
    let (mut sa, mut sb) = (0i128, 0i128);
    let (mut ya, mut yb) = (0i128, 0i128);
    // Levels of S'' on [0, horizon]; the spliced walk equals S' up to T.
    let mut second = vec![0i128];
    let mut first = vec![0i128];
    let mut t = 0u64;
    while ma != mb {
        if t == horizon {
            return report;
        }
        let (na, xa) = sampler.step(ma, &mut rng_a);
        let (nb, xb) = sampler.step(mb, &mut rng_b);
        ma = na;
        mb = nb;
        sa += xa as i128;
        sb += xb as i128;
        ya = ya.max(sa);
        yb = yb.max(sb);
        first.push(sa);
        second.push(sb);
        t += 1;
    }
    for _ in t..horizon {
        let (nb, xb) = sampler.step(mb, &mut rng_b);
        mb = nb;
        sb += xb as i128;
        second.push(sb);
    }

    let d = first[t as usize] - second[t as usize];
    let y = ya.max(yb);
    report.coupling_time = Some(t);
    report.y_prime = Some(ya);
    report.y_second = Some(yb);
    report.y = Some(y);

    let tt = t as usize;
    let spliced = first.iter().copied().chain(second[tt + 1..].iter().map(|&s| s + d));
    let (hat_epochs, hat_heights) = ladder_epochs(spliced);
    let (sec_epochs, sec_heights) = ladder_epochs(second.iter().copied());

    let tau = sec_heights.iter().position(|&h| h > y + (-d).max(0));
    let rho = hat_heights.iter().position(|&h| h > y + d.max(0));
    report.tau = tau;
    report.rho = rho;
    if let (Some(tau), Some(rho)) = (tau, rho) {
        let a = &sec_epochs[tau..];
        let b = &hat_epochs[rho..];
        report.first_common_ladder_epoch = (a[0] == b[0]).then_some(a[0]);
        report.compared_epochs = a.len().min(b.len());
        report.matched_tail = a == b && a[0] > t;
    }
    report
}

fn check_start(spec: &MrwSpec, i: usize, j: usize) -> Result<()> {
    for s in [i, j] {
        if s >= spec.num_states() {
            return Err(Error::UnknownInitialState(s));
        }
    }
    Ok(())
}

/// One coupled pair started at `(i, j)`.
pub fn coupling_experiment(spec: &MrwSpec, i: usize, j: usize, horizon: u64, seed: u64) -> Result<CouplingReport> {
    check_start(spec, i, j)?;
    Ok(run_coupling(spec, &Sampler::new(spec), (i, j), horizon, seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub runs: usize,
    pub coupled: usize,
    pub observed: usize,
    pub matched: usize,
    pub fraction_observed: f64,
    pub mean_coupling_time: Option<f64>,
    pub max_coupling_time: Option<u64>,
}

impl CouplingSummary {
    /// Every run with both `τ` and `ρ` observed has identical ladder tails.
    pub fn all_observed_matched(&self) -> bool {
        self.matched == self.observed
    }
}

/// `runs` independent coupled pairs started at `(i, j)`.
pub fn coupling_suite(
    spec: &MrwSpec,
    i: usize,
    j: usize,
    horizon: u64,
    seed: u64,
    runs: usize,
) -> Result<(CouplingSummary, Vec<CouplingReport>)> {
    check_start(spec, i, j)?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be positive".into()));
    }
    let sampler = Sampler::new(spec);
    let reports = run_replicates(runs, |r| run_coupling(spec, &sampler, (i, j), horizon, seed, r));
    let times: Vec<u64> = reports.iter().filter_map(|r| r.coupling_time).collect();
    let observed = reports.iter().filter(|r| r.observed()).count();
    let summary = CouplingSummary {
        runs,
        coupled: times.len(),
        observed,
        matched: reports.iter().filter(|r| r.observed() && r.matched_tail).count(),
        fraction_observed: observed as f64 / runs as f64,
        mean_coupling_time: (!times.is_empty()).then(|| times.iter().sum::<u64>() as f64 / times.len() as f64),
        max_coupling_time: times.iter().copied().max(),
    };
    Ok((summary, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo;

    #[test]
    fn same_start_couples_immediately() {
        let spec = zoo::random_lattice(2, 3, 1.0, 2, 0.3).unwrap();
        let r = coupling_experiment(&spec, 1, 1, 1000, 4).unwrap();
        assert_eq!(r.coupling_time, Some(0));
        assert_eq!(r.y, Some(0));
        assert!(r.matched_tail);
    }

    #[test]
    fn periodic_chain_never_couples() {
        let r = coupling_experiment(&zoo::two_cycle(), 0, 1, 10_000, 1).unwrap();
        assert_eq!(r.coupling_time, None);
        assert!(!r.matched_tail && !r.observed());
    }

    #[test]
    fn aperiodic_suite_matches() {
        let spec = zoo::random_lattice(11, 5, 1.0, 3, 0.4).unwrap();
        let (summary, reports) = coupling_suite(&spec, 0, 4, 5_000, 3, 100).unwrap();
        assert!(summary.fraction_observed > 0.95, "{summary:?}");
        assert!(summary.all_observed_matched());
        for r in reports.iter().filter(|r| r.observed()) {
            assert!(r.first_common_ladder_epoch.unwrap() > r.coupling_time.unwrap());
        }
    }

    #[test]
    fn ladder_epochs_of_levels() {
        let (e, h) = ladder_epochs([0, 2, 1, 3, 2].into_iter());
        assert_eq!(e, vec![0, 1, 3]);
        assert_eq!(h, vec![0, 2, 3]);
    }

    #[test]
    fn unknown_start() {
        assert!(coupling_experiment(&zoo::two_cycle(), 0, 5, 10, 0).is_err());
    }
}
