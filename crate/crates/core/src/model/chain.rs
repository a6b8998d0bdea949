use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{IncrementLaw, MrwSpec, SOLVE_TOL, VALIDATION_TOL};
use crate::error::{Error, Result};
use crate::lattice::LatticeMeasure;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

impl std::ops::Index<usize> for StationaryDistribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.pi[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    pub mu: f64,
    pub exists: bool,
}

/// Solves `πP = π`, `Σπ = 1` by a dense LU solve with the last balance
/// equation replaced by the normalization.
pub fn stationary_distribution(spec: &MrwSpec) -> Result<StationaryDistribution> {
    let m = spec.num_states();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // row j of (I - P)^T
            a[(j, i)] = if i == j { 1.0 } else { 0.0 } - spec.prob(i, j);
        }
    }
    for i in 0..m {
        a[(m - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::Singular("stationary distribution"))?;
    let pi: Vec<f64> = x.iter().copied().collect();
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Numerical(format!(
            "stationary distribution has a non-positive entry: {pi:?}"
        )));
    }
    let residual = (0..m)
        .map(|j| ((0..m).map(|i| pi[i] * spec.prob(i, j)).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > SOLVE_TOL {
        return Err(Error::Numerical(format!(
            "stationary residual {residual:e} exceeds {SOLVE_TOL:e}"
        )));
    }
    Ok(StationaryDistribution { pi })
}

/// `μ = Σ_i π_i Σ_j p_ij E[F_ij]`.
pub fn stationary_drift(spec: &MrwSpec, pi: &StationaryDistribution) -> DriftReport {
    let mu = (0..spec.num_states())
        .map(|i| pi[i] * spec.edges(i).map(|(_, p, f)| p * f.mean()).sum::<f64>())
        .sum();
    DriftReport { mu, exists: true }
}

/// Stationary law of `(M_n, X_n)` split by the current state:
/// entry `i` is `Σ_j π_j p_ji F_ji`.
pub fn stationary_increment_law(spec: &MrwSpec, pi: &StationaryDistribution) -> Vec<LatticeMeasure> {
    let m = spec.num_states();
    (0..m)
        .map(|i| {
            (0..m)
                .filter_map(|j| spec.increment(j, i).map(|f| f.measure().scale(pi[j] * spec.prob(j, i))))
                .fold(LatticeMeasure::zero(spec.span()), |acc, x| {
                    acc.add(&x).expect("shared span")
                })
        })
        .collect()
}

/// Time reversal: `#p_ij = π_j p_ji / π_i` with increment law `F_ji`.
pub fn build_dual(spec: &MrwSpec, pi: &StationaryDistribution) -> MrwSpec {
    let m = spec.num_states();
    let mut transition = vec![0.0; m * m];
    let mut increments: Vec<Option<IncrementLaw>> = vec![None; m * m];
    for i in 0..m {
        for j in 0..m {
            if let Some(f) = spec.increment(j, i) {
                transition[i * m + j] = pi[j] * spec.prob(j, i) / pi[i];
                increments[i * m + j] = Some(f.clone());
            }
        }
    }
    debug_assert!(
        (0..m).all(|i| { (transition[i * m..(i + 1) * m].iter().sum::<f64>() - 1.0).abs() <= 1e3 * VALIDATION_TOL })
    );
    MrwSpec::from_parts(spec.states().to_vec(), spec.span(), transition, increments)
}
