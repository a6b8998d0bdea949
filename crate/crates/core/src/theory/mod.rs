//! Stationary law of the ladder chain `M^>_n = M_{σ^>_n}`, computed two
//! ways: from the escape probabilities of the dual walk,
//! `π^>_i = π_i P_i(#σ^≤ = ∞) / c` with `c = P_π(#σ^≤ = ∞)`, and as the
//! normalized null vector `π^T(I − ‖*G^≤‖)` of `I − ‖G^>‖`.

mod epochs;
mod verify;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::MassMatrix;
use crate::model::StationaryDistribution;
use crate::wiener_hopf::EscapeProbabilities;

pub use epochs::{epoch_law, expected_ladder_epoch, joint_law_nu, EpochLaw, EpochReport, NuTable, StateEpochBound};
pub use verify::{
    cross_validate, drift_gate, ExactPipeline, IdentityCheck, McBudget, PipelineOptions, Relation, Tolerances,
    VerifyReport,
};

/// States with `π^>_i` above this are in the ladder support `S^>`.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

/// Entries of the null vector below `−NULL_VECTOR_TOL` are treated as a
/// truncation failure rather than rounding.
pub const NULL_VECTOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStationary {
    pub pi_ladder: Vec<f64>,
    /// Enclosure of each `π^>_i`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub c: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub support: Vec<usize>,
    /// `π^>_i / π_i`.
    pub density: Vec<f64>,
}

impl LadderStationary {
    fn assemble(
        pi_ladder: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        c: [f64; 3],
        pi: &StationaryDistribution,
    ) -> Self {
        let support = support_of(&pi_ladder);
        let density = pi_ladder.iter().zip(&pi.pi).map(|(a, p)| a / p).collect();
        LadderStationary {
            pi_ladder,
            lower,
            upper,
            c: c[0],
            c_lower: c[1],
            c_upper: c[2],
            support,
            density,
        }
    }

    pub fn width(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn in_support(&self, i: usize) -> bool {
        self.support.contains(&i)
    }
}

fn support_of(weights: &[f64]) -> Vec<usize> {
    (0..weights.len()).filter(|&i| weights[i] > SUPPORT_THRESHOLD).collect()
}

/// `π^>` from the escape bracket. The point value uses bracket midpoints;
/// `lower`/`upper` combine the extreme ends of the numerator and of `c`.
pub fn ladder_stationary_exact(pi: &StationaryDistribution, escape: &EscapeProbabilities) -> Result<LadderStationary> {
    if pi.len() != escape.lower.len() {
        return Err(Error::DimensionMismatch(pi.len(), escape.lower.len()));
    }
    let weighted = |e: &[f64]| -> Vec<f64> { e.iter().zip(&pi.pi).map(|(x, p)| x * p).collect() };
    let lo = weighted(&escape.lower);
    let hi = weighted(&escape.upper);
    let mid = weighted(&escape.midpoint());
    let c_lower: f64 = lo.iter().sum();
    let c_upper: f64 = hi.iter().sum();
    let c: f64 = mid.iter().sum();
    if !(c_lower > 0.0) {
        return Err(Error::NoEscape { upper: c_upper });
    }
    let pi_ladder = mid.iter().map(|x| x / c).collect();
    let lower = lo.iter().map(|x| x / c_upper).collect();
    let upper = hi.iter().map(|x| (x / c_lower).min(1.0)).collect();
    Ok(LadderStationary::assemble(
        pi_ladder,
        lower,
        upper,
        [c, c_lower, c_upper],
        pi,
    ))
}

/// `v = π^T(I − ‖*G^≤‖)` normalized, with the residual of `v(I − ‖G^>‖) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullVectorSolution {
    pub ladder: LadderStationary,
    pub v: Vec<f64>,
    /// `max_j |(π^>(I − ‖G^>‖))_j|`.
    pub residual: f64,
}

pub fn ladder_stationary_nullvector(
    ascending: &MassMatrix,
    star_descending: &MassMatrix,
    pi: &StationaryDistribution,
) -> Result<NullVectorSolution> {
    let m = pi.len();
    if ascending.dim() != m || star_descending.dim() != m {
        return Err(Error::DimensionMismatch(ascending.dim(), m));
    }
    let v: Vec<f64> = (0..m)
        .map(|j| pi[j] - (0..m).map(|i| pi[i] * star_descending.0[(i, j)]).sum::<f64>())
        .collect();
    if let Some(j) = (0..m).find(|&j| v[j] < -NULL_VECTOR_TOL) {
        return Err(Error::Numerical(format!(
            "null vector entry {j} is negative ({:e}); truncation too coarse",
            v[j]
        )));
    }
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > NULL_VECTOR_TOL) {
        return Err(Error::NoEscape { upper: total });
    }
    let pi_ladder: Vec<f64> = clipped.iter().map(|x| x / total).collect();
    let residual = (0..m)
        .map(|j| {
            let flow: f64 = (0..m).map(|i| pi_ladder[i] * ascending.0[(i, j)]).sum();
            (pi_ladder[j] - flow).abs()
        })
        .fold(0.0, f64::max);
    let ladder = LadderStationary::assemble(
        pi_ladder.clone(),
        pi_ladder.clone(),
        pi_ladder,
        [total, total, total],
        pi,
    );
    Ok(NullVectorSolution { ladder, v, residual })
}

/// Dimension of the left null space of `I − ‖G^>‖` restricted to `S^>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub support: Vec<usize>,
    pub singular_values: Vec<f64>,
    pub null_dimension: usize,
}

impl UniquenessReport {
    pub fn unique(&self) -> bool {
        self.null_dimension == 1
    }
}

pub fn uniqueness_rank(ascending: &MassMatrix, support: &[usize]) -> UniquenessReport {
    let k = support.len();
    let a = DMatrix::from_fn(k, k, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - ascending.0[(support[r], support[c])]
    });
    let mut singular_values: Vec<f64> = if k == 0 {
        Vec::new()
    } else {
        a.svd(false, false).singular_values.iter().copied().collect()
    };
    singular_values.sort_by(|x, y| y.total_cmp(x));
    let scale = singular_values.first().copied().unwrap_or(0.0).max(1.0);
    let null_dimension = singular_values.iter().filter(|&&s| s <= 1e-8 * scale).count();
    UniquenessReport {
        support: support.to_vec(),
        singular_values,
        null_dimension,
    }
}

/// `‖π^>(I − ‖G^>‖)‖_∞`.
pub fn ladder_stationarity_residual(ascending: &MassMatrix, pi_ladder: &[f64]) -> Vec<f64> {
    let m = pi_ladder.len();
    (0..m)
        .map(|j| pi_ladder[j] - (0..m).map(|i| pi_ladder[i] * ascending.0[(i, j)]).sum::<f64>())
        .collect()
}
