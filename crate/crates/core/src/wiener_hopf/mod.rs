//! Ladder kernels `G^>`, `#G^≤` and `*G^≤` from level-truncated
//! first-passage systems, certified escape probabilities of the dual walk,
//! and the residual checks of the Wiener-Hopf factorization
//! `δ₀I − G = (δ₀I − *G^≤) * (δ₀I − G^>)`.

mod escape;
mod first_passage;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{KernelMatrix, LatticeMeasure, MassMatrix};
use crate::model::{MrwSpec, StationaryDistribution};

pub use escape::DescentCertificate;
pub use first_passage::{first_passage, Direction, FirstPassage};

/// Depth schedule for the truncated systems: start at `initial_depth`
/// (default `4·max jump`) and double until the error measure drops below
/// `tol` or `max_depth` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    pub initial_depth: Option<usize>,
    pub tol: f64,
    pub max_depth: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            initial_depth: None,
            tol: 1e-10,
            max_depth: 1 << 14,
        }
    }
}

impl TruncationPolicy {
    fn start(&self, spec: &MrwSpec) -> usize {
        let auto = 4 * spec.max_jump().max(1) as usize;
        self.initial_depth.unwrap_or(auto).clamp(1, self.max_depth.max(1))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderKernelResult {
    pub direction: Direction,
    pub kernel: KernelMatrix,
    pub row_defect: Vec<f64>,
    /// `E_i[min(σ, censoring)]`, a lower bound on the mean ladder epoch.
    pub expected_steps: Vec<f64>,
    pub depth: usize,
}

impl LadderKernelResult {
    fn from_passage(fp: FirstPassage) -> Self {
        LadderKernelResult {
            direction: fp.direction,
            kernel: fp.kernel,
            row_defect: fp.row_defect,
            expected_steps: fp.expected_steps,
            depth: fp.depth,
        }
    }

    pub fn row_mass(&self) -> Vec<f64> {
        self.kernel.total_mass_matrix().row_sums()
    }
}

/// Enclosures of `P_i(#σ^≤ = ∞)` for the dual walk.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeProbabilities {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub depth: usize,
    pub certificate: Option<DescentCertificate>,
}

impl EscapeProbabilities {
    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn width(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.width().into_iter().fold(0.0, f64::max)
    }

    /// Bracket from one truncated descending system. Mass censored above
    /// depth `K` sits at least `K+1` levels above the target and returns
    /// with probability at most the certificate's bound.
    pub fn from_passage(fp: &FirstPassage, certificate: Option<DescentCertificate>) -> Self {
        let returning = certificate.map(|c| c.descent_bound(fp.depth as i64 + 1)).unwrap_or(1.0);
        let upper: Vec<f64> = fp.row_mass().iter().map(|mass| (1.0 - mass).clamp(0.0, 1.0)).collect();
        let lower = upper
            .iter()
            .zip(&fp.row_defect)
            .map(|(u, d)| (u - d * returning).max(0.0))
            .collect();
        EscapeProbabilities {
            lower,
            upper,
            depth: fp.depth,
            certificate,
        }
    }
}

/// `G^>` with depth doubling until every row defect is below `tol`.
pub fn strict_ascending_kernel(spec: &MrwSpec, policy: &TruncationPolicy) -> Result<LadderKernelResult> {
    let mut depth = policy.start(spec);
    loop {
        let fp = first_passage(spec, Direction::StrictAscending, depth)?;
        let defect = fp.row_defect.iter().copied().fold(0.0, f64::max);
        if defect < policy.tol {
            return Ok(LadderKernelResult::from_passage(fp));
        }
        if depth >= policy.max_depth {
            return Err(Error::NonConvergence {
                what: "strict ascending ladder kernel",
                depth,
                residual: defect,
            });
        }
        depth = (2 * depth).min(policy.max_depth);
    }
}

/// `#G^≤` of `dual` together with the escape bracket; depth doubles until
/// the bracket is narrower than `tol`.
pub fn weak_descending(dual: &MrwSpec, policy: &TruncationPolicy) -> Result<(LadderKernelResult, EscapeProbabilities)> {
    let certificate = DescentCertificate::find(dual);
    let mut depth = policy.start(dual);
    loop {
        let fp = first_passage(dual, Direction::WeakDescending, depth)?;
        let escape = EscapeProbabilities::from_passage(&fp, certificate);
        let width = escape.max_width();
        if width < policy.tol {
            return Ok((LadderKernelResult::from_passage(fp), escape));
        }
        if depth >= policy.max_depth {
            return Err(Error::NonConvergence {
                what: "dual escape-probability bracket",
                depth,
                residual: width,
            });
        }
        depth = (2 * depth).min(policy.max_depth);
    }
}

pub fn weak_descending_kernel(dual: &MrwSpec, policy: &TruncationPolicy) -> Result<LadderKernelResult> {
    weak_descending(dual, policy).map(|r| r.0)
}

pub fn escape_probabilities(dual: &MrwSpec, policy: &TruncationPolicy) -> Result<EscapeProbabilities> {
    weak_descending(dual, policy).map(|r| r.1)
}

/// `*G^≤_ij = (π_j / π_i) #G^≤_ji`.
pub fn star_kernel(descending: &KernelMatrix, pi: &StationaryDistribution) -> KernelMatrix {
    let m = descending.dim();
    let mut out = KernelMatrix::zeros(m, descending.span());
    for i in 0..m {
        for j in 0..m {
            let e = descending.get(j, i);
            if !e.is_zero() {
                out.set(i, j, e.scale(pi[j] / pi[i])).expect("same span");
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    /// Largest entrywise total variation of `(δ₀I − G) − (δ₀I − *G^≤)*(δ₀I − G^>)`.
    pub max_residual: f64,
    pub residual_grid: Vec<Vec<f64>>,
    /// Largest entry of `(I − ‖G‖) − (I − ‖*G^≤‖)(I − ‖G^>‖)`.
    pub mass_residual: f64,
}

pub fn verify_factorization(
    g: &KernelMatrix,
    star_descending: &KernelMatrix,
    ascending: &KernelMatrix,
) -> Result<FactorizationReport> {
    let m = g.dim();
    let id = KernelMatrix::identity(m, g.span());
    let lhs = id.sub(g)?;
    let rhs = id.sub(star_descending)?.convolve(&id.sub(ascending)?)?;
    let (max_residual, residual_grid) = lhs.distance(&rhs)?;

    let eye = MassMatrix::identity(m).0;
    let mass_lhs = &eye - g.total_mass_matrix().0;
    let mass_rhs = (&eye - star_descending.total_mass_matrix().0) * (&eye - ascending.total_mass_matrix().0);
    let mass_residual = (mass_lhs - mass_rhs).abs().max();
    Ok(FactorizationReport {
        max_residual,
        residual_grid,
        mass_residual,
    })
}

/// Row sums of `‖#G^≤‖` and the column identity
/// `Σ_i π_i ‖*G^≤_ij‖ = π_j P_j(#σ^≤ < ∞)`.
#[derive(Debug, Clone, Serialize)]
pub struct SubstochasticReport {
    pub row_sums: Vec<f64>,
    pub strict_rows: Vec<usize>,
    pub column_lhs: Vec<f64>,
    pub column_rhs: Vec<f64>,
    pub column_tolerance: Vec<f64>,
    pub strict_columns: Vec<usize>,
    pub pass: bool,
}

pub fn check_substochastic(
    descending: &LadderKernelResult,
    escape: &EscapeProbabilities,
    pi: &StationaryDistribution,
    tol: f64,
) -> SubstochasticReport {
    let m = pi.len();
    let row_sums = descending.row_mass();
    let width = escape.width();
    let strict = tol.max(1e-9);
    let strict_rows: Vec<usize> = (0..m).filter(|&i| row_sums[i] < 1.0 - strict).collect();
    let star = star_kernel(&descending.kernel, pi).total_mass_matrix();
    let column_lhs: Vec<f64> = (0..m).map(|j| (0..m).map(|i| pi[i] * star.0[(i, j)]).sum()).collect();
    let mid = escape.midpoint();
    let column_rhs: Vec<f64> = (0..m).map(|j| pi[j] * (1.0 - mid[j])).collect();
    let column_tolerance: Vec<f64> = (0..m).map(|j| pi[j] * 0.5 * width[j] + tol).collect();
    let strict_columns: Vec<usize> = (0..m).filter(|&j| column_lhs[j] < pi[j] - strict).collect();
    let pass = row_sums.iter().all(|&r| r <= 1.0 + tol)
        && !strict_rows.is_empty()
        && !strict_columns.is_empty()
        && (0..m).all(|j| (column_lhs[j] - column_rhs[j]).abs() <= column_tolerance[j]);
    SubstochasticReport {
        row_sums,
        strict_rows,
        column_lhs,
        column_rhs,
        column_tolerance,
        strict_columns,
        pass,
    }
}

/// Everything the factorization needs for one model.
#[derive(Debug, Clone, Serialize)]
pub struct LadderKernels {
    pub ascending: LadderKernelResult,
    pub descending: LadderKernelResult,
    pub escape: EscapeProbabilities,
    pub star_descending: KernelMatrix,
}

pub fn ladder_kernels(
    spec: &MrwSpec,
    dual: &MrwSpec,
    pi: &StationaryDistribution,
    policy: &TruncationPolicy,
) -> Result<LadderKernels> {
    let ascending = strict_ascending_kernel(spec, policy)?;
    let (descending, escape) = weak_descending(dual, policy)?;
    let star_descending = star_kernel(&descending.kernel, pi);
    Ok(LadderKernels {
        ascending,
        descending,
        escape,
        star_descending,
    })
}

/// Adds `size·δ_0` to entry `(0, 0)`; used to check that the residual
/// checks detect a corrupted kernel.
pub fn perturb(kernel: &KernelMatrix, size: f64) -> KernelMatrix {
    let mut out = kernel.clone();
    let bumped = kernel
        .get(0, 0)
        .add(&LatticeMeasure::point(kernel.span(), 1, size))
        .expect("same span");
    out.set(0, 0, bumped).expect("same span");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_dual, stationary_distribution, zoo};

    fn kernels(spec: &MrwSpec) -> (StationaryDistribution, MrwSpec, LadderKernels) {
        let pi = stationary_distribution(spec).unwrap();
        let dual = build_dual(spec, &pi);
        let k = ladder_kernels(spec, &dual, &pi, &TruncationPolicy::default()).unwrap();
        (pi, dual, k)
    }

    #[test]
    fn simple_walk_kernels() {
        let spec = zoo::simple_rw(0.6).unwrap();
        let (_, _, k) = kernels(&spec);
        let asc = k.ascending.kernel.get(0, 0);
        assert!(asc.distance(&LatticeMeasure::dirac(1.0, 1)).unwrap() < 1e-9);
        let desc = k.descending.kernel.get(0, 0);
        let expected = LatticeMeasure::from_points(1.0, &[(0, 0.4), (-1, 0.4)]);
        assert!(desc.distance(&expected).unwrap() < 1e-9);
        assert!((k.escape.lower[0] - 0.2).abs() < 1e-9);
        assert!((k.escape.upper[0] - 0.2).abs() < 1e-9);
        assert!(k.escape.max_width() < 1e-10);
    }

    #[test]
    fn two_cycle_kernels() {
        let spec = zoo::two_cycle();
        let (pi, _, k) = kernels(&spec);
        let asc = &k.ascending.kernel;
        assert_eq!(asc.get(0, 1), &LatticeMeasure::dirac(1.0, 2));
        assert!(asc.get(1, 1).distance(&LatticeMeasure::dirac(1.0, 1)).unwrap() < 1e-15);
        assert!(asc.get(0, 0).is_zero() && asc.get(1, 0).is_zero());

        let desc = &k.descending.kernel;
        assert_eq!(desc.get(0, 1), &LatticeMeasure::dirac(1.0, -1));
        assert!(desc.get(1, 0).is_zero() && desc.get(1, 1).is_zero());
        assert!(k.escape.upper[0] < 1e-15 && k.escape.lower[1] > 1.0 - 1e-10);

        let star = star_kernel(desc, &pi);
        assert_eq!(star.get(1, 0), &LatticeMeasure::dirac(1.0, -1));

        let report = verify_factorization(&spec.kernel(), &star, asc).unwrap();
        assert!(report.max_residual < 1e-10, "{report:?}");
        assert!(report.mass_residual < 1e-10);
    }

    #[test]
    fn star_is_an_involution() {
        let spec = zoo::random_lattice(2, 3, 1.0, 2, 0.3).unwrap();
        let (pi, _, k) = kernels(&spec);
        let twice = star_kernel(&star_kernel(&k.descending.kernel, &pi), &pi);
        assert!(twice.distance(&k.descending.kernel).unwrap().0 < 1e-14);
    }

    #[test]
    fn star_of_uniform_is_transpose() {
        let mut a = KernelMatrix::zeros(2, 1.0);
        a.set(0, 1, LatticeMeasure::dirac(1.0, -3)).unwrap();
        let pi = StationaryDistribution { pi: vec![0.5, 0.5] };
        let s = star_kernel(&a, &pi);
        assert_eq!(s.get(1, 0), &LatticeMeasure::dirac(1.0, -3));
        assert!(s.get(0, 1).is_zero());
    }

    #[test]
    fn perturbation_is_detected() {
        let spec = zoo::simple_rw(0.6).unwrap();
        let (_, _, k) = kernels(&spec);
        let bad = perturb(&k.ascending.kernel, 1e-3);
        let r = verify_factorization(&spec.kernel(), &k.star_descending, &bad).unwrap();
        assert!(r.max_residual >= 1e-3 * 0.99, "{r:?}");
    }

    #[test]
    fn all_negative_increments_do_not_ascend() {
        let text = r#"{"states": ["x"], "transitions": [
            {"from": 0, "to": 0, "prob": 1, "increment": {"support": [-1, -2], "weights": [0.5, 0.5]}}],
            "lattice_span": 1}"#;
        let spec = MrwSpec::from_json(text).unwrap();
        let policy = TruncationPolicy {
            max_depth: 64,
            ..Default::default()
        };
        match strict_ascending_kernel(&spec, &policy) {
            Err(Error::NonConvergence { residual, .. }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_positive_dual_never_descends() {
        let text = r#"{"states": ["x", "y"], "transitions": [
            {"from": 0, "to": 1, "prob": 1, "increment": {"support": [1, 2], "weights": [0.5, 0.5]}},
            {"from": 1, "to": 0, "prob": 0.5, "increment": {"support": [3], "weights": [1]}},
            {"from": 1, "to": 1, "prob": 0.5, "increment": {"support": [1], "weights": [1]}}],
            "lattice_span": 1}"#;
        let spec = MrwSpec::from_json(text).unwrap();
        let (_, _, k) = kernels(&spec);
        for i in 0..2 {
            assert!(k.descending.row_mass()[i] == 0.0);
            assert!((k.escape.lower[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_drift_bracket_does_not_close() {
        let spec = zoo::remark2();
        let pi = stationary_distribution(&spec).unwrap();
        let dual = build_dual(&spec, &pi);
        let policy = TruncationPolicy {
            max_depth: 1 << 10,
            ..Default::default()
        };
        assert!(matches!(
            escape_probabilities(&dual, &policy),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn substochastic_checks_on_simple_walk() {
        let spec = zoo::simple_rw(0.6).unwrap();
        let (pi, _, k) = kernels(&spec);
        let r = check_substochastic(&k.descending, &k.escape, &pi, 1e-10);
        assert!((r.row_sums[0] - 0.8).abs() < 1e-9);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn substochastic_checks_on_two_cycle() {
        let spec = zoo::two_cycle();
        let (pi, _, k) = kernels(&spec);
        let r = check_substochastic(&k.descending, &k.escape, &pi, 1e-10);
        assert!((r.row_sums[0] - 1.0).abs() < 1e-12 && r.row_sums[1] == 0.0);
        assert_eq!(r.strict_rows, vec![1]);
        assert!(r.pass);
    }
}
