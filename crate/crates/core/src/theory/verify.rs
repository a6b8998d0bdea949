//! The full exact pipeline for one model and the identity checks that tie
//! its pieces to each other and to simulation.

use serde::{Deserialize, Serialize};

use super::{
    expected_ladder_epoch, joint_law_nu, ladder_stationarity_residual, ladder_stationary_exact,
    ladder_stationary_nullvector, uniqueness_rank, EpochReport, LadderStationary, NuTable, NullVectorSolution,
    UniquenessReport,
};
use crate::error::{Error, Result};
use crate::lattice::KernelMatrix;
use crate::model::{
    build_dual, stationary_distribution, stationary_drift, DriftReport, MrwSpec, StationaryDistribution,
};
use crate::sim::{
    derive_seed, estimate_ladder_occupation_from_law, estimate_sigma0_probability, first_hit_ladder_support, MCEstimate,
};
use crate::wiener_hopf::{
    check_substochastic, ladder_kernels, perturb, verify_factorization, FactorizationReport, LadderKernels,
    SubstochasticReport, TruncationPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Residuals of the factorization and of stationarity equations.
    pub identity: f64,
    /// Agreement of the two independent `π^>` computations.
    pub agreement: f64,
    /// Bookkeeping of the ν table.
    pub nu: f64,
    /// Relative slack on `E_{π^>}σ^> = 1/c` beyond the bracket of `c`.
    pub mean_epoch: f64,
    /// Monte Carlo acceptance band in standard errors.
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            agreement: 1e-8,
            nu: 1e-10,
            mean_epoch: 1e-8,
            mc_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub truncation: TruncationPolicy,
    pub m_max: usize,
    /// Proceed even when the stationary drift is not positive.
    pub allow_nonpositive_drift: bool,
    /// Test mode: add this much mass to one entry of `G^>` before the
    /// checks run.
    pub perturbation: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            truncation: TruncationPolicy::default(),
            m_max: 2000,
            allow_nonpositive_drift: false,
            perturbation: None,
            tolerances: Tolerances::default(),
        }
    }
}

/// Every exact quantity for one model.
#[derive(Debug, Clone, Serialize)]
pub struct ExactPipeline {
    pub pi: StationaryDistribution,
    pub drift: DriftReport,
    #[serde(skip)]
    pub dual: MrwSpec,
    #[serde(skip)]
    pub increment_kernel: KernelMatrix,
    pub kernels: LadderKernels,
    pub factorization: FactorizationReport,
    pub substochastic: SubstochasticReport,
    pub ladder: LadderStationary,
    pub nullvector: NullVectorSolution,
    pub stationarity_residual: Vec<f64>,
    pub uniqueness: UniquenessReport,
    pub nu: NuTable,
    pub epochs: EpochReport,
}

/// Refuses nonpositive drift unless overridden.
pub fn drift_gate(drift: &DriftReport, allow: bool) -> Result<()> {
    if drift.mu > 0.0 || allow {
        Ok(())
    } else {
        Err(Error::DriftGate { drift: drift.mu })
    }
}

impl ExactPipeline {
    pub fn run(spec: &MrwSpec, opts: &PipelineOptions) -> Result<Self> {
        let pi = stationary_distribution(spec)?;
        let drift = stationary_drift(spec, &pi);
        drift_gate(&drift, opts.allow_nonpositive_drift)?;
        let dual = build_dual(spec, &pi);
        let mut kernels = ladder_kernels(spec, &dual, &pi, &opts.truncation)?;
        if let Some(size) = opts.perturbation {
            kernels.ascending.kernel = perturb(&kernels.ascending.kernel, size);
        }
        let tol = opts.tolerances;
        let increment_kernel = spec.kernel();
        let factorization =
            verify_factorization(&increment_kernel, &kernels.star_descending, &kernels.ascending.kernel)?;
        let substochastic = check_substochastic(&kernels.descending, &kernels.escape, &pi, tol.identity);
        let ladder = ladder_stationary_exact(&pi, &kernels.escape)?;
        let asc_mass = kernels.ascending.kernel.total_mass_matrix();
        let nullvector = ladder_stationary_nullvector(&asc_mass, &kernels.star_descending.total_mass_matrix(), &pi)?;
        let stationarity_residual = ladder_stationarity_residual(&asc_mass, &ladder.pi_ladder);
        let uniqueness = uniqueness_rank(&asc_mass, &ladder.support);
        let nu = joint_law_nu(spec, &ladder, opts.m_max.max(1), kernels.ascending.depth)?;
        let epochs = expected_ladder_epoch(&ladder, &nu, &kernels.ascending, &kernels.escape, &pi, tol.identity);
        Ok(ExactPipeline {
            pi,
            drift,
            dual,
            increment_kernel,
            kernels,
            factorization,
            substochastic,
            ladder,
            nullvector,
            stationarity_residual,
            uniqueness,
            nu,
            epochs,
        })
    }

    /// Checks that need no simulation.
    pub fn exact_identities(&self, spec: &MrwSpec, tol: &Tolerances) -> Vec<IdentityCheck> {
        let m = self.pi.len();
        let mut out = Vec::new();

        let p = spec.transition_rows();
        let flow: Vec<f64> = (0..m).map(|j| (0..m).map(|i| self.pi[i] * p[i][j]).sum()).collect();
        out.push(IdentityCheck::eq(
            "driving_stationarity",
            flow,
            self.pi.pi.clone(),
            vec![1e-10; m],
        ));

        out.push(IdentityCheck::eq(
            "ladder_stationary_escape",
            self.ladder.pi_ladder.clone(),
            self.nullvector.ladder.pi_ladder.clone(),
            self.ladder.width().iter().map(|w| w + tol.agreement).collect(),
        ));
        out.push(IdentityCheck::eq(
            "ladder_stationarity",
            self.stationarity_residual.clone(),
            vec![0.0; m],
            vec![tol.identity; m],
        ));
        out.push(IdentityCheck::eq(
            "ladder_uniqueness",
            vec![self.uniqueness.null_dimension as f64],
            vec![1.0],
            vec![0.0],
        ));
        let indicator = |s: &[usize]| -> Vec<f64> { (0..m).map(|i| s.contains(&i) as u8 as f64).collect() };
        out.push(IdentityCheck::eq(
            "ladder_support",
            indicator(&self.ladder.support),
            indicator(&self.nullvector.ladder.support),
            vec![0.0; m],
        ));

        let row_totals: Vec<f64> = (0..m)
            .map(|i| {
                self.nu.nu[i].iter().sum::<f64>()
                    + self.ladder.pi_ladder[i] * (self.nu.state_censored[i] + self.nu.state_alive[i])
            })
            .collect();
        let mut nu_check = IdentityCheck::eq(
            "joint_law_nu",
            row_totals,
            self.ladder.pi_ladder.clone(),
            vec![tol.nu; m],
        );
        if self.nu.min_entry() < 0.0 {
            nu_check.pass = false;
            nu_check.note = Some(format!("negative entry {:e}", self.nu.min_entry()));
        }
        out.push(nu_check);
        out.push(IdentityCheck::eq(
            "epoch_marginal",
            self.nu.column_sums(),
            self.nu.epoch_marginal.clone(),
            vec![tol.nu; self.nu.m_max],
        ));

        let e = &self.epochs;
        out.push(IdentityCheck::eq(
            "mean_ladder_epoch",
            vec![e.mean],
            vec![e.inverse_c],
            vec![(e.inverse_c_upper - e.inverse_c_lower) + tol.mean_epoch * e.inverse_c],
        ));
        out.push(IdentityCheck::le(
            "per_state_epoch_bound",
            e.per_state.iter().map(|s| s.expected).collect(),
            e.per_state.iter().map(|s| s.bound).collect(),
            e.per_state.iter().map(|s| s.bound * tol.identity).collect(),
        ));

        out.push(IdentityCheck::eq(
            "wiener_hopf",
            vec![self.factorization.max_residual],
            vec![0.0],
            vec![tol.identity],
        ));
        out.push(IdentityCheck::eq(
            "mass_factorization",
            vec![self.factorization.mass_residual],
            vec![0.0],
            vec![tol.identity],
        ));
        let s = &self.substochastic;
        out.push(IdentityCheck::eq(
            "dual_column_identity",
            s.column_lhs.clone(),
            s.column_rhs.clone(),
            s.column_tolerance.clone(),
        ));
        let mut sub = IdentityCheck::le(
            "descending_substochastic",
            s.row_sums.clone(),
            vec![1.0; m],
            vec![tol.identity; m],
        );
        if s.strict_rows.is_empty() {
            sub.pass = false;
            sub.note = Some("no row sum is strictly below one".into());
        }
        out.push(sub);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|lhs − rhs| ≤ tolerance` componentwise.
    Eq,
    /// `lhs ≤ rhs + tolerance` componentwise.
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity_id: String,
    pub relation: Relation,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl IdentityCheck {
    fn new(id: &str, relation: Relation, lhs: Vec<f64>, rhs: Vec<f64>, tolerance: Vec<f64>) -> Self {
        let pass = lhs.len() == rhs.len()
            && lhs.len() == tolerance.len()
            && lhs.iter().zip(&rhs).zip(&tolerance).all(|((a, b), t)| match relation {
                Relation::Eq => (a - b).abs() <= *t,
                Relation::Le => *a <= b + t,
            });
        IdentityCheck {
            identity_id: id.to_string(),
            relation,
            lhs,
            rhs,
            tolerance,
            pass,
            note: None,
        }
    }

    pub fn eq(id: &str, lhs: Vec<f64>, rhs: Vec<f64>, tolerance: Vec<f64>) -> Self {
        Self::new(id, Relation::Eq, lhs, rhs, tolerance)
    }

    pub fn le(id: &str, lhs: Vec<f64>, rhs: Vec<f64>, tolerance: Vec<f64>) -> Self {
        Self::new(id, Relation::Le, lhs, rhs, tolerance)
    }

    /// Monte Carlo estimates against exact values, within `k` standard
    /// errors plus a deterministic `slack` per component.
    pub fn mc(id: &str, est: &[MCEstimate], exact: Vec<f64>, k: f64, slack: Vec<f64>) -> Self {
        let tolerance = est.iter().zip(&slack).map(|(e, s)| k * e.standard_error + s).collect();
        Self::eq(id, est.iter().map(|e| e.value).collect(), exact, tolerance)
    }
}

/// Simulation budget for [`cross_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBudget {
    pub occupation_replicates: usize,
    pub occupation_epochs: usize,
    pub sigma0_replicates: usize,
    pub n_back: usize,
    pub hit_replicates: usize,
    pub hit_horizon: u64,
    pub max_steps: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget {
            occupation_replicates: 100,
            occupation_epochs: 1000,
            sigma0_replicates: 100_000,
            n_back: 1000,
            hit_replicates: 200,
            hit_horizon: 100_000,
            max_steps: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub budget: McBudget,
    pub identities: Vec<IdentityCheck>,
    pub occupation: Vec<MCEstimate>,
    pub sigma0: Vec<MCEstimate>,
    pub first_hit: Vec<MCEstimate>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&str> {
        self.identities
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.identity_id.as_str())
            .collect()
    }
}

/// Exact identities plus simulation cross-checks of `π^>`, of the
/// `σ_0 = 0` probabilities and of the first hit of `S^>`.
pub fn cross_validate(
    spec: &MrwSpec,
    exact: &ExactPipeline,
    tol: &Tolerances,
    budget: &McBudget,
    seed: u64,
) -> Result<VerifyReport> {
    let m = spec.num_states();
    let mut identities = exact.exact_identities(spec, tol);
    let half_width: Vec<f64> = exact.ladder.width().iter().map(|w| 0.5 * w).collect();

    let occ = estimate_ladder_occupation_from_law(
        spec,
        &exact.ladder.pi_ladder,
        budget.occupation_epochs,
        budget.max_steps,
        derive_seed(seed, "occupation"),
        budget.occupation_replicates,
    )?;
    identities.push(IdentityCheck::mc(
        "mc_ladder_occupation",
        &occ.per_state,
        exact.ladder.pi_ladder.clone(),
        tol.mc_sigmas,
        half_width.clone(),
    ));

    let sigma0 = estimate_sigma0_probability(
        spec,
        &exact.pi,
        budget.n_back,
        derive_seed(seed, "sigma0"),
        budget.sigma0_replicates,
    )?;
    let esc_mid = exact.kernels.escape.midpoint();
    let esc_width = exact.kernels.escape.width();
    identities.push(IdentityCheck::mc(
        "sigma0_density",
        &sigma0,
        (0..m).map(|i| exact.pi[i] * esc_mid[i]).collect(),
        tol.mc_sigmas,
        (0..m).map(|i| exact.pi[i] * 0.5 * esc_width[i] + 1e-15).collect(),
    ));

    let hit_seed = derive_seed(seed, "first_hit");
    let first_hit = (0..m)
        .map(|i| {
            first_hit_ladder_support(
                spec,
                &exact.ladder.support,
                i,
                budget.hit_horizon,
                derive_seed(hit_seed, &i.to_string()),
                budget.hit_replicates,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    identities.push(IdentityCheck::mc(
        "ladder_support_hit",
        &first_hit,
        vec![1.0; m],
        tol.mc_sigmas,
        vec![0.0; m],
    ));

    let pass = identities.iter().all(|c| c.pass);
    Ok(VerifyReport {
        seed,
        budget: *budget,
        identities,
        occupation: occ.per_state,
        sigma0,
        first_hit,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo;

    fn small_budget() -> McBudget {
        McBudget {
            occupation_replicates: 20,
            occupation_epochs: 200,
            sigma0_replicates: 5000,
            n_back: 300,
            hit_replicates: 20,
            hit_horizon: 10_000,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn two_cycle_suite_passes() {
        let spec = zoo::two_cycle();
        let exact = ExactPipeline::run(&spec, &PipelineOptions::default()).unwrap();
        let report = cross_validate(&spec, &exact, &Tolerances::default(), &small_budget(), 7).unwrap();
        assert!(report.pass, "{:?}", report.failures());
        assert!((exact.nu.nu[1][1] - 1.0).abs() < 1e-12);
        assert!((exact.epochs.mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simple_walk_suite_passes() {
        let spec = zoo::simple_rw(0.6).unwrap();
        let exact = ExactPipeline::run(&spec, &PipelineOptions::default()).unwrap();
        let report = cross_validate(&spec, &exact, &Tolerances::default(), &small_budget(), 8).unwrap();
        assert!(report.pass, "{:?}", report.failures());
    }

    #[test]
    fn perturbation_is_detected() {
        let spec = zoo::random_lattice(4, 4, 1.0, 3, 0.5).unwrap();
        let opts = PipelineOptions {
            perturbation: Some(1e-3),
            ..Default::default()
        };
        let exact = ExactPipeline::run(&spec, &opts).unwrap();
        let failed: Vec<String> = exact
            .exact_identities(&spec, &Tolerances::default())
            .into_iter()
            .filter(|c| !c.pass)
            .map(|c| c.identity_id)
            .collect();
        assert!(failed.contains(&"wiener_hopf".to_string()), "{failed:?}");
        assert!(failed.contains(&"ladder_stationarity".to_string()));
    }

    #[test]
    fn drift_gate_and_override() {
        let spec = zoo::remark2();
        assert!(matches!(
            ExactPipeline::run(&spec, &PipelineOptions::default()),
            Err(Error::DriftGate { .. })
        ));
        let opts = PipelineOptions {
            allow_nonpositive_drift: true,
            truncation: TruncationPolicy {
                max_depth: 1 << 10,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            ExactPipeline::run(&spec, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }
}
