use std::fmt::Write as _;

use serde_json::json;

use super::config::RunConfig;
use super::report::{num, ReportBundle, Status, Table};
use crate::error::Result;
use crate::lattice::KernelMatrix;
use crate::model::{build_dual, stationary_distribution, stationary_drift, MrwSpec};
use crate::sim::flower::{
    audit_flower, flower_min_tail_mc, flower_min_tail_probability, simulate_flower, FlowerDirection,
};
use crate::sim::{
    coupling_suite, derive_seed, embedded_renewal, estimate_ladder_occupation, estimate_sigma0_probability,
    extract_strict_ascending, extract_weak_descending, simulate_path, MCEstimate,
};
use crate::theory::{cross_validate, drift_gate, ExactPipeline};
use crate::wiener_hopf::{check_substochastic, ladder_kernels, perturb, verify_factorization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Factorize,
    Verify,
    Simulate,
    Counterexample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Factorize => "factorize",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::Counterexample => "counterexample",
        }
    }
}

/// Runs one command; errors become a bundle with the matching status.
pub fn run(command: Command, cfg: &RunConfig) -> ReportBundle {
    let result = match command {
        Command::Validate => cmd_validate(cfg),
        Command::Factorize => cmd_factorize(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Counterexample => cmd_counterexample(cfg),
    };
    result.unwrap_or_else(|e| ReportBundle::from_error(command.name(), &e))
}

fn model_json(name: &str, spec: &MrwSpec) -> serde_json::Value {
    json!({
        "source": name,
        "states": spec.states(),
        "lattice_span": spec.span(),
    })
}

fn kernel_rows(table: &mut Table, label: &str, k: &KernelMatrix, spec: &MrwSpec) {
    for i in 0..k.dim() {
        for j in 0..k.dim() {
            for (idx, w) in k.get(i, j).atoms() {
                table.push(vec![
                    label.to_string(),
                    spec.state_name(i).to_string(),
                    spec.state_name(j).to_string(),
                    num(idx as f64 * k.span()),
                    num(w),
                ]);
            }
        }
    }
}

fn finish(mut b: ReportBundle, lines: &[String]) -> ReportBundle {
    let _ = writeln!(b.summary, "{}: {:?} (exit {})", b.command, b.status, b.exit_code());
    for l in lines {
        let _ = writeln!(b.summary, "{l}");
    }
    b
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ReportBundle> {
    let (name, spec) = cfg.load_model()?;
    let pi = stationary_distribution(&spec)?;
    let drift = stationary_drift(&spec, &pi);
    let mut table = Table::new("stationary", &["state", "pi"]);
    for i in 0..spec.num_states() {
        table.push(vec![spec.state_name(i).to_string(), num(pi[i])]);
    }
    let body = json!({
        "model": model_json(&name, &spec),
        "results": {
            "pi": pi.pi,
            "drift": drift,
            "transition_matrix": spec.transition_rows(),
            "canonical_model": spec.to_raw(),
        }
    });
    let mut b = ReportBundle::new("validate", Status::Pass, body);
    b.tables.push(table);
    let mut lines = vec![format!("states: {}", spec.num_states()), format!("drift: {}", drift.mu)];
    lines.extend((0..spec.num_states()).map(|i| format!("pi[{}] = {}", spec.state_name(i), pi[i])));
    Ok(finish(b, &lines))
}

pub fn cmd_factorize(cfg: &RunConfig) -> Result<ReportBundle> {
    let (name, spec) = cfg.load_model()?;
    let pi = stationary_distribution(&spec)?;
    let drift = stationary_drift(&spec, &pi);
    drift_gate(&drift, cfg.allow_nonpositive_drift)?;
    let dual = build_dual(&spec, &pi);
    let mut kernels = ladder_kernels(&spec, &dual, &pi, &cfg.truncation)?;
    if let Some(size) = cfg.inject_perturbation {
        kernels.ascending.kernel = perturb(&kernels.ascending.kernel, size);
    }
    let tol = cfg.tolerances.identity;
    let g = spec.kernel();
    let fact = verify_factorization(&g, &kernels.star_descending, &kernels.ascending.kernel)?;
    let sub = check_substochastic(&kernels.descending, &kernels.escape, &pi, tol);
    let pass = fact.max_residual <= tol && fact.mass_residual <= tol && sub.pass;

    let mut table = Table::new("kernels", &["kernel", "from", "to", "point", "weight"]);
    kernel_rows(&mut table, "ascending", &kernels.ascending.kernel, &spec);
    kernel_rows(&mut table, "descending_dual", &kernels.descending.kernel, &spec);
    kernel_rows(&mut table, "star_descending", &kernels.star_descending, &spec);
    let body = json!({
        "model": model_json(&name, &spec),
        "truncation": cfg.truncation,
        "results": {
            "pi": pi.pi,
            "drift": drift,
            "kernels": kernels,
            "factorization": fact,
            "substochastic": sub,
        }
    });
    let mut b = ReportBundle::new("factorize", Status::from_pass(pass), body);
    b.tables.push(table);
    let lines = vec![
        format!(
            "factorization residual: {:e} (tolerance {tol:e})",
            fact.max_residual.abs()
        ),
        format!("mass residual: {:e}", fact.mass_residual),
        format!("descending row sums: {:?}", sub.row_sums),
        format!("strictly substochastic rows: {:?}", sub.strict_rows),
        format!("escape lower: {:?}", kernels.escape.lower),
        format!("escape upper: {:?}", kernels.escape.upper),
    ];
    Ok(finish(b, &lines))
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<ReportBundle> {
    let seed = cfg.require_seed()?;
    let (name, spec) = cfg.load_model()?;
    let exact = ExactPipeline::run(&spec, &cfg.pipeline_options())?;
    let report = cross_validate(&spec, &exact, &cfg.tolerances, &cfg.mc, seed)?;

    let mut ids = Table::new(
        "identities",
        &[
            "identity_id",
            "relation",
            "component",
            "lhs",
            "rhs",
            "tolerance",
            "pass",
        ],
    );
    for c in &report.identities {
        for k in 0..c.lhs.len() {
            ids.push(vec![
                c.identity_id.clone(),
                format!("{:?}", c.relation).to_lowercase(),
                k.to_string(),
                num(c.lhs[k]),
                num(c.rhs[k]),
                num(c.tolerance[k]),
                c.pass.to_string(),
            ]);
        }
    }
    let mut ladder = Table::new(
        "ladder_stationary",
        &[
            "state",
            "pi",
            "pi_ladder",
            "lower",
            "upper",
            "nullvector",
            "escape_lower",
            "escape_upper",
        ],
    );
    for i in 0..spec.num_states() {
        ladder.push(vec![
            spec.state_name(i).to_string(),
            num(exact.pi[i]),
            num(exact.ladder.pi_ladder[i]),
            num(exact.ladder.lower[i]),
            num(exact.ladder.upper[i]),
            num(exact.nullvector.ladder.pi_ladder[i]),
            num(exact.kernels.escape.lower[i]),
            num(exact.kernels.escape.upper[i]),
        ]);
    }
    let mut nu = Table::new("nu", &["state", "m", "nu"]);
    for (i, row) in exact.nu.nu.iter().enumerate() {
        for (m, &v) in row.iter().enumerate() {
            if v > 0.0 {
                nu.push(vec![spec.state_name(i).to_string(), (m + 1).to_string(), num(v)]);
            }
        }
    }
    let mut est = Table::new(
        "estimates",
        &[
            "estimator",
            "state",
            "estimate",
            "std_error",
            "replicates",
            "horizon",
            "seed",
        ],
    );
    push_estimates(&mut est, "ladder_occupation", &spec, &report.occupation);
    push_estimates(&mut est, "sigma0_probability", &spec, &report.sigma0);
    push_estimates(&mut est, "first_hit_ladder_support", &spec, &report.first_hit);

    let mut lines: Vec<String> = report
        .identities
        .iter()
        .map(|c| format!("{:<28} {}", c.identity_id, if c.pass { "pass" } else { "FAIL" }))
        .collect();
    lines.push(format!(
        "c = {} in [{}, {}]",
        exact.ladder.c, exact.ladder.c_lower, exact.ladder.c_upper
    ));
    lines.push(format!("pi_ladder = {:?}", exact.ladder.pi_ladder));
    lines.push(format!(
        "E sigma = {} (1/c = {})",
        exact.epochs.mean, exact.epochs.inverse_c
    ));

    let body = json!({
        "model": model_json(&name, &spec),
        "seed": seed,
        "options": cfg.pipeline_options(),
        "results": {
            "exact": exact,
            "verification": report,
        }
    });
    let mut b = ReportBundle::new("verify", Status::from_pass(report.pass), body);
    b.tables.extend([ids, ladder, nu, est]);
    Ok(finish(b, &lines))
}

fn push_estimates(table: &mut Table, label: &str, spec: &MrwSpec, est: &[MCEstimate]) {
    for (i, e) in est.iter().enumerate() {
        table.push(vec![
            label.to_string(),
            spec.state_name(i).to_string(),
            num(e.value),
            num(e.standard_error),
            e.replicates.to_string(),
            e.horizon.to_string(),
            e.seed.to_string(),
        ]);
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<ReportBundle> {
    let seed = cfg.require_seed()?;
    let (name, spec) = cfg.load_model()?;
    let s = &cfg.simulate;
    let pi = stationary_distribution(&spec)?;
    let path = simulate_path(&spec, s.initial_state, s.n_steps, derive_seed(seed, "path"))?;
    let ascending = extract_strict_ascending(&path);
    let maximal = ascending.check_ascending_maximality(&path);
    let dual = build_dual(&spec, &pi);
    let dual_path = simulate_path(&dual, s.initial_state, s.n_steps, derive_seed(seed, "dual_path"))?;
    let descending = extract_weak_descending(&dual_path);
    let descending_ok = descending.heights.windows(2).all(|w| w[1] <= w[0]);

    let mut visits = vec![0usize; spec.num_states()];
    for &st in ascending.states.iter().skip(1) {
        visits[st] += 1;
    }
    let renewal_state = s.renewal_state.unwrap_or_else(|| {
        (0..spec.num_states())
            .max_by_key(|&i| (visits[i], usize::MAX - i))
            .unwrap_or(0)
    });
    let renewal = embedded_renewal(&path, renewal_state);
    let renewal_ok = renewal.iter().all(|&x| x > 0);

    let occupation = estimate_ladder_occupation(
        &spec,
        s.initial_state,
        s.n_ladder,
        s.burn_in,
        s.max_steps,
        derive_seed(seed, "occupation"),
        s.replicates,
    )?;
    let sigma0 = estimate_sigma0_probability(&spec, &pi, s.n_back, derive_seed(seed, "sigma0"), s.sigma0_replicates)?;
    let coupling = match s.coupling {
        Some(c) => Some(coupling_suite(&spec, c.i, c.j, c.horizon, derive_seed(seed, "coupling"), c.runs)?.0),
        None => None,
    };
    let coupling_ok = coupling.as_ref().is_none_or(|c| c.all_observed_matched());
    let pass = maximal && descending_ok && renewal_ok && coupling_ok;

    let mut ladder = Table::new("ladder", &["index", "epoch", "state", "height"]);
    for k in 0..ascending.len() {
        ladder.push(vec![
            k.to_string(),
            ascending.epochs[k].to_string(),
            spec.state_name(ascending.states[k]).to_string(),
            num(ascending.heights[k] as f64 * spec.span()),
        ]);
    }
    let mut est = Table::new(
        "estimates",
        &[
            "estimator",
            "state",
            "estimate",
            "std_error",
            "replicates",
            "horizon",
            "seed",
        ],
    );
    push_estimates(&mut est, "ladder_occupation", &spec, &occupation.per_state);
    push_estimates(&mut est, "sigma0_probability", &spec, &sigma0);

    let mut lines = vec![
        format!(
            "path: {} steps, {} strict ascending ladder epochs",
            path.steps(),
            ascending.len() - 1
        ),
        format!("ladder maximality: {}", if maximal { "ok" } else { "VIOLATED" }),
        format!(
            "ladder state visits: {}",
            (0..spec.num_states())
                .map(|i| format!("{}={}", spec.state_name(i), visits[i]))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        format!(
            "renewal at {}: {} increments, all positive: {renewal_ok}",
            spec.state_name(renewal_state),
            renewal.len()
        ),
        format!("dual weak descending epochs: {}", descending.len() - 1),
        format!(
            "occupation: {:?}",
            occupation.per_state.iter().map(|e| e.value).collect::<Vec<_>>()
        ),
    ];
    if let Some(c) = &coupling {
        lines.push(format!(
            "coupling: {}/{} runs coupled, {} with ladder tails observed, {} matched",
            c.coupled, c.runs, c.observed, c.matched
        ));
    }
    let body = json!({
        "model": model_json(&name, &spec),
        "seed": seed,
        "settings": s,
        "results": {
            "path": {
                "steps": path.steps(),
                "final_value": path.partial_sums().last().copied(),
                "ladder_epochs": ascending.len() - 1,
                "ladder_complete": ascending.complete,
                "ladder_maximality": maximal,
                "ladder_state_visits": visits,
            },
            "dual_path": {
                "weak_descending_epochs": descending.len() - 1,
                "heights_nonincreasing": descending_ok,
            },
            "renewal": {
                "state": renewal_state,
                "increments": renewal.len(),
                "all_positive": renewal_ok,
                "mean_increment": mean_i128(&renewal).map(|m| m * spec.span()),
            },
            "occupation": occupation,
            "sigma0": sigma0,
            "coupling": coupling,
        }
    });
    let mut b = ReportBundle::new("simulate", Status::from_pass(pass), body);
    b.tables.extend([ladder, est]);
    Ok(finish(b, &lines))
}

fn mean_i128(v: &[i128]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64)
}

pub fn cmd_counterexample(cfg: &RunConfig) -> Result<ReportBundle> {
    let seed = cfg.require_seed()?;
    let c = &cfg.counterexample;
    let fwd = simulate_flower(
        c.rule,
        FlowerDirection::Forward,
        c.path_steps,
        derive_seed(seed, "flower"),
    )?;
    let dual = simulate_flower(c.rule, FlowerDirection::Dual, c.path_steps, derive_seed(seed, "flower"))?;
    let fwd_audit = audit_flower(&fwd, c.rule, FlowerDirection::Forward);
    let dual_audit = audit_flower(&dual, c.rule, FlowerDirection::Dual);
    let even_exact = dual
        .levels
        .iter()
        .step_by(2)
        .enumerate()
        .all(|(k, &l)| l == 2 * k as i128);
    let exact = flower_min_tail_probability(c.rule, c.n, c.b);
    let mc = flower_min_tail_mc(c.rule, c.n, c.b, derive_seed(seed, "flower_tail"), c.replicates)?;
    let sigmas = cfg.tolerances.mc_sigmas;
    let tail_ok = mc.within(exact, sigmas, 0.0);
    let pass = fwd_audit.pass() && dual_audit.pass() && even_exact && tail_ok;

    let mut table = Table::new(
        "flower_tail",
        &["n", "b", "exact", "estimate", "std_error", "replicates", "seed"],
    );
    table.push(vec![
        c.n.to_string(),
        c.b.to_string(),
        num(exact),
        num(mc.value),
        num(mc.standard_error),
        mc.replicates.to_string(),
        mc.seed.to_string(),
    ]);
    let lines = vec![
        format!(
            "forward audit: {} steps, {} formula violations",
            fwd_audit.steps, fwd_audit.formula_violations
        ),
        format!(
            "dual audit: {} steps, {} formula violations, {} steps below n-1",
            dual_audit.steps, dual_audit.formula_violations, dual_audit.lower_bound_violations
        ),
        format!("forward minimum over path: {}", fwd_audit.min_level),
        format!(
            "P(min S_n <= -{} for n <= {}): exact {exact}, simulated {} +/- {}",
            c.b, c.n, mc.value, mc.standard_error
        ),
    ];
    let body = json!({
        "seed": seed,
        "settings": c,
        "results": {
            "forward_audit": fwd_audit,
            "dual_audit": dual_audit,
            "dual_even_steps_exact": even_exact,
            "min_tail": {
                "n": c.n,
                "b": c.b,
                "exact": exact,
                "estimate": mc,
                "sigmas": sigmas,
                "within": tail_ok,
            },
        }
    });
    let mut b = ReportBundle::new("counterexample", Status::from_pass(pass), body);
    b.tables.push(table);
    Ok(finish(b, &lines))
}
