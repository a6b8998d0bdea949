//! Markov random walk models with a finite driving chain and lattice
//! increments: validation, the JSON model format, the stationary law of the
//! driving chain, the time-reversed (dual) model and a set of generators.

mod chain;
pub mod zoo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeMeasure;

pub use chain::{
    build_dual, stationary_distribution, stationary_drift, stationary_increment_law, DriftReport,
    StationaryDistribution,
};
pub use zoo::model_zoo;

/// Tolerance for probability sums at validation time.
pub const VALIDATION_TOL: f64 = 1e-12;
/// Tolerance for linear-solve residuals.
pub const SOLVE_TOL: f64 = 1e-10;

const LATTICE_RTOL: f64 = 1e-9;

/// State identifier in the JSON model format: names are kept verbatim and
/// numbers are converted to their decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateId {
    Name(String),
    Number(i64),
}

impl StateId {
    fn into_name(self) -> String {
        match self {
            StateId::Name(s) => s,
            StateId::Number(n) => n.to_string(),
        }
    }
}

/// Reference to a state inside a transition: an integer is a position in
/// `states`, a string is a state name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawIncrement {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTransition {
    pub from: StateRef,
    pub to: StateRef,
    pub prob: f64,
    pub increment: RawIncrement,
}

/// Unvalidated model description, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawModel {
    pub states: Vec<StateId>,
    pub transitions: Vec<RawTransition>,
    pub lattice_span: f64,
}

impl RawModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Increment distribution `F_ij`: a probability measure on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementLaw(LatticeMeasure);

impl IncrementLaw {
    pub fn measure(&self) -> &LatticeMeasure {
        &self.0
    }

    /// Mean in units of the walk.
    pub fn mean(&self) -> f64 {
        self.0.first_moment()
    }

    pub fn min_index(&self) -> i64 {
        self.0.min_index().expect("increment laws are nonzero")
    }

    pub fn max_index(&self) -> i64 {
        self.0.max_index().expect("increment laws are nonzero")
    }

    /// Support points (units of the walk) with their weights.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let d = self.0.span();
        self.0.atoms().map(move |(k, w)| (k as f64 * d, w))
    }
}

/// Validated model: a finite irreducible driving chain with transition
/// matrix `p_ij` and lattice increment laws `F_ij` on every edge with
/// `p_ij > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrwSpec {
    states: Vec<String>,
    span: f64,
    transition: Vec<f64>,
    increments: Vec<Option<IncrementLaw>>,
}

impl MrwSpec {
    pub(crate) fn from_parts(
        states: Vec<String>,
        span: f64,
        transition: Vec<f64>,
        increments: Vec<Option<IncrementLaw>>,
    ) -> Self {
        MrwSpec {
            states,
            span,
            transition,
            increments,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.num_states() + j]
    }

    pub fn increment(&self, i: usize, j: usize) -> Option<&IncrementLaw> {
        self.increments[i * self.num_states() + j].as_ref()
    }

    /// Edges `(j, p_ij, F_ij)` leaving `i`.
    pub fn edges(&self, i: usize) -> impl Iterator<Item = (usize, f64, &IncrementLaw)> + '_ {
        let m = self.num_states();
        (0..m).filter_map(move |j| {
            self.increments[i * m + j]
                .as_ref()
                .map(|f| (j, self.transition[i * m + j], f))
        })
    }

    pub fn transition_rows(&self) -> Vec<Vec<f64>> {
        let m = self.num_states();
        (0..m).map(|i| self.transition[i * m..(i + 1) * m].to_vec()).collect()
    }

    /// Largest upward jump in lattice units (0 if there is none).
    pub fn max_up_jump(&self) -> i64 {
        self.increments
            .iter()
            .flatten()
            .map(|f| f.max_index())
            .max()
            .unwrap_or(0)
            .max(0)
    }

    /// Largest downward jump in lattice units, as a nonnegative number.
    pub fn max_down_jump(&self) -> i64 {
        self.increments
            .iter()
            .flatten()
            .map(|f| -f.min_index())
            .max()
            .unwrap_or(0)
            .max(0)
    }

    pub fn max_jump(&self) -> i64 {
        self.max_up_jump().max(self.max_down_jump())
    }

    /// `G_ij = p_ij F_ij` as a kernel matrix.
    pub fn kernel(&self) -> crate::lattice::KernelMatrix {
        let m = self.num_states();
        let mut g = crate::lattice::KernelMatrix::zeros(m, self.span);
        for i in 0..m {
            for (j, p, f) in self.edges(i) {
                g.set(i, j, f.measure().scale(p))
                    .expect("increment laws share the model span");
            }
        }
        g
    }

    /// Canonical description: states by name, transitions in row-major
    /// order, support points ascending, zero weights dropped.
    pub fn to_raw(&self) -> RawModel {
        let m = self.num_states();
        let mut transitions = Vec::new();
        for i in 0..m {
            for (j, p, f) in self.edges(i) {
                let (support, weights) = f.points().unzip();
                transitions.push(RawTransition {
                    from: StateRef::Name(self.states[i].clone()),
                    to: StateRef::Name(self.states[j].clone()),
                    prob: p,
                    increment: RawIncrement { support, weights },
                });
            }
        }
        RawModel {
            states: self.states.iter().cloned().map(StateId::Name).collect(),
            transitions,
            lattice_span: self.span,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_raw().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        validate_spec(RawModel::from_json(text)?)
    }
}

fn resolve(states: &[String], r: &StateRef, index: usize) -> Result<usize> {
    match r {
        StateRef::Index(k) if *k < states.len() => Ok(*k),
        StateRef::Index(k) => Err(Error::UnknownState {
            index,
            state: k.to_string(),
        }),
        StateRef::Name(name) => states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownState {
                index,
                state: name.clone(),
            }),
    }
}

fn parse_increment(index: usize, raw: &RawIncrement, span: f64) -> Result<IncrementLaw> {
    let malformed = |reason: &str| Error::MalformedIncrement {
        index,
        reason: reason.to_string(),
    };
    if raw.support.len() != raw.weights.len() {
        return Err(malformed("support and weights differ in length"));
    }
    if raw.support.is_empty() {
        return Err(malformed("empty support"));
    }
    let mut points = Vec::with_capacity(raw.support.len());
    let mut total = 0.0;
    for (&x, &w) in raw.support.iter().zip(&raw.weights) {
        if !x.is_finite() {
            return Err(malformed("non-finite support point"));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(malformed("weights must be finite and nonnegative"));
        }
        let k = (x / span).round();
        if (x - k * span).abs() > LATTICE_RTOL * span.max(x.abs()) || k.abs() > 1e15 {
            return Err(Error::OffLattice { index, point: x, span });
        }
        points.push((k as i64, w));
        total += w;
    }
    let mut keys: Vec<i64> = points.iter().map(|p| p.0).collect();
    keys.sort_unstable();
    if keys.windows(2).any(|w| w[0] == w[1]) {
        return Err(malformed("support points are not distinct"));
    }
    if (total - 1.0).abs() > VALIDATION_TOL {
        return Err(Error::IncrementNotNormalized { index, total });
    }
    Ok(IncrementLaw(LatticeMeasure::from_points(span, &points)))
}

/// Checks every model invariant and builds the dense representation.
pub fn validate_spec(raw: RawModel) -> Result<MrwSpec> {
    let span = raw.lattice_span;
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::InvalidSpan(span));
    }
    let states: Vec<String> = raw.states.into_iter().map(StateId::into_name).collect();
    if states.is_empty() {
        return Err(Error::EmptyModel);
    }
    for (k, s) in states.iter().enumerate() {
        if states[..k].contains(s) {
            return Err(Error::DuplicateState(s.clone()));
        }
    }
    let m = states.len();
    let mut transition = vec![0.0; m * m];
    let mut increments: Vec<Option<IncrementLaw>> = vec![None; m * m];
    let mut seen = vec![false; m * m];
    for (index, t) in raw.transitions.iter().enumerate() {
        let i = resolve(&states, &t.from, index)?;
        let j = resolve(&states, &t.to, index)?;
        if seen[i * m + j] {
            return Err(Error::DuplicateTransition {
                index,
                from: states[i].clone(),
                to: states[j].clone(),
            });
        }
        seen[i * m + j] = true;
        if !t.prob.is_finite() || t.prob < 0.0 || t.prob > 1.0 + VALIDATION_TOL {
            return Err(Error::InvalidProbability { index, prob: t.prob });
        }
        let law = parse_increment(index, &t.increment, span)?;
        if t.prob > 0.0 {
            transition[i * m + j] = t.prob;
            increments[i * m + j] = Some(law);
        }
    }
    for i in 0..m {
        let sum: f64 = transition[i * m..(i + 1) * m].iter().sum();
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::NonStochasticRow {
                row: i,
                state: states[i].clone(),
                sum,
            });
        }
    }
    check_irreducible(&states, &transition)?;
    Ok(MrwSpec {
        states,
        span,
        transition,
        increments,
    })
}

fn reachable(m: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; m];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..m {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn check_irreducible(states: &[String], p: &[f64]) -> Result<()> {
    let m = states.len();
    let forward = reachable(m, |i, j| p[i * m + j] > 0.0);
    if let Some(k) = forward.iter().position(|&r| !r) {
        return Err(Error::Reducible {
            from: 0,
            unreachable: k,
            state: states[k].clone(),
        });
    }
    let backward = reachable(m, |i, j| p[j * m + i] > 0.0);
    if let Some(k) = backward.iter().position(|&r| !r) {
        return Err(Error::Reducible {
            from: k,
            unreachable: 0,
            state: states[0].clone(),
        });
    }
    Ok(())
}
