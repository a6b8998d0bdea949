//! Exponential bound on deep descents of a walk with positive drift.
//!
//! For `θ > 0` let `M(θ)_ij = p_ij Σ_k F_ij(k) e^{−θk}`. If `h > 0` solves
//! `M(θ)h ≤ h`, then `h(M_n) e^{−θ S_n}` is a supermartingale and
//! `P_j(min_n S_n ≤ −L) ≤ (h_j / min h) e^{−θL}`. A positive solution of
//! `(I − M(θ))h = 1` is such a vector and exists exactly when the spectral
//! radius of `M(θ)` is below one.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::model::MrwSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentCertificate {
    /// Exponent per lattice unit.
    pub theta: f64,
    /// `max h / min h`.
    pub ratio: f64,
}

impl DescentCertificate {
    /// Upper bound on the probability of ever descending by at least
    /// `levels` lattice units, uniformly over starting states.
    pub fn descent_bound(&self, levels: i64) -> f64 {
        (self.ratio * (-self.theta * levels as f64).exp()).min(1.0)
    }

    /// Searches for the largest certifiable `θ`. Returns `None` when no
    /// `θ > 0` admits a certificate, which is the case for nonpositive drift.
    pub fn find(spec: &MrwSpec) -> Option<Self> {
        let down = spec.max_down_jump().max(1) as f64;
        let cap = (300.0 / down).min(20.0);
        if let Some(h) = certify(spec, cap) {
            return Some(Self::from_vector(cap, &h));
        }
        let mut ok = None;
        let mut theta = cap;
        for _ in 0..60 {
            theta *= 0.5;
            if let Some(h) = certify(spec, theta) {
                ok = Some((theta, h));
                break;
            }
        }
        let (mut good, mut h) = ok?;
        let mut bad = 2.0 * good;
        for _ in 0..50 {
            let mid = 0.5 * (good + bad);
            match certify(spec, mid) {
                Some(v) => {
                    good = mid;
                    h = v;
                }
                None => bad = mid,
            }
        }
        Some(Self::from_vector(good, &h))
    }

    fn from_vector(theta: f64, h: &[f64]) -> Self {
        let max = h.iter().copied().fold(f64::MIN, f64::max);
        let min = h.iter().copied().fold(f64::MAX, f64::min);
        DescentCertificate {
            theta,
            ratio: max / min,
        }
    }
}

const MAX_SCALE: f64 = 1e12;

fn tilted(spec: &MrwSpec, theta: f64) -> DMatrix<f64> {
    let m = spec.num_states();
    DMatrix::from_fn(m, m, |i, j| match spec.increment(i, j) {
        Some(f) => {
            spec.prob(i, j)
                * f.measure()
                    .atoms()
                    .map(|(k, w)| w * (-theta * k as f64).exp())
                    .sum::<f64>()
        }
        None => 0.0,
    })
}

fn certify(spec: &MrwSpec, theta: f64) -> Option<Vec<f64>> {
    let m = spec.num_states();
    let tilt = tilted(spec, theta);
    let system = DMatrix::identity(m, m) - &tilt;
    let h = system.lu().solve(&DVector::from_element(m, 1.0))?;
    if h.iter().any(|&x| !(x.is_finite() && x > 0.0 && x < MAX_SCALE)) {
        return None;
    }
    // The exact slack is 1; demanding half of it keeps rounding from
    // certifying a spectral radius at or above one.
    let image = &tilt * &h;
    if image.iter().zip(h.iter()).any(|(mh, hv)| hv - mh < 0.5) {
        return None;
    }
    Some(h.iter().copied().collect())
}
