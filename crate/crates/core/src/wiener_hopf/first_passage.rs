use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{KernelMatrix, LatticeMeasure};
use crate::linalg::BandedMatrix;
use crate::model::MrwSpec;

/// Which ladder variable a first-passage system computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// First time the walk is strictly above its start (`> 0`).
    StrictAscending,
    /// First time the walk is at or below its start (`≤ 0`).
    WeakDescending,
}

impl Direction {
    /// Transient levels of the truncated system for depth `k`.
    fn transient(self, k: i64) -> (i64, i64) {
        match self {
            Direction::StrictAscending => (-k, 0),
            Direction::WeakDescending => (1, k),
        }
    }

    fn captured(self, level: i64) -> bool {
        match self {
            Direction::StrictAscending => level > 0,
            Direction::WeakDescending => level <= 0,
        }
    }
}

/// Solution of one level-truncated first-passage system.
#[derive(Debug, Clone)]
pub struct FirstPassage {
    pub direction: Direction,
    pub depth: usize,
    /// `(i, j)` entry: law of the ladder height on `{M_σ = j, σ < censoring}`
    /// started from `i`.
    pub kernel: KernelMatrix,
    /// Mass censored at the far boundary, per starting state.
    pub row_defect: Vec<f64>,
    /// `E_i[min(σ, censoring time)]`.
    pub expected_steps: Vec<f64>,
}

impl FirstPassage {
    pub fn row_mass(&self) -> Vec<f64> {
        self.kernel.total_mass_matrix().row_sums()
    }
}

struct Accumulator {
    points: Vec<Vec<(i64, f64)>>,
    defect: f64,
}

/// Builds and solves the absorbing system on `(state, level)` with levels
/// restricted to the transient band of `direction` at depth `depth`. The
/// walk starts at level 0; its first step is taken explicitly, so level 0
/// is transient only for the ascending system.
pub fn first_passage(spec: &MrwSpec, direction: Direction, depth: usize) -> Result<FirstPassage> {
    if depth == 0 {
        return Err(Error::InvalidArgument("truncation depth must be positive".into()));
    }
    let m = spec.num_states();
    let k = depth as i64;
    let (lo, hi) = direction.transient(k);
    let levels = (hi - lo + 1) as usize;
    let n = levels * m;
    let idx = |level: i64, s: usize| (level - lo) as usize * m + s;
    let up = spec.max_up_jump() as usize;
    let down = spec.max_down_jump() as usize;

    // Row = target, column = source: this is (I - Q_T)^T.
    let mut system = BandedMatrix::zeros(n, up * m + m - 1, down * m + m - 1);
    for t in 0..n {
        system.add(t, t, 1.0);
    }
    for level in lo..=hi {
        for s in 0..m {
            for (j, p, f) in spec.edges(s) {
                for (jump, w) in f.measure().atoms() {
                    let target = level + jump;
                    if (lo..=hi).contains(&target) {
                        system.add(idx(target, j), idx(level, s), -p * w);
                    }
                }
            }
        }
    }
    let lu = system.factor()?;

    let mut kernel = KernelMatrix::zeros(m, spec.span());
    let mut row_defect = vec![0.0; m];
    let mut expected_steps = vec![0.0; m];
    for start in 0..m {
        let mut acc = Accumulator {
            points: vec![Vec::new(); m],
            defect: 0.0,
        };
        let route = |acc: &mut Accumulator, rhs: Option<&mut Vec<f64>>, from: i64, mass: f64, s: usize| {
            let mut rhs = rhs;
            for (j, p, f) in spec.edges(s) {
                for (jump, w) in f.measure().atoms() {
                    let target = from + jump;
                    let q = mass * p * w;
                    if direction.captured(target) {
                        acc.points[j].push((target, q));
                    } else if (lo..=hi).contains(&target) {
                        if let Some(r) = rhs.as_deref_mut() {
                            r[idx(target, j)] += q;
                        }
                    } else {
                        acc.defect += q;
                    }
                }
            }
        };
        let mut rhs = vec![0.0; n];
        route(&mut acc, Some(&mut rhs), 0, 1.0, start);
        let visits = lu.solve(&rhs);
        for level in lo..=hi {
            for s in 0..m {
                let x = visits[idx(level, s)];
                if x != 0.0 {
                    route(&mut acc, None, level, x, s);
                }
            }
        }
        for (j, pts) in acc.points.iter().enumerate() {
            kernel.set(start, j, LatticeMeasure::from_points(spec.span(), pts))?;
        }
        row_defect[start] = acc.defect;
        expected_steps[start] = 1.0 + visits.iter().sum::<f64>();
    }
    Ok(FirstPassage {
        direction,
        depth,
        kernel,
        row_defect,
        expected_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo;

    #[test]
    fn two_cycle_ascending_by_hand() {
        let spec = zoo::two_cycle();
        let fp = first_passage(&spec, Direction::StrictAscending, 8).unwrap();
        assert_eq!(fp.kernel.get(0, 1), &LatticeMeasure::dirac(1.0, 2));
        assert!(fp.kernel.get(0, 0).is_zero());
        assert!(fp.kernel.get(1, 0).is_zero());
        assert!(fp.kernel.get(1, 1).distance(&LatticeMeasure::dirac(1.0, 1)).unwrap() < 1e-15);
        assert_eq!(fp.row_defect, vec![0.0, 0.0]);
        assert!((fp.expected_steps[0] - 1.0).abs() < 1e-15);
        assert!((fp.expected_steps[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mass_is_conserved() {
        let spec = zoo::random_lattice(9, 4, 1.0, 3, 0.4).unwrap();
        for dir in [Direction::StrictAscending, Direction::WeakDescending] {
            for depth in [1, 3, 10, 40] {
                let fp = first_passage(&spec, dir, depth).unwrap();
                for (mass, defect) in fp.row_mass().iter().zip(&fp.row_defect) {
                    assert!((mass + defect - 1.0).abs() < 1e-10, "{dir:?} {depth}");
                }
            }
        }
    }

    #[test]
    fn constant_walk_is_singular() {
        let text = r#"{"states": ["x"], "transitions": [
            {"from": 0, "to": 0, "prob": 1, "increment": {"support": [0], "weights": [1]}}],
            "lattice_span": 1}"#;
        let spec = MrwSpec::from_json(text).unwrap();
        assert!(matches!(
            first_passage(&spec, Direction::StrictAscending, 4),
            Err(Error::Singular(_))
        ));
    }
}
