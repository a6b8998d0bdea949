use serde::Serialize;

use super::PathSample;

/// Ladder epochs of a path together with the driving state and walk value
/// at each epoch. Epoch 0 is always index 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderExtraction {
    pub epochs: Vec<usize>,
    pub states: Vec<usize>,
    pub heights: Vec<i128>,
    /// True when the path ends on a ladder epoch, i.e. no excursion is cut
    /// by the horizon.
    pub complete: bool,
}

impl LadderExtraction {
    fn scan(path: &PathSample, is_next: impl Fn(i128, i128) -> bool) -> Self {
        let mut out = LadderExtraction {
            epochs: vec![0],
            states: vec![path.states[0]],
            heights: vec![path.levels[0]],
            complete: true,
        };
        let mut record = path.levels[0];
        for (k, &s) in path.levels.iter().enumerate().skip(1) {
            if is_next(s, record) {
                record = s;
                out.epochs.push(k);
                out.states.push(path.states[k]);
                out.heights.push(s);
            }
        }
        out.complete = *out.epochs.last().unwrap() == path.steps();
        out
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Strict ladder invariants: heights strictly increase and every value
    /// strictly between two epochs stays at or below the earlier height.
    pub fn check_ascending_maximality(&self, path: &PathSample) -> bool {
        if self.heights.windows(2).any(|w| w[1] <= w[0]) {
            return false;
        }
        let mut e = 0;
        for (k, &s) in path.levels.iter().enumerate() {
            while e + 1 < self.epochs.len() && self.epochs[e + 1] <= k {
                e += 1;
            }
            if self.epochs[e] != k && s > self.heights[e] {
                return false;
            }
        }
        true
    }
}

/// `σ_n^> = inf{k > σ_{n−1}^> : S_k > S_{σ_{n−1}^>}}` in one pass.
pub fn extract_strict_ascending(path: &PathSample) -> LadderExtraction {
    LadderExtraction::scan(path, |s, record| s > record)
}

/// Weakly descending epochs: `S_k ≤ S` at the previous epoch.
pub fn extract_weak_descending(path: &PathSample) -> LadderExtraction {
    LadderExtraction::scan(path, |s, record| s <= record)
}

/// Increments of the strict ladder heights between successive visits of the
/// ladder chain to `state`.
pub fn embedded_renewal(path: &PathSample, state: usize) -> Vec<i128> {
    let ladder = extract_strict_ascending(path);
    let visits: Vec<i128> = ladder
        .states
        .iter()
        .zip(&ladder.heights)
        .filter(|(&s, _)| s == state)
        .map(|(_, &h)| h)
        .collect();
    visits.windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_dual, stationary_distribution, zoo};
    use crate::sim::simulate_path;

    fn path(levels: &[i128]) -> PathSample {
        PathSample::new(vec![0; levels.len()], levels.to_vec(), 1.0, 0)
    }

    #[test]
    fn ascending_by_definition() {
        let l = extract_strict_ascending(&path(&[0, 2, 1, 3, 2]));
        assert_eq!(l.epochs, vec![0, 1, 3]);
        assert_eq!(l.heights, vec![0, 2, 3]);
        assert!(!l.complete);
        assert!(l.check_ascending_maximality(&path(&[0, 2, 1, 3, 2])));
    }

    #[test]
    fn increasing_path_is_all_epochs() {
        let p = path(&[0, 1, 3, 4, 9]);
        assert_eq!(extract_strict_ascending(&p).epochs, vec![0, 1, 2, 3, 4]);
        assert!(extract_strict_ascending(&p).complete);
        assert_eq!(extract_weak_descending(&p).epochs, vec![0]);
    }

    #[test]
    fn two_cycle_from_b() {
        let spec = zoo::two_cycle();
        let p = simulate_path(&spec, 1, 4, 0).unwrap();
        assert_eq!(p.levels, vec![0, -1, 1, 0, 2]);
        let l = extract_strict_ascending(&p);
        assert_eq!(l.epochs, vec![0, 2, 4]);
        assert_eq!(l.states, vec![1, 1, 1]);
    }

    #[test]
    fn weak_descending_by_definition() {
        assert_eq!(extract_weak_descending(&path(&[0, -1, -1, 2])).epochs, vec![0, 1, 2]);
    }

    #[test]
    fn dual_two_cycle_descends_at_one() {
        let spec = zoo::two_cycle();
        let pi = stationary_distribution(&spec).unwrap();
        let dual = build_dual(&spec, &pi);
        let p = simulate_path(&dual, 0, 6, 0).unwrap();
        assert_eq!(&p.levels[..4], &[0, -1, 1, 0]);
        assert_eq!(extract_weak_descending(&p).epochs[1], 1);
    }

    #[test]
    fn renewal_increments() {
        let spec = zoo::two_cycle();
        let p = simulate_path(&spec, 1, 40, 0).unwrap();
        let r = embedded_renewal(&p, 1);
        assert_eq!(r.len(), 20);
        assert!(r.iter().all(|&x| x == 1));
        assert!(embedded_renewal(&p, 0).is_empty());

        let walk = simulate_path(&zoo::simple_rw(0.6).unwrap(), 0, 2000, 11).unwrap();
        let r = embedded_renewal(&walk, 0);
        assert!(!r.is_empty() && r.iter().all(|&x| x == 1));
    }

    #[test]
    fn maximality_detects_violation() {
        let p = path(&[0, 2, 1, 3]);
        let bogus = LadderExtraction {
            epochs: vec![0, 3],
            states: vec![0, 0],
            heights: vec![0, 3],
            complete: true,
        };
        assert!(!bogus.check_ascending_maximality(&p));
    }
}
