//! Banded LU without pivoting, used for the level-truncated first-passage
//! systems. Those systems are `I − Q_Tᵀ` with `Q_T` substochastic, i.e.
//! column diagonally dominant, so elimination without row exchanges is
//! stable and keeps the band.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    /// Zero matrix of order `n` with `lower` sub- and `upper` super-diagonals.
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandedMatrix {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.lower >= r && c <= r + self.upper, "({r}, {c}) outside band");
        r * self.width() + (c + self.lower - r)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.lower < r || c > r + self.upper {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// In-place Doolittle factorization.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::Singular("banded first-passage system"));
            }
            let r_end = (k + self.lower).min(n - 1);
            let c_end = (k + self.upper).min(n - 1);
            for r in k + 1..=r_end {
                let s = self.slot(r, k);
                let l = self.data[s] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[s] = l;
                for c in k + 1..=c_end {
                    let u = self.data[self.slot(k, c)];
                    if u != 0.0 {
                        let t = self.slot(r, c);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu(self))
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu(BandedMatrix);

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.0;
        let n = a.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for r in 0..n {
            let lo = r.saturating_sub(a.lower);
            let mut acc = x[r];
            for c in lo..r {
                acc -= a.data[a.slot(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let hi = (r + a.upper).min(n - 1);
            let mut acc = x[r];
            for c in r + 1..=hi {
                acc -= a.data[a.slot(r, c)] * x[c];
            }
            x[r] = acc / a.data[a.slot(r, r)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn agrees_with_dense_lu() {
        let n = 12;
        let (kl, ku) = (3, 2);
        let mut band = BandedMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut state = 7u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for c in 0..n {
            let mut off = 0.0;
            for r in c.saturating_sub(ku)..=(c + kl).min(n - 1) {
                if r != c {
                    let v = -next() * 0.2;
                    band.add(r, c, v);
                    dense[(r, c)] = v;
                    off += v.abs();
                }
            }
            band.add(c, c, off + 0.1);
            dense[(c, c)] = off + 0.1;
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let x = band.factor().unwrap().solve(&b);
        let y = dense.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_singular() {
        let band = BandedMatrix::zeros(3, 1, 1);
        assert!(matches!(band.factor(), Err(Error::Singular(_))));
    }
}
