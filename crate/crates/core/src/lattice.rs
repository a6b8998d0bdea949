//! Finitely supported signed measures on a lattice `{k·d : k ∈ ℤ}` and
//! matrices with such measures as entries.
//!
//! A [`LatticeMeasure`] stores a dense weight array over its support
//! interval together with the lattice index of the first weight. All kernel
//! arithmetic of the crate (ladder kernels, the factorization residual) is
//! carried out on these values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights at the edges of the support with magnitude at or below this value
/// are dropped after arithmetic.
pub const TRIM_THRESHOLD: f64 = 1e-15;

const SPAN_RTOL: f64 = 1e-12;

fn same_span(a: f64, b: f64) -> bool {
    (a - b).abs() <= SPAN_RTOL * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMeasure {
    span: f64,
    offset: i64,
    weights: Vec<f64>,
}

impl LatticeMeasure {
    /// Builds a measure with weights for the lattice indices
    /// `offset, offset+1, ...`. Exact zeros at both ends are removed.
    pub fn new(span: f64, offset: i64, weights: Vec<f64>) -> Self {
        let mut m = LatticeMeasure { span, offset, weights };
        m.trim(0.0);
        m
    }

    pub fn zero(span: f64) -> Self {
        LatticeMeasure {
            span,
            offset: 0,
            weights: Vec::new(),
        }
    }

    /// Point mass `w·δ_{k·d}`.
    pub fn point(span: f64, index: i64, weight: f64) -> Self {
        LatticeMeasure::new(span, index, vec![weight])
    }

    pub fn dirac(span: f64, index: i64) -> Self {
        LatticeMeasure::point(span, index, 1.0)
    }

    /// Builds a measure from `(lattice index, weight)` pairs; repeated indices
    /// accumulate.
    pub fn from_points(span: f64, points: &[(i64, f64)]) -> Self {
        let (Some(lo), Some(hi)) = (points.iter().map(|p| p.0).min(), points.iter().map(|p| p.0).max()) else {
            return LatticeMeasure::zero(span);
        };
        let mut weights = vec![0.0; (hi - lo + 1) as usize];
        for &(k, w) in points {
            weights[(k - lo) as usize] += w;
        }
        LatticeMeasure::new(span, lo, weights)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// Lattice index of the first stored weight.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_index(&self) -> Option<i64> {
        (!self.weights.is_empty()).then_some(self.offset)
    }

    pub fn max_index(&self) -> Option<i64> {
        (!self.weights.is_empty()).then(|| self.offset + self.weights.len() as i64 - 1)
    }

    pub fn weight_at(&self, index: i64) -> f64 {
        let k = index - self.offset;
        if k < 0 {
            return 0.0;
        }
        self.weights.get(k as usize).copied().unwrap_or(0.0)
    }

    /// `(lattice index, weight)` for every stored weight, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(k, &w)| (self.offset + k as i64, w))
    }

    /// Nonzero `(lattice index, weight)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.iter().filter(|&(_, w)| w != 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Σ |w_k|.
    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// First moment in lattice units.
    pub fn first_moment_index(&self) -> f64 {
        self.iter().map(|(k, w)| k as f64 * w).sum()
    }

    /// First moment in units of the walk (`Σ w_k · k·d`).
    pub fn first_moment(&self) -> f64 {
        self.first_moment_index() * self.span
    }

    pub fn trim(&mut self, threshold: f64) {
        let lead = self.weights.iter().take_while(|w| w.abs() <= threshold).count();
        if lead == self.weights.len() {
            self.weights.clear();
            self.offset = 0;
            return;
        }
        let trail = self.weights.iter().rev().take_while(|w| w.abs() <= threshold).count();
        self.weights.truncate(self.weights.len() - trail);
        self.weights.drain(..lead);
        self.offset += lead as i64;
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = LatticeMeasure {
            span: self.span,
            offset: self.offset,
            weights: self.weights.iter().map(|w| w * factor).collect(),
        };
        out.trim(TRIM_THRESHOLD);
        out
    }

    fn check_span(&self, other: &Self) -> Result<()> {
        if same_span(self.span, other.span) {
            Ok(())
        } else {
            Err(Error::SpanMismatch(self.span, other.span))
        }
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.check_span(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.scale(sign));
        }
        let lo = self.offset.min(other.offset);
        let hi = self.max_index().unwrap().max(other.max_index().unwrap());
        let mut weights = vec![0.0; (hi - lo + 1) as usize];
        for (k, w) in self.iter() {
            weights[(k - lo) as usize] += w;
        }
        for (k, w) in other.iter() {
            weights[(k - lo) as usize] += sign * w;
        }
        let mut out = LatticeMeasure {
            span: self.span,
            offset: lo,
            weights,
        };
        out.trim(TRIM_THRESHOLD);
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    /// Exact discrete convolution.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_span(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(LatticeMeasure::zero(self.span));
        }
        let mut weights = vec![0.0; self.weights.len() + other.weights.len() - 1];
        for (a, &wa) in self.weights.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            for (b, &wb) in other.weights.iter().enumerate() {
                weights[a + b] += wa * wb;
            }
        }
        let mut out = LatticeMeasure {
            span: self.span,
            offset: self.offset + other.offset,
            weights,
        };
        out.trim(TRIM_THRESHOLD);
        Ok(out)
    }

    /// Total variation norm of `self − other`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.total_variation())
    }
}

/// Square matrix of lattice measures sharing one span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    dim: usize,
    span: f64,
    entries: Vec<LatticeMeasure>,
}

impl KernelMatrix {
    pub fn zeros(dim: usize, span: f64) -> Self {
        KernelMatrix {
            dim,
            span,
            entries: vec![LatticeMeasure::zero(span); dim * dim],
        }
    }

    /// `δ_0 · I`.
    pub fn identity(dim: usize, span: f64) -> Self {
        let mut out = KernelMatrix::zeros(dim, span);
        for i in 0..dim {
            out.entries[i * dim + i] = LatticeMeasure::dirac(span, 0);
        }
        out
    }

    pub fn from_entries(dim: usize, span: f64, entries: Vec<LatticeMeasure>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, entries.len()));
        }
        if let Some(bad) = entries.iter().find(|e| !e.is_zero() && !same_span(e.span, span)) {
            return Err(Error::SpanMismatch(span, bad.span));
        }
        let entries = entries
            .into_iter()
            .map(|mut e| {
                e.span = span;
                e
            })
            .collect();
        Ok(KernelMatrix { dim, span, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn get(&self, i: usize, j: usize) -> &LatticeMeasure {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: LatticeMeasure) -> Result<()> {
        if !value.is_zero() && !same_span(value.span, self.span) {
            return Err(Error::SpanMismatch(self.span, value.span));
        }
        self.entries[i * self.dim + j] = value;
        Ok(())
    }

    pub fn entries(&self) -> &[LatticeMeasure] {
        &self.entries
    }

    fn check_compat(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if !same_span(self.span, other.span) {
            return Err(Error::SpanMismatch(self.span, other.span));
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&LatticeMeasure, &LatticeMeasure) -> Result<LatticeMeasure>,
    ) -> Result<Self> {
        self.check_compat(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelMatrix {
            dim: self.dim,
            span: self.span,
            entries,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, LatticeMeasure::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, LatticeMeasure::sub)
    }

    /// `(A*B)_ij = Σ_k A_ik * B_kj`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_compat(other)?;
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = LatticeMeasure::zero(self.span);
                for k in 0..n {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.convolve(b)?)?;
                }
                entries.push(acc);
            }
        }
        Ok(KernelMatrix {
            dim: n,
            span: self.span,
            entries,
        })
    }

    pub fn total_mass_matrix(&self) -> MassMatrix {
        MassMatrix(DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j).total_mass()))
    }

    /// Entrywise total-variation distances and their maximum.
    pub fn distance(&self, other: &Self) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_compat(other)?;
        let n = self.dim;
        let mut grid = vec![vec![0.0; n]; n];
        let mut max = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = self.get(i, j).distance(other.get(i, j))?;
                grid[i][j] = d;
                max = max.max(d);
            }
        }
        Ok((max, grid))
    }
}

/// Entrywise total masses of a [`KernelMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix(pub DMatrix<f64>);

impl MassMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn identity(dim: usize) -> Self {
        MassMatrix(DMatrix::identity(dim, dim))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.nrows())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.0.nrows()).map(|i| self.0.row(i).sum()).collect()
    }
}

impl Serialize for MassMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> LatticeMeasure {
        LatticeMeasure::from_points(1.0, &[(1, 0.6), (-1, 0.4)])
    }

    #[test]
    fn dirac_zero_is_identity() {
        let mu = coin();
        let out = LatticeMeasure::dirac(1.0, 0).convolve(&mu).unwrap();
        assert_eq!(out, mu);
    }

    #[test]
    fn translations_compose() {
        let out = LatticeMeasure::dirac(1.0, 2)
            .convolve(&LatticeMeasure::dirac(1.0, -1))
            .unwrap();
        assert_eq!(out, LatticeMeasure::dirac(1.0, 1));
    }

    #[test]
    fn coin_squared_matches_expansion() {
        // (0.6δ1 + 0.4δ-1)^2 expanded by hand.
        let out = coin().convolve(&coin()).unwrap();
        let expected = LatticeMeasure::from_points(1.0, &[(2, 0.36), (0, 0.48), (-2, 0.16)]);
        assert!(out.distance(&expected).unwrap() < 1e-15);
        assert_eq!(out.min_index(), Some(-2));
        assert_eq!(out.max_index(), Some(2));
    }

    #[test]
    fn span_mismatch_is_rejected() {
        let a = LatticeMeasure::dirac(1.0, 0);
        let b = LatticeMeasure::dirac(0.5, 0);
        assert!(matches!(a.convolve(&b), Err(Error::SpanMismatch(..))));
    }

    #[test]
    fn subtraction_cancels_to_zero() {
        let z = coin().sub(&coin()).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.total_mass(), 0.0);
    }

    #[test]
    fn trim_drops_float_dust_at_edges() {
        let mut m = LatticeMeasure::new(1.0, -2, vec![1e-17, 0.5, 0.0, 0.5, -1e-16]);
        m.trim(TRIM_THRESHOLD);
        assert_eq!(m.offset(), -1);
        assert_eq!(m.weights(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn identity_matrix_is_neutral() {
        let mut b = KernelMatrix::zeros(2, 1.0);
        b.set(0, 1, LatticeMeasure::dirac(1.0, 2)).unwrap();
        b.set(1, 0, coin()).unwrap();
        let id = KernelMatrix::identity(2, 1.0);
        assert_eq!(id.convolve(&b).unwrap(), b);
        assert_eq!(b.convolve(&id).unwrap(), b);
        let z = KernelMatrix::zeros(2, 1.0);
        assert_eq!(b.convolve(&z).unwrap(), z);
    }

    #[test]
    fn identity_has_identity_mass() {
        let id = KernelMatrix::identity(3, 0.5).total_mass_matrix();
        assert_eq!(id, MassMatrix::identity(3));
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let a = KernelMatrix::zeros(2, 1.0);
        let b = KernelMatrix::zeros(3, 1.0);
        assert!(matches!(a.convolve(&b), Err(Error::DimensionMismatch(2, 3))));
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(coin()).unwrap();
        assert_eq!(v["span"], 1.0);
        assert_eq!(v["offset"], -1);
        assert_eq!(v["weights"].as_array().unwrap().len(), 3);
    }
}
