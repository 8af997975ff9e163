//! Weighted point sets in Euclidean space and the distance kernels the rest of
//! the crate builds on.

use crate::error::{EmdError, Result};

/// Read-only access to an indexed collection of points of a common dimension.
///
/// Implemented by [`WeightedPointSet`] and by [`JointPoints`], which presents
/// two sets as one index space without copying coordinates.
pub trait PointSource {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn point(&self, index: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` points in `R^d` with nonnegative weights.
///
/// Coordinates are stored row-major. The total weight is cached at
/// construction; the set is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    coords: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
    total_weight: f64,
}

impl WeightedPointSet {
    pub fn new(coords: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(EmdError::ZeroDimension);
        }
        if coords.len() % dim != 0 {
            return Err(EmdError::ShapeMismatch {
                len: coords.len(),
                dim,
            });
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(EmdError::EmptySet);
        }
        if weights.len() != n {
            return Err(EmdError::WeightCount {
                expected: n,
                found: weights.len(),
            });
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(EmdError::NonFinite { index });
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() {
                return Err(EmdError::NonFinite { index });
            }
            if weight < 0.0 {
                return Err(EmdError::NegativeWeight { index, weight });
            }
        }
        let total_weight = weights.iter().sum();
        Ok(Self {
            coords,
            dim,
            weights,
            total_weight,
        })
    }

    /// Every point gets weight 1.
    pub fn uniform(coords: Vec<f64>, dim: usize) -> Result<Self> {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        Self::new(coords, dim, vec![1.0; n])
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], weights: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(EmdError::EmptySet)?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(EmdError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, dim, weights)
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Copy with every point shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        check_dims(self.dim, offset.len())?;
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(x, o)| x + o))
            .collect();
        Self::new(coords, self.dim, self.weights.clone())
    }

    /// Copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let coords = self.coords.iter().map(|x| x * factor).collect();
        Self::new(coords, self.dim, self.weights.clone())
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn reweighted(&self, factor: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Self::new(self.coords.clone(), self.dim, weights)
    }
}

impl PointSource for WeightedPointSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }
}

/// `A ∪ B` as one index space: indices `0..|A|` address `A`, the rest `B`.
#[derive(Debug, Clone, Copy)]
pub struct JointPoints<'a> {
    pub first: &'a WeightedPointSet,
    pub second: &'a WeightedPointSet,
}

impl<'a> JointPoints<'a> {
    pub fn new(first: &'a WeightedPointSet, second: &'a WeightedPointSet) -> Result<Self> {
        check_dims(first.dim(), second.dim())?;
        Ok(Self { first, second })
    }

    pub fn split(&self) -> usize {
        self.first.len()
    }
}

impl PointSource for JointPoints<'_> {
    fn dim(&self) -> usize {
        self.first.dim()
    }

    fn len(&self) -> usize {
        self.first.len() + self.second.len()
    }

    fn point(&self, index: usize) -> &[f64] {
        let split = self.first.len();
        if index < split {
            self.first.point(index)
        } else {
            self.second.point(index - split)
        }
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(EmdError::DimensionMismatch { expected, found })
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_dims(p.len(), q.len())?;
    Ok(euclidean(p, q))
}

/// Unchecked Euclidean distance; callers guarantee equal lengths.
#[inline]
pub(crate) fn euclidean(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    // Four partial sums let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let mut pc = p.chunks_exact(4);
    let mut qc = q.chunks_exact(4);
    for (a, b) in pc.by_ref().zip(qc.by_ref()) {
        for k in 0..4 {
            let t = a[k] - b[k];
            acc[k] += t * t;
        }
    }
    let mut tail = 0.0;
    for (a, b) in pc.remainder().iter().zip(qc.remainder()) {
        let t = a - b;
        tail += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail).sqrt()
}

/// Linear-time estimate of the minimum enclosing ball radius.
///
/// Anchors at the first stored point and returns the largest distance from
/// it, together with the anchor. For a true radius `Δ` the estimate lies in
/// `[Δ, 2Δ]`.
pub fn approx_radius(set: &WeightedPointSet) -> (f64, &[f64]) {
    let anchor = set.point(0);
    let radius = set
        .points()
        .map(|p| euclidean(anchor, p))
        .fold(0.0, f64::max);
    (radius, anchor)
}
