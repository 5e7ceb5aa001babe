//! Uniform symmetric grids and vector-valued samples on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `x_i = (i - half) h`, `i = 0..=2 half`; the node `half` sits at 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(half: usize, h: f64) -> Self {
        Self { half, h }
    }

    /// Grid on `[-x_max, x_max]`, with `x_max` rounded to a multiple of `h`.
    pub fn covering(x_max: f64, h: f64) -> Self {
        let half = (x_max / h).round().max(1.0) as usize;
        Self { half, h }
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        self.half
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn abscissae(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }
}

/// Samples of an `R^dim`-valued function on a grid, stored point by point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub dim: usize,
    pub values: Vec<f64>,
    /// Shock amplitude the function belongs to (used by weighted norms).
    pub epsilon: f64,
}

impl GridFunction {
    pub fn zeros(grid: Grid, dim: usize, epsilon: f64) -> Self {
        Self { grid, dim, values: vec![0.0; grid.len() * dim], epsilon }
    }

    pub fn from_fn(grid: Grid, dim: usize, epsilon: f64, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for i in 0..grid.len() {
            let v = f(grid.x(i));
            assert_eq!(v.len(), dim, "from_fn: closure returned wrong dimension");
            values.extend_from_slice(&v);
        }
        Self { grid, dim, values, epsilon }
    }

    pub fn from_points(grid: Grid, epsilon: f64, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points for a grid of {} nodes",
                points.len(),
                grid.len()
            )));
        }
        let dim = points.first().map_or(0, |p| p.len());
        let mut values = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch("ragged point list".into()));
            }
            values.extend_from_slice(p);
        }
        Ok(Self { grid, dim, values, epsilon })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.dim + k]).collect()
    }

    /// Components `start..start+count` as a new function.
    pub fn slice_components(&self, start: usize, count: usize) -> Self {
        let mut values = Vec::with_capacity(self.len() * count);
        for i in 0..self.len() {
            values.extend_from_slice(&self.at(i)[start..start + count]);
        }
        Self { grid: self.grid, dim: count, values, epsilon: self.epsilon }
    }

    /// Pointwise concatenation `(self, other)`.
    pub fn concat(&self, other: &GridFunction) -> Self {
        assert_eq!(self.len(), other.len());
        let dim = self.dim + other.dim;
        let mut values = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            values.extend_from_slice(self.at(i));
            values.extend_from_slice(other.at(i));
        }
        Self { grid: self.grid, dim, values, epsilon: self.epsilon }
    }

    pub fn map_points(&self, dim: usize, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            let v = f(i, self.at(i));
            debug_assert_eq!(v.len(), dim);
            values.extend_from_slice(&v);
        }
        Self { grid: self.grid, dim, values, epsilon: self.epsilon }
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid, dim: self.dim, values, epsilon: self.epsilon }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { grid: self.grid, dim: self.dim, values, epsilon: self.epsilon }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { grid: self.grid, dim: self.dim, values: self.values.iter().map(|x| x * s).collect(), epsilon: self.epsilon }
    }

    /// Pointwise Euclidean norms.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.at(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norms().into_iter().fold(0.0, f64::max)
    }

    /// Every `stride`-th node within `|x| <= x_max`, as a function on the coarse grid.
    pub fn subsample(&self, stride: usize, x_max: f64) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidInput("subsample stride must be positive".into()));
        }
        let h = self.grid.h * stride as f64;
        let half = ((x_max / h).floor() as usize).min(self.grid.half / stride);
        let grid = Grid::new(half, h);
        let mut values = Vec::with_capacity(grid.len() * self.dim);
        for k in 0..grid.len() {
            let i = self.grid.half + k * stride - half * stride;
            values.extend_from_slice(self.at(i));
        }
        Ok(Self { grid, dim: self.dim, values, epsilon: self.epsilon })
    }
}
