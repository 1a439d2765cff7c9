//! Clamped linear and bilinear lookup tables.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

/// Piecewise-linear function of one variable, clamped outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> Table1<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let t = Self { x, y };
        t.validate()?;
        Ok(t)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| T::lit(p.0)).collect(), pairs.iter().map(|p| T::lit(p.1)).collect())
    }

    pub fn constant(v: T) -> Self {
        Self { x: vec![T::zero()], y: vec![v] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(SimError::invalid("table", format!("{} knots vs {} values", self.x.len(), self.y.len())));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(SimError::invalid("table", "non-finite entry"));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::invalid("table", "knots must be strictly increasing"));
        }
        Ok(())
    }

    /// Index `i` such that `x[i] <= q < x[i + 1]`, clamped to valid cells.
    fn cell(&self, q: T) -> usize {
        let n = self.x.len();
        if n < 2 || q <= self.x[0] {
            return 0;
        }
        match self.x.partition_point(|&k| k <= q) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, q: T) -> T {
        let n = self.x.len();
        if n == 1 || q <= self.x[0] {
            return self.y[0];
        }
        if q >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.cell(q);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let w = (q - x0) / (x1 - x0);
        self.y[i] + w * (self.y[i + 1] - self.y[i])
    }

    pub fn map_y(&self, f: impl Fn(T) -> T) -> Self {
        Self { x: self.x.clone(), y: self.y.iter().map(|&v| f(v)).collect() }
    }

    pub fn x_min(&self) -> T {
        self.x[0]
    }

    pub fn x_max(&self) -> T {
        self.x[self.x.len() - 1]
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] > w[0])
    }
}

/// Rectangular grid `z[i][j] = f(x[i], y[j])` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> Grid2<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, z: Vec<T>) -> Result<Self> {
        let g = Self { x, y, z };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() < 2 || self.y.len() < 2 {
            return Err(SimError::invalid("grid", "need at least 2x2 knots"));
        }
        if self.z.len() != self.x.len() * self.y.len() {
            return Err(SimError::invalid(
                "grid",
                format!("{} cells for {}x{} knots", self.z.len(), self.x.len(), self.y.len()),
            ));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) || self.y.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::invalid("grid", "axes must be strictly increasing"));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(SimError::invalid("grid", "non-finite cell"));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.z[i * self.y.len() + j]
    }

    fn bracket(axis: &[T], q: T) -> (usize, T) {
        let n = axis.len();
        if q <= axis[0] {
            return (0, T::zero());
        }
        if q >= axis[n - 1] {
            return (n - 2, T::one());
        }
        let p = axis.partition_point(|&k| k <= q);
        let i = p - 1;
        (i, (q - axis[i]) / (axis[i + 1] - axis[i]))
    }

    /// Bilinear interpolation, clamped to the grid hull.
    pub fn eval(&self, xq: T, yq: T) -> T {
        let (i, u) = Self::bracket(&self.x, xq);
        let (j, w) = Self::bracket(&self.y, yq);
        let one = T::one();
        let z00 = self.at(i, j);
        let z01 = self.at(i, j + 1);
        let z10 = self.at(i + 1, j);
        let z11 = self.at(i + 1, j + 1);
        (one - u) * (one - w) * z00 + (one - u) * w * z01 + u * (one - w) * z10 + u * w * z11
    }

    pub fn row(&self, i: usize) -> &[T] {
        let ny = self.y.len();
        &self.z[i * ny..(i + 1) * ny]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_knots_and_midpoints() {
        let t = Table1::<f64>::from_pairs(&[(0.0, 1.0), (1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(1.0), 3.0);
        assert_eq!(t.eval(3.0), 7.0);
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(2.0), 5.0);
        assert_eq!(t.eval(-4.0), 1.0);
        assert_eq!(t.eval(9.0), 7.0);
    }

    #[test]
    fn table_rejects_unsorted() {
        assert!(Table1::<f64>::from_pairs(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn grid_bilinear_cell_midpoint() {
        let g = Grid2::<f64>::new(vec![0.0, 2.0], vec![0.0, 4.0], vec![1.0, 3.0, 5.0, 11.0]).unwrap();
        assert_eq!(g.eval(0.0, 4.0), 3.0);
        assert_eq!(g.eval(2.0, 0.0), 5.0);
        assert_eq!(g.eval(1.0, 2.0), (1.0 + 3.0 + 5.0 + 11.0) / 4.0);
        assert_eq!(g.eval(-1.0, 10.0), 3.0);
    }
}
