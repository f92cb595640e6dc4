//! Uniform per-dimension grids over boxes and mixed-radix indexing of joint grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A box `[lower, upper]` with a uniform discretization per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub grid_points: Vec<usize>,
}

impl<T: Scalar> ActionBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, grid_points: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != grid_points.len() {
            return Err(Error::schema(
                "action_box",
                "lower, upper and grid_points must have equal lengths",
            ));
        }
        if lower.is_empty() {
            return Err(Error::schema("action_box", "box must have at least one coordinate"));
        }
        for k in 0..lower.len() {
            if !(lower[k].is_finite() && upper[k].is_finite()) {
                return Err(Error::schema(format!("action_box.lower[{k}]"), "bounds must be finite"));
            }
            if lower[k] > upper[k] {
                return Err(Error::schema(
                    format!("action_box.lower[{k}]"),
                    format!("lower {} exceeds upper {}", lower[k], upper[k]),
                ));
            }
            if grid_points[k] < 2 {
                return Err(Error::schema(
                    format!("action_box.grid_points[{k}]"),
                    "at least 2 grid points per dimension",
                ));
            }
        }
        Ok(ActionBox {
            lower,
            upper,
            grid_points,
        })
    }

    /// Same box and resolution in every coordinate.
    pub fn uniform(dim: usize, lower: T, upper: T, points: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim], vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Grid values along coordinate `k`; a degenerate coordinate yields one value.
    pub fn axis(&self, k: usize) -> Vec<T> {
        let (lo, hi) = (self.lower[k], self.upper[k]);
        if lo == hi {
            return vec![lo];
        }
        let n = self.grid_points[k];
        let last = T::lit((n - 1) as f64);
        (0..n)
            .map(|j| {
                if j == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * T::lit(j as f64) / last
                }
            })
            .collect()
    }

    pub fn axes(&self) -> Vec<Vec<T>> {
        (0..self.dim()).map(|k| self.axis(k)).collect()
    }

    /// Grid spacing along `k` (zero for a degenerate coordinate).
    pub fn step(&self, k: usize) -> T {
        let n = self.grid_points[k];
        (self.upper[k] - self.lower[k]) / T::lit((n - 1) as f64)
    }

    pub fn max_step(&self) -> T {
        (0..self.dim())
            .map(|k| self.step(k))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Number of grid points (product of axis lengths).
    pub fn size(&self) -> u128 {
        self.axes().iter().map(|a| a.len() as u128).product()
    }

    /// All grid points in lexicographic order, first coordinate most significant.
    pub fn points(&self) -> Vec<Vec<T>> {
        let axes = self.axes();
        let radices: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = radices.iter().product();
        (0..total)
            .map(|idx| {
                unrank(idx, &radices)
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| axes[k][j])
                    .collect()
            })
            .collect()
    }

    /// `Err(k)` names the first coordinate outside the box (with absolute slack).
    pub fn check(&self, x: &[T], slack: T) -> std::result::Result<(), usize> {
        if x.len() != self.dim() {
            return Err(x.len().min(self.dim()));
        }
        for (k, &v) in x.iter().enumerate() {
            if !(v >= self.lower[k] - slack && v <= self.upper[k] + slack) {
                return Err(k);
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[T], slack: T) -> bool {
        self.check(x, slack).is_ok()
    }

    pub fn cast<U: Scalar>(&self) -> ActionBox<U> {
        let conv = |v: &Vec<T>| v.iter().map(|a| U::lit(a.to_f64_lossy())).collect();
        ActionBox {
            lower: conv(&self.lower),
            upper: conv(&self.upper),
            grid_points: self.grid_points.clone(),
        }
    }
}

/// Mixed-radix decomposition, most significant digit first.
pub fn unrank(mut idx: usize, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for k in (0..radices.len()).rev() {
        digits[k] = idx % radices[k];
        idx /= radices[k];
    }
    digits
}

pub fn rank(digits: &[usize], radices: &[usize]) -> usize {
    digits
        .iter()
        .zip(radices)
        .fold(0, |acc, (&d, &r)| acc * r + d)
}
