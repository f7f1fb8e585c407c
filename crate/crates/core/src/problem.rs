//! Objective traits shared by the solvers and allocators.
//!
//! Every objective here is *maximised* over the unit simplex.

use crate::error::Result;

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// An objective that is a sum of one-dimensional concave terms, one per
/// coordinate.
pub trait Separable: Objective {
    fn term(&self, i: usize, a: f64) -> f64;
    fn marginal(&self, i: usize, a: f64) -> Result<f64>;
    fn curvature(&self, i: usize, a: f64) -> Result<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient(x, out)
    }
}
