//! Parametric source intensity models `mu(x; theta)`.

use std::fmt::Debug;

/// A source intensity per unit exposure, evaluated at a grid position.
pub trait SourceModel: Debug + Send + Sync {
    fn n_params(&self) -> usize;

    fn intensity(&self, x: f64, theta: &[f64]) -> f64;

    /// Writes `d mu(x; theta) / d theta_j` into `out`.
    fn gradient(&self, x: f64, theta: &[f64], out: &mut [f64]);

    /// True when `mu` does not depend on `x` and equals `theta[0]`, which
    /// admits the closed-form joint fit.
    fn is_constant(&self) -> bool {
        false
    }
}

/// `mu(x; theta) = theta`, the same level in every bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstantModel;

impl SourceModel for ConstantModel {
    fn n_params(&self) -> usize {
        1
    }

    #[inline]
    fn intensity(&self, _x: f64, theta: &[f64]) -> f64 {
        theta[0]
    }

    #[inline]
    fn gradient(&self, _x: f64, _theta: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn is_constant(&self) -> bool {
        true
    }
}
