//! Coefficient functions with exact spatial derivatives and their
//! augmented-derivative liftings.

mod lift;
mod maps;
mod profile;
mod set;
mod tensor;

use std::fmt;

use crate::error::{Error, Result};

pub use lift::{lift_augmented, lift_augmented_n, lift_coefficient_set, Augmented, DerivativeMap};
pub use maps::{
    Affine, Componentwise, Constant, DiagonalMatrix, LinearCombination, OrderCapped, Polynomial,
    SeparableProduct, SeparableSum, SquaredNorm, TimeFactor, TimeScaled, CLOSED_FORM_ORDER,
};
pub use profile::{Profile, TrigPoly};
pub use set::{check_assumption_level, AssumptionFailure, AssumptionLevel, AssumptionReport, CoefficientSet};
pub use tensor::{frobenius, tensor_len, Tensor};
pub(crate) use tensor::unflatten;

/// A map `h: [0, T] × ℝ^{d_in} → ℝ^{d_out}` with analytic spatial derivatives
/// up to [`SmoothMap::max_order`].
///
/// Implementors provide the unchecked `*_into` methods; callers that cannot
/// guarantee the preconditions use the checked wrappers.
pub trait SmoothMap: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// Highest spatial derivative order available.
    fn max_order(&self) -> usize;

    fn is_time_dependent(&self) -> bool {
        false
    }

    /// Highest `i` for which `∂_t ∇^i h` is available, `None` when the time
    /// derivative is not provided at all.
    fn time_derivative_order(&self) -> Option<usize> {
        if self.is_time_dependent() {
            None
        } else {
            Some(self.max_order())
        }
    }

    /// Short label used in diagnostics.
    fn label(&self) -> String {
        "map".to_string()
    }

    /// Writes `∇^order h(t, x)` into `out`.
    ///
    /// Requires `order <= max_order()`, `x.len() == input_dim()` and
    /// `out.len() == tensor_len(input_dim, order, output_dim)`.
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]);

    /// Writes `∂_t ∇^order h(t, x)` into `out`. Same preconditions as
    /// [`SmoothMap::derivative_into`] plus availability per
    /// [`SmoothMap::time_derivative_order`]. The default is correct for
    /// time-independent maps only.
    fn time_derivative_into(&self, _t: f64, _x: &[f64], _order: usize, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn derivative(&self, t: f64, x: &[f64], order: usize) -> Result<Tensor> {
        self.check_point(x)?;
        if order > self.max_order() {
            return Err(Error::OrderUnavailable {
                name: self.label(),
                requested: order,
                available: self.max_order(),
            });
        }
        let mut t_out = Tensor::zeros(self.input_dim(), order, self.output_dim());
        self.derivative_into(t, x, order, t_out.as_mut_slice());
        Ok(t_out)
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.derivative(t, x, 0)?.into_vec())
    }

    fn time_derivative(&self, t: f64, x: &[f64], order: usize) -> Result<Tensor> {
        self.check_point(x)?;
        match self.time_derivative_order() {
            Some(avail) if order <= avail && order <= self.max_order() => {
                let mut t_out = Tensor::zeros(self.input_dim(), order, self.output_dim());
                self.time_derivative_into(t, x, order, t_out.as_mut_slice());
                Ok(t_out)
            }
            avail => Err(Error::OrderUnavailable {
                name: format!("∂_t {}", self.label()),
                requested: order,
                available: avail.unwrap_or(0),
            }),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "`{}` expects points in dimension {}, got {}",
                self.label(),
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }
}
