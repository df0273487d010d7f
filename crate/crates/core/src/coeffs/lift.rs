use std::sync::Arc;

use super::set::CoefficientSet;
use super::tensor::{tensor_len, unflatten};
use super::SmoothMap;
use crate::error::{Error, Result};

/// Augmented derivative `ĥ(x₁, x₂) = (h(x₁), ∇h(x₁)ᵀx₂)` of a map `h: ℝ^d → ℝ^o`.
///
/// The lift has input dimension `2d`, output dimension `2o` and one derivative
/// fewer than `h`. Lifting a diffusion stored as a `d → d·m` map yields the
/// row-major `(2d) × m` matrix `(σ; ∇σᵀx₂)`, so the lifted system is driven by
/// the same noise.
#[derive(Debug, Clone)]
pub struct Augmented {
    inner: Arc<dyn SmoothMap>,
}

impl Augmented {
    pub fn inner(&self) -> &Arc<dyn SmoothMap> {
        &self.inner
    }

    /// Assembles `∇^order ĥ` from `a = ∇^order h(x₁)` and `b = ∇^{order+1} h(x₁)`.
    fn assemble(&self, x2: &[f64], order: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        let d = self.inner.input_dim();
        let o = self.inner.output_dim();
        let d2 = 2 * d;
        let o2 = 2 * o;
        let block = tensor_len(d, order, 1);
        let mut idx = vec![0usize; order];
        for multi in 0..tensor_len(d2, order, 1) {
            unflatten(multi, d2, &mut idx);
            let mut second = 0usize;
            let mut flat_h = 0usize;
            for &j in &idx {
                if j >= d {
                    second += 1;
                }
                flat_h = flat_h * d + (j % d);
            }
            let row = &mut out[multi * o2..(multi + 1) * o2];
            match second {
                0 => {
                    row[..o].copy_from_slice(&a[flat_h * o..(flat_h + 1) * o]);
                    for k in 0..o {
                        let mut acc = 0.0;
                        for (j, &y) in x2.iter().enumerate() {
                            acc += y * b[(j * block + flat_h) * o + k];
                        }
                        row[o + k] = acc;
                    }
                }
                1 => {
                    row[..o].fill(0.0);
                    // The x₂-index enters linearly; by symmetry of ∇^order h its
                    // position inside the multi-index does not matter.
                    row[o..].copy_from_slice(&a[flat_h * o..(flat_h + 1) * o]);
                }
                _ => row.fill(0.0),
            }
        }
    }
}

impl SmoothMap for Augmented {
    fn input_dim(&self) -> usize {
        2 * self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        2 * self.inner.output_dim()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order() - 1
    }
    fn is_time_dependent(&self) -> bool {
        self.inner.is_time_dependent()
    }
    fn time_derivative_order(&self) -> Option<usize> {
        self.inner.time_derivative_order().and_then(|o| o.checked_sub(1))
    }
    fn label(&self) -> String {
        format!("lift of {}", self.inner.label())
    }
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.inner.input_dim();
        let o = self.inner.output_dim();
        let (x1, x2) = x.split_at(d);
        if order == 0 {
            let (value, dir) = out.split_at_mut(o);
            self.inner.derivative_into(t, x1, 0, value);
            let mut grad = vec![0.0; d * o];
            self.inner.derivative_into(t, x1, 1, &mut grad);
            for k in 0..o {
                dir[k] = (0..d).map(|j| x2[j] * grad[j * o + k]).sum();
            }
            return;
        }
        let mut a = vec![0.0; tensor_len(d, order, o)];
        let mut b = vec![0.0; tensor_len(d, order + 1, o)];
        self.inner.derivative_into(t, x1, order, &mut a);
        self.inner.derivative_into(t, x1, order + 1, &mut b);
        self.assemble(x2, order, &a, &b, out);
    }
    fn time_derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.inner.input_dim();
        let o = self.inner.output_dim();
        let (x1, x2) = x.split_at(d);
        let mut a = vec![0.0; tensor_len(d, order, o)];
        let mut b = vec![0.0; tensor_len(d, order + 1, o)];
        self.inner.time_derivative_into(t, x1, order, &mut a);
        self.inner.time_derivative_into(t, x1, order + 1, &mut b);
        self.assemble(x2, order, &a, &b, out);
    }
}

/// Returns the augmented derivative `ĥ` of `h`.
pub fn lift_augmented(h: Arc<dyn SmoothMap>) -> Result<Arc<dyn SmoothMap>> {
    if h.max_order() == 0 {
        return Err(Error::OrderUnavailable {
            name: h.label(),
            requested: 1,
            available: 0,
        });
    }
    Ok(Arc::new(Augmented { inner: h }))
}

/// Applies [`lift_augmented`] `j` times.
pub fn lift_augmented_n(h: Arc<dyn SmoothMap>, j: usize) -> Result<Arc<dyn SmoothMap>> {
    (0..j).try_fold(h, |acc, _| lift_augmented(acc))
}

/// Lifts every component of a coefficient set to dimension `2d`; the noise
/// dimension is unchanged.
pub fn lift_coefficient_set(c: &CoefficientSet) -> Result<CoefficientSet> {
    let mu = lift_augmented(c.mu.clone())?;
    let sigma = lift_augmented(c.sigma.clone())?;
    let f = lift_augmented(c.f.clone())?;
    let g = lift_augmented(c.g.clone())?;
    CoefficientSet::new(mu, sigma, f, g, c.horizon())
}

/// `x ↦ ∇^l h(x)` viewed as a map `ℝ^d → ℝ^{d^l·o}`.
///
/// With the row-major layout of [`super::Tensor`] the `i`-th derivative of
/// this map has exactly the flat data of `∇^{l+i} h`.
#[derive(Debug, Clone)]
pub struct DerivativeMap {
    inner: Arc<dyn SmoothMap>,
    level: usize,
}

impl DerivativeMap {
    pub fn new(inner: Arc<dyn SmoothMap>, level: usize) -> Result<Self> {
        if level > inner.max_order() {
            return Err(Error::OrderUnavailable {
                name: inner.label(),
                requested: level,
                available: inner.max_order(),
            });
        }
        Ok(Self { inner, level })
    }
}

impl SmoothMap for DerivativeMap {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        tensor_len(self.inner.input_dim(), self.level, self.inner.output_dim())
    }
    fn max_order(&self) -> usize {
        self.inner.max_order() - self.level
    }
    fn is_time_dependent(&self) -> bool {
        self.inner.is_time_dependent()
    }
    fn time_derivative_order(&self) -> Option<usize> {
        self.inner.time_derivative_order().and_then(|o| o.checked_sub(self.level))
    }
    fn label(&self) -> String {
        format!("∇^{} {}", self.level, self.inner.label())
    }
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.derivative_into(t, x, order + self.level, out)
    }
    fn time_derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.time_derivative_into(t, x, order + self.level, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Affine, Constant, DiagonalMatrix, Polynomial, Profile, SeparableSum};
    use approx::assert_relative_eq;

    #[test]
    fn lift_of_square() {
        let h: Arc<dyn SmoothMap> = Arc::new(Polynomial::new(1, vec![(1.0, vec![2])]).unwrap());
        let l = lift_augmented(h).unwrap();
        assert_eq!(l.value(0.0, &[3.0, 1.0]).unwrap(), vec![9.0, 6.0]);
    }

    #[test]
    fn lift_of_constant_has_zero_second_block() {
        let h: Arc<dyn SmoothMap> = Arc::new(Constant::new(1, vec![2.5]));
        let l = lift_augmented(h).unwrap();
        assert_eq!(l.value(0.0, &[-4.0, 7.0]).unwrap(), vec![2.5, 0.0]);
    }

    #[test]
    fn lift_of_bilinear_monomial() {
        let h: Arc<dyn SmoothMap> = Arc::new(Polynomial::new(2, vec![(1.0, vec![1, 1])]).unwrap());
        let l = lift_augmented(h).unwrap();
        assert_eq!(l.value(0.0, &[1.0, 2.0, 1.0, 0.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn lift_of_diffusion_is_stacked_matrix() {
        let sigma: Arc<dyn SmoothMap> = Arc::new(DiagonalMatrix::new(
            1,
            Profile::Trig(crate::coeffs::TrigPoly::new(vec![1.0, 1.0], vec![])),
        ));
        let l = lift_augmented(sigma).unwrap();
        let (x, y) = (0.7f64, 1.3f64);
        let v = l.value(0.0, &[x, y]).unwrap();
        assert_relative_eq!(v[0], 1.0 + x.cos());
        assert_relative_eq!(v[1], -y * x.sin());
    }

    #[test]
    fn lifted_identity_drift() {
        let mu: Arc<dyn SmoothMap> = Arc::new(Affine::scaled_identity(1, 1.0));
        let l = lift_augmented(mu).unwrap();
        assert_eq!(l.value(0.0, &[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
    }

    #[test]
    fn lift_requires_a_derivative() {
        let h: Arc<dyn SmoothMap> =
            Arc::new(crate::coeffs::OrderCapped::new(Arc::new(SeparableSum::new(1, Profile::sin(), 1.0)), 0));
        assert!(lift_augmented(h).is_err());
    }

    #[test]
    fn derivative_map_shares_layout() {
        let h: Arc<dyn SmoothMap> =
            Arc::new(Polynomial::new(2, vec![(1.0, vec![3, 1]), (2.0, vec![0, 2])]).unwrap());
        let g = DerivativeMap::new(h.clone(), 1).unwrap();
        let x = [0.4, -1.1];
        assert_eq!(g.derivative(0.0, &x, 1).unwrap().as_slice(), h.derivative(0.0, &x, 2).unwrap().as_slice());
        assert_eq!(g.output_dim(), 2);
    }
}
