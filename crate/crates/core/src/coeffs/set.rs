use std::fmt;
use std::sync::Arc;

use super::lift::DerivativeMap;
use super::SmoothMap;
use crate::error::{Error, Result};
use crate::growth::{growth_sum, ProbeSpec};

/// PDE data `(μ, σ, f, g)` on `[0, T] × ℝ^d` with `o`-dimensional solution.
///
/// `σ` is stored as a map `ℝ^d → ℝ^{d·m}` holding the row-major `d × m`
/// diffusion matrix; `m` is the noise dimension (equal to `d` for the
/// original problem, and still `d` after lifting to `2d`).
#[derive(Clone)]
pub struct CoefficientSet {
    pub mu: Arc<dyn SmoothMap>,
    pub sigma: Arc<dyn SmoothMap>,
    pub f: Arc<dyn SmoothMap>,
    pub g: Arc<dyn SmoothMap>,
    horizon: f64,
    dim: usize,
    noise_dim: usize,
    out_dim: usize,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("out_dim", &self.out_dim)
            .field("horizon", &self.horizon)
            .field("mu", &self.mu.label())
            .field("sigma", &self.sigma.label())
            .field("f", &self.f.label())
            .field("g", &self.g.label())
            .finish()
    }
}

impl CoefficientSet {
    pub fn new(
        mu: Arc<dyn SmoothMap>,
        sigma: Arc<dyn SmoothMap>,
        f: Arc<dyn SmoothMap>,
        g: Arc<dyn SmoothMap>,
        horizon: f64,
    ) -> Result<Self> {
        let dim = mu.input_dim();
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if mu.output_dim() != dim {
            return mismatch(&format!("μ maps ℝ^{dim} to ℝ^{}, expected ℝ^{dim}", mu.output_dim()));
        }
        if sigma.input_dim() != dim || !sigma.output_dim().is_multiple_of(dim) || sigma.output_dim() == 0 {
            return mismatch(&format!(
                "σ maps ℝ^{} to ℝ^{}, expected a {dim} × m matrix on ℝ^{dim}",
                sigma.input_dim(),
                sigma.output_dim()
            ));
        }
        if f.input_dim() != dim || g.input_dim() != dim {
            return mismatch(&format!(
                "f and g must be defined on ℝ^{dim}, got ℝ^{} and ℝ^{}",
                f.input_dim(),
                g.input_dim()
            ));
        }
        if f.output_dim() != g.output_dim() {
            return mismatch(&format!(
                "f and g must share the output dimension, got {} and {}",
                f.output_dim(),
                g.output_dim()
            ));
        }
        if !(horizon.is_finite() && horizon >= 1.0) {
            return Err(Error::InvalidArgument(format!("time horizon must satisfy T ≥ 1, got {horizon}")));
        }
        Ok(Self {
            noise_dim: sigma.output_dim() / dim,
            out_dim: f.output_dim(),
            mu,
            sigma,
            f,
            g,
            horizon,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same coefficients with replaced terminal and running costs.
    pub fn with_costs(&self, f: Arc<dyn SmoothMap>, g: Arc<dyn SmoothMap>) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.clone(), f, g, self.horizon)
    }

    /// Same data with replaced drift and diffusion.
    pub fn with_dynamics(&self, mu: Arc<dyn SmoothMap>, sigma: Arc<dyn SmoothMap>) -> Result<Self> {
        Self::new(mu, sigma, self.f.clone(), self.g.clone(), self.horizon)
    }
}

/// Regularity levels a coefficient set can claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssumptionLevel {
    /// Weak error of the plain Euler scheme: μ, σ, g twice and f four times
    /// differentiable, `∂_t g` available, linear growth of μ and σ.
    WeakError,
    /// Sobolev (gradient) error: one more derivative on every component and
    /// globally bounded `∇μ`, `∇σ`.
    SobolevWeakError,
    /// Perturbed coefficients `(ν, τ, F, G)`: twice differentiable.
    Perturbation,
}

impl AssumptionLevel {
    /// Required orders for `(μ, σ, f, g)`.
    pub fn required_orders(self) -> [usize; 4] {
        match self {
            AssumptionLevel::WeakError => [2, 2, 4, 2],
            AssumptionLevel::SobolevWeakError => [3, 3, 5, 3],
            AssumptionLevel::Perturbation => [2, 2, 2, 2],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AssumptionLevel::WeakError => "weak-error",
            AssumptionLevel::SobolevWeakError => "sobolev-weak-error",
            AssumptionLevel::Perturbation => "perturbation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionFailure {
    pub component: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub level: AssumptionLevel,
    pub failures: Vec<AssumptionFailure>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failing_components(&self) -> Vec<&'static str> {
        let mut v: Vec<&'static str> = self.failures.iter().map(|f| f.component).collect();
        v.dedup();
        v
    }
}

/// Checks declared derivative orders and probe-based growth conditions.
///
/// Growth conditions are judged on the probe set: a measure is reported as
/// unbounded when its maximum still grows across the outermost probe shell.
pub fn check_assumption_level(c: &CoefficientSet, level: AssumptionLevel, probe: &ProbeSpec) -> AssumptionReport {
    let mut failures = Vec::new();
    let components: [(&'static str, &Arc<dyn SmoothMap>); 4] =
        [("mu", &c.mu), ("sigma", &c.sigma), ("f", &c.f), ("g", &c.g)];
    for ((name, h), need) in components.iter().zip(level.required_orders()) {
        if h.max_order() < need {
            failures.push(AssumptionFailure {
                component: name,
                reason: format!("declares derivatives up to order {}, needs {need}", h.max_order()),
            });
        }
    }

    if level != AssumptionLevel::Perturbation {
        let need_dt = if level == AssumptionLevel::SobolevWeakError { 1 } else { 0 };
        match c.g.time_derivative_order() {
            Some(o) if o >= need_dt => {}
            _ => failures.push(AssumptionFailure {
                component: "g",
                reason: format!("time derivative of ∇^{need_dt} g unavailable"),
            }),
        }
    }

    let probe = probe.clone().with_horizon(c.horizon());
    for (name, h) in [("mu", &c.mu), ("sigma", &c.sigma)] {
        match growth_sum(h.as_ref(), 1.0, 0, &probe) {
            Ok(est) if est.unbounded => failures.push(AssumptionFailure {
                component: name,
                reason: format!("growth ⦀{name}⦀ is not finite on the probe (max {:.3e})", est.probe_max),
            }),
            Ok(_) => {}
            Err(e) => failures.push(AssumptionFailure { component: name, reason: e.to_string() }),
        }
    }

    if level == AssumptionLevel::SobolevWeakError {
        for (name, h) in [("mu", &c.mu), ("sigma", &c.sigma)] {
            if h.max_order() < 1 {
                continue;
            }
            let grad = match DerivativeMap::new(h.clone(), 1) {
                Ok(g) => g,
                Err(_) => continue,
            };
            match growth_sum(&grad, 0.0, 0, &probe) {
                Ok(est) if est.unbounded => failures.push(AssumptionFailure {
                    component: name,
                    reason: format!("unbounded ∇{name}: probe maximum {:.3e} still growing", est.probe_max),
                }),
                Ok(_) => {}
                Err(e) => failures.push(AssumptionFailure { component: name, reason: e.to_string() }),
            }
        }
    }

    AssumptionReport { level, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Componentwise, Constant, OrderCapped, Profile, SquaredNorm};

    fn heat(d: usize) -> CoefficientSet {
        CoefficientSet::new(
            Arc::new(Constant::zero(d, d)),
            Arc::new(Constant::scaled_identity(d, 1.0)),
            Arc::new(SquaredNorm::new(d, 1.0)),
            Arc::new(Constant::zero(d, 1)),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn heat_set_passes_weak_error_level() {
        let r = check_assumption_level(&heat(2), AssumptionLevel::WeakError, &ProbeSpec::default());
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn low_order_terminal_fails_and_is_named() {
        let c = heat(2);
        let capped = c
            .with_costs(Arc::new(OrderCapped::new(c.f.clone(), 3)), c.g.clone())
            .unwrap();
        let r = check_assumption_level(&capped, AssumptionLevel::WeakError, &ProbeSpec::default());
        assert!(!r.passed());
        assert_eq!(r.failing_components(), vec!["f"]);
    }

    #[test]
    fn quadratic_drift_has_unbounded_gradient() {
        let c = heat(1)
            .with_dynamics(
                Arc::new(Componentwise::new(1, Profile::Poly(vec![0.0, 0.0, 1.0]))),
                Arc::new(Constant::scaled_identity(1, 1.0)),
            )
            .unwrap();
        let probe = ProbeSpec { r_max: 10.0, ..ProbeSpec::default() };
        let r = check_assumption_level(&c, AssumptionLevel::SobolevWeakError, &probe);
        assert!(r.failures.iter().any(|f| f.component == "mu" && f.reason.contains("unbounded ∇mu")), "{r:?}");
    }

    #[test]
    fn horizon_below_one_is_rejected() {
        let c = heat(1);
        assert!(CoefficientSet::new(c.mu.clone(), c.sigma.clone(), c.f.clone(), c.g.clone(), 0.5).is_err());
    }

    #[test]
    fn mismatched_costs_are_rejected() {
        let c = heat(2);
        assert!(c.with_costs(Arc::new(Constant::zero(2, 2)), c.g.clone()).is_err());
    }
}
