use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluated pieces of `d²·C_{r,α}·κ·(1+c)·T^p·e^{κcT}·‖1+‖x‖^{5r+10}‖_{L²(K)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsComponents {
    pub dim: usize,
    /// `C_{r,α}` together with how each of its growth measures was obtained.
    pub growth_constant: f64,
    pub growth_modes: Vec<(String, String)>,
    pub kappa: f64,
    pub lipschitz: f64,
    pub horizon: f64,
    pub weight_norm: f64,
    /// Start-time grids pick up one more power of `T`.
    pub time_grid: bool,
}

impl RhsComponents {
    pub fn horizon_power(&self) -> i32 {
        if self.time_grid {
            4
        } else {
            3
        }
    }

    pub fn value(&self) -> f64 {
        let d = self.dim as f64;
        let t = self.horizon;
        d * d
            * self.growth_constant
            * self.kappa
            * (1.0 + self.lipschitz)
            * t.powi(self.horizon_power())
            * (self.kappa * self.lipschitz * t).exp()
            * self.weight_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Right-hand side of `ε√δ / (M^{-1/2} + √δ N^{-α}) ≥ RHS`.
    pub rhs: f64,
    pub components: Option<RhsComponents>,
    /// Lipschitz-type constant `c` and horizon `T` of the step-size floor `N ≥ 16cT`.
    pub lipschitz: f64,
    pub horizon: f64,
    /// Adds the floor `N ≥ d + T + 1` of the perturbed Sobolev scheme.
    pub perturbed_dim: Option<usize>,
    /// Share of the error budget given to the sampling term.
    pub split: f64,
    pub max_steps: usize,
}

impl PlanInputs {
    pub fn new(epsilon: f64, delta: f64, alpha: f64, rhs: f64) -> Self {
        Self {
            epsilon,
            delta,
            alpha,
            rhs,
            components: None,
            lipschitz: 0.0,
            horizon: 1.0,
            perturbed_dim: None,
            split: 0.5,
            max_steps: 1 << 24,
        }
    }

    pub fn from_components(epsilon: f64, delta: f64, alpha: f64, comp: RhsComponents) -> Self {
        let mut p = Self::new(epsilon, delta, alpha, comp.value());
        p.lipschitz = comp.lipschitz;
        p.horizon = comp.horizon;
        p.components = Some(comp);
        p
    }

    fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.epsilon) || !open(self.delta) {
            return Err(Error::InvalidArgument(format!(
                "ε and δ must lie in (0, 1), got ε = {}, δ = {}",
                self.epsilon, self.delta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("α must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.rhs > 0.0 && self.rhs.is_finite()) {
            return Err(Error::InvalidArgument(format!("RHS must be positive and finite, got {}", self.rhs)));
        }
        if !open(self.split) {
            return Err(Error::InvalidArgument(format!("budget split must lie in (0, 1), got {}", self.split)));
        }
        if !(self.lipschitz >= 0.0 && self.horizon > 0.0) {
            return Err(Error::InvalidArgument("need c ≥ 0 and T > 0".into()));
        }
        Ok(())
    }

    /// `ε√δ / (M^{-1/2} + √δ N^{-α})`.
    pub fn lhs(&self, samples: usize, steps: usize) -> f64 {
        let sd = self.delta.sqrt();
        self.epsilon * sd / ((samples as f64).powf(-0.5) + sd * (steps as f64).powf(-self.alpha))
    }

    /// Smallest admissible step count before budgeting.
    pub fn min_steps(&self) -> usize {
        let mut n = (16.0 * self.lipschitz * self.horizon).ceil().max(1.0) as usize;
        if let Some(d) = self.perturbed_dim {
            n = n.max((d as f64 + self.horizon + 1.0).ceil() as usize);
        }
        n
    }
}

/// Every term of the planned inequality at the returned sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAudit {
    /// `ε√δ / RHS`.
    pub budget: f64,
    pub sample_term: f64,
    pub sample_budget: f64,
    pub step_term: f64,
    pub step_budget: f64,
    pub min_steps: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `M = 1` and `N` at its floor already satisfy the inequality.
    pub trivial: bool,
}

impl PlanAudit {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub samples: usize,
    pub steps: usize,
    pub audit: PlanAudit,
}

/// Smallest power-of-two `N`, then smallest `M`, meeting the budgeted halves
/// `M^{-1/2} ≤ s·b` and `√δ N^{-α} ≤ (1 − s)·b` with `b = ε√δ / RHS`.
///
/// Returned sizes are relative guides; the absolute level rests on the
/// caller's surrogate for the unknown universal constant inside RHS.
pub fn plan_sample_sizes(p: &PlanInputs) -> Result<SamplePlan> {
    p.validate()?;
    let sd = p.delta.sqrt();
    let budget = p.epsilon * sd / p.rhs;
    let n_min = p.min_steps();
    if n_min > p.max_steps {
        return Err(Error::Infeasible(format!("step floor {n_min} exceeds the cap {}", p.max_steps)));
    }
    let audit = |samples: usize, steps: usize, trivial: bool| PlanAudit {
        budget,
        sample_term: (samples as f64).powf(-0.5),
        sample_budget: p.split * budget,
        step_term: sd * (steps as f64).powf(-p.alpha),
        step_budget: (1.0 - p.split) * budget,
        min_steps: n_min,
        lhs: p.lhs(samples, steps),
        rhs: p.rhs,
        trivial,
    };
    if p.lhs(1, n_min) >= p.rhs {
        return Ok(SamplePlan { samples: 1, steps: n_min, audit: audit(1, n_min, true) });
    }

    let step_budget = (1.0 - p.split) * budget;
    let step_ok = |n: usize| sd * (n as f64).powf(-p.alpha) <= step_budget;
    let mut steps = n_min.next_power_of_two();
    while !step_ok(steps) {
        if steps >= p.max_steps {
            return Err(Error::Infeasible(format!(
                "step budget {step_budget:e} needs more than {} steps",
                p.max_steps
            )));
        }
        steps *= 2;
    }
    if steps > p.max_steps {
        return Err(Error::Infeasible(format!("{steps} steps exceed the cap {}", p.max_steps)));
    }

    let sample_budget = p.split * budget;
    let sample_ok = |m: usize| (m as f64).powf(-0.5) <= sample_budget;
    let guess = (sample_budget.powi(-2)).ceil();
    if !(guess < usize::MAX as f64 / 2.0) {
        return Err(Error::Infeasible(format!("sample budget {sample_budget:e} is out of range")));
    }
    let mut samples = (guess as usize).max(1);
    // The float ceiling can land one off in either direction.
    while !sample_ok(samples) {
        samples += 1;
    }
    while samples > 1 && sample_ok(samples - 1) {
        samples -= 1;
    }
    let a = audit(samples, steps, false);
    if !a.holds() {
        return Err(Error::Infeasible(format!("recheck failed: lhs {} < rhs {}", a.lhs, a.rhs)));
    }
    Ok(SamplePlan { samples, steps, audit: a })
}

/// Constants of `ε√(δM) ≥ κ C_r √((1+c)T³) e^{κcT} ‖1+‖x‖^r‖_{L²(K)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInputs {
    pub epsilon: f64,
    pub samples: usize,
    pub weight_norm: f64,
    pub growth_constant: f64,
    pub lipschitz: f64,
    pub horizon: f64,
    pub kappa: f64,
}

impl ConfidenceInputs {
    pub fn rhs(&self) -> f64 {
        let t = self.horizon;
        self.kappa
            * self.growth_constant
            * ((1.0 + self.lipschitz) * t.powi(3)).sqrt()
            * (self.kappa * self.lipschitz * t).exp()
            * self.weight_norm
    }
}

/// `1 − δ` with `δ` solving the inequality at equality; `0` when even
/// `δ = 1` fails.
pub fn confidence_bound(c: &ConfidenceInputs) -> f64 {
    let delta = (c.rhs() / (c.epsilon * (c.samples as f64).sqrt())).powi(2);
    if delta.is_nan() || delta >= 1.0 {
        0.0
    } else {
        1.0 - delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_plan() {
        let p = PlanInputs::new(0.1, 0.01, 1.0, 0.5);
        let plan = plan_sample_sizes(&p).unwrap();
        assert_eq!((plan.samples, plan.steps), (10_000, 16));
        assert!(plan.audit.holds());
    }

    #[test]
    fn halving_epsilon() {
        let a = plan_sample_sizes(&PlanInputs::new(0.1, 0.01, 1.0, 0.5)).unwrap();
        let b = plan_sample_sizes(&PlanInputs::new(0.05, 0.01, 1.0, 0.5)).unwrap();
        assert_eq!(b.samples, 4 * a.samples);
        assert_eq!(b.steps, 2 * a.steps);
    }

    #[test]
    fn trivial_rhs() {
        let (eps, delta): (f64, f64) = (0.1, 0.04);
        let mut p = PlanInputs::new(eps, delta, 1.0, eps * delta.sqrt() / (1.0 + delta.sqrt()));
        p.lipschitz = 0.3;
        p.horizon = 2.0;
        let plan = plan_sample_sizes(&p).unwrap();
        assert_eq!((plan.samples, plan.steps), (1, 10));
        assert!(plan.audit.trivial);
    }

    #[test]
    fn perturbed_floor() {
        let mut p = PlanInputs::new(0.1, 0.01, 1.0, 1e-6);
        p.perturbed_dim = Some(5);
        p.horizon = 1.0;
        assert_eq!(plan_sample_sizes(&p).unwrap().steps, 7);
    }

    #[test]
    fn cap_makes_plan_infeasible() {
        let mut p = PlanInputs::new(0.1, 0.01, 0.1, 50.0);
        p.max_steps = 1024;
        assert!(matches!(plan_sample_sizes(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn components_pick_horizon_power() {
        let mut comp = RhsComponents {
            dim: 2,
            growth_constant: 1.5,
            growth_modes: vec![],
            kappa: 1.0,
            lipschitz: 0.0,
            horizon: 2.0,
            weight_norm: 1.0,
            time_grid: false,
        };
        assert_eq!(comp.value(), 4.0 * 1.5 * 8.0);
        comp.time_grid = true;
        assert_eq!(comp.value(), 4.0 * 1.5 * 16.0);
    }

    fn conf(epsilon: f64, samples: usize) -> ConfidenceInputs {
        ConfidenceInputs {
            epsilon,
            samples,
            weight_norm: 1.0,
            growth_constant: 1.0,
            lipschitz: 0.0,
            horizon: 1.0,
            kappa: 1.0,
        }
    }

    #[test]
    fn confidence_examples() {
        assert!((confidence_bound(&conf(0.1, 10_000)) - 0.99).abs() < 1e-12);
        assert_eq!(confidence_bound(&conf(0.1, 50)), 0.0);
        assert!(confidence_bound(&conf(0.1, 1 << 40)) > 1.0 - 1e-9);
    }
}
