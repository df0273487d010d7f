//! Monte Carlo Euler estimators of `u(t, x)` and `∇u(t, x)`.

mod plan;
mod sum;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientSet, SmoothMap};
use crate::error::{Error, Result};
use crate::euler::{NoiseSource, NoiseStream, Stepper, TimeGrid};

pub use plan::{confidence_bound, plan_sample_sizes, ConfidenceInputs, PlanAudit, PlanInputs, SamplePlan};
pub use sum::{monte_carlo, McStats, Neumaier, BLOCK};

/// Sample count, grid, and noise keying of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub t_start: f64,
    /// When set, increments are sums over a grid with this many steps, so
    /// estimates at every `N` dividing it share their Brownian paths.
    pub fine_steps: Option<usize>,
}

impl EstimatorConfig {
    pub fn new(samples: usize, steps: usize, seed: u64) -> Self {
        Self { samples, steps, seed, t_start: 0.0, fine_steps: None }
    }

    pub fn with_start(mut self, t: f64) -> Self {
        self.t_start = t;
        self
    }

    pub fn with_fine_steps(mut self, fine: usize) -> Self {
        self.fine_steps = Some(fine);
        self
    }

    pub fn grid(&self, horizon: f64) -> Result<TimeGrid> {
        TimeGrid::new(self.t_start, horizon, self.steps)
    }

    pub fn noise(&self) -> Result<NoiseStream> {
        match self.fine_steps {
            None => Ok(NoiseStream::new(self.seed)),
            Some(f) if f >= self.steps && f % self.steps == 0 => Ok(NoiseStream::with_fine_steps(self.seed, f)),
            Some(f) => Err(Error::InvalidArgument(format!("fine grid with {f} steps does not refine {} steps", self.steps))),
        }
    }
}

/// Monte Carlo estimate of `u(t, x)` and optionally `∇u(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub value: Vec<f64>,
    /// Row-major `o × d`: entry `(k, i)` estimates `∂_i u_k`.
    pub gradient: Option<Vec<f64>>,
    pub std_error_value: Vec<f64>,
    pub std_error_gradient: Option<Vec<f64>>,
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub aborted_samples: usize,
    pub t_start: f64,
}

/// Scratch buffers for one per-sample summand.
pub struct SampleWorkspace<'a> {
    c: &'a CoefficientSet,
    stepper: Stepper<'a>,
    increments: Vec<f64>,
    state: Vec<f64>,
    tangent: Vec<f64>,
    val: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> SampleWorkspace<'a> {
    pub fn new(c: &'a CoefficientSet) -> Self {
        let d = c.dim();
        let o = c.out_dim();
        Self {
            c,
            stepper: Stepper::new(c),
            increments: Vec::new(),
            state: vec![0.0; d],
            tangent: vec![0.0; d * d],
            val: vec![0.0; o],
            grad: vec![0.0; d * o],
        }
    }

    /// Writes the summand `f(𝓔_T) + Δt Σ_{n<N} g(t_n, 𝓔_{t_n})` of sample
    /// `sample` into `out[..o]` and, with `gradient`, the matching
    /// `∇f(𝓔_T)ᵀD𝓔_T + Δt Σ_{n<N} ∇g(t_n, 𝓔_{t_n})ᵀD𝓔_{t_n}` into
    /// `out[o..o + o·d]` (row-major `o × d`).
    pub fn summand(
        &mut self,
        x: &[f64],
        grid: &TimeGrid,
        noise: &dyn NoiseSource,
        sample: u64,
        gradient: bool,
        out: &mut [f64],
    ) -> Result<()> {
        let c = self.c;
        let d = c.dim();
        let m = c.noise_dim();
        let o = c.out_dim();
        let steps = grid.steps();
        let dt = grid.dt();
        self.increments.resize(steps * m, 0.0);
        noise.fill_increments(sample, grid, m, &mut self.increments);
        self.state.copy_from_slice(x);
        if gradient {
            self.tangent.fill(0.0);
            for i in 0..d {
                self.tangent[i * d + i] = 1.0;
            }
        }
        let width = if gradient { o + o * d } else { o };
        let out = &mut out[..width];
        out.fill(0.0);
        for n in 0..steps {
            let t = grid.node(n);
            self.add_cost(c.g.as_ref(), t, dt, gradient, out);
            let dw = &self.increments[n * m..(n + 1) * m];
            if gradient {
                self.stepper.step_tangent(t, dt, &mut self.state, &mut self.tangent, dw);
            } else {
                self.stepper.step(t, dt, &mut self.state, dw);
            }
            if self.state.iter().any(|v| !v.is_finite()) || (gradient && self.tangent.iter().any(|v| !v.is_finite())) {
                return Err(Error::Divergence { sample, step: n + 1 });
            }
        }
        self.add_cost(c.f.as_ref(), grid.horizon(), 1.0, gradient, out);
        Ok(())
    }

    fn add_cost(&mut self, h: &dyn SmoothMap, t: f64, weight: f64, gradient: bool, out: &mut [f64]) {
        let d = self.c.dim();
        let o = self.c.out_dim();
        h.derivative_into(t, &self.state, 0, &mut self.val);
        for k in 0..o {
            out[k] += weight * self.val[k];
        }
        if gradient {
            h.derivative_into(t, &self.state, 1, &mut self.grad);
            // out[o + k·d + i] += w Σ_j ∂_j h_k · D_{ji}
            for j in 0..d {
                let row = &self.tangent[j * d..(j + 1) * d];
                for k in 0..o {
                    let a = weight * self.grad[j * o + k];
                    if a == 0.0 {
                        continue;
                    }
                    let dst = &mut out[o + k * d..o + (k + 1) * d];
                    for (y, r) in dst.iter_mut().zip(row) {
                        *y += a * r;
                    }
                }
            }
        }
    }
}

fn check_inputs(c: &CoefficientSet, x: &[f64], gradient: bool) -> Result<()> {
    if x.len() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "evaluation point has dimension {}, coefficients live on ℝ^{}",
            x.len(),
            c.dim()
        )));
    }
    let need = if gradient { 1 } else { 0 };
    for (name, h) in [("μ", &c.mu), ("σ", &c.sigma), ("f", &c.f), ("g", &c.g)] {
        if h.max_order() < need {
            return Err(Error::OrderUnavailable {
                name: format!("{name} ({})", h.label()),
                requested: need,
                available: h.max_order(),
            });
        }
    }
    Ok(())
}

/// Estimator over an arbitrary noise source.
pub fn estimate_with_noise(
    c: &CoefficientSet,
    x: &[f64],
    grid: &TimeGrid,
    noise: &dyn NoiseSource,
    samples: usize,
    gradient: bool,
) -> Result<McStats> {
    check_inputs(c, x, gradient)?;
    let o = c.out_dim();
    let width = if gradient { o + o * c.dim() } else { o };
    monte_carlo(samples, width, || SampleWorkspace::new(c), |ws, s, out| ws.summand(x, grid, noise, s, gradient, out))
}

fn package(stats: McStats, c: &CoefficientSet, cfg: &EstimatorConfig, gradient: bool) -> SobolevEstimate {
    let o = c.out_dim();
    let (gradient, std_error_gradient) = if gradient {
        (Some(stats.mean[o..].to_vec()), Some(stats.std_error[o..].to_vec()))
    } else {
        (None, None)
    };
    SobolevEstimate {
        value: stats.mean[..o].to_vec(),
        gradient,
        std_error_value: stats.std_error[..o].to_vec(),
        std_error_gradient,
        samples: cfg.samples,
        steps: cfg.steps,
        seed: cfg.seed,
        aborted_samples: stats.aborted,
        t_start: cfg.t_start,
    }
}

fn estimate(c: &CoefficientSet, x: &[f64], cfg: &EstimatorConfig, gradient: bool) -> Result<SobolevEstimate> {
    let grid = cfg.grid(c.horizon())?;
    let noise = cfg.noise()?;
    let stats = estimate_with_noise(c, x, &grid, &noise, cfg.samples, gradient)?;
    Ok(package(stats, c, cfg, gradient))
}

/// `(1/M) Σ_m [f(𝓔_m(x)_T) + (T − t)/N Σ_{n<N} g(t_n, 𝓔_m(x)_{t_n})]`.
pub fn estimate_value(c: &CoefficientSet, x: &[f64], cfg: &EstimatorConfig) -> Result<SobolevEstimate> {
    estimate(c, x, cfg, false)
}

/// Value and gradient from the same paths, the gradient through the tangent process.
pub fn estimate_sobolev(c: &CoefficientSet, x: &[f64], cfg: &EstimatorConfig) -> Result<SobolevEstimate> {
    estimate(c, x, cfg, true)
}

/// One estimate per start time. Every start time reuses the same standard
/// normals, scaled by `√((T − t)/N)`.
pub fn estimate_time_dependent(
    c: &CoefficientSet,
    x: &[f64],
    cfg: &EstimatorConfig,
    starts: &[f64],
    gradient: bool,
) -> Result<Vec<SobolevEstimate>> {
    starts
        .iter()
        .map(|&t| {
            if !(0.0..c.horizon()).contains(&t) {
                return Err(Error::InvalidArgument(format!("start time {t} outside [0, {})", c.horizon())));
            }
            estimate(c, x, &cfg.with_start(t), gradient)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Affine, Constant, SquaredNorm};
    use crate::euler::InjectedIncrements;
    use std::sync::Arc;

    fn frozen(f: Arc<dyn SmoothMap>, g: Arc<dyn SmoothMap>) -> CoefficientSet {
        let d = f.input_dim();
        CoefficientSet::new(Arc::new(Constant::zero(d, d)), Arc::new(Constant::zero(d, d * d)), f, g, 1.0).unwrap()
    }

    #[test]
    fn frozen_paths_return_terminal_value() {
        let c = frozen(Arc::new(SquaredNorm::new(2, 1.0)), Arc::new(Constant::zero(2, 1)));
        let e = estimate_value(&c, &[1.0, 2.0], &EstimatorConfig::new(100, 4, 1)).unwrap();
        assert_eq!(e.value, vec![5.0]);
        assert_eq!(e.std_error_value, vec![0.0]);
    }

    #[test]
    fn constant_running_cost_integrates_to_horizon() {
        let c = frozen(Arc::new(Constant::zero(1, 1)), Arc::new(Constant::new(1, vec![0.7])));
        let e = estimate_value(&c, &[0.0], &EstimatorConfig::new(10, 7, 1)).unwrap();
        assert!((e.value[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn linear_terminal_gradient_is_exact() {
        let c = frozen(Arc::new(Affine::linear_functional(vec![1.5, -2.0], 0.0)), Arc::new(Constant::zero(2, 1)));
        let e = estimate_sobolev(&c, &[0.3, 0.1], &EstimatorConfig::new(50, 3, 9)).unwrap();
        assert_eq!(e.gradient.unwrap(), vec![1.5, -2.0]);
        assert_eq!(e.std_error_gradient.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_linear_drift_gradient() {
        let c = CoefficientSet::new(
            Arc::new(Affine::scaled_identity(1, 1.0)),
            Arc::new(Constant::zero(1, 1)),
            Arc::new(Affine::scaled_identity(1, 1.0)),
            Arc::new(Constant::zero(1, 1)),
            1.0,
        )
        .unwrap();
        let e = estimate_sobolev(&c, &[1.0], &EstimatorConfig::new(8, 2, 0)).unwrap();
        assert_eq!(e.gradient.unwrap(), vec![2.25]);
    }

    #[test]
    fn time_dependent_constant_cost() {
        let c = frozen(Arc::new(Constant::new(1, vec![1.0])), Arc::new(Constant::new(1, vec![2.0])));
        let est = estimate_time_dependent(&c, &[0.0], &EstimatorConfig::new(4, 5, 0), &[0.0, 0.25, 0.9], false).unwrap();
        for (e, t) in est.iter().zip([0.0, 0.25, 0.9]) {
            assert!((e.value[0] - (1.0 + 2.0 * (1.0 - t))).abs() < 1e-14);
        }
    }

    #[test]
    fn injected_noise_summand() {
        let c = CoefficientSet::new(
            Arc::new(Constant::zero(1, 1)),
            Arc::new(Constant::new(1, vec![1.0])),
            Arc::new(SquaredNorm::new(1, 1.0)),
            Arc::new(Constant::zero(1, 1)),
            1.0,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let st = estimate_with_noise(&c, &[0.0], &grid, &InjectedIncrements::new(vec![0.5, -0.25]), 3, true).unwrap();
        assert_eq!(st.mean, vec![0.0625, 0.5]);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let c = frozen(Arc::new(SquaredNorm::new(2, 1.0)), Arc::new(Constant::zero(2, 1)));
        assert!(estimate_value(&c, &[1.0], &EstimatorConfig::new(1, 1, 0)).is_err());
    }
}
