//! Uniform-grid Euler scheme, its tangent process, and coupled paths.

mod bounds;
pub mod noise;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};

pub use bounds::{pathwise_bounds, PathwiseConstants, PathwiseReport};
pub use noise::{InjectedIncrements, NoiseSource, NoiseStream};

/// Nodes `t_n = t_start + n (T − t_start) / N`, `n = 0, …, N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        if !(t_start.is_finite() && horizon.is_finite() && 0.0 <= t_start && t_start < horizon) {
            return Err(Error::InvalidArgument(format!(
                "start time {t_start} must lie in [0, {horizon})"
            )));
        }
        Ok(Self { t_start, horizon, steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t_start) / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.horizon
        } else {
            self.t_start + n as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.node(n)).collect()
    }

    /// Largest node `t_n ≤ s` (clamped to the grid).
    pub fn floor(&self, s: f64) -> f64 {
        self.node(self.floor_index(s))
    }

    pub fn floor_index(&self, s: f64) -> usize {
        if s <= self.t_start {
            return 0;
        }
        let mut n = (((s - self.t_start) / self.dt()).floor() as usize).min(self.steps);
        while n > 0 && self.node(n) > s {
            n -= 1;
        }
        while n < self.steps && self.node(n + 1) <= s {
            n += 1;
        }
        n
    }
}

/// Euler path of one sample, optionally with its tangent process.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub sample: u64,
    dim: usize,
    noise_dim: usize,
    values: Vec<f64>,
    tangent: Option<Vec<f64>>,
    increments: Vec<f64>,
}

impl PathBundle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// State `𝓔_{t_n}`.
    pub fn value(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// All states, `(N + 1) × d` row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Tangent `D𝓔_{t_n}` as a row-major `d × d` matrix with entry `(j, i) = ∂𝓔_j / ∂x_i`.
    pub fn tangent(&self, n: usize) -> Option<&[f64]> {
        let dd = self.dim * self.dim;
        self.tangent.as_ref().map(|t| &t[n * dd..(n + 1) * dd])
    }

    /// Increment `W_{t_{n+1}} − W_{t_n}`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

/// Reusable buffers for stepping the scheme without allocation.
pub(crate) struct Stepper<'a> {
    c: &'a CoefficientSet,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    dmu: Vec<f64>,
    dsigma: Vec<f64>,
    drive: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(c: &'a CoefficientSet) -> Self {
        let d = c.dim();
        let m = c.noise_dim();
        Self {
            c,
            mu: vec![0.0; d],
            sigma: vec![0.0; d * m],
            dmu: vec![0.0; d * d],
            dsigma: vec![0.0; d * d * m],
            drive: vec![0.0; d * d],
            scratch: vec![0.0; d * d],
        }
    }

    /// `state ← state + μ(t, state) dt + σ(t, state) dw`.
    pub(crate) fn step(&mut self, t: f64, dt: f64, state: &mut [f64], dw: &[f64]) {
        let m = self.c.noise_dim();
        self.c.mu.derivative_into(t, state, 0, &mut self.mu);
        self.c.sigma.derivative_into(t, state, 0, &mut self.sigma);
        for (j, s) in state.iter_mut().enumerate() {
            let row = &self.sigma[j * m..(j + 1) * m];
            *s += self.mu[j] * dt + row.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Steps state and tangent together; the tangent update uses the
    /// coefficient gradients at the pre-step state.
    pub(crate) fn step_tangent(&mut self, t: f64, dt: f64, state: &mut [f64], tangent: &mut [f64], dw: &[f64]) {
        let d = self.c.dim();
        let m = self.c.noise_dim();
        self.c.mu.derivative_into(t, state, 1, &mut self.dmu);
        self.c.sigma.derivative_into(t, state, 1, &mut self.dsigma);
        // drive[j][a] = dt ∂_a μ_j + Σ_q ∂_a σ_{jq} dw_q
        for a in 0..d {
            for j in 0..d {
                let ds = &self.dsigma[a * d * m + j * m..a * d * m + (j + 1) * m];
                self.drive[j * d + a] =
                    dt * self.dmu[a * d + j] + ds.iter().zip(dw).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        for j in 0..d {
            for i in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    acc += self.drive[j * d + a] * tangent[a * d + i];
                }
                self.scratch[j * d + i] = acc;
            }
        }
        for (t_ji, s) in tangent.iter_mut().zip(&self.scratch) {
            *t_ji += s;
        }
        self.step(t, dt, state, dw);
    }
}

fn check_point(c: &CoefficientSet, x: &[f64]) -> Result<()> {
    if x.len() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial point has dimension {}, coefficients live on ℝ^{}",
            x.len(),
            c.dim()
        )));
    }
    Ok(())
}

fn run(
    c: &CoefficientSet,
    x: &[f64],
    grid: &TimeGrid,
    noise: &dyn NoiseSource,
    sample: u64,
    with_tangent: bool,
) -> Result<PathBundle> {
    check_point(c, x)?;
    let d = c.dim();
    let m = c.noise_dim();
    let n_steps = grid.steps();
    if with_tangent && (c.mu.max_order() < 1 || c.sigma.max_order() < 1) {
        let (name, h) = if c.mu.max_order() < 1 { ("μ", &c.mu) } else { ("σ", &c.sigma) };
        return Err(Error::OrderUnavailable {
            name: format!("{name} ({})", h.label()),
            requested: 1,
            available: 0,
        });
    }
    let mut increments = vec![0.0; n_steps * m];
    noise.fill_increments(sample, grid, m, &mut increments);
    let mut values = vec![0.0; (n_steps + 1) * d];
    values[..d].copy_from_slice(x);
    let mut tangent = with_tangent.then(|| {
        let mut t = vec![0.0; (n_steps + 1) * d * d];
        for i in 0..d {
            t[i * d + i] = 1.0;
        }
        t
    });
    let mut stepper = Stepper::new(c);
    let dt = grid.dt();
    let mut state = x.to_vec();
    let mut tan: Vec<f64> = tangent.as_ref().map(|t| t[..d * d].to_vec()).unwrap_or_default();
    for n in 0..n_steps {
        let dw = &increments[n * m..(n + 1) * m];
        if with_tangent {
            stepper.step_tangent(grid.node(n), dt, &mut state, &mut tan, dw);
        } else {
            stepper.step(grid.node(n), dt, &mut state, dw);
        }
        if state.iter().chain(&tan).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { sample, step: n + 1 });
        }
        values[(n + 1) * d..(n + 2) * d].copy_from_slice(&state);
        if let Some(t) = tangent.as_mut() {
            t[(n + 1) * d * d..(n + 2) * d * d].copy_from_slice(&tan);
        }
    }
    Ok(PathBundle { grid: *grid, sample, dim: d, noise_dim: m, values, tangent, increments })
}

/// Euler path `𝓔_{t_{n+1}} = 𝓔_{t_n} + μ(t_n, 𝓔_{t_n}) Δt + σ(t_n, 𝓔_{t_n}) ΔW_n` from `x`.
pub fn simulate(
    c: &CoefficientSet,
    x: &[f64],
    grid: &TimeGrid,
    noise: &dyn NoiseSource,
    sample: u64,
) -> Result<PathBundle> {
    run(c, x, grid, noise, sample, false)
}

/// Euler path together with its derivative in the initial point,
/// `D𝓔_{t_{n+1}} = D𝓔_{t_n} + ∇μᵀ D𝓔_{t_n} Δt + (∇σᵀ D𝓔_{t_n}) ΔW_n`, `D𝓔_{t_0} = I`.
pub fn simulate_tangent(
    c: &CoefficientSet,
    x: &[f64],
    grid: &TimeGrid,
    noise: &dyn NoiseSource,
    sample: u64,
) -> Result<PathBundle> {
    run(c, x, grid, noise, sample, true)
}

/// Two Euler paths driven by identical increments.
pub fn coupled_pair(
    c1: &CoefficientSet,
    c2: &CoefficientSet,
    x: &[f64],
    y: &[f64],
    grid: &TimeGrid,
    noise: &dyn NoiseSource,
    sample: u64,
) -> Result<(PathBundle, PathBundle)> {
    if c1.dim() != c2.dim() || c1.noise_dim() != c2.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "coupled coefficient sets live on ℝ^{} (noise {}) and ℝ^{} (noise {})",
            c1.dim(),
            c1.noise_dim(),
            c2.dim(),
            c2.noise_dim()
        )));
    }
    Ok((simulate(c1, x, grid, noise, sample)?, simulate(c2, y, grid, noise, sample)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Affine, Constant, SmoothMap};
    use std::sync::Arc;

    fn set(mu: Arc<dyn SmoothMap>, sigma: Arc<dyn SmoothMap>) -> CoefficientSet {
        let d = mu.input_dim();
        CoefficientSet::new(mu, sigma, Arc::new(Constant::zero(d, 1)), Arc::new(Constant::zero(d, 1)), 1.0)
            .unwrap()
    }

    #[test]
    fn grid_nodes_and_floor() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.floor(0.6), 0.5);
        assert_eq!(g.floor(0.75), 0.75);
        assert_eq!(g.floor(1.0), 1.0);
        let shifted = TimeGrid::new(0.5, 1.0, 2).unwrap();
        assert_eq!(shifted.nodes(), vec![0.5, 0.75, 1.0]);
        assert!(TimeGrid::new(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn frozen_path_without_coefficients() {
        let c = set(Arc::new(Constant::zero(1, 1)), Arc::new(Constant::zero(1, 1)));
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let p = simulate(&c, &[1.0], &g, &NoiseStream::new(0), 0).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn linear_drift_recursion() {
        let c = set(Arc::new(Affine::scaled_identity(1, 1.0)), Arc::new(Constant::zero(1, 1)));
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let p = simulate_tangent(&c, &[1.0], &g, &NoiseStream::new(0), 0).unwrap();
        assert_eq!(p.values(), &[1.0, 1.5, 2.25]);
        assert_eq!(p.tangent(2).unwrap(), &[2.25]);
    }

    #[test]
    fn injected_increments_are_used() {
        let c = set(Arc::new(Constant::zero(1, 1)), Arc::new(Constant::scaled_identity(1, 1.0)));
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let p = simulate(&c, &[0.0], &g, &InjectedIncrements::new(vec![0.5, -0.25]), 0).unwrap();
        assert_eq!(p.values(), &[0.0, 0.5, 0.25]);
    }

    #[test]
    fn multiplicative_noise_tangent() {
        let c = set(Arc::new(Constant::zero(1, 1)), Arc::new(Affine::scaled_identity(1, 1.0)));
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let x = 2.0;
        let p = simulate_tangent(&c, &[x], &g, &InjectedIncrements::new(vec![0.1]), 0).unwrap();
        assert!((p.value(1)[0] - x * 1.1).abs() < 1e-15);
        assert!((p.tangent(1).unwrap()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn superlinear_drift_diverges_with_step() {
        let mu = Arc::new(crate::coeffs::Componentwise::new(1, crate::coeffs::Profile::Poly(vec![0.0, 0.0, 0.0, 5.0])));
        let c = set(mu, Arc::new(Constant::zero(1, 1)));
        let g = TimeGrid::new(0.0, 1.0, 8).unwrap();
        match simulate(&c, &[10.0], &g, &NoiseStream::new(0), 3) {
            Err(Error::Divergence { sample, step }) => {
                assert_eq!(sample, 3);
                assert!(step >= 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn coupled_pair_checks_dimensions() {
        let c1 = set(Arc::new(Constant::zero(1, 1)), Arc::new(Constant::zero(1, 1)));
        let c2 = set(Arc::new(Constant::zero(2, 2)), Arc::new(Constant::scaled_identity(2, 1.0)));
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(coupled_pair(&c1, &c2, &[0.0], &[0.0, 0.0], &g, &NoiseStream::new(0), 0).is_err());
    }
}
