//! Perturbed coefficients `(ν, τ, F, G)` close to `(μ, σ, f, g)`: the size of
//! the perturbation, the coupled estimators, and the expectation-gap bounds.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accuracy::{weighted_norm, CompactDomain, QuadratureRule};
use crate::coeffs::{lift_augmented, Affine, CoefficientSet, Constant, DerivativeMap, LinearCombination, SmoothMap};
use crate::error::{Error, Result};
use crate::euler::PathwiseConstants;
use crate::growth::{growth_sum, EstimateMode, GrowthEstimate, ProbeSpec};
use crate::mces::{estimate_sobolev, estimate_value, monte_carlo, EstimatorConfig, McStats, SampleWorkspace, SobolevEstimate};
use crate::problems::BenchmarkProblem;

/// Growth constants of a perturbed pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConstants {
    /// `max{1, ⦀∇f⦀, ⦀∇g⦀}`
    pub c0: f64,
    /// `max{1, ⦀μ⦀, ⦀∇μ⦀, ⦀σ⦀, ⦀∇σ⦀, ⦀ν⦀, ⦀τ⦀}`
    pub c1: f64,
    /// `max{⦀μ⦀, ⦀σ⦀}`, growth constant of the pathwise bound.
    pub c0_pathwise: f64,
    /// `max{⦀μ − ν⦀, ⦀σ − τ⦀}`, the dynamics part of `η`.
    pub eta_dynamics: f64,
    pub mode: EstimateMode,
}

impl PerturbationConstants {
    pub fn pathwise(&self) -> PathwiseConstants {
        PathwiseConstants {
            c0: self.c0_pathwise,
            c1: self.c1,
            eta: self.eta_dynamics,
            analytic: self.mode == EstimateMode::Analytic,
        }
    }
}

/// Base set `(μ, σ, f, g)` with perturbation `(ν, τ, F, G)` and the derived
/// `η = max{⦀μ−ν⦀, ⦀σ−τ⦀, ⦀f−F⦀, ⦀g−G⦀}`.
#[derive(Debug, Clone)]
pub struct PerturbedPair {
    base: CoefficientSet,
    pert: CoefficientSet,
    probe: ProbeSpec,
    eta: GrowthEstimate,
    constants: PerturbationConstants,
}

fn check_pair(base: &CoefficientSet, pert: &CoefficientSet) -> Result<()> {
    if base.dim() != pert.dim() || base.noise_dim() != pert.noise_dim() || base.out_dim() != pert.out_dim() {
        return Err(Error::DimensionMismatch(format!(
            "base set is (d, m, o) = ({}, {}, {}), perturbation is ({}, {}, {})",
            base.dim(),
            base.noise_dim(),
            base.out_dim(),
            pert.dim(),
            pert.noise_dim(),
            pert.out_dim()
        )));
    }
    if base.horizon() != pert.horizon() {
        return Err(Error::InvalidArgument(format!(
            "horizons differ: {} and {}",
            base.horizon(),
            pert.horizon()
        )));
    }
    Ok(())
}

fn single(h: &dyn SmoothMap, probe: &ProbeSpec) -> Result<f64> {
    Ok(growth_sum(h, 1.0, 0, probe)?.value)
}

fn difference(a: &Arc<dyn SmoothMap>, b: &Arc<dyn SmoothMap>, lifted: bool) -> Result<Arc<dyn SmoothMap>> {
    let diff: Arc<dyn SmoothMap> = Arc::new(LinearCombination::difference(a.clone(), b.clone())?);
    if lifted {
        lift_augmented(diff)
    } else {
        Ok(diff)
    }
}

/// Probe estimate of `η`; with `sobolev` the differences are lifted to their
/// augmented derivatives first.
pub fn perturbation_eta(
    base: &CoefficientSet,
    pert: &CoefficientSet,
    probe: &ProbeSpec,
    sobolev: bool,
) -> Result<GrowthEstimate> {
    check_pair(base, pert)?;
    let parts = [(&base.mu, &pert.mu), (&base.sigma, &pert.sigma), (&base.f, &pert.f), (&base.g, &pert.g)];
    let mut worst: Option<GrowthEstimate> = None;
    for (a, b) in parts {
        let e = growth_sum(difference(a, b, sobolev)?.as_ref(), 1.0, 0, probe)?;
        if worst.as_ref().is_none_or(|w| e.value > w.value) {
            worst = Some(e);
        }
    }
    Ok(worst.expect("four components"))
}

/// Probe estimates of the growth constants. Probe maxima bound the suprema
/// from below, so checks built on them are advisory.
pub fn empirical_constants(base: &CoefficientSet, pert: &CoefficientSet, probe: &ProbeSpec) -> Result<PerturbationConstants> {
    check_pair(base, pert)?;
    let grad = |h: &Arc<dyn SmoothMap>| -> Result<f64> { single(&DerivativeMap::new(h.clone(), 1)?, probe) };
    let mu = single(base.mu.as_ref(), probe)?;
    let sigma = single(base.sigma.as_ref(), probe)?;
    let c0 = [1.0, grad(&base.f)?, grad(&base.g)?].into_iter().fold(0.0, f64::max);
    let c1 = [
        1.0,
        mu,
        grad(&base.mu)?,
        sigma,
        grad(&base.sigma)?,
        single(pert.mu.as_ref(), probe)?,
        single(pert.sigma.as_ref(), probe)?,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let eta_dynamics = single(difference(&base.mu, &pert.mu, false)?.as_ref(), probe)?
        .max(single(difference(&base.sigma, &pert.sigma, false)?.as_ref(), probe)?);
    Ok(PerturbationConstants { c0, c1, c0_pathwise: mu.max(sigma), eta_dynamics, mode: EstimateMode::Empirical })
}

impl PerturbedPair {
    /// Pair with every constant estimated on `probe`.
    pub fn new(base: CoefficientSet, pert: CoefficientSet, probe: ProbeSpec) -> Result<Self> {
        let constants = empirical_constants(&base, &pert, &probe)?;
        let eta = perturbation_eta(&base, &pert, &probe, false)?;
        Ok(Self { base, pert, probe, eta, constants })
    }

    /// Pair with closed-form `η` and constants.
    pub fn with_analytic(base: CoefficientSet, pert: CoefficientSet, eta: f64, constants: PerturbationConstants) -> Result<Self> {
        check_pair(&base, &pert)?;
        let probe = ProbeSpec::default();
        let constants = PerturbationConstants { mode: EstimateMode::Analytic, ..constants };
        Ok(Self { base, pert, probe, eta: GrowthEstimate::analytic(eta, 1.0, 0), constants })
    }

    pub fn base(&self) -> &CoefficientSet {
        &self.base
    }

    pub fn pert(&self) -> &CoefficientSet {
        &self.pert
    }

    pub fn eta(&self) -> &GrowthEstimate {
        &self.eta
    }

    pub fn constants(&self) -> &PerturbationConstants {
        &self.constants
    }

    /// `true` when `η` and the constants are closed-form upper bounds.
    pub fn is_analytic(&self) -> bool {
        self.eta.mode == EstimateMode::Analytic && self.constants.mode == EstimateMode::Analytic
    }

    /// Replaces the perturbation; `η` and the constants are re-estimated on the probe.
    pub fn set_pert(&mut self, pert: CoefficientSet) -> Result<()> {
        *self = Self::new(self.base.clone(), pert, self.probe.clone())?;
        Ok(())
    }

    pub fn set_base(&mut self, base: CoefficientSet) -> Result<()> {
        *self = Self::new(base, self.pert.clone(), self.probe.clone())?;
        Ok(())
    }
}

/// The standard (or, with `sobolev`, gradient) estimator run on the
/// perturbed set. Same seed, same noise as the base estimator.
pub fn perturbed_estimate(pair: &PerturbedPair, x: &[f64], cfg: &EstimatorConfig, sobolev: bool) -> Result<SobolevEstimate> {
    if sobolev {
        estimate_sobolev(&pair.pert, x, cfg)
    } else {
        estimate_value(&pair.pert, x, cfg)
    }
}

/// Pair with `ν = μ + ε e₁`, `τ = σ + ε e₁e₁ᵀ`, `F = f + ε x₁`, `G = g + ε`
/// and closed-form constants taken from the fixture, so that `η = ε`.
pub fn shifted_pair(problem: &BenchmarkProblem, eps: f64) -> Result<PerturbedPair> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift size must be finite and non-negative, got {eps}")));
    }
    let base = problem.coefficients.clone();
    let d = base.dim();
    let m = base.noise_dim();
    let o = base.out_dim();
    let unit = |len: usize, width: usize| {
        let mut v = vec![0.0; len * width];
        v[0] = eps;
        v
    };
    let shift = |h: &Arc<dyn SmoothMap>, by: Arc<dyn SmoothMap>| -> Result<Arc<dyn SmoothMap>> {
        Ok(Arc::new(LinearCombination::sum(h.clone(), by)?))
    };
    let mut f_matrix = vec![0.0; o * d];
    f_matrix[0] = eps;
    let pert = CoefficientSet::new(
        shift(&base.mu, Arc::new(Constant::new(d, unit(d, 1))))?,
        shift(&base.sigma, Arc::new(Constant::new(d, unit(d, m))))?,
        shift(&base.f, Arc::new(Affine::new(f_matrix, vec![0.0; o])?))?,
        shift(&base.g, Arc::new(Constant::new(d, unit(o, 1))))?,
        base.horizon(),
    )?;
    let k = &problem.constants;
    let constants = PerturbationConstants {
        c0: k.c0_gap(),
        c1: k.c1().max(k.mu + eps).max(k.sigma + eps),
        c0_pathwise: k.c0_pathwise(),
        eta_dynamics: eps,
        mode: EstimateMode::Analytic,
    };
    PerturbedPair::with_analytic(base, pert, eps, constants)
}

/// Sample mean and standard error of `summand(pert) − summand(base)` with both
/// summands driven by the same increments.
pub fn coupled_difference(pair: &PerturbedPair, x: &[f64], cfg: &EstimatorConfig, sobolev: bool) -> Result<McStats> {
    let grid = cfg.grid(pair.base.horizon())?;
    let noise = cfg.noise()?;
    for c in [&pair.base, &pair.pert] {
        if x.len() != c.dim() {
            return Err(Error::DimensionMismatch(format!("point has dimension {}, expected {}", x.len(), c.dim())));
        }
    }
    let o = pair.base.out_dim();
    let width = if sobolev { o + o * pair.base.dim() } else { o };
    monte_carlo(
        cfg.samples,
        width,
        || (SampleWorkspace::new(&pair.base), SampleWorkspace::new(&pair.pert), vec![0.0; width]),
        |(wb, wp, scratch), s, out| {
            wb.summand(x, &grid, &noise, s, sobolev, scratch)?;
            wp.summand(x, &grid, &noise, s, sobolev, out)?;
            for (o, b) in out.iter_mut().zip(scratch.iter()) {
                *o -= b;
            }
            Ok(())
        },
    )
}

/// `ln(1 + e^a)` without overflow.
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

fn check_steps(n: usize, horizon: f64, d: usize) -> Result<()> {
    if (n as f64) < d as f64 + horizon + 1.0 {
        return Err(Error::Precondition(format!("N = {n} violates N ≥ d + T + 1 = {}", d as f64 + horizon + 1.0)));
    }
    Ok(())
}

/// `ln` of `(3/4) η c₀ T N (6 c₁ √(TN))^{N(1+N)} (1 + ‖x‖^{N+1})`; `−∞` when `η = 0`.
pub fn expectation_gap_log_bound(
    eta: f64,
    c0: f64,
    c1: f64,
    x_norm: f64,
    n: usize,
    horizon: f64,
    d: usize,
) -> Result<f64> {
    check_steps(n, horizon, d)?;
    if !(eta >= 0.0 && c0 > 0.0 && c1 > 0.0) {
        return Err(Error::InvalidArgument(format!("need η ≥ 0 and c₀, c₁ > 0, got η = {eta}, c₀ = {c0}, c₁ = {c1}")));
    }
    if eta == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let tn = horizon * nf;
    let x_term = if x_norm == 0.0 { 0.0 } else { softplus((nf + 1.0) * x_norm.ln()) };
    Ok(0.75f64.ln() + eta.ln() + c0.ln() + tn.ln() + nf * (1.0 + nf) * (6.0 * c1 * tn.sqrt()).ln() + x_term)
}

/// Expectation-gap bound of the pair at `x`; `+∞` when it exceeds the `f64` range.
pub fn expectation_gap_bound(pair: &PerturbedPair, x: &[f64], n: usize) -> Result<f64> {
    let k = pair.constants();
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ln = expectation_gap_log_bound(pair.eta.value, k.c0, k.c1, x_norm, n, pair.base.horizon(), pair.base.dim())?;
    Ok(ln.exp())
}

/// Largest `η` admitted by `ε/η ≥ c₀TN(6c₁√(TN))^{N(1+N)} ‖1 + ‖x‖^{N+1}‖_{L²(K)}`,
/// or with `sobolev` by `ε/η ≥ 3d c₀TN(7c₁√(TN))^{N(1+N)} ‖1 + ‖x‖^{N+1}‖_{L²(K)}`.
#[allow(clippy::too_many_arguments)]
pub fn eta_requirement(
    epsilon: f64,
    c0: f64,
    c1: f64,
    n: usize,
    horizon: f64,
    domain: &CompactDomain,
    rule: &QuadratureRule,
    sobolev: bool,
) -> Result<f64> {
    if !(epsilon > 0.0 && c0 > 0.0 && c1 > 0.0 && n > 0 && horizon > 0.0) {
        return Err(Error::InvalidArgument("need ε, c₀, c₁, N, T > 0".into()));
    }
    let nf = n as f64;
    let tn = horizon * nf;
    let w = weighted_norm(domain, nf + 1.0, rule)?;
    let (lead, base) = if sobolev { ((3.0 * domain.dim() as f64).ln(), 7.0) } else { (0.0, 6.0) };
    let ln_rhs = lead + c0.ln() + tn.ln() + nf * (1.0 + nf) * (base * c1 * tn.sqrt()).ln() + w.ln();
    Ok((epsilon.ln() - ln_rhs).exp())
}
