//! Benchmark problems with closed-form solutions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{
    Affine, AssumptionLevel, CoefficientSet, Componentwise, Constant, DiagonalMatrix, LinearCombination, Profile,
    SeparableProduct, SeparableSum, SmoothMap, SquaredNorm, TimeFactor, TimeScaled, TrigPoly,
};
use crate::error::{Error, Result};

/// Closed-form values (or upper bounds) of the growth measures
/// `⦀h⦀ = sup_{t,x} ‖h(t, x)‖ / (1 + ‖x‖)` entering the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub mu: f64,
    pub sigma: f64,
    pub grad_mu: f64,
    pub grad_sigma: f64,
    pub grad_f: f64,
    pub grad_g: f64,
    /// Time-Hölder exponent of the coefficients.
    pub alpha: f64,
}

impl AnalyticConstants {
    /// `c = max{⦀μ⦀, ⦀σ⦀²}`.
    pub fn c(&self) -> f64 {
        self.mu.max(self.sigma * self.sigma)
    }

    /// `max{⦀μ⦀, ⦀σ⦀}`, the growth constant of the pathwise bounds.
    pub fn c0_pathwise(&self) -> f64 {
        self.mu.max(self.sigma)
    }

    /// `max{1, ⦀∇f⦀, ⦀∇g⦀}`.
    pub fn c0_gap(&self) -> f64 {
        1f64.max(self.grad_f).max(self.grad_g)
    }

    /// `max{1, ⦀μ⦀, ⦀∇μ⦀, ⦀σ⦀, ⦀∇σ⦀}`.
    pub fn c1(&self) -> f64 {
        [1.0, self.mu, self.grad_mu, self.sigma, self.grad_sigma].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub coefficients: CoefficientSet,
    /// `u: [0, T] × ℝ^d → ℝ`, with `∂_t u` and at least two spatial derivatives.
    pub exact_u: Arc<dyn SmoothMap>,
    pub constants: AnalyticConstants,
    pub assumption_level: AssumptionLevel,
}

impl BenchmarkProblem {
    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.coefficients.horizon()
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.exact_u.value(t, x)?[0])
    }

    pub fn exact_grad(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.exact_u.derivative(t, x, 1)?.into_vec())
    }

    /// `name:key=value,…` form accepted by [`lookup`].
    pub fn descriptor(&self) -> String {
        let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}:{}", self.name, p.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatTerminal {
    /// `f(x) = ‖x‖²`
    Quadratic,
    /// `f(x) = Π cos(x_i)`
    Trig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManufacturedProfile {
    /// `u = e^{−t} (1/d) Σ sin(x_i)`
    SinMean,
    /// `u = e^{−t} (1/d) Σ (1 + cos(x_i)) / 2`
    Bump,
}

fn check_dims(d: usize, horizon: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !(horizon.is_finite() && horizon >= 1.0) {
        return Err(Error::InvalidArgument(format!("time horizon must satisfy T ≥ 1, got {horizon}")));
    }
    Ok(())
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// `∂_t u + ½Δu = 0`: μ ≡ 0, σ ≡ I, g ≡ 0.
pub fn heat_problem(d: usize, horizon: f64, terminal: HeatTerminal) -> Result<BenchmarkProblem> {
    check_dims(d, horizon)?;
    let df = d as f64;
    let (name, f, exact_u, grad_f): (&str, Arc<dyn SmoothMap>, Arc<dyn SmoothMap>, f64) = match terminal {
        HeatTerminal::Quadratic => {
            let f: Arc<dyn SmoothMap> = Arc::new(SquaredNorm::new(d, 1.0));
            let shift: Arc<dyn SmoothMap> = Arc::new(TimeScaled::new(
                TimeFactor::Affine { intercept: df * horizon, slope: -df },
                Arc::new(Constant::new(d, vec![1.0])),
            ));
            // ‖∇f‖ / (1 + ‖x‖) = 2‖x‖ / (1 + ‖x‖) < 2
            (
                "heat-quadratic",
                f.clone(),
                Arc::new(LinearCombination::sum(f, shift)?),
                2.0,
            )
        }
        HeatTerminal::Trig => {
            let f: Arc<dyn SmoothMap> = Arc::new(SeparableProduct::new(d, Profile::cos(), 1.0));
            let u = TimeScaled::new(TimeFactor::Exp { scale: (-df * horizon / 2.0).exp(), rate: df / 2.0 }, f.clone());
            // ‖∇f‖ ≤ min(‖x‖, 1), so ‖∇f‖ / (1 + ‖x‖) ≤ 1/2
            ("heat-trig", f, Arc::new(u), 0.5)
        }
    };
    let coefficients = CoefficientSet::new(
        Arc::new(Constant::zero(d, d)),
        Arc::new(Constant::scaled_identity(d, 1.0)),
        f,
        Arc::new(Constant::zero(d, 1)),
        horizon,
    )?;
    Ok(BenchmarkProblem {
        name: name.into(),
        params: params(&[("d", df), ("T", horizon)]),
        coefficients,
        exact_u,
        constants: AnalyticConstants {
            mu: 0.0,
            sigma: df.sqrt(),
            grad_mu: 0.0,
            grad_sigma: 0.0,
            grad_f,
            grad_g: 0.0,
            alpha: 1.0,
        },
        assumption_level: AssumptionLevel::SobolevWeakError,
    })
}

/// μ(x) = −θx, σ ≡ s·I, f(x) = aᵀx, g ≡ 0, so `u(t, x) = e^{−θ(T−t)} aᵀx`.
pub fn ou_problem(d: usize, horizon: f64, theta: f64, s: f64, a: Vec<f64>) -> Result<BenchmarkProblem> {
    check_dims(d, horizon)?;
    if !(theta > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument(format!("need θ > 0 and s > 0, got θ = {theta}, s = {s}")));
    }
    if a.len() != d {
        return Err(Error::DimensionMismatch(format!("terminal functional has {} entries, expected {d}", a.len())));
    }
    let norm_a = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f: Arc<dyn SmoothMap> = Arc::new(Affine::linear_functional(a.clone(), 0.0));
    let exact_u = Arc::new(TimeScaled::new(TimeFactor::Exp { scale: (-theta * horizon).exp(), rate: theta }, f.clone()));
    let coefficients = CoefficientSet::new(
        Arc::new(Affine::scaled_identity(d, -theta)),
        Arc::new(Constant::scaled_identity(d, s)),
        f,
        Arc::new(Constant::zero(d, 1)),
        horizon,
    )?;
    let df = d as f64;
    Ok(BenchmarkProblem {
        name: "ou".into(),
        params: params(&[("d", df), ("T", horizon), ("theta", theta), ("s", s)]),
        coefficients,
        exact_u,
        constants: AnalyticConstants {
            mu: theta,
            sigma: s * df.sqrt(),
            grad_mu: theta * df.sqrt(),
            grad_sigma: 0.0,
            grad_f: norm_a,
            grad_g: 0.0,
            alpha: 1.0,
        },
        assumption_level: AssumptionLevel::SobolevWeakError,
    })
}

/// Drift profile `½ sin` of the manufactured problems.
fn manufactured_drift() -> TrigPoly {
    TrigPoly::sin_k(1, 0.5)
}

/// Diffusion profile `½ (1 + ½ cos)`.
fn manufactured_diffusion() -> TrigPoly {
    TrigPoly::new(vec![0.5, 0.25], vec![])
}

/// Per-coordinate inhomogeneity `ψ = φ − μ̃ φ' − ½ σ̃² φ''` for `u = e^{−t} (1/d) Σ φ(x_i)`.
pub fn manufactured_source(phi: &TrigPoly) -> TrigPoly {
    let mu = manufactured_drift();
    let sig = manufactured_diffusion();
    let d1 = phi.derivative();
    let d2 = d1.derivative();
    let drift = &mu * &d1;
    let diffusion = (&(&sig * &sig) * &d2).scaled(0.5);
    &(phi - &drift) - &diffusion
}

/// Non-affine coefficients μ_i = ½ sin(x_i), σ = diag(½(1 + ½ cos(x_i))) with
/// a prescribed solution and `g := −∂_t u − 𝒢u`.
pub fn manufactured_problem(d: usize, horizon: f64, profile: ManufacturedProfile) -> Result<BenchmarkProblem> {
    check_dims(d, horizon)?;
    let df = d as f64;
    let (name, phi) = match profile {
        ManufacturedProfile::SinMean => ("manufactured-sin-mean", TrigPoly::sin_k(1, 1.0)),
        ManufacturedProfile::Bump => ("manufactured-bump", TrigPoly::new(vec![0.5, 0.5], vec![])),
    };
    let psi = manufactured_source(&phi);
    let decay = |scale: f64| TimeFactor::Exp { scale, rate: -1.0 };
    let spatial_u: Arc<dyn SmoothMap> = Arc::new(SeparableSum::new(d, Profile::Trig(phi.clone()), 1.0 / df));
    let exact_u = Arc::new(TimeScaled::new(decay(1.0), spatial_u));
    let f = Arc::new(SeparableSum::new(d, Profile::Trig(phi.clone()), (-horizon).exp() / df));
    let g = Arc::new(TimeScaled::new(
        decay(1.0),
        Arc::new(SeparableSum::new(d, Profile::Trig(psi.clone()), 1.0 / df)),
    ));
    let coefficients = CoefficientSet::new(
        Arc::new(Componentwise::new(d, Profile::Trig(manufactured_drift()))),
        Arc::new(DiagonalMatrix::new(d, Profile::Trig(manufactured_diffusion()))),
        f,
        g,
        horizon,
    )?;
    // |sin s| ≤ |s| and |sin s| ≤ 1 give ⦀μ⦀ ≤ ½ and ⦀∇σ⦀ ≤ ¼; the σ and ∇μ
    // suprema sit at x = 0. For f and g, ‖∇‖ ≤ (scale/d)·√d·‖φ'‖_∞.
    let sup_abs = |p: &TrigPoly| p.coefficient_l1();
    Ok(BenchmarkProblem {
        name: name.into(),
        params: params(&[("d", df), ("T", horizon)]),
        coefficients,
        exact_u,
        constants: AnalyticConstants {
            mu: 0.5,
            sigma: 0.75 * df.sqrt(),
            grad_mu: 0.5 * df.sqrt(),
            grad_sigma: 0.25,
            grad_f: (-horizon).exp() * sup_abs(&phi.derivative()) / df.sqrt(),
            grad_g: sup_abs(&psi.derivative()) / df.sqrt(),
            alpha: 1.0,
        },
        assumption_level: AssumptionLevel::SobolevWeakError,
    })
}

/// Fixture names understood by [`lookup`].
pub const FIXTURES: &[&str] = &["heat-quadratic", "heat-trig", "ou", "manufactured-sin-mean", "manufactured-bump"];

/// Parses `key=value` pairs separated by commas.
pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("fixture parameter `{part}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("fixture parameter `{k}` has non-numeric value `{v}`")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Builds a fixture from its name and parameters (`d`, `T`, and for `ou`
/// also `theta`, `s`). Missing parameters take defaults `d = 1`, `T = 1`,
/// `theta = 1`, `s = 1`; the `ou` terminal functional is `e₁`.
pub fn lookup(name: &str, params: &BTreeMap<String, f64>) -> Result<BenchmarkProblem> {
    let allowed: &[&str] = match name {
        "ou" => &["d", "T", "theta", "s"],
        _ if FIXTURES.contains(&name) => &["d", "T"],
        _ => return Err(Error::UnknownFixture(name.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("fixture `{name}` has no parameter `{k}`")));
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let d = get("d", 1.0);
    if !(d >= 1.0 && d.fract() == 0.0) {
        return Err(Error::InvalidArgument(format!("dimension must be a positive integer, got {d}")));
    }
    let d = d as usize;
    let horizon = get("T", 1.0);
    match name {
        "heat-quadratic" => heat_problem(d, horizon, HeatTerminal::Quadratic),
        "heat-trig" => heat_problem(d, horizon, HeatTerminal::Trig),
        "ou" => {
            let mut a = vec![0.0; d];
            a[0] = 1.0;
            ou_problem(d, horizon, get("theta", 1.0), get("s", 1.0), a)
        }
        "manufactured-sin-mean" => manufactured_problem(d, horizon, ManufacturedProfile::SinMean),
        _ => manufactured_problem(d, horizon, ManufacturedProfile::Bump),
    }
}

/// [`lookup`] on a `name:key=value,…` descriptor.
pub fn lookup_descriptor(descriptor: &str) -> Result<BenchmarkProblem> {
    let (name, rest) = descriptor.split_once(':').unwrap_or((descriptor, ""));
    lookup(name.trim(), &parse_params(rest)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{generator_apply, GeneratorVariant};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn battery() -> Vec<BenchmarkProblem> {
        let mut v = Vec::new();
        for d in [1, 3, 5] {
            v.push(heat_problem(d, 1.0, HeatTerminal::Quadratic).unwrap());
            v.push(heat_problem(d, 2.0, HeatTerminal::Trig).unwrap());
            let mut a = vec![0.0; d];
            a[0] = 1.0;
            a[d - 1] -= 0.5;
            v.push(ou_problem(d, 1.5, 0.7, 0.4, a).unwrap());
            v.push(manufactured_problem(d, 1.0, ManufacturedProfile::SinMean).unwrap());
            v.push(manufactured_problem(d, 1.3, ManufacturedProfile::Bump).unwrap());
        }
        v
    }

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    #[test]
    fn pde_residual_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in battery() {
            let c = &p.coefficients;
            for _ in 0..200 {
                let t = rng.random_range(0.0..p.horizon());
                let x = random_point(&mut rng, p.dim());
                let gen = generator_apply(p.exact_u.clone(), c, GeneratorVariant::OneArg, t, &x).unwrap()[0];
                let dt = p.exact_u.time_derivative(t, &x, 0).unwrap().as_slice()[0];
                let g = c.g.value(t, &x).unwrap()[0];
                assert!((dt + gen + g).abs() < 1e-10, "{}: residual {}", p.name, dt + gen + g);
            }
        }
    }

    #[test]
    fn terminal_condition_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in battery() {
            for _ in 0..200 {
                let x = random_point(&mut rng, p.dim());
                let u = p.exact_value(p.horizon(), &x).unwrap();
                let f = p.coefficients.f.value(p.horizon(), &x).unwrap()[0];
                assert_relative_eq!(u, f, epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-5;
        for p in battery() {
            let t = 0.3;
            let x = random_point(&mut rng, p.dim());
            let grad = p.exact_grad(t, &x).unwrap();
            for i in 0..p.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.exact_value(t, &xp).unwrap() - p.exact_value(t, &xm).unwrap()) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-7, "{} ∂_{i}: {fd} vs {}", p.name, grad[i]);
            }
        }
    }

    #[test]
    fn closed_form_values() {
        let heat = heat_problem(3, 1.0, HeatTerminal::Quadratic).unwrap();
        assert_eq!(heat.exact_value(0.0, &[0.0; 3]).unwrap(), 3.0);
        assert_eq!(heat.exact_grad(0.0, &[1.0, -2.0, 0.5]).unwrap(), vec![2.0, -4.0, 1.0]);

        let trig = heat_problem(1, 1.0, HeatTerminal::Trig).unwrap();
        assert_relative_eq!(trig.exact_value(0.4, &[0.0]).unwrap(), (-0.3f64).exp(), max_relative = 1e-15);

        let ou = lookup_descriptor("ou:d=2,theta=1").unwrap();
        assert_relative_eq!(ou.exact_value(0.0, &[2.0, 5.0]).unwrap(), 2.0 * (-1f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(ou.exact_grad(0.0, &[7.0, 1.0]).unwrap()[0], (-1f64).exp(), max_relative = 1e-15);

        let m = manufactured_problem(4, 1.0, ManufacturedProfile::SinMean).unwrap();
        assert_eq!(m.exact_value(0.0, &[0.0; 4]).unwrap(), 0.0);
        assert_eq!(m.exact_grad(0.0, &[0.0; 4]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn sin_mean_source_coefficients() {
        // Hand expansion: ψ(s) = 145/128 sin s − 3/16 sin 2s + 1/128 sin 3s.
        let psi = manufactured_source(&TrigPoly::sin_k(1, 1.0));
        let s = psi.sin_coeffs();
        assert_relative_eq!(s[1], 145.0 / 128.0, epsilon = 1e-15);
        assert_relative_eq!(s[2], -3.0 / 16.0, epsilon = 1e-15);
        assert_relative_eq!(s[3], 1.0 / 128.0, epsilon = 1e-15);
        assert!(psi.cos_coeffs().iter().all(|&c| c.abs() < 1e-15));
    }

    #[test]
    fn analytic_constants_dominate_probe() {
        use crate::growth::{growth_sum, ProbeSpec};
        use crate::coeffs::DerivativeMap;
        let probe = ProbeSpec::default();
        for p in battery() {
            let c = &p.coefficients;
            let k = p.constants;
            let check = |h: &dyn SmoothMap, bound: f64, what: &str| {
                let e = growth_sum(h, 1.0, 0, &probe).unwrap();
                assert!(e.probe_max <= bound * (1.0 + 1e-12) + 1e-15, "{} {what}: {} > {bound}", p.name, e.probe_max);
            };
            check(c.mu.as_ref(), k.mu, "μ");
            check(c.sigma.as_ref(), k.sigma, "σ");
            check(&DerivativeMap::new(c.mu.clone(), 1).unwrap(), k.grad_mu, "∇μ");
            check(&DerivativeMap::new(c.sigma.clone(), 1).unwrap(), k.grad_sigma, "∇σ");
            check(&DerivativeMap::new(c.f.clone(), 1).unwrap(), k.grad_f, "∇f");
            check(&DerivativeMap::new(c.g.clone(), 1).unwrap(), k.grad_g, "∇g");
        }
    }

    #[test]
    fn lookup_errors() {
        assert!(matches!(lookup_descriptor("wave:d=2"), Err(Error::UnknownFixture(_))));
        assert!(lookup_descriptor("heat-trig:d=2,theta=1").is_err());
        assert!(lookup_descriptor("heat-trig:d=1.5").is_err());
        assert!(lookup_descriptor("heat-trig:d").is_err());
    }
}
