use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{tensor_len, unflatten, CoefficientSet, SmoothMap};
use crate::error::{Error, Result};

/// Argument routing of the generator `∇h(x)ᵀμ(t, y) + ½ Tr(σσᵀ(t, y) ∇²h(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorVariant {
    /// `𝒢_t h(x)`: coefficients and `h` share the argument.
    OneArg,
    /// `𝒢̄_t h(x, y)`: `h` at `x`, coefficients at `y`.
    TwoArg,
    /// `𝒢̄_t h(x, y, z) = 𝒢̄_t[h(·, z)](x, y)` for `h` on `ℝ^d × ℝ^e`.
    BlockTwo,
    /// `𝒢̂_t h(x, z) = 𝒢̄_t h(x, x, z)`.
    BlockOne,
}

impl GeneratorVariant {
    pub fn arity(self) -> usize {
        match self {
            GeneratorVariant::OneArg => 1,
            GeneratorVariant::TwoArg | GeneratorVariant::BlockOne => 2,
            GeneratorVariant::BlockTwo => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorVariant::OneArg => "one_arg",
            GeneratorVariant::TwoArg => "two_arg",
            GeneratorVariant::BlockTwo => "block_two",
            GeneratorVariant::BlockOne => "block_one",
        }
    }
}

/// The generator applied to `h`, as a map with exact spatial derivatives.
///
/// Derivatives follow from the product rule: every input coordinate feeds
/// the argument of `h`, the argument of the coefficients, or both, and each
/// derivative index is routed to one of the two factors in turn.
#[derive(Debug, Clone)]
pub struct GeneratorMap {
    h: Arc<dyn SmoothMap>,
    mu: Arc<dyn SmoothMap>,
    sigma: Arc<dyn SmoothMap>,
    variant: GeneratorVariant,
    frozen_time: Option<f64>,
    d: usize,
    extra: usize,
    noise: usize,
}

#[derive(Clone, Copy)]
struct Route {
    h: Option<usize>,
    y: Option<usize>,
}

impl GeneratorMap {
    pub fn new(
        h: Arc<dyn SmoothMap>,
        mu: Arc<dyn SmoothMap>,
        sigma: Arc<dyn SmoothMap>,
        variant: GeneratorVariant,
    ) -> Result<Self> {
        let d = mu.input_dim();
        if mu.output_dim() != d || sigma.input_dim() != d || !sigma.output_dim().is_multiple_of(d) {
            return Err(Error::DimensionMismatch(format!(
                "generator coefficients: μ ℝ^{} → ℝ^{}, σ ℝ^{} → ℝ^{}",
                d,
                mu.output_dim(),
                sigma.input_dim(),
                sigma.output_dim()
            )));
        }
        let hin = h.input_dim();
        let extra = match variant {
            GeneratorVariant::OneArg | GeneratorVariant::TwoArg => {
                if hin != d {
                    return Err(Error::DimensionMismatch(format!(
                        "{} generator needs h on ℝ^{d}, got ℝ^{hin}",
                        variant.name()
                    )));
                }
                0
            }
            GeneratorVariant::BlockTwo | GeneratorVariant::BlockOne => {
                if hin <= d {
                    return Err(Error::DimensionMismatch(format!(
                        "{} generator needs h on ℝ^{d} × ℝ^e, got ℝ^{hin}",
                        variant.name()
                    )));
                }
                hin - d
            }
        };
        if h.max_order() < 2 {
            return Err(Error::OrderUnavailable { name: h.label(), requested: 2, available: h.max_order() });
        }
        Ok(Self { noise: sigma.output_dim() / d, h, mu, sigma, variant, frozen_time: None, d, extra })
    }

    pub fn from_set(h: Arc<dyn SmoothMap>, c: &CoefficientSet, variant: GeneratorVariant) -> Result<Self> {
        Self::new(h, c.mu.clone(), c.sigma.clone(), variant)
    }

    /// Evaluates the coefficients (and `h`) at `t` regardless of the time
    /// passed in, so that generators at different times can be nested.
    pub fn at_time(mut self, t: f64) -> Self {
        self.frozen_time = Some(t);
        self
    }

    pub fn variant(&self) -> GeneratorVariant {
        self.variant
    }

    fn route(&self, i: usize) -> Route {
        let d = self.d;
        match self.variant {
            GeneratorVariant::OneArg => Route { h: Some(i), y: Some(i) },
            GeneratorVariant::TwoArg => {
                if i < d {
                    Route { h: Some(i), y: None }
                } else {
                    Route { h: None, y: Some(i - d) }
                }
            }
            GeneratorVariant::BlockTwo => {
                if i < d {
                    Route { h: Some(i), y: None }
                } else if i < 2 * d {
                    Route { h: None, y: Some(i - d) }
                } else {
                    Route { h: Some(i - d), y: None }
                }
            }
            GeneratorVariant::BlockOne => {
                if i < d {
                    Route { h: Some(i), y: Some(i) }
                } else {
                    Route { h: Some(i), y: None }
                }
            }
        }
    }

    /// Splits an input point into the argument of `h` and of the coefficients.
    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        match self.variant {
            GeneratorVariant::OneArg => (x.to_vec(), x.to_vec()),
            GeneratorVariant::TwoArg => (x[..d].to_vec(), x[d..].to_vec()),
            GeneratorVariant::BlockTwo => {
                let mut hx = x[..d].to_vec();
                hx.extend_from_slice(&x[2 * d..]);
                (hx, x[d..2 * d].to_vec())
            }
            GeneratorVariant::BlockOne => (x.to_vec(), x[..d].to_vec()),
        }
    }
}

/// Derivative `∂^β a_{jl}` of `a = σσᵀ` via Leibniz over the split of `β`.
fn diffusion_product(sig: &[Vec<f64>], beta: &[usize], d: usize, m: usize, j: usize, l: usize) -> f64 {
    let q = beta.len();
    let mut total = 0.0;
    for mask in 0..(1usize << q) {
        let mut left = 0usize;
        let mut right = 0usize;
        let mut nl = 0;
        let mut nr = 0;
        for (pos, &b) in beta.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                left = left * d + b;
                nl += 1;
            } else {
                right = right * d + b;
                nr += 1;
            }
        }
        let sl = &sig[nl];
        let sr = &sig[nr];
        for p in 0..m {
            total += sl[(left * d + j) * m + p] * sr[(right * d + l) * m + p];
        }
    }
    total
}

impl SmoothMap for GeneratorMap {
    fn input_dim(&self) -> usize {
        match self.variant {
            GeneratorVariant::OneArg => self.d,
            GeneratorVariant::TwoArg => 2 * self.d,
            GeneratorVariant::BlockTwo => 2 * self.d + self.extra,
            GeneratorVariant::BlockOne => self.d + self.extra,
        }
    }

    fn output_dim(&self) -> usize {
        self.h.output_dim()
    }

    fn max_order(&self) -> usize {
        (self.h.max_order() - 2).min(self.mu.max_order()).min(self.sigma.max_order())
    }

    fn is_time_dependent(&self) -> bool {
        self.frozen_time.is_none()
            && (self.h.is_time_dependent() || self.mu.is_time_dependent() || self.sigma.is_time_dependent())
    }

    fn label(&self) -> String {
        format!("{} generator of {}", self.variant.name(), self.h.label())
    }

    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let t = self.frozen_time.unwrap_or(t);
        let d = self.d;
        let m = self.noise;
        let o = self.h.output_dim();
        let hd = self.h.input_dim();
        let dim = self.input_dim();
        let (hx, y) = self.split(x);

        // hdiff[i] = ∇^i h at hx, for i = 1..=order+2
        let hdiff: Vec<Vec<f64>> = (0..=order + 2)
            .map(|i| {
                let mut v = vec![0.0; tensor_len(hd, i, o)];
                if i >= 1 {
                    self.h.derivative_into(t, &hx, i, &mut v);
                }
                v
            })
            .collect();
        let mudiff: Vec<Vec<f64>> = (0..=order)
            .map(|i| {
                let mut v = vec![0.0; tensor_len(d, i, d)];
                self.mu.derivative_into(t, &y, i, &mut v);
                v
            })
            .collect();
        let sigdiff: Vec<Vec<f64>> = (0..=order)
            .map(|i| {
                let mut v = vec![0.0; tensor_len(d, i, d * m)];
                self.sigma.derivative_into(t, &y, i, &mut v);
                v
            })
            .collect();

        let mut idx = vec![0usize; order];
        let mut alpha = Vec::with_capacity(order);
        let mut beta = Vec::with_capacity(order);
        for flat in 0..tensor_len(dim, order, 1) {
            unflatten(flat, dim, &mut idx);
            let routes: Vec<Route> = idx.iter().map(|&i| self.route(i)).collect();
            let row = &mut out[flat * o..(flat + 1) * o];
            row.fill(0.0);
            'assign: for mask in 0..(1usize << order) {
                alpha.clear();
                beta.clear();
                for (pos, r) in routes.iter().enumerate() {
                    if mask & (1 << pos) != 0 {
                        match r.h {
                            Some(a) => alpha.push(a),
                            None => continue 'assign,
                        }
                    } else {
                        match r.y {
                            Some(b) => beta.push(b),
                            None => continue 'assign,
                        }
                    }
                }
                let na = alpha.len();
                let nb = beta.len();
                let a_flat = alpha.iter().fold(0usize, |acc, &a| acc * hd + a);
                let b_flat = beta.iter().fold(0usize, |acc, &b| acc * d + b);
                let h1 = &hdiff[na + 1];
                let h2 = &hdiff[na + 2];
                let mu_b = &mudiff[nb];
                for j in 0..d {
                    let mu_j = mu_b[b_flat * d + j];
                    if mu_j != 0.0 {
                        let base = (a_flat * hd + j) * o;
                        for k in 0..o {
                            row[k] += h1[base + k] * mu_j;
                        }
                    }
                    for l in 0..d {
                        let a_jl = diffusion_product(&sigdiff, &beta, d, m, j, l);
                        if a_jl == 0.0 {
                            continue;
                        }
                        let base = ((a_flat * hd + j) * hd + l) * o;
                        for k in 0..o {
                            row[k] += 0.5 * a_jl * h2[base + k];
                        }
                    }
                }
            }
        }
    }
}

/// `𝒢` applied to `h` with the given argument routing; `args` holds the
/// concatenated arguments (`x`; `(x, y)`; `(x, y, z)`; `(x, z)`).
pub fn generator_apply(
    h: Arc<dyn SmoothMap>,
    c: &CoefficientSet,
    variant: GeneratorVariant,
    t: f64,
    args: &[f64],
) -> Result<Vec<f64>> {
    let g = GeneratorMap::from_set(h, c, variant)?;
    g.check_point(args)?;
    let mut out = vec![0.0; g.output_dim()];
    g.derivative_into(t, args, 0, &mut out);
    Ok(out)
}
