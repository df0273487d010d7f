use serde::{Deserialize, Serialize};

use super::measure::{growth_sum, hoelder_growth};
use super::probe::ProbeSpec;
use crate::coeffs::{CoefficientSet, SmoothMap};
use crate::error::{Error, Result};

/// Component measures entering the composite constant `𝒞_{r,α}(μ, σ, g, u)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CumbersomeInputs {
    /// `⟦∂_t g⟧_{r,0}`
    pub dt_g: Option<f64>,
    /// `⟦μ⟧_{r,2}`
    pub mu: Option<f64>,
    /// `⟦σ⟧_{r,2}`
    pub sigma: Option<f64>,
    /// `⟦g⟧_{r,2}`
    pub g: Option<f64>,
    /// `⟦u⟧_{r,4}`
    pub u: Option<f64>,
    /// `[μ]_{r,α}`
    pub hoelder_mu: Option<f64>,
    /// `[σ]_{r,α}`
    pub hoelder_sigma: Option<f64>,
}

impl CumbersomeInputs {
    /// All seven measures set to `v`.
    pub fn uniform(v: f64) -> Self {
        Self {
            dt_g: Some(v),
            mu: Some(v),
            sigma: Some(v),
            g: Some(v),
            u: Some(v),
            hoelder_mu: Some(v),
            hoelder_sigma: Some(v),
        }
    }
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingComponent(name))
}

/// ```text
/// max{ ⟦∂_t g⟧, max{⟦μ⟧₂, ⟦σ⟧₂²}·⟦g⟧₂, max{⟦μ⟧₂², ⟦σ⟧₂⁴, [μ]_α, ⟦σ⟧₂·[σ]_α}·⟦u⟧₄ }
/// ```
pub fn cumbersome_constant(m: &CumbersomeInputs) -> Result<f64> {
    let dt_g = need(m.dt_g, "⟦∂_t g⟧_{r,0}")?;
    let mu = need(m.mu, "⟦μ⟧_{r,2}")?;
    let sigma = need(m.sigma, "⟦σ⟧_{r,2}")?;
    let g = need(m.g, "⟦g⟧_{r,2}")?;
    let u = need(m.u, "⟦u⟧_{r,4}")?;
    let h_mu = need(m.hoelder_mu, "[μ]_{r,α}")?;
    let h_sigma = need(m.hoelder_sigma, "[σ]_{r,α}")?;
    let s2 = sigma * sigma;
    let second = mu.max(s2) * g;
    let third = (mu * mu).max(s2 * s2).max(h_mu).max(sigma * h_sigma) * u;
    Ok(dt_g.max(second).max(third))
}

/// Probe estimates of every component measure of `𝒞_{r,α}` for the data in
/// `c` and a solution map `u` of order at least four.
pub fn cumbersome_inputs(
    c: &CoefficientSet,
    u: &dyn SmoothMap,
    r: f64,
    alpha: f64,
    probe: &ProbeSpec,
) -> Result<CumbersomeInputs> {
    let probe = probe.clone().with_horizon(c.horizon());
    let dt_g = super::measure::time_derivative_growth(c.g.as_ref(), r, &probe)?;
    Ok(CumbersomeInputs {
        dt_g: Some(dt_g),
        mu: Some(growth_sum(c.mu.as_ref(), r, 2, &probe)?.value),
        sigma: Some(growth_sum(c.sigma.as_ref(), r, 2, &probe)?.value),
        g: Some(growth_sum(c.g.as_ref(), r, 2, &probe)?.value),
        u: Some(growth_sum(u, r, 4, &probe)?.value),
        hoelder_mu: Some(hoelder_growth(c.mu.as_ref(), r, alpha, &probe)?.value),
        hoelder_sigma: Some(hoelder_growth(c.sigma.as_ref(), r, alpha, &probe)?.value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_inputs_give_one() {
        assert_eq!(cumbersome_constant(&CumbersomeInputs::uniform(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn time_derivative_dominates() {
        let m = CumbersomeInputs { dt_g: Some(2.0), ..CumbersomeInputs::uniform(1.0) };
        assert_eq!(cumbersome_constant(&m).unwrap(), 2.0);
    }

    #[test]
    fn solution_term_dominates() {
        let m = CumbersomeInputs {
            dt_g: Some(1.0),
            mu: Some(2.0),
            sigma: Some(3f64.sqrt()),
            g: Some(1.0),
            u: Some(2.0),
            hoelder_mu: Some(0.0),
            hoelder_sigma: Some(0.0),
        };
        assert!((cumbersome_constant(&m).unwrap() - 18.0).abs() < 1e-12);
    }

    #[test]
    fn missing_component_is_named() {
        let m = CumbersomeInputs { u: None, ..CumbersomeInputs::uniform(1.0) };
        assert_eq!(cumbersome_constant(&m), Err(Error::MissingComponent("⟦u⟧_{r,4}")));
    }
}
