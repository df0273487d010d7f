use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{PointSet, ProbeSpec};
use crate::coeffs::{frobenius, tensor_len, SmoothMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMode {
    /// Maximum over a probe set; a lower bound on the supremum.
    Empirical,
    /// Closed-form value supplied by the caller.
    Analytic,
}

/// Value of the growth measure `⟦h⟧_{r,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Probe maximum, or `+∞` when the measure is flagged as unbounded.
    pub value: f64,
    pub mode: EstimateMode,
    pub r: f64,
    pub k: usize,
    /// Largest value seen on the probe (finite even when `value` is `+∞`).
    pub probe_max: f64,
    pub unbounded: bool,
    pub points: usize,
    pub probe: Option<ProbeSpec>,
}

impl GrowthEstimate {
    pub fn analytic(value: f64, r: f64, k: usize) -> Self {
        Self {
            value,
            mode: EstimateMode::Analytic,
            r,
            k,
            probe_max: value,
            unbounded: !value.is_finite(),
            points: 0,
            probe: None,
        }
    }
}

/// Value of the Hölder growth measure `[h]_{r,α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoelderEstimate {
    pub value: f64,
    pub alpha: f64,
    pub r: f64,
    pub time_pairs: usize,
    pub points: usize,
    pub probe: ProbeSpec,
}

/// Per-point summand `Σ_{i ≤ k} ‖∇^i h(t, x)‖ / (1 + ‖x‖)^{r+k−i}`.
///
/// The caller guarantees `k ≤ h.max_order()` and the point dimension.
pub fn growth_at(h: &dyn SmoothMap, t: f64, x: &[f64], r: f64, k: usize) -> f64 {
    let d = h.input_dim();
    let o = h.output_dim();
    let base = 1.0 + frobenius(x);
    let mut buf = Vec::new();
    let mut total = 0.0;
    for i in 0..=k {
        buf.resize(tensor_len(d, i, o), 0.0);
        h.derivative_into(t, x, i, &mut buf);
        total += frobenius(&buf) / base.powf(r + (k - i) as f64);
    }
    total
}

/// Evaluates `f` at every point of `points`, in parallel, preserving order.
pub fn map_points<F>(points: &PointSet, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let dim = points.dim.max(1);
    points.coords.par_chunks(dim).map(f).collect()
}

pub(crate) fn check_order(h: &dyn SmoothMap, k: usize) -> Result<()> {
    if k > h.max_order() {
        return Err(Error::OrderUnavailable { name: h.label(), requested: k, available: h.max_order() });
    }
    Ok(())
}

/// Probe estimate of `⟦h⟧_{r,k}`, maximizing over probe times as well when
/// `h` depends on time.
pub fn growth_sum(h: &dyn SmoothMap, r: f64, k: usize, probe: &ProbeSpec) -> Result<GrowthEstimate> {
    check_order(h, k)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("growth exponent r must be finite and ≥ 0, got {r}")));
    }
    let points = probe.build(h.input_dim());
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty probe set".into()));
    }
    let times = if h.is_time_dependent() { probe.times() } else { vec![0.0] };
    let values = map_points(&points, |x| times.iter().map(|&t| growth_at(h, t, x, r, k)).fold(0.0, f64::max));
    let probe_max = values.iter().copied().fold(0.0, f64::max);
    let unbounded = points.still_growing(&values) || !probe_max.is_finite();
    Ok(GrowthEstimate {
        value: if unbounded { f64::INFINITY } else { probe_max },
        mode: EstimateMode::Empirical,
        r,
        k,
        probe_max,
        unbounded,
        points: points.len() * times.len(),
        probe: Some(probe.clone()),
    })
}

/// Probe maximum of `‖∂_t h(t, x)‖ / (1 + ‖x‖)^r`, i.e. `⟦∂_t h⟧_{r,0}`.
pub fn time_derivative_growth(h: &dyn SmoothMap, r: f64, probe: &ProbeSpec) -> Result<f64> {
    if h.time_derivative_order().is_none() {
        return Err(Error::OrderUnavailable { name: format!("∂_t {}", h.label()), requested: 0, available: 0 });
    }
    let points = probe.build(h.input_dim());
    let times = probe.times();
    let o = h.output_dim();
    let values = map_points(&points, |x| {
        let mut v = vec![0.0; o];
        let w = (1.0 + frobenius(x)).powf(r);
        times
            .iter()
            .map(|&t| {
                h.time_derivative_into(t, x, 0, &mut v);
                frobenius(&v) / w
            })
            .fold(0.0, f64::max)
    });
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Probe estimate of `[h]_{r,α}` over time pairs with `0 < |t − s| ≤ 1`.
pub fn hoelder_growth(h: &dyn SmoothMap, r: f64, alpha: f64, probe: &ProbeSpec) -> Result<HoelderEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let times = probe.hoelder_times();
    let pairs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|a| (a + 1..times.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            let gap = times[b] - times[a];
            gap > 0.0 && gap <= 1.0
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no time pairs with 0 < |t − s| ≤ 1 on the probe".into()));
    }
    let points = probe.build(h.input_dim());
    let o = h.output_dim();
    let values = map_points(&points, |x| {
        let mut at: Vec<Vec<f64>> = Vec::with_capacity(times.len());
        for &t in &times {
            let mut v = vec![0.0; o];
            h.derivative_into(t, x, 0, &mut v);
            at.push(v);
        }
        let weight = (1.0 + frobenius(x)).powf(-r);
        pairs
            .iter()
            .map(|&(a, b)| {
                let diff: f64 = at[a].iter().zip(&at[b]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                diff * weight * (times[b] - times[a]).powf(-alpha)
            })
            .fold(0.0, f64::max)
    });
    Ok(HoelderEstimate {
        value: values.into_iter().fold(0.0, f64::max),
        alpha,
        r,
        time_pairs: pairs.len(),
        points: points.len(),
        probe: probe.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Affine, Constant, Polynomial, TimeFactor, TimeScaled};
    use std::sync::Arc;

    #[test]
    fn zero_map_has_zero_growth() {
        let h = Constant::zero(3, 2);
        for (r, k) in [(0.0, 0), (1.0, 3), (2.5, 6)] {
            assert_eq!(growth_sum(&h, r, k, &ProbeSpec::default()).unwrap().value, 0.0);
        }
    }

    #[test]
    fn square_tends_to_five() {
        // x²/(1+|x|)² + 2|x|/(1+|x|) + 2 → 5 from below.
        let h = Polynomial::new(1, vec![(1.0, vec![2])]).unwrap();
        let e = growth_sum(&h, 0.0, 2, &ProbeSpec::default()).unwrap();
        assert!(!e.unbounded);
        assert!(e.value < 5.0 && e.value > 4.99, "{}", e.value);
    }

    #[test]
    fn identity_has_unit_linear_growth() {
        let h = Affine::scaled_identity(1, 1.0);
        let e = growth_sum(&h, 1.0, 0, &ProbeSpec::default()).unwrap();
        assert!(e.value <= 1.0 && e.value > 0.998, "{}", e.value);
    }

    #[test]
    fn superlinear_map_is_flagged() {
        let h = Polynomial::new(1, vec![(1.0, vec![3])]).unwrap();
        let e = growth_sum(&h, 1.0, 0, &ProbeSpec::default()).unwrap();
        assert!(e.unbounded && e.value.is_infinite() && e.probe_max.is_finite());
    }

    #[test]
    fn order_beyond_declared_is_rejected() {
        let h = crate::coeffs::OrderCapped::new(Arc::new(Affine::scaled_identity(2, 1.0)), 1);
        assert!(matches!(growth_sum(&h, 0.0, 2, &ProbeSpec::default()), Err(Error::OrderUnavailable { .. })));
    }

    #[test]
    fn hoelder_examples() {
        let probe = ProbeSpec::default();
        let constant = Constant::new(1, vec![3.0]);
        assert_eq!(hoelder_growth(&constant, 0.0, 1.0, &probe).unwrap().value, 0.0);

        let linear_time = TimeScaled::new(TimeFactor::Affine { intercept: 0.0, slope: 1.0 }, Arc::new(Constant::new(1, vec![1.0])));
        let e = hoelder_growth(&linear_time, 0.0, 1.0, &probe).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12, "{}", e.value);

        let root = TimeScaled::new(TimeFactor::Power { scale: 1.0, exponent: 0.5 }, Arc::new(Constant::new(1, vec![1.0])));
        let e = hoelder_growth(&root, 0.0, 0.5, &probe).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn hoelder_rejects_bad_exponent() {
        assert!(hoelder_growth(&Constant::zero(1, 1), 0.0, 1.5, &ProbeSpec::default()).is_err());
    }
}
