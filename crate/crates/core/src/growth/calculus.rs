use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{GeneratorMap, GeneratorVariant};
use super::measure::{check_order, growth_at, map_points};
use super::probe::{PointSet, ProbeSpec};
use crate::coeffs::{frobenius, lift_augmented, lift_augmented_n, tensor_len, DerivativeMap, SmoothMap};
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-12;
/// Points per segment `[0, x]` when a bound involves a supremum along rays.
const RAY_POINTS: usize = 32;

/// Inequalities of the polynomial growth calculus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CalculusCheck {
    /// `⟦∇^l h⟧_{r+k−l−m, m} ≤ ⟦h⟧_{r,k}` for `l + m ≤ k`.
    GrowthShift { r: f64, k: usize, l: usize, m: usize },
    /// `⟦h⟧_{r,k} ≤ (r+k+1)/(r+m+1) ⟦∇^{k−m} h⟧_{r,m} + Σ_{j=m+1}^{k} (r+k+1)/(r+j+1) ‖∇^{k−j} h(0)‖`.
    TradeDerivatives { r: f64, k: usize, m: usize },
    /// `⟦lift(∇^l h)⟧_{r,m} ≤ (m+1) ⟦∇^l ĥ⟧_{r,m}` and
    /// `⟦∇^l ĥ⟧_{r,m} ≤ (m+l+1) ⟦lift(∇^l h)⟧_{r,m}`, plus the block structure of `∇^i ĥ`.
    AugmentedBlocks { r: f64, l: usize, m: usize },
    /// `⟦∇^l h⋆⟧_{r+k−l−m, m} ≤ Π_{i=k−j+1}^{k} i(i+1)/2 · ⟦h⟧_{r,k}` for the `j`-fold lift `h⋆`.
    AugmentedIntegration { r: f64, k: usize, j: usize, l: usize, m: usize },
    /// `⟦h⟧_{r,k} ≤ Π_{i=1}^{j} (1 + 2^r √(2^i d)) · ⟦h⋆⟧_{r,k−j}`.
    AugmentedDifferentiation { r: f64, k: usize, j: usize },
    /// `⟦𝒢_t h⟧_{r,0}, ⟦𝒢̄_t h⟧_{r,0} ≤ max{⟦μ⟧_{r₁,0}, ½⟦σ⟧²_{r₂,0}} ⟦∇h⟧_{r₃,1}`,
    /// `r = max{r₁+1, 2r₂} + r₃`, for `h` on `ℝ^d`.
    SingleGenerator { r1: f64, r2: f64, r3: f64 },
    /// The same bound for the block operators and `h` on `ℝ^d × ℝ^d`.
    BlockGenerator { r1: f64, r2: f64, r3: f64 },
    /// `⟦𝒢̄_{t₂}𝒢̄_{t₁}h⟧_{r,0}, ⟦𝒢̄_{t₂}𝒢_{t₁}h⟧_{r,0} ≤ 2^{r+r₃+14} d max{⟦μ⟧²_{r₁,2}, ¼⟦σ⟧⁴_{r₂,2}} ⟦h⟧_{r₃,4}`,
    /// `r = 2 max{r₁, 2r₂+1} + r₃ + 8`.
    DoubleGenerator { r1: f64, r2: f64, r3: f64, t1: f64, t2: f64 },
    /// `⟦h⟧_{r,0} ≤ max{‖h(0)‖, L/r}` for `L`-Lipschitz `h` and `r ≥ 1`.
    LipschitzBound { r: f64, lipschitz: f64 },
}

impl CalculusCheck {
    pub fn id(&self) -> &'static str {
        match self {
            CalculusCheck::GrowthShift { .. } => "growth-shift",
            CalculusCheck::TradeDerivatives { .. } => "trade-derivatives",
            CalculusCheck::AugmentedBlocks { .. } => "augmented-blocks",
            CalculusCheck::AugmentedIntegration { .. } => "augmented-integration",
            CalculusCheck::AugmentedDifferentiation { .. } => "augmented-differentiation",
            CalculusCheck::SingleGenerator { .. } => "single-generator",
            CalculusCheck::BlockGenerator { .. } => "block-generator",
            CalculusCheck::DoubleGenerator { .. } => "double-generator",
            CalculusCheck::LipschitzBound { .. } => "lipschitz-bound",
        }
    }

    pub fn params(&self) -> String {
        match *self {
            CalculusCheck::GrowthShift { r, k, l, m } => format!("r={r} k={k} l={l} m={m}"),
            CalculusCheck::TradeDerivatives { r, k, m } => format!("r={r} k={k} m={m}"),
            CalculusCheck::AugmentedBlocks { r, l, m } => format!("r={r} l={l} m={m}"),
            CalculusCheck::AugmentedIntegration { r, k, j, l, m } => format!("r={r} k={k} j={j} l={l} m={m}"),
            CalculusCheck::AugmentedDifferentiation { r, k, j } => format!("r={r} k={k} j={j}"),
            CalculusCheck::SingleGenerator { r1, r2, r3 } | CalculusCheck::BlockGenerator { r1, r2, r3 } => {
                format!("r1={r1} r2={r2} r3={r3}")
            }
            CalculusCheck::DoubleGenerator { r1, r2, r3, t1, t2 } => {
                format!("r1={r1} r2={r2} r3={r3} t1={t1} t2={t2}")
            }
            CalculusCheck::LipschitzBound { r, lipschitz } => format!("r={r} L={lipschitz}"),
        }
    }
}

/// A map `h` and, for the generator inequalities, coefficients `μ`, `σ` on `ℝ^d`.
#[derive(Debug, Clone)]
pub struct CalculusFixture {
    pub h: Arc<dyn SmoothMap>,
    pub dynamics: Option<(Arc<dyn SmoothMap>, Arc<dyn SmoothMap>)>,
    /// Time at which time-dependent maps are frozen.
    pub time: f64,
}

impl CalculusFixture {
    pub fn new(h: Arc<dyn SmoothMap>) -> Self {
        Self { h, dynamics: None, time: 0.0 }
    }

    pub fn with_dynamics(mut self, mu: Arc<dyn SmoothMap>, sigma: Arc<dyn SmoothMap>) -> Self {
        self.dynamics = Some((mu, sigma));
        self
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    fn dynamics(&self) -> Result<(&Arc<dyn SmoothMap>, &Arc<dyn SmoothMap>)> {
        self.dynamics
            .as_ref()
            .map(|(m, s)| (m, s))
            .ok_or(Error::MissingComponent("drift and diffusion for a generator inequality"))
    }
}

/// One side-by-side comparison. `lhs` and `rhs` are probe maxima;
/// `violations` counts probe points whose left-hand value exceeds `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityOutcome {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violations: usize,
    /// Informational comparisons are reported but do not decide the verdict.
    pub asserted: bool,
}

impl InequalityOutcome {
    fn new(label: impl Into<String>, lhs_values: &[f64], rhs: f64, asserted: bool) -> Self {
        let bound = rhs * (1.0 + REL_TOL) + ABS_TOL;
        Self {
            label: label.into(),
            lhs: lhs_values.iter().copied().fold(0.0, f64::max),
            rhs,
            violations: lhs_values.iter().filter(|&&v| !(v <= bound)).count(),
            asserted,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalculusReport {
    pub check: CalculusCheck,
    pub outcomes: Vec<InequalityOutcome>,
    /// Largest relative deviation in the block-structure identity, when checked.
    pub structure_defect: Option<f64>,
    pub points: usize,
    pub probe: ProbeSpec,
}

impl CalculusReport {
    pub fn holds(&self) -> bool {
        self.outcomes.iter().filter(|o| o.asserted).all(InequalityOutcome::holds)
            && self.structure_defect.is_none_or(|e| e <= 1e-10)
    }

    /// Smallest `rhs − lhs` over the asserted comparisons.
    pub fn margin(&self) -> f64 {
        self.outcomes.iter().filter(|o| o.asserted).map(InequalityOutcome::margin).fold(f64::INFINITY, f64::min)
    }
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Maximum of `f` over the concatenation of the given coordinate ranges of
/// every probe point.
fn sup_projected<F>(points: &PointSet, ranges: &[Range<usize>], f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let values = map_points(points, |x| {
        let mut p = Vec::new();
        for r in ranges {
            p.extend_from_slice(&x[r.clone()]);
        }
        f(&p)
    });
    sup(values)
}

fn need_order(h: &dyn SmoothMap, k: usize) -> Result<()> {
    check_order(h, k)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Evaluates both sides of `check` on the probe and compares them.
pub fn verify_calculus(fixture: &CalculusFixture, check: CalculusCheck, probe: &ProbeSpec) -> Result<CalculusReport> {
    let h = &fixture.h;
    let t = fixture.time;
    let d = h.input_dim();
    let mut structure_defect = None;
    let points_used: usize;

    let outcomes = match check {
        CalculusCheck::GrowthShift { r, k, l, m } => {
            if l + m > k {
                return Err(invalid(format!("growth shift needs l + m ≤ k, got l={l} m={m} k={k}")));
            }
            need_order(h.as_ref(), k)?;
            let grad = DerivativeMap::new(h.clone(), l)?;
            let p = probe.build(d);
            points_used = p.len();
            let lhs = map_points(&p, |x| growth_at(&grad, t, x, r + (k - l - m) as f64, m));
            let rhs = sup(map_points(&p, |x| growth_at(h.as_ref(), t, x, r, k)));
            vec![InequalityOutcome::new(format!("⟦∇^{l} h⟧ ≤ ⟦h⟧_{{r,{k}}}"), &lhs, rhs, true)]
        }

        CalculusCheck::TradeDerivatives { r, k, m } => {
            if m > k {
                return Err(invalid(format!("trading derivatives needs m ≤ k, got m={m} k={k}")));
            }
            need_order(h.as_ref(), k)?;
            let p = probe.build(d);
            let lhs = map_points(&p, |x| growth_at(h.as_ref(), t, x, r, k));
            let inner = DerivativeMap::new(h.clone(), k - m)?;
            // The bound integrates along [0, x], so its supremum runs over every segment.
            let ray = sup(map_points(&p, |x| {
                sup((1..=RAY_POINTS).map(|s| {
                    let y: Vec<f64> = x.iter().map(|v| v * s as f64 / RAY_POINTS as f64).collect();
                    growth_at(&inner, t, &y, r, m)
                }))
            }));
            points_used = p.len() * (RAY_POINTS + 1);
            let origin = vec![0.0; d];
            let top = r + k as f64 + 1.0;
            let mut rhs = top / (r + m as f64 + 1.0) * ray;
            for j in m + 1..=k {
                let v = h.derivative(t, &origin, k - j)?;
                rhs += top / (r + j as f64 + 1.0) * v.frobenius_norm();
            }
            vec![InequalityOutcome::new("trade derivatives", &lhs, rhs, true)]
        }

        CalculusCheck::AugmentedBlocks { r, l, m } => {
            let k = h.max_order();
            if l + m + 1 > k {
                return Err(Error::OrderUnavailable { name: h.label(), requested: l + m + 1, available: k });
            }
            let a = lift_augmented(Arc::new(DerivativeMap::new(h.clone(), l)?))?;
            let b = DerivativeMap::new(lift_augmented(h.clone())?, l)?;
            let p = probe.build(2 * d);
            points_used = p.len();
            let av = map_points(&p, |x| growth_at(a.as_ref(), t, x, r, m));
            let bv = map_points(&p, |x| growth_at(&b, t, x, r, m));
            // Pointwise comparisons are the sharper form; report each against the other side's value.
            let ab: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x - (m + 1) as f64 * y).collect();
            let ba: Vec<f64> = bv.iter().zip(&av).map(|(x, y)| x - (m + l + 1) as f64 * y).collect();
            structure_defect = Some(block_structure_defect(h, t, &p)?);
            vec![
                InequalityOutcome::new("⟦lift ∇^l h⟧ ≤ (m+1)⟦∇^l ĥ⟧", &av, (m + 1) as f64 * sup(bv.iter().copied()), true),
                InequalityOutcome::new("⟦∇^l ĥ⟧ ≤ (m+l+1)⟦lift ∇^l h⟧", &bv, (m + l + 1) as f64 * sup(av.iter().copied()), true),
                InequalityOutcome::new("pointwise ⟦lift ∇^l h⟧ − (m+1)⟦∇^l ĥ⟧", &ab, 0.0, true),
                InequalityOutcome::new("pointwise ⟦∇^l ĥ⟧ − (m+l+1)⟦lift ∇^l h⟧", &ba, 0.0, true),
            ]
        }

        CalculusCheck::AugmentedIntegration { r, k, j, l, m } => {
            if j + l + m > k {
                return Err(invalid(format!("augmented integration needs j + l + m ≤ k, got j={j} l={l} m={m} k={k}")));
            }
            need_order(h.as_ref(), k)?;
            let star = lift_augmented_n(h.clone(), j)?;
            let grad = DerivativeMap::new(star, l)?;
            let p = probe.build((1 << j) * d);
            points_used = p.len();
            let factor: f64 = (k - j + 1..=k).map(|i| (i * (i + 1)) as f64 / 2.0).product();
            let lhs = map_points(&p, |x| growth_at(&grad, t, x, r + (k - l - m) as f64, m));
            let rhs = factor * sup_projected(&p, &[0..d], |x| growth_at(h.as_ref(), t, x, r, k));
            vec![InequalityOutcome::new(format!("⟦∇^{l} h⋆⟧ ≤ C ⟦h⟧_{{r,{k}}}"), &lhs, rhs, true)]
        }

        CalculusCheck::AugmentedDifferentiation { r, k, j } => {
            if j > k {
                return Err(invalid(format!("augmented differentiation needs j ≤ k, got j={j} k={k}")));
            }
            need_order(h.as_ref(), k)?;
            let star = lift_augmented_n(h.clone(), j)?;
            let p = probe.build(d);
            let factor: f64 = (1..=j).map(|i| 1.0 + 2f64.powf(r) * (((1usize << i) * d) as f64).sqrt()).product();
            let lhs = map_points(&p, |x| growth_at(h.as_ref(), t, x, r, k));
            // Each lift only needs the lifted map at (X, 0) and (X, e_a).
            let rhs_points: Vec<Vec<f64>> = p
                .iter()
                .flat_map(|x| {
                    let mut level = vec![x.to_vec()];
                    for _ in 0..j {
                        level = level
                            .into_iter()
                            .flat_map(|y| {
                                let n = y.len();
                                (0..=n).map(move |a| {
                                    let mut z = y.clone();
                                    z.resize(2 * n, 0.0);
                                    if a < n {
                                        z[n + a] = 1.0;
                                    }
                                    z
                                })
                            })
                            .collect();
                    }
                    level
                })
                .collect();
            points_used = p.len() + rhs_points.len();
            let rhs = factor
                * sup(rhs_points.par_iter().map(|y| growth_at(star.as_ref(), t, y, r, k - j)).collect::<Vec<_>>());
            vec![InequalityOutcome::new("⟦h⟧_{r,k} ≤ C ⟦h⋆⟧_{r,k−j}", &lhs, rhs, true)]
        }

        CalculusCheck::SingleGenerator { r1, r2, r3 } => {
            let (mu, sigma) = fixture.dynamics()?;
            need_order(h.as_ref(), 2)?;
            let r = (r1 + 1.0).max(2.0 * r2) + r3;
            let grad = DerivativeMap::new(h.clone(), 1)?;
            let one = GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::OneArg)?;
            let two = GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::TwoArg)?;
            let p1 = probe.build(d);
            let p2 = probe.build(2 * d);
            points_used = p1.len() + p2.len();
            let lhs1 = map_points(&p1, |x| growth_at(&one, t, x, r, 0));
            let lhs2 = map_points(&p2, |x| growth_at(&two, t, x, r, 0));
            let coef = |pts: &PointSet, y: Range<usize>| {
                let m = sup_projected(pts, std::slice::from_ref(&y), |y| growth_at(mu.as_ref(), t, y, r1, 0));
                let s = sup_projected(pts, &[y], |y| growth_at(sigma.as_ref(), t, y, r2, 0));
                m.max(0.5 * s * s)
            };
            let rhs1 = coef(&p1, 0..d) * sup_projected(&p1, &[0..d], |x| growth_at(&grad, t, x, r3, 1));
            let rhs2 = coef(&p2, d..2 * d) * sup_projected(&p2, &[0..d], |x| growth_at(&grad, t, x, r3, 1));
            vec![
                InequalityOutcome::new("⟦𝒢h⟧_{r,0} ≤ bound", &lhs1, rhs1, true),
                InequalityOutcome::new("⟦𝒢̄h⟧_{r,0} ≤ bound", &lhs2, rhs2, true),
            ]
        }

        CalculusCheck::BlockGenerator { r1, r2, r3 } => {
            let (mu, sigma) = fixture.dynamics()?;
            let dc = mu.input_dim();
            if d != 2 * dc {
                return Err(Error::DimensionMismatch(format!(
                    "block generator inequality needs h on ℝ^{} × ℝ^{}, got ℝ^{d}",
                    dc, dc
                )));
            }
            need_order(h.as_ref(), 2)?;
            let r = (r1 + 1.0).max(2.0 * r2) + r3;
            let grad = DerivativeMap::new(h.clone(), 1)?;
            let two = GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::BlockTwo)?;
            let one = GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::BlockOne)?;
            let p3 = probe.build(3 * dc);
            let p2 = probe.build(2 * dc);
            points_used = p3.len() + p2.len();
            let lhs_two = map_points(&p3, |x| growth_at(&two, t, x, r, 0));
            let lhs_one = map_points(&p2, |x| growth_at(&one, t, x, r, 0));
            let coef = |pts: &PointSet, y: Range<usize>| {
                let m = sup_projected(pts, std::slice::from_ref(&y), |y| growth_at(mu.as_ref(), t, y, r1, 0));
                let s = sup_projected(pts, &[y], |y| growth_at(sigma.as_ref(), t, y, r2, 0));
                m.max(0.5 * s * s)
            };
            let rhs_two =
                coef(&p3, dc..2 * dc) * sup_projected(&p3, &[0..dc, 2 * dc..3 * dc], |x| growth_at(&grad, t, x, r3, 1));
            let rhs_one = coef(&p2, 0..dc) * sup_projected(&p2, &[0..2 * dc], |x| growth_at(&grad, t, x, r3, 1));
            let two_max = sup(lhs_two.iter().copied());
            vec![
                InequalityOutcome::new("⟦𝒢̄h⟧_{r,0} ≤ bound", &lhs_two, rhs_two, true),
                InequalityOutcome::new("⟦𝒢̂h⟧_{r,0} ≤ bound", &lhs_one, rhs_one, true),
                // Not comparable point by point: the diagonal (x, x, z) has a larger norm than (x, z).
                InequalityOutcome::new("⟦𝒢̂h⟧_{r,0} ≤ ⟦𝒢̄h⟧_{r,0} (probe)", &lhs_one, two_max, false),
            ]
        }

        CalculusCheck::DoubleGenerator { r1, r2, r3, t1, t2 } => {
            let (mu, sigma) = fixture.dynamics()?;
            need_order(h.as_ref(), 4)?;
            need_order(mu.as_ref(), 2)?;
            need_order(sigma.as_ref(), 2)?;
            let r = 2.0 * r1.max(2.0 * r2 + 1.0) + r3 + 8.0;
            let inner_two: Arc<dyn SmoothMap> = Arc::new(
                GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::TwoArg)?.at_time(t1),
            );
            let inner_one: Arc<dyn SmoothMap> = Arc::new(
                GeneratorMap::new(h.clone(), mu.clone(), sigma.clone(), GeneratorVariant::OneArg)?.at_time(t1),
            );
            let outer_a = GeneratorMap::new(inner_two, mu.clone(), sigma.clone(), GeneratorVariant::BlockTwo)?.at_time(t2);
            let outer_b = GeneratorMap::new(inner_one, mu.clone(), sigma.clone(), GeneratorVariant::TwoArg)?.at_time(t2);
            let p3 = probe.build(3 * d);
            let p2 = probe.build(2 * d);
            points_used = p3.len() + p2.len();
            let lhs_a = map_points(&p3, |x| growth_at(&outer_a, t, x, r, 0));
            let lhs_b = map_points(&p2, |x| growth_at(&outer_b, t, x, r, 0));
            let blocks3: Vec<Range<usize>> = (0..3).map(|b| b * d..(b + 1) * d).collect();
            let blocks2: Vec<Range<usize>> = (0..2).map(|b| b * d..(b + 1) * d).collect();
            let over_all = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
                let a = blocks3.iter().map(|b| sup_projected(&p3, std::slice::from_ref(b), f)).fold(0.0, f64::max);
                let c = blocks2.iter().map(|b| sup_projected(&p2, std::slice::from_ref(b), f)).fold(0.0, f64::max);
                a.max(c)
            };
            let tmu = over_all(&|y| growth_at(mu.as_ref(), t1, y, r1, 2).max(growth_at(mu.as_ref(), t2, y, r1, 2)));
            let tsig =
                over_all(&|y| growth_at(sigma.as_ref(), t1, y, r2, 2).max(growth_at(sigma.as_ref(), t2, y, r2, 2)));
            let th = over_all(&|x| growth_at(h.as_ref(), t, x, r3, 4));
            let rhs = 2f64.powf(r + r3 + 14.0) * d as f64 * (tmu * tmu).max(0.25 * tsig.powi(4)) * th;
            vec![
                InequalityOutcome::new("⟦𝒢̄𝒢̄h⟧_{r,0} ≤ bound", &lhs_a, rhs, true),
                InequalityOutcome::new("⟦𝒢̄𝒢h⟧_{r,0} ≤ bound", &lhs_b, rhs, true),
            ]
        }

        CalculusCheck::LipschitzBound { r, lipschitz } => {
            if r < 1.0 {
                return Err(invalid(format!("the Lipschitz growth bound needs r ≥ 1, got {r}")));
            }
            let p = probe.build(d);
            points_used = p.len();
            let lhs = map_points(&p, |x| growth_at(h.as_ref(), t, x, r, 0));
            let h0 = frobenius(&h.value(t, &vec![0.0; d])?);
            vec![InequalityOutcome::new("⟦h⟧_{r,0} ≤ max{‖h(0)‖, L/r}", &lhs, h0.max(lipschitz / r), true)]
        }
    };

    Ok(CalculusReport { check, outcomes, structure_defect, points: points_used, probe: probe.clone() })
}

/// Largest relative deviation of `‖∇^i ĥ‖² = (i+1)‖∇^i h‖² + ‖∇^{i+1}hᵀx₂‖²` over the
/// probe and all available orders, i.e. `∇^i ĥ` holds `∇^i h` in exactly `i+1`
/// blocks, the contracted derivative once, and zeros elsewhere.
fn block_structure_defect(h: &Arc<dyn SmoothMap>, t: f64, p: &PointSet) -> Result<f64> {
    let lifted = lift_augmented(h.clone())?;
    let d = h.input_dim();
    let o = h.output_dim();
    let top = lifted.max_order();
    let defects = map_points(p, |x| {
        let (x1, x2) = x.split_at(d);
        let mut worst: f64 = 0.0;
        for i in 0..=top {
            let mut big = vec![0.0; tensor_len(2 * d, i, 2 * o)];
            lifted.derivative_into(t, x, i, &mut big);
            let mut a = vec![0.0; tensor_len(d, i, o)];
            let mut b = vec![0.0; tensor_len(d, i + 1, o)];
            h.derivative_into(t, x1, i, &mut a);
            h.derivative_into(t, x1, i + 1, &mut b);
            let block = a.len();
            let contracted: f64 = (0..block)
                .map(|e| {
                    let v: f64 = x2.iter().enumerate().map(|(j, y)| y * b[j * block + e]).sum();
                    v * v
                })
                .sum();
            let expect = (i + 1) as f64 * frobenius(&a).powi(2) + contracted;
            let got = frobenius(&big).powi(2);
            worst = worst.max((got - expect).abs() / expect.max(1e-300).max(got));
        }
        worst
    });
    Ok(sup(defects))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Affine, Constant, Polynomial};

    fn small() -> ProbeSpec {
        ProbeSpec { shells: 10, directions: 4, ..ProbeSpec::default() }
    }

    #[test]
    fn growth_shift_on_square() {
        let h: Arc<dyn SmoothMap> = Arc::new(Polynomial::new(1, vec![(1.0, vec![2])]).unwrap());
        let rep = verify_calculus(
            &CalculusFixture::new(h),
            CalculusCheck::GrowthShift { r: 0.0, k: 2, l: 1, m: 0 },
            &ProbeSpec::default(),
        )
        .unwrap();
        let o = &rep.outcomes[0];
        assert!(rep.holds());
        assert!(o.lhs < 2.0 && o.lhs > 1.99, "{}", o.lhs);
        assert!(o.rhs < 5.0 && o.rhs > 4.99, "{}", o.rhs);
    }

    #[test]
    fn zero_map_trades_to_zero() {
        let h: Arc<dyn SmoothMap> = Arc::new(Constant::zero(2, 1));
        let rep = verify_calculus(&CalculusFixture::new(h), CalculusCheck::TradeDerivatives { r: 0.0, k: 2, m: 0 }, &small())
            .unwrap();
        assert_eq!((rep.outcomes[0].lhs, rep.outcomes[0].rhs), (0.0, 0.0));
        assert!(rep.holds());
    }

    #[test]
    fn block_generator_example() {
        let h: Arc<dyn SmoothMap> = Arc::new(Polynomial::new(2, vec![(1.0, vec![1, 1])]).unwrap());
        let fx = CalculusFixture::new(h)
            .with_dynamics(Arc::new(Constant::new(1, vec![1.0])), Arc::new(Constant::zero(1, 1)));
        let rep = verify_calculus(&fx, CalculusCheck::BlockGenerator { r1: 0.0, r2: 0.0, r3: 0.0 }, &small()).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.outcomes[0].lhs <= 1.0);
        let expect = 1.0 + 2f64.sqrt();
        assert!((rep.outcomes[0].rhs - expect).abs() < 1e-2, "{}", rep.outcomes[0].rhs);
    }

    #[test]
    fn generator_checks_need_dynamics() {
        let h: Arc<dyn SmoothMap> = Arc::new(Affine::scaled_identity(1, 1.0));
        assert!(matches!(
            verify_calculus(&CalculusFixture::new(h), CalculusCheck::SingleGenerator { r1: 0.0, r2: 0.0, r3: 0.0 }, &small()),
            Err(Error::MissingComponent(_))
        ));
    }
}
