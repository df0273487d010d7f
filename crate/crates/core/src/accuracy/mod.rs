//! L² and first-order Sobolev error functionals, weighted norms, the ball
//! conversion constant, and log-log rate fitting.

mod quadrature;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::mces::Neumaier;

pub use quadrature::{
    gauss_legendre, halton_point, radical_inverse, unit_ball_volume, CompactDomain, Nodes, QuadratureRule,
    MAX_HALTON_DIM,
};

const CHUNK: usize = 1024;

/// `Σ_i w_i q(x_i)`, evaluated in parallel and merged in node order.
pub fn integrate<F>(nodes: &Nodes, q: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let partials: Vec<Result<Neumaier>> = (0..nodes.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = Neumaier::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(nodes.len()) {
                s.add(nodes.weights[i] * q(nodes.point(i))?);
            }
            Ok(s)
        })
        .collect();
    let mut total = Neumaier::default();
    for p in partials {
        total.merge(&p?);
    }
    Ok(total.value())
}

fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("compared values have lengths {} and {}", a.len(), b.len())));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::InvalidArgument("non-finite value in error functional".into()))
    }
}

/// `‖a − b‖_{L²(K)}` under `rule`.
pub fn l2_error<A, B>(a: A, b: B, domain: &CompactDomain, rule: &QuadratureRule) -> Result<f64>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    B: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let nodes = rule.nodes(domain)?;
    l2_error_on(&a, &b, &nodes)
}

/// [`l2_error`] on precomputed nodes.
pub fn l2_error_on<A, B>(a: &A, b: &B, nodes: &Nodes) -> Result<f64>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    B: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    Ok(integrate(nodes, |x| squared_distance(&a(x)?, &b(x)?))?.max(0.0).sqrt())
}

/// `(‖a − b‖_{L²(K)}, ‖∇a − ∇b‖_{L²(K)})`, gradient differences in Frobenius norm.
pub fn sobolev_error<AV, AG, BV, BG>(
    a_value: AV,
    a_grad: AG,
    b_value: BV,
    b_grad: BG,
    domain: &CompactDomain,
    rule: &QuadratureRule,
) -> Result<(f64, f64)>
where
    AV: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    AG: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    BV: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    BG: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let nodes = rule.nodes(domain)?;
    Ok((l2_error_on(&a_value, &b_value, &nodes)?, l2_error_on(&a_grad, &b_grad, &nodes)?))
}

/// `‖1 + ‖x‖^s‖_{L²(K)}`.
pub fn weighted_norm(domain: &CompactDomain, s: f64, rule: &QuadratureRule) -> Result<f64> {
    let nodes = rule.nodes(domain)?;
    let sq = integrate(&nodes, |x| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((1.0 + n.powf(s)).powi(2))
    })?;
    Ok(sq.sqrt())
}

/// `2d Γ((d+4)/2) / π^{d/2}`, the factor turning `∫_{𝔹^d} ‖Aᵀy‖² dy` into
/// an upper bound for `‖A‖²`.
pub fn ball_conversion_constant(d: usize) -> f64 {
    let df = d as f64;
    2.0 * df * (ln_gamma((df + 4.0) / 2.0) - 0.5 * df * std::f64::consts::PI.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallLemmaReport {
    /// `‖A‖²_F`
    pub lhs: f64,
    /// `∫_{𝔹^d} ‖Aᵀy‖² dy`
    pub integral: f64,
    pub constant: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub margin: f64,
    pub nodes: usize,
}

impl BallLemmaReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

/// Checks `‖A‖² ≤ c_d ∫_{𝔹^d} ‖Aᵀy‖² dy` for `A` stored like a first
/// derivative: `a[i·o + k] = A_{ik}`, `i < d`.
pub fn verify_ball_lemma(a: &[f64], d: usize, rule: &QuadratureRule) -> Result<BallLemmaReport> {
    if d == 0 || a.is_empty() || !a.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!("{} entries do not form a {d} × o matrix", a.len())));
    }
    let o = a.len() / d;
    let nodes = rule.nodes(&CompactDomain::unit_ball(d))?;
    let integral = integrate(&nodes, |y| {
        let mut s = 0.0;
        for k in 0..o {
            let v: f64 = (0..d).map(|i| a[i * o + k] * y[i]).sum();
            s += v * v;
        }
        Ok(s)
    })?;
    let lhs: f64 = a.iter().map(|v| v * v).sum();
    let constant = ball_conversion_constant(d);
    let rhs = constant * integral;
    Ok(BallLemmaReport { lhs, integral, constant, rhs, margin: rhs - lhs, nodes: nodes.len() })
}

/// Least-squares line through `(ln size, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(s, e)) = points.iter().find(|&&(s, e)| !(s > 0.0 && e > 0.0 && s.is_finite() && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive finite data, got ({s}, {e})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    // Constant data lie exactly on the fitted line.
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gl(n: usize) -> QuadratureRule {
        QuadratureRule::TensorGrid { points: n }
    }

    #[test]
    fn l2_examples() {
        let k = CompactDomain::unit_cube(1);
        let x = |p: &[f64]| Ok(vec![p[0]]);
        let zero = |_: &[f64]| Ok(vec![0.0]);
        assert_eq!(l2_error(x, x, &k, &gl(4)).unwrap(), 0.0);
        let k3 = CompactDomain::unit_cube(3);
        let c = l2_error(|_| Ok(vec![0.25, 0.0]), |_| Ok(vec![-0.5, 0.0]), &k3, &QuadratureRule::default()).unwrap();
        assert_relative_eq!(c, 0.75, max_relative = 1e-12);
        assert_relative_eq!(l2_error(x, zero, &k, &gl(4)).unwrap(), 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        let halton = l2_error(x, zero, &k, &QuadratureRule::default()).unwrap();
        assert!((halton - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sobolev_examples() {
        let k = CompactDomain::unit_cube(1);
        let (v, g) = sobolev_error(
            |p: &[f64]| Ok(vec![p[0] * p[0]]),
            |p: &[f64]| Ok(vec![2.0 * p[0]]),
            |_: &[f64]| Ok(vec![0.0]),
            |_: &[f64]| Ok(vec![0.0]),
            &k,
            &gl(5),
        )
        .unwrap();
        assert_relative_eq!(v, 0.2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(g, (4.0f64 / 3.0).sqrt(), max_relative = 1e-14);

        let k2 = CompactDomain::unit_cube(2);
        let (v, g) = sobolev_error(
            |_: &[f64]| Ok(vec![1.0]),
            |_: &[f64]| Ok(vec![1.0, 2.0]),
            |_: &[f64]| Ok(vec![1.0]),
            |_: &[f64]| Ok(vec![0.0, 0.0]),
            &k2,
            &gl(3),
        )
        .unwrap();
        assert_eq!(v, 0.0);
        assert_relative_eq!(g, 5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn evaluation_errors_propagate() {
        let k = CompactDomain::unit_cube(1);
        let r = l2_error(|_| Err(Error::InvalidArgument("boom".into())), |_| Ok(vec![0.0]), &k, &gl(3));
        assert!(r.is_err());
    }

    #[test]
    fn conversion_constants() {
        assert_relative_eq!(ball_conversion_constant(1), 1.5, max_relative = 1e-12);
        assert_relative_eq!(ball_conversion_constant(2), 8.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(ball_conversion_constant(4), 48.0 / (PI * PI), max_relative = 1e-12);
    }

    #[test]
    fn ball_lemma_examples() {
        let rule = gl(8);
        let z = verify_ball_lemma(&[0.0, 0.0], 2, &rule).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        let one = verify_ball_lemma(&[1.7], 1, &rule).unwrap();
        assert_relative_eq!(one.integral, 2.0 * 1.7 * 1.7 / 3.0, max_relative = 1e-14);
        assert!(one.margin.abs() < 1e-12);
        let id = verify_ball_lemma(&[1.0, 0.0, 0.0, 1.0], 2, &rule).unwrap();
        assert_relative_eq!(id.integral, PI / 2.0, max_relative = 1e-13);
        assert_relative_eq!(id.rhs, 4.0, max_relative = 1e-13);
    }

    #[test]
    fn ball_integral_matches_moment_formula() {
        // ∫_{𝔹^d} y_a y_b dy = δ_ab vol(𝔹^d) / (d + 2)
        let a = [0.3, -1.2, 2.0, 0.7, 0.1, -0.4];
        let r = verify_ball_lemma(&a, 3, &gl(10)).unwrap();
        let fro: f64 = a.iter().map(|v| v * v).sum();
        assert_relative_eq!(r.integral, fro * unit_ball_volume(3) / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn weighted_norm_examples() {
        let k = CompactDomain::unit_cube(1);
        assert_relative_eq!(weighted_norm(&k, 1.0, &gl(4)).unwrap(), (7.0f64 / 3.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(
            weighted_norm(&k, 4.0, &gl(8)).unwrap(),
            (1.0f64 + 0.4 + 1.0 / 9.0).sqrt(),
            max_relative = 1e-14
        );
        let far = CompactDomain::Box { lo: vec![10.0, 10.0], hi: vec![11.0, 11.0] };
        assert!(weighted_norm(&far, 3.0, &QuadratureRule::default()).unwrap() >= 1.0);
        assert!(weighted_norm(&CompactDomain::Box { lo: vec![0.0], hi: vec![0.0] }, 1.0, &gl(3)).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let f = rate_fit(&[(10.0, 0.1), (100.0, 0.01), (1000.0, 0.001)]).unwrap();
        assert_relative_eq!(f.slope, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let c = 0.37;
        let f = rate_fit(&[(4.0, c / 2.0), (16.0, c / 4.0), (64.0, c / 8.0)]).unwrap();
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-12);
        let f = rate_fit(&[(1.0, 0.2), (2.0, 0.2), (8.0, 0.2)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(rate_fit(&[(1.0, 0.2), (2.0, 0.0), (8.0, 0.2)]).is_err());
        assert!(rate_fit(&[(1.0, 0.2), (2.0, 0.1)]).is_err());
    }
}
