use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Compact integration domain `K ⊆ ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CompactDomain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl CompactDomain {
    pub fn unit_cube(d: usize) -> Self {
        CompactDomain::Box { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn unit_ball(d: usize) -> Self {
        CompactDomain::Ball { center: vec![0.0; d], radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            CompactDomain::Box { lo, .. } => lo.len(),
            CompactDomain::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            CompactDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            CompactDomain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    /// Rejects empty, degenerate, or non-finite domains.
    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidArgument("domain has dimension 0".into()));
        }
        match self {
            CompactDomain::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch(format!("box bounds have {} and {} entries", lo.len(), hi.len())));
                }
                if let Some(i) = (0..lo.len()).find(|&i| !(lo[i].is_finite() && hi[i].is_finite() && hi[i] > lo[i])) {
                    return Err(Error::InvalidArgument(format!(
                        "box side {i} is [{}, {}]; need finite lo < hi",
                        lo[i], hi[i]
                    )));
                }
            }
            CompactDomain::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument(format!("ball radius must be positive and finite, got {radius}")));
                }
            }
        }
        Ok(())
    }
}

/// `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

/// How nodes are laid out over a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Gauss–Legendre product rule with `points` nodes per axis; on balls a
    /// polar (d = 2) or spherical (d = 3) product rule.
    TensorGrid { points: usize },
    /// First `nodes` Halton points, equal weights. Balls keep the points of
    /// the bounding cube that fall inside.
    LowDiscrepancy { nodes: usize },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::LowDiscrepancy { nodes: 1 << 15 }
    }
}

/// Nodes (row-major, `dim` per node) and weights of a rule on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Nodes {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration from
/// the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(z) and P_{n-1}(z)
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let jf = j as f64;
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let step = p0 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131,
];

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton point with index `i` (starting at 1, so the origin is skipped) in `[0, 1)^d`.
pub fn halton_point(i: u64, out: &mut [f64]) {
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = radical_inverse(i, PRIMES[k]);
    }
}

pub const MAX_HALTON_DIM: usize = PRIMES.len();

fn tensor_box(lo: &[f64], hi: &[f64], n: usize) -> Nodes {
    let d = lo.len();
    let (gx, gw) = gauss_legendre(n);
    let total = n.pow(d as u32);
    let mut points = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut w = 1.0;
        for a in 0..d {
            let half = 0.5 * (hi[a] - lo[a]);
            points.push(lo[a] + half * (gx[idx[a]] + 1.0));
            w *= half * gw[idx[a]];
        }
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    Nodes { dim: d, points, weights }
}

fn tensor_ball(center: &[f64], radius: f64, n: usize) -> Result<Nodes> {
    let d = center.len();
    let (gx, gw) = gauss_legendre(n);
    // radial nodes on [0, radius]
    let rad: Vec<(f64, f64)> = gx.iter().zip(&gw).map(|(x, w)| (0.5 * radius * (x + 1.0), 0.5 * radius * w)).collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match d {
        1 => return Ok(tensor_box(&[center[0] - radius], &[center[0] + radius], n)),
        2 => {
            // n equispaced angles integrate trigonometric polynomials of degree < n exactly
            for k in 0..n {
                let th = 2.0 * PI * k as f64 / n as f64;
                for &(r, w) in &rad {
                    points.extend([center[0] + r * th.cos(), center[1] + r * th.sin()]);
                    weights.push(w * r * 2.0 * PI / n as f64);
                }
            }
        }
        3 => {
            for k in 0..n {
                let ph = 2.0 * PI * k as f64 / n as f64;
                for (ct, wt) in gx.iter().zip(&gw) {
                    let st = (1.0 - ct * ct).sqrt();
                    for &(r, w) in &rad {
                        points.extend([
                            center[0] + r * st * ph.cos(),
                            center[1] + r * st * ph.sin(),
                            center[2] + r * ct,
                        ]);
                        weights.push(w * r * r * wt * 2.0 * PI / n as f64);
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "product ball rules are available for d ≤ 3, got d = {d}"
            )))
        }
    }
    Ok(Nodes { dim: d, points, weights })
}

impl QuadratureRule {
    pub fn nodes(&self, domain: &CompactDomain) -> Result<Nodes> {
        domain.validate()?;
        let d = domain.dim();
        match (*self, domain) {
            (QuadratureRule::TensorGrid { points: 0 }, _) => {
                Err(Error::InvalidArgument("tensor rule needs at least one point per axis".into()))
            }
            (QuadratureRule::LowDiscrepancy { nodes: 0 }, _) => {
                Err(Error::InvalidArgument("low-discrepancy rule needs at least one node".into()))
            }
            (QuadratureRule::TensorGrid { points }, CompactDomain::Box { lo, hi }) => {
                if (points as f64).powi(d as i32) > 5e7 {
                    return Err(Error::InvalidArgument(format!("{points}^{d} tensor nodes is too many")));
                }
                Ok(tensor_box(lo, hi, points))
            }
            (QuadratureRule::TensorGrid { points }, CompactDomain::Ball { center, radius }) => {
                tensor_ball(center, *radius, points)
            }
            (QuadratureRule::LowDiscrepancy { .. }, _) if d > MAX_HALTON_DIM => Err(Error::InvalidArgument(format!(
                "Halton rule supports up to {MAX_HALTON_DIM} dimensions, got {d}"
            ))),
            (QuadratureRule::LowDiscrepancy { nodes }, CompactDomain::Box { lo, hi }) => {
                let mut points = vec![0.0; nodes * d];
                for (i, p) in points.chunks_mut(d).enumerate() {
                    halton_point(i as u64 + 1, p);
                    for a in 0..d {
                        p[a] = lo[a] + (hi[a] - lo[a]) * p[a];
                    }
                }
                Ok(Nodes { dim: d, points, weights: vec![domain.volume() / nodes as f64; nodes] })
            }
            (QuadratureRule::LowDiscrepancy { nodes }, CompactDomain::Ball { center, radius }) => {
                let mut points = Vec::new();
                let mut p = vec![0.0; d];
                for i in 0..nodes {
                    halton_point(i as u64 + 1, &mut p);
                    let y: Vec<f64> = p.iter().map(|v| radius * (2.0 * v - 1.0)).collect();
                    if y.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                        points.extend(y.iter().zip(center).map(|(a, c)| a + c));
                    }
                }
                let count = points.len() / d;
                if count == 0 {
                    return Err(Error::InvalidArgument("no Halton node fell inside the ball".into()));
                }
                Ok(Nodes { dim: d, points, weights: vec![domain.volume() / count as f64; count] })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 12, 40] {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn halton_first_points() {
        let mut p = [0.0; 2];
        halton_point(1, &mut p);
        assert_eq!(p, [0.5, 1.0 / 3.0]);
        halton_point(5, &mut p);
        assert_eq!(p[0], 0.625);
        assert!((p[1] - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_volume() {
        let domains = [
            CompactDomain::Box { lo: vec![-1.0, 0.5], hi: vec![2.0, 0.75] },
            CompactDomain::unit_cube(4),
            CompactDomain::Ball { center: vec![0.3], radius: 2.0 },
            CompactDomain::Ball { center: vec![0.0, 1.0], radius: 1.5 },
            CompactDomain::unit_ball(3),
        ];
        for dom in &domains {
            let n = QuadratureRule::TensorGrid { points: 6 }.nodes(dom).unwrap();
            assert_relative_eq!(n.weights.iter().sum::<f64>(), dom.volume(), max_relative = 1e-10);
            let h = QuadratureRule::LowDiscrepancy { nodes: 4096 }.nodes(dom).unwrap();
            assert_relative_eq!(h.weights.iter().sum::<f64>(), dom.volume(), max_relative = 1e-10);
        }
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_domains_rejected() {
        let rule = QuadratureRule::default();
        assert!(rule.nodes(&CompactDomain::Box { lo: vec![0.0], hi: vec![0.0] }).is_err());
        assert!(rule.nodes(&CompactDomain::Ball { center: vec![0.0], radius: 0.0 }).is_err());
        assert!(QuadratureRule::TensorGrid { points: 4 }.nodes(&CompactDomain::unit_ball(4)).is_err());
    }
}
