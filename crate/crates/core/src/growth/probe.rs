use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::euler::noise::{open_unit, standard_normal};

/// Deterministic sample set standing in for `ℝ^d` (and `[0, T]`) when a
/// supremum has to be estimated.
///
/// Points are the origin plus `shells` spheres with log-spaced radii in
/// `[r_min, r_max]`. Every shell uses the same directions: the `±e_i` axes
/// and `directions` seeded uniform unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub shells: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub directions: usize,
    pub include_origin: bool,
    pub time_samples: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            shells: 24,
            r_min: 1e-2,
            r_max: 1e3,
            directions: 8,
            include_origin: true,
            time_samples: 5,
            horizon: 1.0,
            seed: 0x5eed,
        }
    }
}

/// Flat list of probe points together with the shell they lie on.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
    /// `None` for the origin.
    pub shell: Vec<Option<usize>>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.shell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shell.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Whether a measure given per point still grows across the outermost
    /// shell: its maximum there exceeds the maximum over all inner points by
    /// more than 1%.
    pub fn still_growing(&self, values: &[f64]) -> bool {
        let last = match self.shell.iter().flatten().max() {
            Some(&s) if s > 0 => s,
            _ => return false,
        };
        let mut outer = f64::NEG_INFINITY;
        let mut inner = f64::NEG_INFINITY;
        for (v, s) in values.iter().zip(&self.shell) {
            if *s == Some(last) {
                outer = outer.max(*v);
            } else {
                inner = inner.max(*v);
            }
        }
        outer > 1.01 * inner && outer > 0.0
    }
}

impl ProbeSpec {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Spec whose point set in dimension `dim` has roughly `target` points.
    pub fn sized(dim: usize, target: usize) -> Self {
        let base = Self::default();
        let per_shell = 2 * dim + base.directions;
        Self { shells: (target / per_shell).max(2), ..base }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.shells == 1 {
            return vec![self.r_max];
        }
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        (0..self.shells)
            .map(|s| (lo + (hi - lo) * s as f64 / (self.shells - 1) as f64).exp())
            .collect()
    }

    /// Unit directions shared by all shells.
    pub fn unit_directions(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut dirs = Vec::with_capacity(2 * dim + self.directions);
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = sign;
                dirs.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (dim as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..self.directions {
            let v: Vec<f64> = (0..dim).map(|_| standard_normal(open_unit(rng.next_u64()))).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            dirs.push(v.into_iter().map(|a| a / n).collect());
        }
        dirs
    }

    pub fn build(&self, dim: usize) -> PointSet {
        let dirs = self.unit_directions(dim);
        let mut coords = Vec::new();
        let mut shell = Vec::new();
        if self.include_origin {
            coords.extend(std::iter::repeat_n(0.0, dim));
            shell.push(None);
        }
        for (s, r) in self.radii().into_iter().enumerate() {
            for d in &dirs {
                coords.extend(d.iter().map(|a| a * r));
                shell.push(Some(s));
            }
        }
        PointSet { dim, coords, shell }
    }

    /// Time samples in `[0, T]`; a single sample sits at `0`.
    pub fn times(&self) -> Vec<f64> {
        if self.time_samples <= 1 {
            return vec![0.0];
        }
        (0..self.time_samples)
            .map(|i| self.horizon * i as f64 / (self.time_samples - 1) as f64)
            .collect()
    }

    /// Times for Hölder quotients: the uniform samples plus `T·2^{-k}` for
    /// `k = 1, …, 20`, so that pairs with small `|t − s|` near zero occur.
    pub fn hoelder_times(&self) -> Vec<f64> {
        let mut t = self.times();
        t.push(0.0);
        t.push(self.horizon);
        t.extend((1..=20).map(|k| self.horizon * 0.5f64.powi(k)));
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn describe(&self) -> String {
        format!(
            "shells={} radii=[{:.0e},{:.0e}] directions=axes+{} origin={} times={} seed={}",
            self.shells, self.r_min, self.r_max, self.directions, self.include_origin, self.time_samples, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_share_directions() {
        let spec = ProbeSpec { shells: 3, directions: 2, ..ProbeSpec::default() };
        let p = spec.build(2);
        assert_eq!(p.len(), 1 + 3 * 6);
        let r = spec.radii();
        for k in 0..6 {
            let a = p.point(1 + k);
            let b = p.point(1 + 6 + k);
            for (x, y) in a.iter().zip(b) {
                assert!((x / r[0] - y / r[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outer_radius_is_r_max() {
        let spec = ProbeSpec::default();
        let p = spec.build(3);
        let max = p.iter().map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt()).fold(0.0, f64::max);
        assert!((max - spec.r_max).abs() < 1e-9 * spec.r_max);
    }

    #[test]
    fn growth_flag() {
        let p = ProbeSpec { shells: 3, directions: 0, include_origin: false, ..ProbeSpec::default() }.build(1);
        assert!(p.still_growing(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]));
        assert!(!p.still_growing(&[1.0, 1.0, 2.0, 2.0, 2.01, 2.0]));
    }

    #[test]
    fn hoelder_times_reach_zero_neighbourhood() {
        let t = ProbeSpec::default().hoelder_times();
        assert_eq!(t[0], 0.0);
        assert!(t[1] < 1e-5);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }
}
