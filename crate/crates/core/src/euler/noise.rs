use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

use super::TimeGrid;

/// Maps 64 random bits to the open interval `(0, 1)` using the top 52 bits
/// (cell midpoints, so both ends stay representable below one).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Inverse-CDF standard normal: `Φ^{-1}(u) = −√2 · erfc^{-1}(2u)`.
#[inline]
pub fn standard_normal(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Source of Brownian increments `ΔW_n` for a given sample index.
pub trait NoiseSource: Sync {
    /// Fills `out` (length `grid.steps() · noise_dim`, step-major) with the
    /// increments of sample `sample` on `grid`.
    fn fill_increments(&self, sample: u64, grid: &TimeGrid, noise_dim: usize, out: &mut [f64]);
}

/// Counter-based Gaussian noise keyed on `(root_seed, sample, step, component)`.
///
/// Sample `m` reads ChaCha8 stream `m`; the standard normal for step `n` and
/// component `j` is derived from the 64-bit word at position `n·dim + j` of
/// that stream. Any `(m, n, j)` can be regenerated independently, and the
/// draws do not depend on which worker asks for them.
///
/// With `fine_steps = Some(F)` the increments on an `N`-step grid are sums of
/// the increments of an `F`-step grid over the same interval (`N` must divide
/// `F`), so estimates at different `N` share their Brownian paths.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    root_seed: u64,
    fine_steps: Option<usize>,
    base: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(root_seed: u64) -> Self {
        Self { root_seed, fine_steps: None, base: ChaCha8Rng::seed_from_u64(root_seed) }
    }

    pub fn with_fine_steps(root_seed: u64, fine_steps: usize) -> Self {
        Self { fine_steps: Some(fine_steps), ..Self::new(root_seed) }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn fine_steps(&self) -> Option<usize> {
        self.fine_steps
    }

    fn stream(&self, sample: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(sample);
        rng.set_word_pos(0);
        rng
    }

    /// Standard normals `Z_{n,j}` for `n < steps`, `j < dim`, step-major.
    pub fn standard_normals(&self, sample: u64, steps: usize, dim: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), steps * dim);
        let mut rng = self.stream(sample);
        for z in out.iter_mut() {
            *z = standard_normal(open_unit(rng.next_u64()));
        }
    }

    /// The single normal `Z_{n,j}` of sample `sample` in a `dim`-component layout.
    pub fn normal_at(&self, sample: u64, step: usize, component: usize, dim: usize) -> f64 {
        let mut rng = self.stream(sample);
        // Each u64 consumes two 32-bit words.
        rng.set_word_pos(2 * (step * dim + component) as u128);
        standard_normal(open_unit(rng.next_u64()))
    }
}

impl NoiseSource for NoiseStream {
    fn fill_increments(&self, sample: u64, grid: &TimeGrid, noise_dim: usize, out: &mut [f64]) {
        let steps = grid.steps();
        match self.fine_steps {
            None => {
                self.standard_normals(sample, steps, noise_dim, out);
                let scale = grid.dt().sqrt();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            Some(fine) => {
                assert!(
                    fine >= steps && fine % steps == 0,
                    "fine grid with {fine} steps does not refine {steps} steps"
                );
                let mut z = vec![0.0; fine * noise_dim];
                self.standard_normals(sample, fine, noise_dim, &mut z);
                aggregate_fine(&z, fine, steps, noise_dim, grid.dt() / (fine / steps) as f64, out);
            }
        }
    }
}

/// Sums blocks of fine standard normals into coarse increments:
/// `ΔW_n = √(fine_dt) Σ_{i ∈ block n} Z_i`.
pub fn aggregate_fine(z: &[f64], fine: usize, steps: usize, noise_dim: usize, fine_dt: f64, out: &mut [f64]) {
    let ratio = fine / steps;
    let scale = fine_dt.sqrt();
    out.fill(0.0);
    for n in 0..steps {
        for i in n * ratio..(n + 1) * ratio {
            for j in 0..noise_dim {
                out[n * noise_dim + j] += z[i * noise_dim + j];
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
}

/// Fixed increments reused for every sample; meant for deterministic tests.
#[derive(Debug, Clone)]
pub struct InjectedIncrements {
    increments: Vec<f64>,
}

impl InjectedIncrements {
    pub fn new(increments: Vec<f64>) -> Self {
        Self { increments }
    }
}

impl NoiseSource for InjectedIncrements {
    fn fill_increments(&self, _sample: u64, grid: &TimeGrid, noise_dim: usize, out: &mut [f64]) {
        assert_eq!(
            self.increments.len(),
            grid.steps() * noise_dim,
            "injected increments do not match the grid"
        );
        out.copy_from_slice(&self.increments);
    }
}
