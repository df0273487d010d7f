use super::PathBundle;
use crate::coeffs::frobenius;
use crate::error::{Error, Result};

/// Growth inputs for the pathwise bounds. `analytic` records whether the
/// constants come from closed forms or from probe maxima (which are lower
/// bounds on the true suprema, so a violation is then only advisory).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathwiseConstants {
    /// `c₀ = max{⦀μ⦀, ⦀σ⦀}`.
    pub c0: f64,
    /// `c₁ = max{1, ⦀μ⦀, ⦀∇μ⦀, ⦀σ⦀, ⦀∇σ⦀, ⦀ν⦀, ⦀τ⦀}`.
    pub c1: f64,
    /// `η = max{⦀μ − ν⦀, ⦀σ − τ⦀}`.
    pub eta: f64,
    pub analytic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseReport {
    /// `Δ = T/N + max_n ‖ΔW_n‖` of the first path.
    pub delta: f64,
    pub steps_checked: usize,
    pub growth_violations: usize,
    pub gap_violations: usize,
    /// `min_n (log RHS − log LHS)` of the growth bound.
    pub growth_log_margin: f64,
    /// `min_n (log RHS − log LHS)` of the gap bound; `+∞` when every gap is zero.
    pub gap_log_margin: f64,
    pub analytic: bool,
}

impl PathwiseReport {
    pub fn holds(&self) -> bool {
        self.growth_violations == 0 && self.gap_violations == 0
    }
}

/// Checks, at every node `n` of two coupled paths,
///
/// ```text
/// 1 + ‖𝓔_n‖ ≤ (1 + c₀Δ)^n (1 + ‖x‖)
/// ‖𝓔_n − 𝓔'_n‖ ≤ (1 + c₁Δ)^{nN} (1 + max{‖x‖, ‖y‖})^n (‖x − y‖ + η)
/// ```
///
/// Both sides are compared in log space since the right-hand side of the gap
/// bound overflows for moderate `N`.
pub fn pathwise_bounds(first: &PathBundle, second: &PathBundle, k: PathwiseConstants) -> Result<PathwiseReport> {
    if first.grid != second.grid || first.dim() != second.dim() || first.increments() != second.increments() {
        return Err(Error::Precondition("pathwise bounds need two paths driven by the same increments".into()));
    }
    let grid = first.grid;
    let n_steps = grid.steps();
    let max_inc = (0..n_steps).map(|n| frobenius(first.increment(n))).fold(0.0, f64::max);
    let delta = grid.dt() + max_inc;
    let x = first.value(0);
    let y = second.value(0);
    let nx = frobenius(x);
    let start_gap: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let log_growth_step = (k.c0 * delta).ln_1p();
    let log_gap_step = n_steps as f64 * (k.c1 * delta).ln_1p() + nx.max(frobenius(y)).ln_1p();
    let log_gap_base = (start_gap + k.eta).ln();

    let mut report = PathwiseReport {
        delta,
        steps_checked: n_steps + 1,
        growth_violations: 0,
        gap_violations: 0,
        growth_log_margin: f64::INFINITY,
        gap_log_margin: f64::INFINITY,
        analytic: k.analytic,
    };
    for n in 0..=n_steps {
        let lhs = frobenius(first.value(n)).ln_1p();
        let rhs = n as f64 * log_growth_step + nx.ln_1p();
        let margin = rhs - lhs;
        report.growth_log_margin = report.growth_log_margin.min(margin);
        if margin < -1e-12 {
            report.growth_violations += 1;
        }

        let gap: f64 = first
            .value(n)
            .iter()
            .zip(second.value(n))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if gap > 0.0 {
            let margin = n as f64 * log_gap_step + log_gap_base - gap.ln();
            report.gap_log_margin = report.gap_log_margin.min(margin);
            if margin < -1e-12 {
                report.gap_violations += 1;
            }
        }
    }
    Ok(report)
}
