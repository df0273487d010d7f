use std::sync::Arc;

use super::calculus::{verify_calculus, CalculusCheck, CalculusFixture, CalculusReport};
use super::probe::ProbeSpec;
use crate::coeffs::{Affine, Componentwise, DiagonalMatrix, Polynomial, Profile, SeparableSum, SmoothMap, TrigPoly};
use crate::error::Result;

/// A map together with the inequalities checked on it.
#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub name: &'static str,
    pub fixture: CalculusFixture,
    pub checks: Vec<CalculusCheck>,
}

/// Outcome of one check of one case.
#[derive(Debug, Clone)]
pub struct BatteryResult {
    pub case: &'static str,
    pub report: CalculusReport,
}

fn poly(dim: usize, terms: &[(f64, &[u32])]) -> Arc<dyn SmoothMap> {
    let terms = terms.iter().map(|(c, e)| (*c, e.to_vec())).collect();
    Arc::new(Polynomial::new(dim, terms).expect("exponents match the dimension"))
}

/// Polynomials up to degree four, bounded trigonometric maps, and Lipschitz
/// maps on `ℝ²`, with bounded smooth dynamics for the generator checks.
pub fn calculus_battery() -> Vec<BatteryCase> {
    let d = 2;
    let mu: Arc<dyn SmoothMap> = Arc::new(Componentwise::new(d, Profile::Trig(TrigPoly::sin_k(1, 0.5))));
    let sigma: Arc<dyn SmoothMap> = Arc::new(DiagonalMatrix::new(d, Profile::Trig(TrigPoly::new(vec![0.5, 0.25], vec![]))));
    let quad = poly(d, &[(1.0, &[2, 0]), (3.0, &[1, 1]), (-1.0, &[0, 1]), (1.0, &[0, 0])]);
    let quartic = poly(d, &[(1.0, &[4, 0]), (-2.0, &[2, 2]), (1.0, &[0, 3]), (0.5, &[1, 0])]);
    let block = poly(2 * d, &[(1.0, &[2, 0, 1, 0]), (-1.0, &[0, 1, 0, 1]), (0.5, &[1, 1, 0, 0])]);
    let sin: Arc<dyn SmoothMap> = Arc::new(Componentwise::new(d, Profile::sin()));
    let cos_sum: Arc<dyn SmoothMap> = Arc::new(SeparableSum::new(d, Profile::cos(), 0.5));
    let affine = Affine::new(vec![1.0, -2.0, 0.5, 3.0], vec![1.0, -1.0]).expect("2 × 2 matrix");
    let affine_lip = affine.matrix().iter().map(|v| v * v).sum::<f64>().sqrt();
    let affine: Arc<dyn SmoothMap> = Arc::new(affine);

    let shifts = |r: f64, k: usize| {
        let mut v = Vec::new();
        for l in 0..=k {
            for m in 0..=k - l {
                v.push(CalculusCheck::GrowthShift { r, k, l, m });
            }
        }
        v
    };
    let generators = [
        CalculusCheck::SingleGenerator { r1: 0.0, r2: 0.0, r3: 1.0 },
        CalculusCheck::DoubleGenerator { r1: 0.0, r2: 0.0, r3: 0.0, t1: 0.0, t2: 0.5 },
    ];
    let mut cases = vec![
        BatteryCase {
            name: "quadratic",
            fixture: CalculusFixture::new(quad).with_dynamics(mu.clone(), sigma.clone()),
            checks: [
                shifts(2.0, 2),
                vec![
                    CalculusCheck::TradeDerivatives { r: 0.0, k: 2, m: 0 },
                    CalculusCheck::TradeDerivatives { r: 1.0, k: 2, m: 1 },
                    CalculusCheck::AugmentedBlocks { r: 2.0, l: 0, m: 1 },
                    CalculusCheck::AugmentedIntegration { r: 0.0, k: 2, j: 1, l: 0, m: 1 },
                    CalculusCheck::AugmentedDifferentiation { r: 0.0, k: 2, j: 1 },
                ],
                generators.to_vec(),
            ]
            .concat(),
        },
        BatteryCase {
            name: "quartic",
            fixture: CalculusFixture::new(quartic).with_dynamics(mu.clone(), sigma.clone()),
            checks: [
                shifts(0.0, 4),
                vec![
                    CalculusCheck::TradeDerivatives { r: 0.0, k: 4, m: 2 },
                    CalculusCheck::AugmentedBlocks { r: 4.0, l: 1, m: 1 },
                    CalculusCheck::AugmentedIntegration { r: 0.0, k: 4, j: 2, l: 1, m: 1 },
                    CalculusCheck::AugmentedDifferentiation { r: 0.0, k: 4, j: 2 },
                ],
                generators.to_vec(),
            ]
            .concat(),
        },
        BatteryCase {
            name: "sin",
            fixture: CalculusFixture::new(sin.clone()).with_dynamics(mu.clone(), sigma.clone()),
            checks: [
                shifts(0.0, 3),
                vec![
                    CalculusCheck::TradeDerivatives { r: 0.0, k: 3, m: 1 },
                    CalculusCheck::AugmentedBlocks { r: 1.0, l: 1, m: 2 },
                    CalculusCheck::AugmentedIntegration { r: 0.0, k: 3, j: 1, l: 1, m: 1 },
                    CalculusCheck::AugmentedDifferentiation { r: 0.0, k: 3, j: 1 },
                    CalculusCheck::LipschitzBound { r: 1.0, lipschitz: 1.0 },
                    CalculusCheck::LipschitzBound { r: 3.0, lipschitz: 1.0 },
                ],
                generators.to_vec(),
            ]
            .concat(),
        },
        BatteryCase {
            name: "cos-sum",
            fixture: CalculusFixture::new(cos_sum).with_dynamics(mu.clone(), sigma.clone()),
            checks: [
                shifts(0.0, 2),
                vec![
                    CalculusCheck::TradeDerivatives { r: 0.0, k: 2, m: 0 },
                    // ‖∇(½ Σ cos x_i)‖ ≤ ½ √d
                    CalculusCheck::LipschitzBound { r: 1.0, lipschitz: 0.5 * (d as f64).sqrt() },
                ],
                generators.to_vec(),
            ]
            .concat(),
        },
        BatteryCase {
            name: "affine",
            fixture: CalculusFixture::new(affine),
            checks: vec![
                CalculusCheck::GrowthShift { r: 1.0, k: 1, l: 1, m: 0 },
                CalculusCheck::TradeDerivatives { r: 0.0, k: 1, m: 0 },
                // Frobenius norm bounds the operator norm.
                CalculusCheck::LipschitzBound { r: 1.0, lipschitz: affine_lip },
                CalculusCheck::LipschitzBound { r: 2.0, lipschitz: affine_lip },
            ],
        },
    ];
    cases.push(BatteryCase {
        name: "block-quadratic",
        fixture: CalculusFixture::new(block).with_dynamics(mu, sigma),
        checks: vec![CalculusCheck::BlockGenerator { r1: 0.0, r2: 0.0, r3: 1.0 }],
    });
    cases
}

/// Runs every check of every case on `probe`.
pub fn run_battery(cases: &[BatteryCase], probe: &ProbeSpec) -> Result<Vec<BatteryResult>> {
    let mut out = Vec::new();
    for c in cases {
        for &check in &c.checks {
            out.push(BatteryResult { case: c.name, report: verify_calculus(&c.fixture, check, probe)? });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_holds_on_small_probe() {
        let probe = ProbeSpec { shells: 8, directions: 4, ..ProbeSpec::default() };
        let results = run_battery(&calculus_battery(), &probe).unwrap();
        assert!(results.len() > 30);
        for r in &results {
            assert!(r.report.holds(), "{} {} {}: {:?}", r.case, r.report.check.id(), r.report.check.params(), r.report.outcomes);
        }
    }
}
