//! Experiment configuration read from TOML.
//!
//! Every section except `[run]` may be omitted; `run.seed` is required so
//! that no run depends on an implicit seed. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sobolev_core::accuracy::{CompactDomain, QuadratureRule};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    #[serde(default)]
    pub growth: GrowthSection,
    #[serde(default)]
    pub export: ExportSection,
    #[serde(default)]
    pub assert: AssertSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write log-log SVG plots next to the sweep CSVs.
    #[serde(default)]
    pub plot: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sobolev-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub fixture: String,
    /// Fixture parameters such as `d`, `T`, `theta`, `s`.
    pub params: BTreeMap<String, f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { fixture: "heat-quadratic".into(), params: BTreeMap::from([("d".into(), 1.0), ("T".into(), 1.0)]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub samples: usize,
    pub steps: usize,
    /// Evaluation point; empty means the origin.
    pub point: Vec<f64>,
    pub gradient: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { samples: 10_000, steps: 32, point: Vec::new(), gradient: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// `|v(x) − u(0, x)|` at the estimator point.
    Point,
    /// `‖v − u(0, ·)‖_{L²(K)}` over the configured domain.
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub steps: Vec<usize>,
    pub samples: Vec<usize>,
    pub metric: ErrorMetric,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { steps: vec![4, 8, 16, 32, 64], samples: vec![1_000, 10_000, 100_000], metric: ErrorMetric::Point }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    /// `None` means the cube `[-1, 1]^d`.
    pub shape: Option<CompactDomain>,
    pub rule: QuadratureRule,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { shape: None, rule: QuadratureRule::LowDiscrepancy { nodes: 64 } }
    }
}

impl DomainSection {
    pub fn domain(&self, d: usize) -> CompactDomain {
        self.shape.clone().unwrap_or(CompactDomain::Box { lo: vec![-1.0; d], hi: vec![1.0; d] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Right-hand side of the planned inequality.
    pub rhs: f64,
    /// Constant `c` of the step floor `N ≥ 16cT`.
    pub lipschitz: f64,
    pub horizon: f64,
    pub perturbed_dim: Option<usize>,
    pub split: f64,
    pub max_steps: usize,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.01,
            alpha: 1.0,
            rhs: 1.0,
            lipschitz: 0.0,
            horizon: 1.0,
            perturbed_dim: None,
            split: 0.5,
            max_steps: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbSection {
    /// Size of the constant shifts of `μ`, `σ`, `f`, `g`.
    pub eps: f64,
    /// Coupled paths checked against the pathwise bounds.
    pub paths: usize,
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self { eps: 0.01, paths: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSection {
    /// Approximate number of probe points in dimension two.
    pub points: usize,
}

impl Default for GrowthSection {
    fn default() -> Self {
        Self { points: 2_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    pub fixture: String,
    pub dim: usize,
    pub samples: usize,
    pub steps: usize,
    pub horizon: f64,
    /// Random inputs at which the network is compared with the simulator.
    pub checks: usize,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self { fixture: "tanh-random".into(), dim: 2, samples: 2, steps: 3, horizon: 1.0, checks: 100 }
    }
}

/// Embedded assertions; unset entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertSection {
    /// Largest admissible `|estimate − exact| / std_error`.
    pub max_z: Option<f64>,
    pub max_slope: Option<f64>,
    pub min_r2: Option<f64>,
    /// Expected slope and tolerance of the sample sweep.
    pub slope: Option<f64>,
    pub slope_tol: Option<f64>,
    pub max_error: Option<f64>,
    /// Network against simulator, relative.
    pub max_rel_diff: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The configuration with every default spelled out, headed by the subcommand.
    pub fn resolved(&self, command: &str) -> Result<String, CliError> {
        let body = toml::to_string(self).map_err(|e| CliError::Io(format!("cannot serialize config: {e}")))?;
        Ok(format!("# resolved configuration of `sobolev {command}`\ncommand = \"{command}\"\n\n{body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse("[run]\nseed = 3\n").unwrap();
        assert_eq!(c.run.seed, 3);
        assert_eq!(c.problem.fixture, "heat-quadratic");
        assert_eq!(c.sweep.steps, vec![4, 8, 16, 32, 64]);
    }

    #[test]
    fn missing_seed_names_the_field() {
        let err = ExperimentConfig::parse("[run]\noutput_dir = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let err = ExperimentConfig::parse("[run]\nseed = 1\n\n[estimator]\nsamples = 10\nsteeps = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("steeps") && msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "[run]\nseed = 9\n[domain]\nshape = { kind = \"ball\", center = [0.0, 0.0], radius = 2.0 }\nrule = { kind = \"tensor-grid\", points = 5 }\n";
        let c = ExperimentConfig::parse(text).unwrap();
        let resolved = c.resolved("solve").unwrap();
        let body: String = resolved.lines().skip(2).collect::<Vec<_>>().join("\n");
        assert_eq!(ExperimentConfig::parse(&body).unwrap(), c);
    }
}
