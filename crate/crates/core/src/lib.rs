//! Monte Carlo Euler approximation of linear parabolic PDEs
//!
//! ```text
//! ∂_t u + ∇uᵀμ + ½ Tr(σσᵀ ∇²u) + g = 0,   u(T, ·) = f
//! ```
//!
//! together with their spatial gradients, computed through the tangent
//! (augmented-derivative) process of the Euler scheme.
//!
//! Besides the estimators the crate ships the tooling used to check the
//! error behaviour of the method empirically: polynomial growth measures and
//! their calculus, pathwise perturbation bounds, L² / Sobolev error
//! functionals, and an exporter that writes a frozen Monte Carlo Euler
//! realization as an explicit feed-forward network.

pub mod accuracy;
pub mod coeffs;
pub mod error;
pub mod euler;
pub mod growth;
pub mod mces;
pub mod netexport;
pub mod perturb;
pub mod problems;

pub use coeffs::{lift_augmented, lift_coefficient_set, CoefficientSet, SmoothMap, Tensor};
pub use error::{Error, Result};
pub use euler::{NoiseStream, PathBundle, TimeGrid};
pub use growth::{GrowthEstimate, HoelderEstimate, ProbeSpec};
pub use mces::{EstimatorConfig, SobolevEstimate};
pub use netexport::NetSpec;
pub use problems::BenchmarkProblem;
