//! Polynomial growth measures, the generator operators, and executable
//! checks of the growth calculus.

mod battery;
pub mod calculus;
mod constant;
mod generator;
mod measure;
mod probe;

pub use battery::{calculus_battery, run_battery, BatteryCase, BatteryResult};
pub use calculus::{verify_calculus, CalculusCheck, CalculusFixture, CalculusReport, InequalityOutcome};
pub use constant::{cumbersome_constant, cumbersome_inputs, CumbersomeInputs};
pub use generator::{generator_apply, GeneratorMap, GeneratorVariant};
pub use measure::{
    growth_at, growth_sum, hoelder_growth, map_points, time_derivative_growth, EstimateMode, GrowthEstimate,
    HoelderEstimate,
};
pub use probe::{PointSet, ProbeSpec};
