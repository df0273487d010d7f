//! Shared fixtures for the criterion benches in `benches/`.

use std::collections::BTreeMap;

use sobolev_core::netexport::{build_mces_network, net_fixture, FrozenRealization};
use sobolev_core::problems::lookup;
use sobolev_core::{BenchmarkProblem, NetSpec};

/// Dimensions swept by the simulation benches.
pub const DIMS: [usize; 3] = [1, 10, 25];

pub fn problem(name: &str, d: usize) -> BenchmarkProblem {
    let params = BTreeMap::from([("d".to_string(), d as f64), ("T".to_string(), 1.0)]);
    lookup(name, &params).expect("bench fixture")
}

/// `0.1·(1, −1, 1, …)`, away from the symmetry points of the trig fixtures.
pub fn start_point(d: usize) -> Vec<f64> {
    (0..d).map(|i| if i % 2 == 0 { 0.1 } else { -0.1 }).collect()
}

/// Exported network of `samples` chains and `steps` Euler blocks on random tanh nets.
pub fn exported_network(d: usize, samples: usize, steps: usize) -> NetSpec {
    let nets = net_fixture("tanh-random", d, steps, 1).expect("net fixture");
    let fr = FrozenRealization::new(1, samples, steps, 1.0, nets).expect("frozen realization");
    build_mces_network(&fr).expect("export").0
}
