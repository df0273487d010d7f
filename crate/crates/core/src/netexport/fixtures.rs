use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::build::CoefficientNets;
use super::net::{Activation, Layer, NetSpec, Rho};
use crate::error::{Error, Result};

pub const NET_FIXTURES: [&str; 3] = ["ou-affine", "tanh-random", "relu-random"];

/// Hidden width of the random fixtures.
pub const RANDOM_WIDTH: usize = 6;

fn affine_net(rho: Rho, outputs: usize, inputs: usize, w: &[f64], bias: Vec<f64>) -> Result<NetSpec> {
    NetSpec::new(rho, vec![Layer::dense(outputs, inputs, w, bias, vec![Activation::Identity; outputs])?])
}

/// Exact one-layer networks of the Ornstein–Uhlenbeck fixture:
/// `ν = −θ x`, `τ = s I`, `F = aᵀ x`, `G = 0`.
pub fn ou_nets(d: usize, theta: f64, s: f64, a: &[f64]) -> Result<CoefficientNets> {
    if a.len() != d {
        return Err(Error::DimensionMismatch(format!("terminal functional has {} entries, expected {d}", a.len())));
    }
    let mut drift = vec![0.0; d * d];
    let mut diffusion = vec![0.0; d * d];
    for i in 0..d {
        drift[i * d + i] = -theta;
        diffusion[i * d + i] = s;
    }
    Ok(CoefficientNets {
        terminal: affine_net(Rho::Relu, 1, d, a, vec![0.0])?,
        running: vec![affine_net(Rho::Relu, 1, d, &vec![0.0; d], vec![0.0])?],
        drift: vec![affine_net(Rho::Relu, d, d, &drift, vec![0.0; d])?],
        diffusion: vec![affine_net(Rho::Relu, d * d, d, &vec![0.0; d * d * d], diffusion)?],
    })
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) * 2.0 - 1.0
}

/// Dense network `inputs → width → ⋯ → width → outputs` with `depth` layers,
/// weights uniform in `±scale/√fan_in` and biases uniform in `±scale/2`.
pub fn random_net(rho: Rho, inputs: usize, outputs: usize, width: usize, depth: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<NetSpec> {
    if depth == 0 {
        return Err(Error::InvalidArgument("network depth must be positive".into()));
    }
    let mut layers = Vec::with_capacity(depth);
    let mut fan_in = inputs;
    for l in 0..depth {
        let last = l + 1 == depth;
        let out = if last { outputs } else { width };
        let s = scale / (fan_in as f64).sqrt();
        let w: Vec<f64> = (0..out * fan_in).map(|_| s * uniform(rng)).collect();
        let b: Vec<f64> = (0..out).map(|_| 0.5 * scale * uniform(rng)).collect();
        let act = if last { Activation::Identity } else { Activation::Rho };
        layers.push(Layer::dense(out, fan_in, &w, b, vec![act; out])?);
        fan_in = out;
    }
    NetSpec::new(rho, layers)
}

/// Random coefficient networks of common depth; the time-dependent families
/// get one network per step, all with the same architecture.
pub fn random_nets(rho: Rho, d: usize, o: usize, depth: usize, steps: usize, seed: u64) -> Result<CoefficientNets> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = RANDOM_WIDTH;
    let terminal = random_net(rho, d, o, w, depth, 1.0, &mut rng)?;
    let mut family = |outputs: usize, scale: f64| -> Result<Vec<NetSpec>> {
        (0..steps).map(|_| random_net(rho, d, outputs, w, depth, scale, &mut rng)).collect()
    };
    let running = family(o, 1.0)?;
    let drift = family(d, 0.5)?;
    let diffusion = family(d * d, 0.3)?;
    Ok(CoefficientNets { terminal, running, drift, diffusion })
}

/// Named coefficient networks on `ℝ^d`: `ou-affine` with `θ = s = 1` and
/// `a = e₁`, or depth-two random networks for `steps` time slices.
pub fn net_fixture(name: &str, d: usize, steps: usize, seed: u64) -> Result<CoefficientNets> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    match name {
        "ou-affine" => {
            let mut a = vec![0.0; d];
            a[0] = 1.0;
            ou_nets(d, 1.0, 1.0, &a)
        }
        "tanh-random" => random_nets(Rho::Tanh, d, 1, 2, steps, seed),
        "relu-random" => random_nets(Rho::Relu, d, 1, 2, steps, seed),
        _ => Err(Error::UnknownFixture(name.to_string())),
    }
}
