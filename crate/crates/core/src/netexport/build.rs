use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::map::NetworkMap;
use super::net::{param_count, Activation, Layer, NetSpec, Rho};
use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::euler::{NoiseSource, NoiseStream, TimeGrid};
use crate::mces::EstimatorConfig;

/// Coefficient networks `F`, `G(t_n, ·)`, `ν(t_n, ·)`, `τ(t_n, ·)`.
///
/// The time-dependent ones hold either one network for every `t_n` or one per
/// grid interval; `τ` returns the row-major `d × m` diffusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientNets {
    pub terminal: NetSpec,
    pub running: Vec<NetSpec>,
    pub drift: Vec<NetSpec>,
    pub diffusion: Vec<NetSpec>,
}

impl CoefficientNets {
    pub fn dim(&self) -> usize {
        self.terminal.input_dim
    }

    pub fn out_dim(&self) -> usize {
        self.terminal.output_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.first().map_or(0, |n| n.output_dim / self.dim().max(1))
    }

    /// Common depth `D`, checking shapes, depths, and that the architecture
    /// of each family does not change with `t_n`.
    pub fn validate(&self, steps: usize) -> Result<usize> {
        let d = self.dim();
        let o = self.out_dim();
        let depth = self.terminal.depth();
        self.terminal.validate()?;
        let families: [(&str, &[NetSpec], usize); 3] =
            [("G", &self.running, o), ("ν", &self.drift, d), ("τ", &self.diffusion, 0)];
        for (name, nets, out) in families {
            let Some(first) = nets.first() else {
                return Err(Error::InvalidArgument(format!("no network given for {name}")));
            };
            if nets.len() != 1 && nets.len() != steps {
                return Err(Error::DimensionMismatch(format!("{name} has {} networks for {steps} time steps", nets.len())));
            }
            let arch = first.architecture();
            for (n, net) in nets.iter().enumerate() {
                net.validate()?;
                if net.architecture() != arch {
                    return Err(Error::InvalidArgument(format!(
                        "architecture of {name} changes between t_0 and t_{n}"
                    )));
                }
            }
            if first.input_dim != d || (out > 0 && first.output_dim != out) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} maps ℝ^{} to ℝ^{}, expected ℝ^{d} to ℝ^{}",
                    first.input_dim,
                    first.output_dim,
                    if out > 0 { out.to_string() } else { format!("{d}·m") }
                )));
            }
            if first.depth() != depth {
                return Err(Error::InvalidArgument(format!(
                    "depth of {name} is {}, the terminal network has depth {depth}",
                    first.depth()
                )));
            }
        }
        let rho = self.rho();
        if let Some(n) = self.all().filter(|n| uses_rho(n)).find(|n| n.rho != rho) {
            return Err(Error::InvalidArgument(format!(
                "coefficient networks mix nonlinearities {:?} and {rho:?}",
                n.rho
            )));
        }
        let tau = &self.diffusion[0];
        if tau.output_dim == 0 || !tau.output_dim.is_multiple_of(d) {
            return Err(Error::DimensionMismatch(format!("τ has {} outputs, not a d × m matrix with d = {d}", tau.output_dim)));
        }
        Ok(depth)
    }

    fn all(&self) -> impl Iterator<Item = &NetSpec> {
        [&self.terminal].into_iter().chain(&self.running).chain(&self.drift).chain(&self.diffusion)
    }

    /// Nonlinearity of the first network that has nonlinear nodes.
    pub fn rho(&self) -> Rho {
        self.all().find(|n| uses_rho(n)).unwrap_or(&self.terminal).rho
    }

    fn at(nets: &[NetSpec], n: usize) -> &NetSpec {
        &nets[if nets.len() == 1 { 0 } else { n }]
    }

    /// Largest count over the time slices of each family: `(F, G, ν, τ)`.
    pub fn counts(&self) -> [usize; 4] {
        let max = |nets: &[NetSpec]| nets.iter().map(param_count).max().unwrap_or(0);
        [param_count(&self.terminal), max(&self.running), max(&self.drift), max(&self.diffusion)]
    }
}

fn uses_rho(n: &NetSpec) -> bool {
    n.layers.iter().any(|l| l.activation.contains(&Activation::Rho))
}

/// One realization of the Monte Carlo Euler scheme with its Brownian
/// increments fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenRealization {
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    pub horizon: f64,
    pub noise_dim: usize,
    /// `ΔW` with layout `[sample][step][component]`.
    pub increments: Vec<f64>,
    pub nets: CoefficientNets,
}

impl FrozenRealization {
    /// Freezes the increments of samples `0..samples` of `NoiseStream::new(seed)`.
    pub fn new(seed: u64, samples: usize, steps: usize, horizon: f64, nets: CoefficientNets) -> Result<Self> {
        if samples == 0 || steps == 0 {
            return Err(Error::InvalidArgument("need at least one sample and one step".into()));
        }
        nets.validate(steps)?;
        let m = nets.noise_dim();
        let grid = TimeGrid::new(0.0, horizon, steps)?;
        let noise = NoiseStream::new(seed);
        let mut increments = vec![0.0; samples * steps * m];
        for (s, chunk) in increments.chunks_mut(steps * m).enumerate() {
            noise.fill_increments(s as u64, &grid, m, chunk);
        }
        Ok(Self { seed, samples, steps, horizon, noise_dim: m, increments, nets })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.horizon, self.steps)
    }

    pub fn increment(&self, sample: usize, step: usize) -> &[f64] {
        let m = self.noise_dim;
        let at = (sample * self.steps + step) * m;
        &self.increments[at..at + m]
    }

    /// The networks as coefficients `(ν, τ, F, G)` for the direct simulator.
    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let grid = self.grid()?;
        let n = &self.nets;
        CoefficientSet::new(
            Arc::new(NetworkMap::piecewise(n.drift.clone(), grid, "ν")?),
            Arc::new(NetworkMap::piecewise(n.diffusion.clone(), grid, "τ")?),
            Arc::new(NetworkMap::constant_in_time(n.terminal.clone(), "F")),
            Arc::new(NetworkMap::piecewise(n.running.clone(), grid, "G")?),
            self.horizon,
        )
    }

    /// Estimator settings that replay this realization.
    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig::new(self.samples, self.steps, self.seed)
    }
}

/// What a block of layers computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageKind {
    /// Euler step from `t_n` to `t_{n+1}` for every chain.
    Euler { step: usize },
    /// Terminal cost and the average over chains.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub kind: StageKind,
    pub layers: Range<usize>,
}

/// Block structure of an exported network: the stages and, per layer, the
/// chain (sample index) each output node belongs to. Nodes of the output
/// layer belong to no chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub stages: Vec<Stage>,
    pub node_chain: Vec<Vec<Option<usize>>>,
}

/// Node offsets of one chain in the previous layer.
#[derive(Clone, Default)]
struct ChainNodes {
    x: Option<usize>,
    acc: Option<usize>,
    hidden: Vec<usize>,
}

/// Builds the network `x ↦ (1/M) Σ_m [F(𝓔_m(x)_T) + (T/N) Σ_n G(t_n, 𝓔_m(x)_{t_n})]`
/// of a frozen realization.
///
/// Each chain carries its Euler state `X` (width `d`) and the accumulated
/// running cost (width `o`) through identity nodes while the coefficient
/// subnetworks of the current step evaluate in parallel. The last layer of a
/// step folds `Δt`, the frozen `ΔW`, and the skip connections into one
/// affine map; the last layer of the network folds `1/M` and the sum over
/// chains.
pub fn build_mces_network(fr: &FrozenRealization) -> Result<(NetSpec, Layout)> {
    let nets = &fr.nets;
    let depth = nets.validate(fr.steps)?;
    let d = nets.dim();
    let o = nets.out_dim();
    let m = nets.noise_dim();
    let chains = fr.samples;
    if fr.increments.len() != chains * fr.steps * m || fr.noise_dim != m {
        return Err(Error::DimensionMismatch(format!(
            "{} frozen increments for {chains} samples, {} steps, noise dimension {m}",
            fr.increments.len(),
            fr.steps
        )));
    }
    let dt = fr.horizon / fr.steps as f64;

    let mut layers = Vec::new();
    let mut node_chain = Vec::new();
    let mut stages = Vec::new();
    // Every chain reads the network input.
    let mut prev = vec![ChainNodes { x: Some(0), ..Default::default() }; chains];
    let mut prev_width = d;

    for step in 0..fr.steps {
        let subs = [
            CoefficientNets::at(&nets.drift, step),
            CoefficientNets::at(&nets.diffusion, step),
            CoefficientNets::at(&nets.running, step),
        ];
        let start = layers.len();
        for j in 0..depth {
            let last = j + 1 == depth;
            let mut entries = BTreeMap::new();
            let mut bias = Vec::new();
            let mut act = Vec::new();
            let mut owner = Vec::new();
            let mut next = Vec::with_capacity(chains);
            for (c, p) in prev.iter().enumerate() {
                let px = p.x.expect("state lane present");
                let src = |s: usize| if j == 0 { px } else { p.hidden[s] };
                let base = bias.len();
                if last {
                    // X_{n+1} = X + Δt ν + τ ΔW, acc_{n+1} = acc + Δt G
                    let dw = fr.increment(c, step);
                    bias.resize(base + d + o, 0.0);
                    for i in 0..d {
                        *entries.entry((base + i, px + i)).or_insert(0.0) += 1.0;
                    }
                    if let Some(pa) = p.acc {
                        for k in 0..o {
                            *entries.entry((base + d + k, pa + k)).or_insert(0.0) += 1.0;
                        }
                    }
                    let [nu, tau, g] = subs.map(|n| &n.layers[j]);
                    for i in 0..d {
                        bias[base + i] += dt * nu.bias[i];
                        for q in 0..m {
                            bias[base + i] += dw[q] * tau.bias[i * m + q];
                        }
                    }
                    for k in 0..o {
                        bias[base + d + k] += dt * g.bias[k];
                    }
                    for &(r, col, v) in &nu.weights {
                        *entries.entry((base + r, src(0) + col)).or_insert(0.0) += dt * v;
                    }
                    for &(r, col, v) in &tau.weights {
                        *entries.entry((base + r / m, src(1) + col)).or_insert(0.0) += dw[r % m] * v;
                    }
                    for &(r, col, v) in &g.weights {
                        *entries.entry((base + d + r, src(2) + col)).or_insert(0.0) += dt * v;
                    }
                    act.extend(std::iter::repeat_n(Activation::Identity, d + o));
                    next.push(ChainNodes { x: Some(base), acc: Some(base + d), hidden: vec![] });
                } else {
                    let mut cn = ChainNodes { x: Some(base), ..Default::default() };
                    for i in 0..d {
                        entries.insert((base + i, px + i), 1.0);
                    }
                    bias.resize(base + d, 0.0);
                    if let Some(pa) = p.acc {
                        cn.acc = Some(bias.len());
                        for k in 0..o {
                            entries.insert((bias.len() + k, pa + k), 1.0);
                        }
                        bias.resize(bias.len() + o, 0.0);
                    }
                    act.resize(bias.len(), Activation::Identity);
                    for (s, sub) in subs.iter().enumerate() {
                        let l = &sub.layers[j];
                        let at = bias.len();
                        for &(r, col, v) in &l.weights {
                            entries.insert((at + r, src(s) + col), v);
                        }
                        bias.extend_from_slice(&l.bias);
                        act.extend_from_slice(&l.activation);
                        cn.hidden.push(at);
                    }
                    next.push(cn);
                }
                owner.resize(bias.len(), Some(c));
            }
            let width = bias.len();
            layers.push(Layer::from_entries(width, prev_width, entries, bias, act));
            node_chain.push(owner);
            prev = next;
            prev_width = width;
        }
        stages.push(Stage { kind: StageKind::Euler { step }, layers: start..layers.len() });
    }

    let f = &nets.terminal;
    let start = layers.len();
    let inv_m = 1.0 / chains as f64;
    for j in 0..depth {
        let last = j + 1 == depth;
        let mut entries = BTreeMap::new();
        let mut bias = Vec::new();
        let mut act = Vec::new();
        let mut owner = Vec::new();
        let mut next = Vec::with_capacity(chains);
        let l = &f.layers[j];
        if last {
            bias = l.bias.clone();
            act = vec![Activation::Identity; o];
            owner = vec![None; o];
        }
        for (c, p) in prev.iter().enumerate() {
            let src = if j == 0 { p.x.expect("state lane present") } else { p.hidden[0] };
            let pa = p.acc.expect("running cost lane present");
            if last {
                for k in 0..o {
                    *entries.entry((k, pa + k)).or_insert(0.0) += inv_m;
                }
                for &(r, col, v) in &l.weights {
                    *entries.entry((r, src + col)).or_insert(0.0) += inv_m * v;
                }
            } else {
                let base = bias.len();
                for k in 0..o {
                    entries.insert((base + k, pa + k), 1.0);
                }
                bias.resize(base + o, 0.0);
                act.resize(base + o, Activation::Identity);
                let at = bias.len();
                for &(r, col, v) in &l.weights {
                    entries.insert((at + r, src + col), v);
                }
                bias.extend_from_slice(&l.bias);
                act.extend_from_slice(&l.activation);
                owner.resize(bias.len(), Some(c));
                next.push(ChainNodes { x: None, acc: Some(base), hidden: vec![at] });
            }
        }
        let width = bias.len();
        layers.push(Layer::from_entries(width, prev_width, entries, bias, act));
        node_chain.push(owner);
        prev = next;
        prev_width = width;
    }
    stages.push(Stage { kind: StageKind::Terminal, layers: start..layers.len() });

    let net = NetSpec::new(nets.rho(), layers)?;
    Ok((net, Layout { stages, node_chain }))
}

/// `M (𝒫(F) + N [𝒫(G) + 𝒫(ν) + 𝒫(τ) + (d + o) D])`, with each time-dependent
/// count taken as its maximum over `t_n`.
pub fn count_bound(fr: &FrozenRealization) -> Result<usize> {
    let depth = fr.nets.validate(fr.steps)?;
    let [pf, pg, pnu, ptau] = fr.nets.counts();
    let lanes = (fr.nets.dim() + fr.nets.out_dim()) * depth;
    Ok(fr.samples * (pf + fr.steps * (pg + pnu + ptau + lanes)))
}
