use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed nonlinearity `ρ` applied at non-identity nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rho {
    Relu,
    Tanh,
}

impl Rho {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Rho::Relu => z.max(0.0),
            Rho::Tanh => z.tanh(),
        }
    }

    /// `ρ'(z)`, taking `ρ'(0) = 0` for ReLU.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Rho::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Rho::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

/// Per-node activation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Rho,
    Identity,
}

/// Affine map `z = W y + b` followed by the tagged activation of each output node.
///
/// `weights` holds the non-zero entries `(row, column, value)` of `W`, sorted
/// by row and then column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<(usize, usize, f64)>,
    pub bias: Vec<f64>,
    pub activation: Vec<Activation>,
}

impl Layer {
    /// From a dense row-major `outputs × inputs` matrix; zero entries are dropped.
    pub fn dense(outputs: usize, inputs: usize, w: &[f64], bias: Vec<f64>, activation: Vec<Activation>) -> Result<Self> {
        if w.len() != outputs * inputs {
            return Err(Error::DimensionMismatch(format!(
                "{} weights do not fill a {outputs} × {inputs} matrix",
                w.len()
            )));
        }
        let mut entries = BTreeMap::new();
        for r in 0..outputs {
            for c in 0..inputs {
                entries.insert((r, c), w[r * inputs + c]);
            }
        }
        Ok(Self::from_entries(outputs, inputs, entries, bias, activation))
    }

    /// From accumulated entries; zero values are dropped.
    pub fn from_entries(
        outputs: usize,
        inputs: usize,
        entries: BTreeMap<(usize, usize), f64>,
        bias: Vec<f64>,
        activation: Vec<Activation>,
    ) -> Self {
        let weights = entries.into_iter().filter(|&(_, v)| v != 0.0).map(|((r, c), v)| (r, c, v)).collect();
        Self { inputs, outputs, weights, bias, activation }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::DimensionMismatch(format!("layer {index}: {msg}")));
        if self.bias.len() != self.outputs || self.activation.len() != self.outputs {
            return bad(format!(
                "{} outputs but {} biases and {} activation tags",
                self.outputs,
                self.bias.len(),
                self.activation.len()
            ));
        }
        if let Some(&(r, c, _)) = self.weights.iter().find(|&&(r, c, _)| r >= self.outputs || c >= self.inputs) {
            return bad(format!("weight ({r}, {c}) outside {} × {}", self.outputs, self.inputs));
        }
        if self.weights.windows(2).any(|w| (w[0].0, w[0].1) >= (w[1].0, w[1].1)) {
            return bad("weights are not sorted by (row, column) without repeats".into());
        }
        Ok(())
    }

    /// `W y + b`, before activation.
    pub fn affine(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &(r, c, v) in &self.weights {
            out[r] += v * y[c];
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().filter(|w| w.2 != 0.0).count() + self.bias.iter().filter(|&&b| b != 0.0).count()
    }
}

/// Feed-forward network `A_D ∘ ρ ∘ ⋯ ∘ ρ ∘ A_1` with identity nodes allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub rho: Rho,
    pub layers: Vec<Layer>,
}

/// On-disk wrapper identifying the layout.
#[derive(Serialize, Deserialize)]
struct NetFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    net: NetSpec,
}

pub const NET_FORMAT: &str = "mces-netspec";
pub const NET_FORMAT_VERSION: u32 = 1;

impl NetSpec {
    pub fn new(rho: Rho, layers: Vec<Layer>) -> Result<Self> {
        let (Some(first), Some(last)) = (layers.first(), layers.last()) else {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        };
        let net = Self { input_dim: first.inputs, output_dim: last.outputs, rho, layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let (Some(first), Some(last)) = (self.layers.first(), self.layers.last()) else {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        };
        if first.inputs != self.input_dim || last.outputs != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "network declared {} → {}, layers give {} → {}",
                self.input_dim, self.output_dim, first.inputs, last.outputs
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(i)?;
            if i + 1 < self.layers.len() && self.layers[i + 1].inputs != l.outputs {
                return Err(Error::DimensionMismatch(format!(
                    "layer {i} has {} outputs, layer {} expects {} inputs",
                    l.outputs,
                    i + 1,
                    self.layers[i + 1].inputs
                )));
            }
        }
        if last.activation.iter().any(|&a| a != Activation::Identity) {
            return Err(Error::InvalidArgument("output layer nodes must be identity nodes".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths and activation tags; two networks with equal
    /// architecture differ only in their parameter values.
    pub fn architecture(&self) -> Vec<(usize, usize, Vec<Activation>)> {
        self.layers.iter().map(|l| (l.inputs, l.outputs, l.activation.clone())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetFile { format: NET_FORMAT.into(), version: NET_FORMAT_VERSION, net: self.clone() };
        serde_json::to_string_pretty(&file).map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("bad network file: {e}")))?;
        if file.format != NET_FORMAT || file.version != NET_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "network file is `{}` v{}, expected `{NET_FORMAT}` v{NET_FORMAT_VERSION}",
                file.format, file.version
            )));
        }
        file.net.validate()?;
        Ok(file.net)
    }
}

/// Forward pass.
pub fn eval_network(ns: &NetSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != ns.input_dim {
        return Err(Error::DimensionMismatch(format!("network expects {} inputs, got {}", ns.input_dim, x.len())));
    }
    let mut y = x.to_vec();
    for l in &ns.layers {
        let mut z = vec![0.0; l.outputs];
        l.affine(&y, &mut z);
        for (v, a) in z.iter_mut().zip(&l.activation) {
            if *a == Activation::Rho {
                *v = ns.rho.apply(*v);
            }
        }
        y = z;
    }
    Ok(y)
}

/// Forward pass and Jacobian `J[i·o + k] = ∂ out_k / ∂ x_i`.
pub fn eval_with_jacobian(ns: &NetSpec, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = ns.input_dim;
    if x.len() != d {
        return Err(Error::DimensionMismatch(format!("network expects {d} inputs, got {}", x.len())));
    }
    let mut y = x.to_vec();
    // jac[node * d + i] = ∂ node / ∂ x_i
    let mut jac = vec![0.0; d * d];
    for i in 0..d {
        jac[i * d + i] = 1.0;
    }
    for l in &ns.layers {
        let mut z = vec![0.0; l.outputs];
        l.affine(&y, &mut z);
        let mut jz = vec![0.0; l.outputs * d];
        for &(r, c, v) in &l.weights {
            for i in 0..d {
                jz[r * d + i] += v * jac[c * d + i];
            }
        }
        for (r, a) in l.activation.iter().enumerate() {
            if *a == Activation::Rho {
                let s = ns.rho.derivative(z[r]);
                z[r] = ns.rho.apply(z[r]);
                jz[r * d..(r + 1) * d].iter_mut().for_each(|v| *v *= s);
            }
        }
        y = z;
        jac = jz;
    }
    let o = ns.output_dim;
    let mut out = vec![0.0; d * o];
    for k in 0..o {
        for i in 0..d {
            out[i * o + k] = jac[k * d + i];
        }
    }
    Ok((y, out))
}

/// Evaluates a row-major batch of inputs in parallel.
pub fn eval_batch(ns: &NetSpec, xs: &[f64]) -> Result<Vec<f64>> {
    let d = ns.input_dim;
    if d == 0 || !xs.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!("{} values do not split into inputs of size {d}", xs.len())));
    }
    let rows: Vec<Result<Vec<f64>>> = xs.par_chunks(d).map(|x| eval_network(ns, x)).collect();
    let mut out = Vec::with_capacity(xs.len() / d * ns.output_dim);
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Number of non-zero weights and biases.
pub fn param_count(ns: &NetSpec) -> usize {
    ns.layers.iter().map(Layer::param_count).sum()
}

/// Merges every layer whose nodes are all identity nodes into the next layer.
pub fn collapse_identity(ns: &NetSpec) -> NetSpec {
    let mut layers: Vec<Layer> = Vec::with_capacity(ns.layers.len());
    for l in &ns.layers {
        match layers.last() {
            Some(prev) if prev.activation.iter().all(|&a| a == Activation::Identity) => {
                let prev = layers.pop().expect("checked");
                layers.push(compose(&prev, l));
            }
            _ => layers.push(l.clone()),
        }
    }
    NetSpec { input_dim: ns.input_dim, output_dim: ns.output_dim, rho: ns.rho, layers }
}

/// `second ∘ first` for an identity-activated `first`.
fn compose(first: &Layer, second: &Layer) -> Layer {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); first.outputs];
    for &(r, c, v) in &first.weights {
        rows[r].push((c, v));
    }
    let mut entries = BTreeMap::new();
    let mut bias = second.bias.clone();
    for &(r, mid, v) in &second.weights {
        bias[r] += v * first.bias[mid];
        for &(c, w) in &rows[mid] {
            *entries.entry((r, c)).or_insert(0.0) += v * w;
        }
    }
    Layer::from_entries(second.outputs, first.inputs, entries, bias, second.activation.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Activation::{Identity as I, Rho as R};

    fn affine(w: &[f64], b: Vec<f64>, inputs: usize) -> Layer {
        let out = b.len();
        Layer::dense(out, inputs, w, b, vec![I; out]).unwrap()
    }

    #[test]
    fn single_affine_layer() {
        let net = NetSpec::new(Rho::Relu, vec![affine(&[1.0, 2.0, -1.0, 0.5], vec![0.25, -3.0], 2)]).unwrap();
        assert_eq!(eval_network(&net, &[2.0, 4.0]).unwrap(), vec![10.25, -3.0]);
        assert_eq!(param_count(&net), 6);
    }

    #[test]
    fn zero_network_has_no_parameters() {
        let net = NetSpec::new(Rho::Tanh, vec![affine(&[0.0; 6], vec![0.0; 2], 3)]).unwrap();
        assert_eq!(param_count(&net), 0);
        assert_eq!(eval_network(&net, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_chain_collapses_to_product() {
        let l1 = affine(&[1.0, 2.0, 0.0, 1.0, -1.0, 3.0], vec![0.5, 0.0], 3);
        let l2 = affine(&[2.0, 0.0, 1.0, 1.0], vec![1.0, -1.0], 2);
        let l3 = affine(&[0.5, -0.25], vec![0.0], 2);
        let net = NetSpec::new(Rho::Relu, vec![l1, l2, l3]).unwrap();
        let flat = collapse_identity(&net);
        assert_eq!(flat.depth(), 1);
        // W = [0.5 −0.25]·[2 0; 1 1]·[1 2 0; 1 −1 3] = [0.5 1.75 −0.75]
        let w: Vec<f64> = flat.layers[0].weights.iter().map(|e| e.2).collect();
        assert_eq!(w, vec![0.5, 1.75, -0.75]);
        for x in [[0.3, -1.0, 2.0], [5.0, 1.0, -7.0]] {
            let a = eval_network(&net, &x).unwrap()[0];
            let b = eval_network(&flat, &x).unwrap()[0];
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn rho_nodes_block_collapse() {
        let l1 = Layer::dense(2, 1, &[1.0, -1.0], vec![0.0, 0.0], vec![R, I]).unwrap();
        let l2 = affine(&[1.0, 1.0], vec![0.0], 2);
        let net = NetSpec::new(Rho::Relu, vec![l1, l2]).unwrap();
        assert_eq!(collapse_identity(&net).depth(), 2);
        assert_eq!(eval_network(&net, &[-2.0]).unwrap(), vec![2.0]);
        assert_eq!(eval_network(&net, &[3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let l1 = Layer::dense(3, 2, &[0.3, -1.2, 0.8, 0.1, -0.5, 0.9], vec![0.1, 0.0, -0.2], vec![R, R, I]).unwrap();
        let l2 = affine(&[1.0, -2.0, 0.5, 0.3, 0.3, 0.3], vec![0.0, 1.0], 3);
        let net = NetSpec::new(Rho::Tanh, vec![l1, l2]).unwrap();
        let x = [0.4, -0.7];
        let (_, j) = eval_with_jacobian(&net, &x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fp = eval_network(&net, &xp).unwrap();
            let fm = eval_network(&net, &xm).unwrap();
            for k in 0..2 {
                assert!(((fp[k] - fm[k]) / (2.0 * h) - j[i * 2 + k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn malformed_networks_rejected() {
        let l1 = affine(&[1.0, 2.0], vec![0.0, 0.0], 1);
        let l2 = affine(&[1.0, 2.0, 3.0], vec![0.0], 3);
        assert!(NetSpec::new(Rho::Relu, vec![l1.clone(), l2]).is_err());
        let hidden_out = Layer::dense(1, 1, &[1.0], vec![0.0], vec![R]).unwrap();
        assert!(NetSpec::new(Rho::Relu, vec![hidden_out]).is_err());
        let net = NetSpec::new(Rho::Relu, vec![l1]).unwrap();
        assert!(eval_network(&net, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let l1 = Layer::dense(2, 1, &[1.0, -1.0], vec![0.5, 0.0], vec![R, I]).unwrap();
        let l2 = affine(&[1.0, 1.0], vec![0.0], 2);
        let net = NetSpec::new(Rho::Relu, vec![l1, l2]).unwrap();
        let s = net.to_json().unwrap();
        assert_eq!(NetSpec::from_json(&s).unwrap(), net);
        assert!(NetSpec::from_json(&s.replace(NET_FORMAT, "other")).is_err());
    }
}
