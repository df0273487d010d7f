use std::sync::Arc;

use super::net::{eval_network, eval_with_jacobian, NetSpec};
use crate::coeffs::SmoothMap;
use crate::error::{Error, Result};
use crate::euler::TimeGrid;

/// A network, or one network per grid interval, seen as a coefficient function.
///
/// With several networks, `h(t, ·)` is network `n` for `t ∈ [t_n, t_{n+1})`
/// (the last one also covers `T`). Derivatives up to first order are exact
/// for tanh networks and almost everywhere for ReLU networks.
#[derive(Debug, Clone)]
pub struct NetworkMap {
    nets: Arc<Vec<NetSpec>>,
    grid: Option<TimeGrid>,
    name: String,
}

impl NetworkMap {
    pub fn constant_in_time(net: NetSpec, name: &str) -> Self {
        Self { nets: Arc::new(vec![net]), grid: None, name: name.into() }
    }

    /// `nets.len()` must be 1 or `grid.steps()`.
    pub fn piecewise(nets: Vec<NetSpec>, grid: TimeGrid, name: &str) -> Result<Self> {
        let Some(first) = nets.first() else {
            return Err(Error::InvalidArgument(format!("no network given for `{name}`")));
        };
        if nets.len() != 1 && nets.len() != grid.steps() {
            return Err(Error::DimensionMismatch(format!(
                "`{name}` has {} networks for {} grid intervals",
                nets.len(),
                grid.steps()
            )));
        }
        if nets.iter().any(|n| n.input_dim != first.input_dim || n.output_dim != first.output_dim) {
            return Err(Error::DimensionMismatch(format!("networks of `{name}` disagree on their shapes")));
        }
        let grid = (nets.len() > 1).then_some(grid);
        Ok(Self { nets: Arc::new(nets), grid, name: name.into() })
    }

    fn net_at(&self, t: f64) -> &NetSpec {
        match &self.grid {
            Some(g) => &self.nets[g.floor_index(t).min(self.nets.len() - 1)],
            None => &self.nets[0],
        }
    }
}

impl SmoothMap for NetworkMap {
    fn input_dim(&self) -> usize {
        self.nets[0].input_dim
    }

    fn output_dim(&self) -> usize {
        self.nets[0].output_dim
    }

    fn max_order(&self) -> usize {
        1
    }

    fn is_time_dependent(&self) -> bool {
        self.grid.is_some()
    }

    fn label(&self) -> String {
        format!("network `{}`", self.name)
    }

    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let net = self.net_at(t);
        match order {
            0 => out.copy_from_slice(&eval_network(net, x).expect("dimension checked by caller")),
            1 => out.copy_from_slice(&eval_with_jacobian(net, x).expect("dimension checked by caller").1),
            _ => panic!("network maps provide derivatives up to order 1"),
        }
    }
}
