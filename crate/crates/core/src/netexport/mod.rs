//! Export of a frozen Monte Carlo Euler realization as an explicit
//! feed-forward network, with non-zero parameter counting.

mod build;
mod fixtures;
mod map;
mod net;

pub use build::{build_mces_network, count_bound, CoefficientNets, FrozenRealization, Layout, Stage, StageKind};
pub use fixtures::{net_fixture, ou_nets, random_net, random_nets, NET_FIXTURES, RANDOM_WIDTH};
pub use map::NetworkMap;
pub use net::{
    collapse_identity, eval_batch, eval_network, eval_with_jacobian, param_count, Activation, Layer, NetSpec, Rho,
    NET_FORMAT, NET_FORMAT_VERSION,
};

#[cfg(test)]
mod tests {
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    use super::*;
    use crate::euler::{NoiseSource, NoiseStream};
    use crate::mces::estimate_value;

    fn rel_diff(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn oracle_value(fr: &FrozenRealization, x: &[f64]) -> Vec<f64> {
        estimate_value(&fr.coefficient_set().unwrap(), x, &fr.estimator_config()).unwrap().value
    }

    #[test]
    fn frozen_increments_match_noise_stream() {
        let nets = net_fixture("tanh-random", 2, 4, 1).unwrap();
        let fr = FrozenRealization::new(99, 3, 4, 1.5, nets).unwrap();
        let grid = fr.grid().unwrap();
        let mut buf = vec![0.0; 4 * 2];
        for s in 0..3 {
            NoiseStream::new(99).fill_increments(s, &grid, 2, &mut buf);
            for n in 0..4 {
                assert_eq!(fr.increment(s as usize, n), &buf[n * 2..n * 2 + 2]);
            }
        }
    }

    #[test]
    fn single_chain_single_step_meets_count_bound() {
        let nets = net_fixture("tanh-random", 3, 1, 5).unwrap();
        let [pf, pg, pnu, ptau] = nets.counts();
        let fr = FrozenRealization::new(1, 1, 1, 1.0, nets).unwrap();
        let (net, _) = build_mces_network(&fr).unwrap();
        let bound = pf + pg + pnu + ptau + (3 + 1) * 2;
        assert_eq!(count_bound(&fr).unwrap(), bound);
        assert!(param_count(&net) <= bound, "{} > {bound}", param_count(&net));
    }

    #[test]
    fn constant_path_reduces_to_costs_at_start() {
        let d = 2;
        let steps = 4;
        let horizon = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = |outputs: usize| {
            NetSpec::new(Rho::Tanh, vec![Layer::dense(outputs, d, &vec![0.0; outputs * d], vec![0.0; outputs], vec![Activation::Identity; outputs]).unwrap()]).unwrap()
        };
        let running: Vec<NetSpec> = (0..steps).map(|_| random_net(Rho::Tanh, d, 1, 1, 1, 1.0, &mut rng).unwrap()).collect();
        let terminal = NetSpec::new(
            Rho::Tanh,
            vec![Layer::dense(1, d, &[0.7, -1.3], vec![0.2], vec![Activation::Identity]).unwrap()],
        )
        .unwrap();
        let nets = CoefficientNets { terminal: terminal.clone(), running: running.clone(), drift: vec![zero(d)], diffusion: vec![zero(d * d)] };
        let fr = FrozenRealization::new(11, 3, steps, horizon, nets).unwrap();
        let (net, _) = build_mces_network(&fr).unwrap();
        let x = [0.4, -1.1];
        let mean_g: f64 = running.iter().map(|g| eval_network(g, &x).unwrap()[0]).sum::<f64>() / steps as f64;
        let expect = eval_network(&terminal, &x).unwrap()[0] + horizon * mean_g;
        let got = eval_network(&net, &x).unwrap()[0];
        assert!(rel_diff(got, expect) < 1e-13, "{got} vs {expect}");
    }

    #[test]
    fn exported_network_matches_direct_simulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in NET_FIXTURES {
            for seed in 0..3u64 {
                let d = 2;
                let nets = net_fixture(name, d, 5, seed).unwrap();
                let fr = FrozenRealization::new(seed, 4, 5, 1.25, nets).unwrap();
                let (net, _) = build_mces_network(&fr).unwrap();
                for _ in 0..10 {
                    let x: Vec<f64> = (0..d).map(|_| 2.0 * random_net_coord(&mut rng)).collect();
                    let a = eval_network(&net, &x).unwrap()[0];
                    let b = oracle_value(&fr, &x)[0];
                    assert!(rel_diff(a, b) < 1e-12, "{name} seed {seed}: {a} vs {b}");
                }
            }
        }
    }

    fn random_net_coord(rng: &mut ChaCha8Rng) -> f64 {
        use rand_core::RngCore;
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn two_chains_three_steps_topology() {
        let d = 2;
        let nets = net_fixture("relu-random", d, 3, 4).unwrap();
        let depth = nets.terminal.depth();
        let fr = FrozenRealization::new(8, 2, 3, 1.0, nets).unwrap();
        let (net, layout) = build_mces_network(&fr).unwrap();
        let kinds: Vec<StageKind> = layout.stages.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![StageKind::Euler { step: 0 }, StageKind::Euler { step: 1 }, StageKind::Euler { step: 2 }, StageKind::Terminal]
        );
        assert!(layout.stages.iter().all(|s| s.layers.len() == depth));
        assert_eq!(net.depth(), 4 * depth);
        // Chains never exchange values; only the head reads both.
        for (l, layer) in net.layers.iter().enumerate() {
            for &(r, c, _) in &layer.weights {
                let to = layout.node_chain[l][r];
                let from = if l == 0 { None } else { layout.node_chain[l - 1][c] };
                if let (Some(a), Some(b)) = (to, from) {
                    assert_eq!(a, b, "layer {l} links chain {b} to chain {a}");
                }
            }
            if l + 1 < net.depth() {
                for chain in 0..2 {
                    assert!(layout.node_chain[l].contains(&Some(chain)));
                }
            }
        }
        let head = net.layers.last().unwrap();
        let fed_by: std::collections::BTreeSet<_> =
            head.weights.iter().filter_map(|&(_, c, _)| layout.node_chain[net.depth() - 2][c]).collect();
        assert_eq!(fed_by.into_iter().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(head.outputs, 1);
        assert!(param_count(&net) <= count_bound(&fr).unwrap());
    }

    #[test]
    fn mismatched_depths_rejected() {
        let mut nets = net_fixture("tanh-random", 2, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        nets.terminal = random_net(Rho::Tanh, 2, 1, 3, 3, 1.0, &mut rng).unwrap();
        assert!(FrozenRealization::new(0, 1, 2, 1.0, nets).is_err());
    }

    #[test]
    fn architecture_varying_in_time_rejected() {
        let mut nets = net_fixture("tanh-random", 2, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        nets.running[1] = random_net(Rho::Tanh, 2, 1, RANDOM_WIDTH + 1, 2, 1.0, &mut rng).unwrap();
        let err = FrozenRealization::new(0, 1, 2, 1.0, nets).unwrap_err();
        assert!(err.to_string().contains("architecture"), "{err}");
    }

    #[test]
    fn exported_network_round_trips_through_json() {
        let nets = net_fixture("ou-affine", 1, 3, 0).unwrap();
        let fr = FrozenRealization::new(7, 2, 3, 1.0, nets).unwrap();
        let (net, _) = build_mces_network(&fr).unwrap();
        assert_eq!(NetSpec::from_json(&net.to_json().unwrap()).unwrap(), net);
    }
}
