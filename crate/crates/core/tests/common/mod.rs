#![allow(dead_code)]

use netcournot_core::model::Branch;
use netcournot_core::polytope::{build_polytope, enumerate_vertices};
use netcournot_core::{MarketParams, NetworkModel};
use proptest::prelude::*;

/// A connected network on up to `max_nodes` nodes: a random spanning tree plus
/// optional extra lines, each either unconstrained or with a finite capacity.
pub fn network(max_nodes: usize) -> impl Strategy<Value = NetworkModel> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            let tree = prop::collection::vec((any::<prop::sample::Index>(), 0.5..2.0_f64), n - 1);
            let extra = prop::collection::vec((0..n, 0..n, 0.5..2.0_f64), 0..=n.saturating_sub(2));
            let caps = prop::collection::vec(prop::option::weighted(0.7, 0.2..5.0_f64), 2 * n);
            (Just(n), tree, extra, caps)
        })
        .prop_map(|(n, tree, extra, caps)| {
            let mut branches: Vec<Branch> = tree
                .iter()
                .enumerate()
                .map(|(i, (parent, s))| Branch {
                    from: i + 1,
                    to: parent.index(i + 1),
                    susceptance: *s,
                })
                .collect();
            branches.extend(extra.iter().filter(|(u, v, _)| u != v).map(|&(from, to, susceptance)| Branch {
                from,
                to,
                susceptance,
            }));
            let capacities = (0..branches.len())
                .map(|l| caps.get(l).copied().flatten().unwrap_or(f64::INFINITY))
                .collect();
            NetworkModel::from_branches(n, &branches, capacities, n - 1).unwrap()
        })
}

pub fn market(n: usize) -> impl Strategy<Value = MarketParams> {
    (
        prop::collection::vec(1.0..10.0_f64, n),
        prop::collection::vec(0.5..3.0_f64, n),
        prop::collection::vec(0.5..2.0_f64, n),
    )
        .prop_map(|(a, b, c)| MarketParams::new(a, b, c).unwrap())
}

/// A network, matching market parameters and a nonnegative production vector.
pub fn instance(max_nodes: usize) -> impl Strategy<Value = (NetworkModel, MarketParams, Vec<f64>)> {
    network(max_nodes).prop_flat_map(|net| {
        let n = net.nodes();
        (Just(net), market(n), prop::collection::vec(0.0..6.0_f64, n))
    })
}

/// Convex combination of the vertices of `S(q)` with the given raw weights.
pub fn feasible_point(vertices: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = vertices[0].len();
    let total: f64 = weights.iter().take(vertices.len()).sum::<f64>().max(1e-12);
    let mut r = vec![0.0; n];
    for (v, w) in vertices.iter().zip(weights) {
        for k in 0..n {
            r[k] += w / total * v[k];
        }
    }
    r
}

pub fn vertices_of(net: &NetworkModel, q: &[f64]) -> Vec<Vec<f64>> {
    enumerate_vertices(&build_polytope(net, q).unwrap(), 1e-9).unwrap()
}
