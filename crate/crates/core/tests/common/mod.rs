#![allow(dead_code)]

use dso_core::generate::{instance_rng, random_graph, GraphSpec};
use dso_core::reference::dijkstra_reduced;
use dso_core::Graph;
use proptest::prelude::*;

pub fn diamond() -> Graph {
    Graph::parse("n 4\n0 1 1\n0 2 1\n1 3 1\n2 3 3\n").unwrap()
}

/// Random generator graphs with `lo..=hi` nodes, described by their seed so
/// failures are reproducible.
pub fn graphs(lo: usize, hi: usize) -> impl Strategy<Value = Graph> {
    (any::<u64>(), lo..=hi).prop_map(|(seed, n)| {
        let spec = GraphSpec { min_n: n, max_n: n, ..GraphSpec::default() };
        random_graph(&mut instance_rng(seed, 0), &spec)
    })
}

/// Nodes other than `t` with a path to `t`.
pub fn sources(g: &Graph, t: usize) -> Vec<usize> {
    let tree = dijkstra_reduced(g, t, &[]).unwrap();
    (0..g.n()).filter(|&s| s != t && tree.distance_units[s].is_some()).collect()
}

/// Target reached by the most nodes.
pub fn busiest_target(g: &Graph) -> usize {
    (0..g.n()).max_by_key(|&t| (sources(g, t).len(), std::cmp::Reverse(t))).unwrap()
}

/// Picks `k` distinct nodes from `pool` using `bits` as a source of choices.
pub fn pick(pool: &[usize], k: usize, mut bits: u64) -> Vec<usize> {
    let mut left = pool.to_vec();
    let mut out = Vec::new();
    while out.len() < k && !left.is_empty() {
        let i = (bits % left.len() as u64) as usize;
        bits = bits.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15;
        out.push(left.swap_remove(i));
    }
    out.sort_unstable();
    out
}
